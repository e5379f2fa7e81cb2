//! Cooperative maze exploration.
//!
//! Agents sense the four cells around them, discover peers that share the
//! `maze` interest within radio range, merge partial maps with them, and walk
//! towards the exit along known roads. Until a route is known they explore
//! depth-first, skipping branches whose known part is already closed off. An agent that escapes may deposit its map in an
//! archive that later arrivals read on entry.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::social::MachineId;

pub const MAZE_INTEREST: &str = "maze";
pub const DEFAULT_RADIO_RANGE: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Coord) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    /// Tie-break order.
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terrain {
    Road,
    Wall,
}

/// The true maze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeWorld {
    width: usize,
    height: usize,
    cells: Vec<Terrain>,
    entry: Coord,
    exit: Coord,
}

impl MazeWorld {
    pub fn new(
        width: usize,
        height: usize,
        cells: Vec<Terrain>,
        entry: Coord,
        exit: Coord,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::MazeFormat("width and height must be > 0".into()));
        }
        if cells.len() != width * height {
            return Err(Error::MazeFormat(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        let world = Self {
            width,
            height,
            cells,
            entry,
            exit,
        };
        for (name, c) in [("entry", entry), ("exit", exit)] {
            if world.terrain(c) != Some(Terrain::Road) {
                return Err(Error::MazeFormat(format!("{name} {c} is not a road cell")));
            }
        }
        if entry == exit {
            return Err(Error::MazeFormat("entry and exit coincide".into()));
        }
        if !world.connected(entry, exit) {
            return Err(Error::Unsolvable);
        }
        Ok(world)
    }

    /// Parses the text format: a `WIDTH HEIGHT` line followed by `HEIGHT`
    /// rows of `#` (wall), `.` (road), `S` (entry) and `E` (exit).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::MazeFormat("empty maze file".into()))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let [w, h] = dims.as_slice() else {
            return Err(Error::MazeFormat(format!(
                "line 1: expected `WIDTH HEIGHT`, got {header:?}"
            )));
        };
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::MazeFormat(format!("line 1: invalid dimension {s:?}")))
        };
        let (width, height) = (parse_dim(w)?, parse_dim(h)?);

        let mut cells = Vec::with_capacity(width * height);
        let (mut entry, mut exit) = (Vec::new(), Vec::new());
        let mut rows = 0;
        for (lineno, line) in lines {
            if rows == height {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::MazeFormat(format!(
                    "line {}: more than {height} rows",
                    lineno + 1
                )));
            }
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != width {
                return Err(Error::MazeFormat(format!(
                    "line {}: expected {width} cells, got {}",
                    lineno + 1,
                    chars.len()
                )));
            }
            for (x, ch) in chars.into_iter().enumerate() {
                let here = Coord::new(x, rows);
                cells.push(match ch {
                    '#' => Terrain::Wall,
                    '.' => Terrain::Road,
                    'S' => {
                        entry.push(here);
                        Terrain::Road
                    }
                    'E' => {
                        exit.push(here);
                        Terrain::Road
                    }
                    other => {
                        return Err(Error::MazeFormat(format!(
                            "line {}: unexpected character {other:?}",
                            lineno + 1
                        )))
                    }
                });
            }
            rows += 1;
        }
        if rows != height {
            return Err(Error::MazeFormat(format!(
                "expected {height} rows, got {rows}"
            )));
        }
        let (entry, exit) = match (entry.as_slice(), exit.as_slice()) {
            ([s], [e]) => (*s, *e),
            _ => {
                return Err(Error::MazeFormat(format!(
                    "expected exactly one S and one E, found {} and {}",
                    entry.len(),
                    exit.len()
                )))
            }
        };
        Self::new(width, height, cells, entry, exit)
    }

    /// A perfect maze (exactly one path between any two roads) carved by a
    /// randomized depth-first search. Dimensions are rounded down to odd
    /// values of at least 5; entry is the top-left room, exit the
    /// bottom-right one.
    pub fn generate(width: usize, height: usize, seed: u64) -> Self {
        let w = odd_at_least_5(width);
        let h = odd_at_least_5(height);
        let mut cells = vec![Terrain::Wall; w * h];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rooms_x, rooms_y) = ((w - 1) / 2, (h - 1) / 2);
        let room = |rx: usize, ry: usize| Coord::new(2 * rx + 1, 2 * ry + 1);

        let mut visited = vec![false; rooms_x * rooms_y];
        let mut stack = vec![(0usize, 0usize)];
        visited[0] = true;
        cells[room(0, 0).y * w + room(0, 0).x] = Terrain::Road;
        while let Some(&(rx, ry)) = stack.last() {
            let mut options: Vec<(usize, usize)> = Vec::with_capacity(4);
            if ry > 0 {
                options.push((rx, ry - 1));
            }
            if rx + 1 < rooms_x {
                options.push((rx + 1, ry));
            }
            if ry + 1 < rooms_y {
                options.push((rx, ry + 1));
            }
            if rx > 0 {
                options.push((rx - 1, ry));
            }
            options.retain(|&(nx, ny)| !visited[ny * rooms_x + nx]);
            let Some(&(nx, ny)) = options.choose(&mut rng) else {
                stack.pop();
                continue;
            };
            visited[ny * rooms_x + nx] = true;
            let (a, b) = (room(rx, ry), room(nx, ny));
            cells[b.y * w + b.x] = Terrain::Road;
            cells[(a.y + b.y) / 2 * w + (a.x + b.x) / 2] = Terrain::Road;
            stack.push((nx, ny));
        }
        let entry = room(0, 0);
        let exit = room(rooms_x - 1, rooms_y - 1);
        Self::new(w, h, cells, entry, exit).expect("carved maze is connected")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn entry(&self) -> Coord {
        self.entry
    }

    pub fn exit(&self) -> Coord {
        self.exit
    }

    pub fn terrain(&self, c: Coord) -> Option<Terrain> {
        (c.x < self.width && c.y < self.height).then(|| self.cells[c.y * self.width + c.x])
    }

    pub fn is_road(&self, c: Coord) -> bool {
        self.terrain(c) == Some(Terrain::Road)
    }

    pub fn roads(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| Coord::new(x, y)))
            .filter(|c| self.is_road(*c))
    }

    /// Neighbor of `c` in direction `d`, or `None` off the grid.
    pub fn step_from(&self, c: Coord, d: Direction) -> Option<Coord> {
        neighbor(self.width, self.height, c, d)
    }

    fn connected(&self, from: Coord, to: Coord) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([from]);
        seen[from.y * self.width + from.x] = true;
        while let Some(c) = queue.pop_front() {
            if c == to {
                return true;
            }
            for d in Direction::ALL {
                if let Some(n) = self.step_from(c, d) {
                    let idx = n.y * self.width + n.x;
                    if !seen[idx] && self.cells[idx] == Terrain::Road {
                        seen[idx] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        false
    }
}

impl fmt::Display for MazeWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.width, self.height)?;
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Coord::new(x, y);
                let ch = if c == self.entry {
                    'S'
                } else if c == self.exit {
                    'E'
                } else if self.is_road(c) {
                    '.'
                } else {
                    '#'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn odd_at_least_5(n: usize) -> usize {
    let n = n.max(5);
    if n.is_multiple_of(2) {
        n - 1
    } else {
        n
    }
}

fn neighbor(width: usize, height: usize, c: Coord, d: Direction) -> Option<Coord> {
    let (dx, dy) = d.delta();
    let x = c.x.checked_add_signed(dx)?;
    let y = c.y.checked_add_signed(dy)?;
    (x < width && y < height).then_some(Coord::new(x, y))
}

/// An agent's partial knowledge of the maze. Cells outside the grid read as
/// walls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownMap {
    width: usize,
    height: usize,
    cells: Vec<Option<Terrain>>,
}

impl KnownMap {
    pub fn unknown(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![None; width * height],
        }
    }

    pub fn for_world(world: &MazeWorld) -> Self {
        Self::unknown(world.width, world.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn in_bounds(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// `None` means unknown.
    pub fn get(&self, c: Coord) -> Option<Terrain> {
        if self.in_bounds(c) {
            self.cells[c.y * self.width + c.x]
        } else {
            Some(Terrain::Wall)
        }
    }

    /// Knowledge of the cell next to `c` in direction `d`.
    pub fn look(&self, c: Coord, d: Direction) -> Option<Terrain> {
        match neighbor(self.width, self.height, c, d) {
            Some(n) => self.get(n),
            None => Some(Terrain::Wall),
        }
    }

    /// Records `t` at `c`; returns whether the cell was previously unknown.
    /// Out-of-grid coordinates are ignored.
    pub fn learn(&mut self, c: Coord, t: Terrain) -> Result<bool> {
        if !self.in_bounds(c) {
            return Ok(false);
        }
        let slot = &mut self.cells[c.y * self.width + c.x];
        match *slot {
            None => {
                *slot = Some(t);
                Ok(true)
            }
            Some(old) if old == t => Ok(false),
            Some(_) => Err(Error::MapConflict { x: c.x, y: c.y }),
        }
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn known_cells(&self) -> impl Iterator<Item = (Coord, Terrain)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| (Coord::new(i % self.width, i / self.width), t)))
    }

    /// Whether every cell known here is also known, identically, in `other`.
    pub fn is_subset_of(&self, other: &KnownMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.is_none() || a == b)
    }

    /// Whether every known cell matches the true world.
    pub fn is_truthful(&self, world: &MazeWorld) -> bool {
        self.width == world.width
            && self.height == world.height
            && self.known_cells().all(|(c, t)| world.terrain(c) == Some(t))
    }

    /// Like [`merge_maps`], but copies at most `cap` cells from `other`
    /// (row-major order). Returns the number of cells learned.
    pub fn absorb(&mut self, other: &KnownMap, cap: Option<usize>) -> Result<usize> {
        check_dims(self, other)?;
        // conflicts are checked over the whole map before anything changes
        for (i, (a, b)) in self.cells.iter().zip(&other.cells).enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    return Err(Error::MapConflict {
                        x: i % self.width,
                        y: i / self.width,
                    });
                }
            }
        }
        let limit = cap.unwrap_or(usize::MAX);
        let mut learned = 0;
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            if learned == limit {
                break;
            }
            if a.is_none() && b.is_some() {
                *a = *b;
                learned += 1;
            }
        }
        Ok(learned)
    }
}

fn check_dims(a: &KnownMap, b: &KnownMap) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::MapDimensions(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Cell-wise union of two maps. Fails if one says road where the other
/// says wall.
pub fn merge_maps(a: &KnownMap, b: &KnownMap) -> Result<KnownMap> {
    let mut out = a.clone();
    out.absorb(b, None)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub id: MachineId,
    pub position: Coord,
    /// Depth-first route from the start cell to `position`.
    pub route: Vec<Coord>,
    pub exploration: Exploration,
    pub known: KnownMap,
    pub interests: BTreeSet<String>,
    /// Chebyshev distance in cells.
    pub radio_range: u32,
    pub steps_taken: u64,
    pub escaped: bool,
    /// First global step at which the agent is in the maze.
    pub entry_step: u64,
}

impl AgentState {
    /// An agent at `start` with the `maze` interest and default radio range.
    pub fn new(id: MachineId, world: &MazeWorld, start: Coord) -> Result<Self> {
        if !world.is_road(start) {
            return Err(Error::InvalidMazeRun(format!(
                "agent {id} start {start} is not a road"
            )));
        }
        let mut known = KnownMap::for_world(world);
        known.learn(start, Terrain::Road)?;
        Ok(Self {
            id,
            position: start,
            route: vec![start],
            exploration: Exploration::default(),
            known,
            interests: BTreeSet::from([MAZE_INTEREST.to_string()]),
            radio_range: DEFAULT_RADIO_RANGE,
            steps_taken: 0,
            escaped: false,
            entry_step: 0,
        })
    }

    pub fn with_radio_range(mut self, range: u32) -> Self {
        self.radio_range = range;
        self
    }

    pub fn with_exploration(mut self, exploration: Exploration) -> Self {
        self.exploration = exploration;
        self
    }

    pub fn with_entry_step(mut self, step: u64) -> Self {
        self.entry_step = step;
        self
    }

    pub fn without_interest(mut self, interest: &str) -> Self {
        self.interests.remove(interest);
        self
    }

    pub fn wants_maze(&self) -> bool {
        self.interests.contains(MAZE_INTEREST)
    }

    /// Moves to the adjacent cell `to` and keeps `route` a simple path.
    fn advance(&mut self, to: Coord) {
        if let Some(k) = self.route.iter().position(|&c| c == to) {
            self.route.truncate(k + 1);
        } else {
            self.route.push(to);
        }
        self.position = to;
        self.steps_taken += 1;
    }
}

/// How an agent explores while it knows no route to the exit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exploration {
    /// Enter the first branch (N, E, S, W) off the current route that still
    /// has unknown cells; back up one cell when none is left.
    #[default]
    DepthFirst,
    /// Head for the closest unknown cell next to a known road.
    NearestFrontier,
}

/// Reveals the four cells around the agent. Returns the in-grid cells that
/// were newly learned; off-grid sides read as walls through [`KnownMap::get`].
pub fn sense(world: &MazeWorld, agent: &mut AgentState) -> Result<Vec<(Coord, Terrain)>> {
    let mut delta = Vec::new();
    if agent.known.learn(agent.position, Terrain::Road)? {
        delta.push((agent.position, Terrain::Road));
    }
    for d in Direction::ALL {
        if let Some(c) = world.step_from(agent.position, d) {
            let t = world.terrain(c).expect("neighbor is in bounds");
            if agent.known.learn(c, t)? {
                delta.push((c, t));
            }
        }
    }
    Ok(delta)
}

/// Unordered id pairs `(lo, hi)` of agents within each other's radio range
/// that both carry the `maze` interest.
pub fn broadcast_discover(agents: &[&AgentState]) -> BTreeSet<(MachineId, MachineId)> {
    let mut pairs = BTreeSet::new();
    for (k, a) in agents.iter().enumerate() {
        for b in &agents[k + 1..] {
            if a.id == b.id || !a.wants_maze() || !b.wants_maze() {
                continue;
            }
            let range = a.radio_range.min(b.radio_range) as usize;
            if a.position.chebyshev(b.position) <= range {
                pairs.insert((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    pairs
}

/// Next move: the first step of a shortest known-road route to the exit if
/// the agent knows one, otherwise an exploration move chosen by
/// `agent.exploration`. Every choice breaks ties N, E, S, W.
///
/// Depth-first exploration only enters branches that still reach a frontier
/// (an unknown cell next to a known road), so extra knowledge from peers can
/// only prune the walk an agent would have taken alone.
pub fn plan_step(agent: &AgentState, exit_hint: Option<Coord>) -> Result<Direction> {
    if agent.escaped {
        return Err(Error::InvalidMazeRun(format!(
            "agent {} already escaped",
            agent.id
        )));
    }
    let map = &agent.known;

    if let Some(exit) = exit_hint {
        if map.get(exit) == Some(Terrain::Road) && exit != agent.position {
            if let Some(d) = bfs_first_move(map, agent.position, |c, _| c == exit) {
                return Ok(d);
            }
        }
    }

    match agent.exploration {
        Exploration::NearestFrontier => nearest_frontier(agent),
        Exploration::DepthFirst => depth_first(agent),
    }
}

fn nearest_frontier(agent: &AgentState) -> Result<Direction> {
    let map = &agent.known;
    let idx = |c: Coord| c.y * map.width + c.x;
    let mut first: Vec<Option<Direction>> = vec![None; map.width * map.height];
    let mut seen = vec![false; map.width * map.height];
    let mut queue = VecDeque::from([agent.position]);
    seen[idx(agent.position)] = true;
    while let Some(c) = queue.pop_front() {
        for d in Direction::ALL {
            let Some(n) = neighbor(map.width, map.height, c, d) else {
                continue;
            };
            if seen[idx(n)] {
                continue;
            }
            let via = first[idx(c)].unwrap_or(d);
            match map.get(n) {
                None => return Ok(via),
                Some(Terrain::Road) => {
                    seen[idx(n)] = true;
                    first[idx(n)] = Some(via);
                    queue.push_back(n);
                }
                Some(Terrain::Wall) => {}
            }
        }
    }
    Err(Error::Trapped(agent.id))
}

fn depth_first(agent: &AgentState) -> Result<Direction> {
    let map = &agent.known;
    let here = agent.position;
    let route: &[Coord] = match agent.route.last() {
        Some(&last) if last == here => &agent.route,
        _ => std::slice::from_ref(&agent.position),
    };
    let mut blocked = vec![false; map.width * map.height];
    for c in route {
        blocked[c.y * map.width + c.x] = true;
    }
    for d in Direction::ALL {
        let Some(n) = neighbor(map.width, map.height, here, d) else {
            continue;
        };
        match map.get(n) {
            None => return Ok(d),
            Some(Terrain::Road)
                if !blocked[n.y * map.width + n.x] && has_frontier(map, n, &blocked) =>
            {
                return Ok(d);
            }
            _ => {}
        }
    }
    if let [.., back, _] = route {
        return Ok(Direction::ALL
            .into_iter()
            .find(|&d| neighbor(map.width, map.height, here, d) == Some(*back))
            .expect("consecutive route cells are adjacent"));
    }
    Err(Error::Trapped(agent.id))
}

/// Whether the known-road region reachable from `from` without crossing a
/// blocked cell touches an unknown cell.
fn has_frontier(map: &KnownMap, from: Coord, blocked: &[bool]) -> bool {
    let idx = |c: Coord| c.y * map.width + c.x;
    let mut seen = blocked.to_vec();
    seen[idx(from)] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        for d in Direction::ALL {
            let Some(n) = neighbor(map.width, map.height, c, d) else {
                continue;
            };
            match map.get(n) {
                None => return true,
                Some(Terrain::Road) if !seen[idx(n)] => {
                    seen[idx(n)] = true;
                    queue.push_back(n);
                }
                _ => {}
            }
        }
    }
    false
}

fn bfs_first_move(
    map: &KnownMap,
    start: Coord,
    is_goal: impl Fn(Coord, Terrain) -> bool,
) -> Option<Direction> {
    let idx = |c: Coord| c.y * map.width + c.x;
    let mut first: Vec<Option<Direction>> = vec![None; map.width * map.height];
    let mut seen = vec![false; map.width * map.height];
    let mut queue = VecDeque::from([start]);
    seen[idx(start)] = true;
    while let Some(c) = queue.pop_front() {
        for d in Direction::ALL {
            let Some(n) = neighbor(map.width, map.height, c, d) else {
                continue;
            };
            if seen[idx(n)] || map.get(n) != Some(Terrain::Road) {
                continue;
            }
            let via = first[idx(c)].unwrap_or(d);
            if is_goal(n, Terrain::Road) {
                return Some(via);
            }
            seen[idx(n)] = true;
            first[idx(n)] = Some(via);
            queue.push_back(n);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchiveMode {
    Archive,
    NonArchive,
}

/// Shared storage that escaped agents write to and late arrivals read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Archive {
    stored: Option<KnownMap>,
    mode: ArchiveMode,
}

impl Archive {
    pub fn new(mode: ArchiveMode) -> Self {
        Self { stored: None, mode }
    }

    pub fn mode(&self) -> ArchiveMode {
        self.mode
    }

    /// Merges `map` into the stored map; dropped in non-archive mode.
    pub fn put(&mut self, map: &KnownMap) -> Result<()> {
        if self.mode == ArchiveMode::NonArchive {
            return Ok(());
        }
        self.stored = Some(match &self.stored {
            Some(old) => merge_maps(old, map)?,
            None => map.clone(),
        });
        Ok(())
    }

    pub fn get(&self) -> Option<&KnownMap> {
        self.stored.as_ref()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShareMode {
    /// Re-merge on every step the pair is in range.
    #[default]
    Continuous,
    /// Merge only the first time a pair discovers each other.
    OnFirstContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeOptions {
    pub sharing: bool,
    pub share_mode: ShareMode,
    /// Cells transferred per direction per contact; `None` is unlimited.
    pub exchange_cap: Option<usize>,
    pub max_steps: u64,
}

impl Default for MazeOptions {
    fn default() -> Self {
        Self {
            sharing: true,
            share_mode: ShareMode::Continuous,
            exchange_cap: None,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub id: MachineId,
    pub entry_step: u64,
    pub steps_taken: u64,
    pub escaped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeReport {
    pub agents: Vec<AgentOutcome>,
    pub escape_order: Vec<MachineId>,
    #[serde(skip)]
    pub final_maps: Vec<KnownMap>,
}

impl MazeReport {
    pub fn outcome(&self, id: MachineId) -> Option<&AgentOutcome> {
        self.agents.iter().find(|a| a.id == id)
    }
}

/// Step-by-step maze run; [`run_maze`] drives it to completion.
#[derive(Debug, Clone)]
pub struct MazeRun<'w> {
    world: &'w MazeWorld,
    agents: Vec<AgentState>,
    archive: Archive,
    options: MazeOptions,
    step: u64,
    entered: Vec<bool>,
    escape_order: Vec<MachineId>,
    met: BTreeSet<(MachineId, MachineId)>,
}

impl<'w> MazeRun<'w> {
    pub fn new(
        world: &'w MazeWorld,
        mut agents: Vec<AgentState>,
        archive: Archive,
        options: MazeOptions,
    ) -> Result<Self> {
        if options.max_steps == 0 {
            return Err(Error::InvalidMazeRun("max_steps must be >= 1".into()));
        }
        agents.sort_by_key(|a| a.id);
        if agents.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidMazeRun("duplicate agent id".into()));
        }
        for a in &agents {
            if !world.is_road(a.position)
                || a.known.width() != world.width()
                || a.known.height() != world.height()
            {
                return Err(Error::InvalidMazeRun(format!(
                    "agent {} does not fit the maze",
                    a.id
                )));
            }
        }
        let entered = vec![false; agents.len()];
        Ok(Self {
            world,
            agents,
            archive,
            options,
            step: 0,
            entered,
            escape_order: Vec::new(),
            met: BTreeSet::new(),
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.agents.iter().all(|a| a.escaped) || self.step >= self.options.max_steps
    }

    fn active(&self, k: usize) -> bool {
        self.entered[k] && !self.agents[k].escaped
    }

    /// Advances every agent by one step, in id order.
    pub fn step(&mut self) -> Result<()> {
        let now = self.step;
        for k in 0..self.agents.len() {
            if self.agents[k].escaped || self.agents[k].entry_step > now {
                continue;
            }
            if !self.entered[k] {
                self.entered[k] = true;
                if let Some(stored) = self.archive.get() {
                    self.agents[k].known.absorb(stored, None)?;
                }
            }

            sense(self.world, &mut self.agents[k])?;
            if self.options.sharing {
                self.share(k)?;
            }

            let agent = &self.agents[k];
            let exit = self.world.exit();
            let hint = (agent.known.get(exit) == Some(Terrain::Road)).then_some(exit);
            let dir = plan_step(agent, hint)?;
            let target = self
                .world
                .step_from(agent.position, dir)
                .filter(|c| self.world.is_road(*c))
                .ok_or_else(|| {
                    Error::InvalidMazeRun(format!("agent {} planned a move into a wall", agent.id))
                })?;

            let agent = &mut self.agents[k];
            agent.advance(target);
            agent.known.learn(target, Terrain::Road)?;
            if target == exit {
                agent.escaped = true;
                self.escape_order.push(agent.id);
                self.archive.put(&agent.known)?;
            }
        }
        self.step += 1;
        Ok(())
    }

    fn share(&mut self, k: usize) -> Result<()> {
        let present: Vec<&AgentState> = (0..self.agents.len())
            .filter(|&j| self.active(j))
            .map(|j| &self.agents[j])
            .collect();
        let me = self.agents[k].id;
        let partners: Vec<MachineId> = broadcast_discover(&present)
            .into_iter()
            .filter_map(|(a, b)| match (a == me, b == me) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect();
        let cap = self.options.exchange_cap;
        for other_id in partners {
            let pair = (me.min(other_id), me.max(other_id));
            if self.options.share_mode == ShareMode::OnFirstContact && !self.met.insert(pair) {
                continue;
            }
            let j = self
                .agents
                .binary_search_by_key(&other_id, |a| a.id)
                .expect("partner is a known agent");
            let mine = self.agents[k].known.clone();
            let theirs = self.agents[j].known.clone();
            self.agents[k].known.absorb(&theirs, cap)?;
            self.agents[j].known.absorb(&mine, cap)?;
        }
        Ok(())
    }

    pub fn into_report(self) -> MazeReport {
        MazeReport {
            agents: self
                .agents
                .iter()
                .map(|a| AgentOutcome {
                    id: a.id,
                    entry_step: a.entry_step,
                    steps_taken: a.steps_taken,
                    escaped: a.escaped,
                })
                .collect(),
            escape_order: self.escape_order,
            final_maps: self.agents.into_iter().map(|a| a.known).collect(),
        }
    }
}

pub fn run_maze(
    world: &MazeWorld,
    agents: Vec<AgentState>,
    archive: Archive,
    options: MazeOptions,
) -> Result<(MazeReport, Archive)> {
    let mut run = MazeRun::new(world, agents, archive, options)?;
    while !run.is_finished() {
        run.step()?;
    }
    let archive = run.archive.clone();
    Ok((run.into_report(), archive))
}

/// A uniformly chosen road cell other than the exit.
pub fn random_start(world: &MazeWorld, rng: &mut impl Rng) -> Coord {
    let roads: Vec<Coord> = world.roads().filter(|c| *c != world.exit()).collect();
    roads[rng.gen_range(0..roads.len())]
}
