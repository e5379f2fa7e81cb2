//! The three-configuration maze scenario: solo explorers, cooperating
//! explorers, and cooperating explorers followed by an archive reader.

use std::collections::VecDeque;

use msn_core::maze::{
    AgentState, Archive, ArchiveMode, Coord, MazeOptions, MazeReport, MazeRun, MazeWorld,
};
use msn_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::MazeScenarioConfig;

pub const BUNDLED_MAZE: &str = include_str!("../fixtures/scenario.maze");

pub fn bundled_maze() -> MazeWorld {
    MazeWorld::parse(BUNDLED_MAZE).expect("bundled maze is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MazeSummary {
    pub width: usize,
    pub height: usize,
    pub entry: Coord,
    pub exit: Coord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub maze: MazeSummary,
    pub seed: u64,
    pub second_start: Coord,
    pub shortest_path: u64,
    pub reader_entry_step: u64,
    pub solo: MazeReport,
    pub cooperative: MazeReport,
    pub archive: MazeReport,
}

/// Length of the shortest road path from entry to exit.
pub fn shortest_path(world: &MazeWorld) -> Option<u64> {
    let (w, h) = (world.width(), world.height());
    let mut dist = vec![None; w * h];
    let start = world.entry();
    dist[start.y * w + start.x] = Some(0u64);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.y * w + c.x].expect("queued cells have a distance");
        if c == world.exit() {
            return Some(d);
        }
        for dir in msn_core::maze::Direction::ALL {
            if let Some(n) = world.step_from(c, dir).filter(|n| world.is_road(*n)) {
                if dist[n.y * w + n.x].is_none() {
                    dist[n.y * w + n.x] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

fn drive(run: &mut MazeRun<'_>) -> Result<()> {
    while !run.is_finished() {
        run.step()?;
    }
    Ok(())
}

/// Agent 1 starts at the entry, agent 2 at a seeded random road cell. In the
/// third configuration reader agent 3 enters at the entry one step after the
/// cooperative pair has finished.
pub fn run_scenario(world: &MazeWorld, config: &MazeScenarioConfig) -> Result<ScenarioReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let second_start = msn_core::maze::random_start(world, &mut rng);
    let agent = |id, start| -> Result<AgentState> {
        Ok(AgentState::new(id, world, start)?
            .with_radio_range(config.radio_range)
            .with_exploration(config.exploration))
    };
    let explorers = || -> Result<Vec<AgentState>> {
        Ok(vec![agent(1, world.entry())?, agent(2, second_start)?])
    };
    let coop = MazeOptions {
        sharing: true,
        share_mode: config.share_mode,
        exchange_cap: config.exchange_cap,
        max_steps: config.max_steps,
    };
    let solo = MazeOptions {
        sharing: false,
        ..coop
    };

    let mut run = MazeRun::new(
        world,
        explorers()?,
        Archive::new(ArchiveMode::NonArchive),
        solo,
    )?;
    drive(&mut run)?;
    let solo_report = run.into_report();

    let mut run = MazeRun::new(
        world,
        explorers()?,
        Archive::new(ArchiveMode::NonArchive),
        coop,
    )?;
    drive(&mut run)?;
    let reader_entry_step = run.current_step();
    let coop_report = run.into_report();

    let mut agents = explorers()?;
    agents.push(agent(3, world.entry())?.with_entry_step(reader_entry_step));
    let archived = MazeOptions {
        max_steps: reader_entry_step + config.max_steps,
        ..coop
    };
    let mut run = MazeRun::new(world, agents, Archive::new(ArchiveMode::Archive), archived)?;
    drive(&mut run)?;
    let archive_report = run.into_report();

    Ok(ScenarioReport {
        maze: MazeSummary {
            width: world.width(),
            height: world.height(),
            entry: world.entry(),
            exit: world.exit(),
        },
        seed: config.seed,
        second_start,
        shortest_path: shortest_path(world).expect("parsed mazes are solvable"),
        reader_entry_step,
        solo: solo_report,
        cooperative: coop_report,
        archive: archive_report,
    })
}
