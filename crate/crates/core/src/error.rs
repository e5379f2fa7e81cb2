use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid decay parameters: {0}")]
    InvalidDecay(String),

    #[error("invalid spatial configuration: {0}")]
    InvalidDistance(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("unknown machine id {0}")]
    UnknownMachine(u32),

    #[error("invalid post: {0}")]
    InvalidPost(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("sweep results are not sorted by threshold")]
    UnsortedSweep,

    #[error("failed to write {path}: {cause}")]
    Io { path: String, cause: String },

    #[error("maze format error: {0}")]
    MazeFormat(String),

    #[error("maze is unsolvable: no road path from entry to exit")]
    Unsolvable,

    #[error("map conflict at ({x}, {y}): one map says road, the other wall")]
    MapConflict { x: usize, y: usize },

    #[error("map dimensions differ: {0}x{1} vs {2}x{3}")]
    MapDimensions(usize, usize, usize, usize),

    #[error("agent {0} is trapped: no exit path and no frontier left")]
    Trapped(u32),

    #[error("invalid maze run: {0}")]
    InvalidMazeRun(String),
}

pub type Result<T> = std::result::Result<T, Error>;
