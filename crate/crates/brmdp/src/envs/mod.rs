//! The two benchmark problems as concrete environments: finite-horizon
//! inventory control with unknown Poisson demand, and a 3x9 grid maze whose
//! "shaky" cells cost an uncertain amount of time to cross.

mod inventory;
mod maze;

pub use inventory::{build_inventory, DemandSpec, InventoryConfig};
pub use maze::{
    build_maze, MazeConfig, MazeVariant, DEFAULT_MASK, MAZE_COLS, MAZE_EXIT, MAZE_ROWS, MAZE_START,
};
