//! File formats: the binary model/checkpoint container, ASCII PLY meshes,
//! depth-map grids and the CSV tables consumed by the command-line tools.

pub mod container;
pub mod csvio;
pub mod depthmap;
pub mod ply;

pub use container::{load_model, load_regressor, save_model, save_regressor};
pub use depthmap::{load_depth_map, save_depth_map};
pub use ply::{load_ply, save_ply};
