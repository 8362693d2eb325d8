//! Domain types shared by every stage, plus the text formats used to move
//! them in and out of the pipeline.

mod geometry;
mod io;
mod types;

pub use geometry::{is_simple_polygon, point_in_polygon, polygon_contains};
pub use io::*;
pub use types::*;
