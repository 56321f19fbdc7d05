pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hiclust;
pub mod labels;
pub mod matrix;
pub mod taxonomy;
pub mod train;
pub mod verbalize;
mod union_find;

pub use error::{Error, Result};
