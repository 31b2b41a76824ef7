//! Exact dynamic-programming machinery and the verification checks built
//! on it.

pub mod checks;
mod dp;
pub mod fixtures;
pub mod randmdp;

pub use dp::*;
