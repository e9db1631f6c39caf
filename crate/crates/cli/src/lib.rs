pub mod bench;
pub mod error;
pub mod eval;
pub mod model;
pub mod selftest;
pub mod task;
pub mod train;
