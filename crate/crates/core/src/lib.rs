pub mod detection;
pub mod geometry;
pub mod imaging;
pub mod estimation;
pub mod guidance;
pub mod simworld;
pub mod harness;
