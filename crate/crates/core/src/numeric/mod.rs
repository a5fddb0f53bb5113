pub mod geometry;
pub mod integrate;
pub mod roots;

pub use integrate::{Quad, Tolerance};
