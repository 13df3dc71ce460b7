pub mod game;
pub mod gq;
pub mod harness;
mod kernel;
pub mod model;
pub mod semantics;
pub mod syntax;
