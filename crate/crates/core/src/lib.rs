pub mod agent;
pub mod behavior;
pub mod geometry;
pub mod protocol;
pub mod world;
pub mod session;
