pub mod geom;
pub mod seed;
pub mod sim;
pub mod worldgen;
pub mod env;
pub mod nn;
pub mod agents;
pub mod curriculum;
pub mod eval;
pub mod gateway;
