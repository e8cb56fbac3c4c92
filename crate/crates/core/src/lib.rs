//! Prioritized-sweeping neural Dyna-Q with a growing multiple-expert world
//! model, on a discretized double T-maze.

pub mod config;
pub mod dynaq;
pub mod experiment;
pub mod galmo;
pub mod maze;
pub mod net;
pub mod queue;
pub mod replay;
pub mod rng;
pub mod state;
pub mod world_model;
