//! Day-ahead scheduling of a wind plant feeding a fleet of alkaline
//! electrolyzer modules.

pub mod curve;
pub mod market;
pub mod model;
pub mod scenario;
pub mod solver;
