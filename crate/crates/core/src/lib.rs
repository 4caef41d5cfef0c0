pub mod fixtures;
pub mod forward;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod spectral;
pub mod spine;
pub mod stats;
pub mod verify;
