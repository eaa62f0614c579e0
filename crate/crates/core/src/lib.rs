pub mod error;
pub mod estimators;
pub mod graphs;
pub mod hashing;
pub mod io;
pub mod parallel;
pub mod sampler;
pub mod sets;
pub mod sketch;
