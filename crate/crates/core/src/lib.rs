pub mod wordnet;
pub mod textproc;
pub mod negatives;
pub mod datapipe;
pub mod patcher;
pub mod trainer;
pub mod evalharness;
pub mod demo;
pub mod cli;
