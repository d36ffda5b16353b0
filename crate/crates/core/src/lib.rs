pub mod agents;
pub mod approx;
pub mod baselines;
pub mod env;
pub mod harness;
pub mod hierarchy;
pub mod selftest;
pub mod types;
