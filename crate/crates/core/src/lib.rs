//! Layer-by-layer training of ReLU networks with linear and mixed integer
//! programs.
//!
//! [`simplex`] and [`branch_bound`] are the embedded solvers, [`model`]
//! builds named problems and writes LP files, [`encodings`] turns neurons
//! into big-M programs and [`trainer`] runs the fitting loop over batches.

pub mod branch_bound;
pub mod cli;
pub mod dataset;
pub mod encodings;
pub mod model;
pub mod network;
pub mod simplex;
pub mod trainer;
