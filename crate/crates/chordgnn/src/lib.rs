//! Roman Numeral analysis of symbolic scores: an exact-time score model,
//! a typed score graph, a reverse-mode tensor core, a heterogeneous
//! graph-convolutional encoder with onset contraction pooling, the 11-task
//! label machinery, training/evaluation, and transposition augmentation.

pub mod augment;
pub mod autodiff;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod model;
pub mod score;
pub mod synth;
pub mod tasks;
