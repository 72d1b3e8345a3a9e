//! Optimistic composite mirror descent for online convex optimization with
//! gradient, function and dynamics predictions.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod cost;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod predictors;
pub mod prox;
pub mod regret;
pub mod stepsize;
pub mod verify;
pub mod vecops;

pub use cost::{CompositeCost, SmoothFunction, SmoothPart};
pub use error::{Error, Result};
pub use geometry::{FeasibleSet, MirrorMap, MirrorSetup};
pub use prox::{composite_prox, implicit_prox, ConvexFunction, NonsmoothPart, QuadraticCost};
pub use stepsize::{Schedule, StepSizeState};
pub use algorithms::{AlgorithmState, DynamicsModel, GradPred, PredictionBundle, StepRecord};
