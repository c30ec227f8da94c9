//! Communication-efficient FDR control by aggregating knockoff statistics
//! from many decentralized linear models.
//!
//! Each node builds knockoffs for its own design, computes Lasso entry-time
//! statistics and sends one short message ([`wire`]). The [`coordinator`]
//! combines the messages into binomial p-values and a ranking, and selects
//! features with confidence weights. [`baselines`] and [`simlab`] provide the
//! comparison procedures and the simulation harness.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod coordinator;
pub mod error;
pub mod node;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod simlab;
pub mod wire;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = numerics::Matrix<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type NodeData64 = node::NodeData<f64>;
pub type NodeData32 = node::NodeData<f32>;
pub type NodeStatistics64 = node::NodeStatistics<f64>;
pub type NodeStatistics32 = node::NodeStatistics<f32>;
pub type AggregateStats64 = coordinator::AggregateStats<f64>;
pub type SelectionResult64 = coordinator::SelectionResult<f64>;
