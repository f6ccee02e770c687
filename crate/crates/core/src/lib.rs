//! Egonet scan statistics for anomalous clique detection.
//!
//! A null random-graph model is fitted to an observed network, every node's
//! egonet degree is scored by an exact upper-tail probability under that
//! model, and the network is declared anomalous when the smallest score falls
//! below `alpha / n`. Nodes breaching the threshold are the estimated clique.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] – sparse symmetric integer-weighted graphs and egonet queries
//! * [`tail`] – Binomial and Poisson survival functions
//! * [`models`] – the five null models, density calibration, clique planting
//! * [`fit`] – plug-in estimators and regularized spectral clustering
//! * [`detect`] – the egonet test and clique recovery
//! * [`chi2`] – the residual-PCA quadrant chi-square benchmark detector
//! * [`sim`] – seeded Monte-Carlo harness and metric aggregation
//! * [`io`] – edge lists and machine-readable reports
//!
//! With the default `parallel` feature the per-node scan, k-means restarts,
//! rotation grid and replicate sweep run on rayon. Disabling it yields a
//! purely sequential build with identical results.

#![allow(clippy::needless_range_loop)]

pub mod chi2;
pub mod detect;
mod error;
pub mod fit;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod models;
pub mod par;
pub mod sim;
pub mod tail;

pub use error::{Error, Result};
pub use graph::Graph;
pub use par::Execution;
