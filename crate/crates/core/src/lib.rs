//! Adaptive lower-bound adversaries for online vector bin packing.
//!
//! The adversaries in [`strategies`] play against any [`algorithms::OnlineAlgorithm`]
//! and emit a [`strategies::Certificate`] whose inequalities hold for every
//! algorithm. All feasibility arithmetic goes through [`exactnum`].

pub mod adaptive;
pub mod algorithms;
pub mod exactnum;
pub mod harness;
pub mod oracle;
pub mod setfamily;
pub mod strategies;
pub mod vpcore;
