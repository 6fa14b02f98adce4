//! Fast graph recurrent neural networks (FGRNN) on point-cloud style graph
//! signals.
//!
//! The crate is layered bottom-up: [`linalg`] provides dense and CSR sparse
//! matrices with symmetric eigen-solvers, [`graph`] builds k-NN graphs and
//! their Laplacians, [`gconv`] implements the graph convolutions, [`cells`]
//! the recurrent cell, [`training`] BPTT and Adam, and [`stability`] the
//! Jacobian-product diagnostics. [`cli`] wires everything into the
//! `fgrnn` binary.

pub mod cells;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod gconv;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod stability;
pub mod training;

pub use error::{Error, Result};
