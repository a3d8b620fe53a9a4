//! Seeded two-class image segmentation by global minimization of
//! contrast-weighted boundary curvature.

pub mod cli;
pub mod curvature;
pub mod energy;
pub mod error;
pub mod lattice;
pub mod qpbo;
pub mod segmenter;
pub mod service;
pub mod synthcorpus;

pub use error::{Error, Result};
