//! Level-set percolation of adjacency eigenvectors on random regular graphs.
//!
//! The crate has two halves. The empirical half generates random `d`-regular
//! graphs ([`graph`]), diagonalizes their adjacency matrices ([`spectral`]) and
//! sweeps the superlevel sets of each eigenvector to locate the percolation
//! transition ([`level_sets`]). The model half describes the Gaussian wave
//! process on the `d`-regular tree ([`gaussian_wave`]) and solves for its
//! critical level through a transfer operator along tree paths
//! ([`percolation`]). [`experiments`] ties both together behind the
//! `regperc` command line tool.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod format;
pub mod gaussian_wave;
pub mod graph;
pub mod level_sets;
pub mod linalg;
pub mod percolation;
pub mod plot;
pub mod quadrature;
pub mod seed;
pub mod spectral;
pub mod union_find;

pub use gaussian_wave::WaveModel;
pub use graph::Graph;
pub use level_sets::RatioCurve;
pub use spectral::EigenPair;
