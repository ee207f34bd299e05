//! Benchmark problems: random quadratics and sparse logistic regression.

mod dataset;
pub mod libsvm;
pub mod logistic;
pub mod qp;
pub mod synth;

pub use dataset::SparseDataset;
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};
pub use logistic::LogisticLoss;
pub use qp::QpProblem;
pub use synth::SyntheticLogistic;
