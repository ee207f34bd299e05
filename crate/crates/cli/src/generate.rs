//! Data generators: synthetic LIBSVM files and QP parameter files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use proxpol::problems::{write_libsvm, QpProblem, SyntheticLogistic};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    SyntheticLogistic,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, value_enum, default_value = "synthetic-logistic")]
    pub kind: DatasetKind,
    /// Number of samples.
    #[arg(long = "N", default_value_t = 1000)]
    pub n: usize,
    /// Number of features.
    #[arg(long, default_value_t = 200)]
    pub d: usize,
    /// Probability that a feature is present in a sample.
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QpArgs {
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    #[arg(long = "L", default_value_t = 20.0)]
    pub l: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

pub fn dataset(a: &DatasetArgs) -> Result<(), CliError> {
    let DatasetKind::SyntheticLogistic = a.kind;
    if !(a.density > 0.0 && a.density <= 1.0) {
        return Err(CliError::Usage(format!(
            "--density must lie in (0, 1], got {}",
            a.density
        )));
    }
    let ds = SyntheticLogistic::new(a.n, a.d, a.density, a.seed).generate()?;
    write_libsvm(&ds, create(&a.out)?)?;
    Ok(())
}

pub fn qp(a: &QpArgs) -> Result<(), CliError> {
    let p = QpProblem::generate(a.d, a.mu, a.l, a.seed)?;
    let mut w = create(&a.out)?;
    p.write_params(&mut w)?;
    w.flush()?;
    Ok(())
}
