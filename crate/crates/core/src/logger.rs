//! Iteration records and loggers.

use std::io::{self, Write};

/// One completed iterate. `fval` is the smooth loss at the point the
/// gradient was taken, `t_ns` the monotonic time since the run started.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u64,
    pub t_ns: u64,
    pub fval: f64,
    pub x: Option<Vec<f64>>,
}

pub trait Logger: Send {
    fn log(&mut self, record: IterationRecord);

    /// Whether records should carry a copy of the decision vector.
    fn wants_x(&self) -> bool {
        false
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullLogger;

impl Logger for NullLogger {
    fn log(&mut self, _record: IterationRecord) {}
}

/// Keeps every record in memory.
#[derive(Debug, Default, Clone)]
pub struct VecLogger {
    pub records: Vec<IterationRecord>,
    keep_x: bool,
}

impl VecLogger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also keep a snapshot of `x` with every record.
    pub fn with_decisions() -> Self {
        Self {
            records: Vec::new(),
            keep_x: true,
        }
    }

    pub fn fvals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fval).collect()
    }
}

impl Logger for VecLogger {
    fn log(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    fn wants_x(&self) -> bool {
        self.keep_x
    }
}

impl<L: Logger + ?Sized> Logger for &mut L {
    fn log(&mut self, record: IterationRecord) {
        (**self).log(record)
    }

    fn wants_x(&self) -> bool {
        (**self).wants_x()
    }
}

impl<L: Logger + ?Sized> Logger for Box<L> {
    fn log(&mut self, record: IterationRecord) {
        (**self).log(record)
    }

    fn wants_x(&self) -> bool {
        (**self).wants_x()
    }
}

/// Writes `k,t_ns,fval[,gap]` rows. The gap column appears when the optimal
/// value is known.
pub struct CsvLogger<W: Write> {
    out: W,
    f_star: Option<f64>,
    error: Option<io::Error>,
}

impl<W: Write + Send> CsvLogger<W> {
    pub fn new(mut out: W, f_star: Option<f64>) -> io::Result<Self> {
        if f_star.is_some() {
            writeln!(out, "k,t_ns,fval,gap")?;
        } else {
            writeln!(out, "k,t_ns,fval")?;
        }
        Ok(Self {
            out,
            f_star,
            error: None,
        })
    }

    /// Flushes and returns the first write error, if any occurred.
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write + Send> Logger for CsvLogger<W> {
    fn log(&mut self, r: IterationRecord) {
        if self.error.is_some() {
            return;
        }
        // `{:?}` prints the shortest string that round-trips the f64
        let res = match self.f_star {
            Some(f_star) => writeln!(self.out, "{},{},{:?},{:?}", r.k, r.t_ns, r.fval, r.fval - f_star),
            None => writeln!(self.out, "{},{},{:?}", r.k, r.t_ns, r.fval),
        };
        if let Err(e) = res {
            self.error = Some(e);
        }
    }
}
