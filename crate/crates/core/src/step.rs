//! Step-size policies. Steps are stateless once configured and may be
//! called from several workers at once.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Constant,
    Decreasing,
    Custom,
}

pub trait Step: Send + Sync {
    fn step(&self, k_local: u64, k_global: u64, fval: f64, x: &[f64], g: &[f64]) -> f64;

    fn kind(&self) -> StepKind {
        StepKind::Custom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepConfig {
    Constant {
        gamma: f64,
    },
    /// `gamma0 / (1 + k)^p`
    Decreasing {
        gamma0: f64,
        p: f64,
    },
}

impl StepConfig {
    pub fn build(&self) -> Box<dyn Step> {
        match *self {
            StepConfig::Constant { gamma } => Box::new(Constant(gamma)),
            StepConfig::Decreasing { gamma0, p } => Box::new(Decreasing { gamma0, p }),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            StepConfig::Constant { gamma } => gamma > 0.0 && gamma.is_finite(),
            StepConfig::Decreasing { gamma0, p } => gamma0 > 0.0 && gamma0.is_finite() && p >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid step parameters {self:?}"))
        }
    }
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig::Constant { gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Step for Constant {
    fn step(&self, _kl: u64, _kg: u64, _fval: f64, _x: &[f64], _g: &[f64]) -> f64 {
        self.0
    }

    fn kind(&self) -> StepKind {
        StepKind::Constant
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Decreasing {
    pub gamma0: f64,
    pub p: f64,
}

impl Step for Decreasing {
    fn step(&self, _kl: u64, k_global: u64, _fval: f64, _x: &[f64], _g: &[f64]) -> f64 {
        self.gamma0 / (1.0 + k_global as f64).powf(self.p)
    }

    fn kind(&self) -> StepKind {
        StepKind::Decreasing
    }
}
