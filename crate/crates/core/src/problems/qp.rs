//! Random unconstrained QPs `½xᵀQx + qᵀx` with a prescribed spectrum.
//!
//! `Q = V·diag(λ)·Vᵀ` where `V = H₁H₂` is a product of two Householder
//! reflectors, so `Q` is never stored and a matvec costs O(d). The spectrum
//! holds `μ` and `L` exactly; the remaining eigenvalues are log-uniform in
//! `[μ, L]`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::loss::Loss;

pub const QP_MAGIC: &[u8; 6] = b"QPGEN1";

#[derive(Debug, Clone)]
pub struct QpProblem {
    d: usize,
    mu: f64,
    l: f64,
    seed: u64,
    spectrum: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    q: Vec<f64>,
    x_star: Vec<f64>,
    f_star: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `v ← (I − 2uuᵀ)v` for unit `u`.
fn reflect(u: &[f64], v: &mut [f64]) {
    let s = 2.0 * dot(u, v);
    for (vi, ui) in v.iter_mut().zip(u) {
        *vi -= s * ui;
    }
}

fn unit_normal(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|v| *v /= n);
    u
}

impl QpProblem {
    pub fn generate(d: usize, mu: f64, l: f64, seed: u64) -> Result<Self> {
        if !(mu > 0.0 && mu <= l && l.is_finite()) {
            return Err(Error::InvalidSpectrum { mu, l });
        }
        if d < 2 {
            return Err(Error::Config(format!("QP dimension must be at least 2, got {d}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (mu.ln(), l.ln());
        let mut spectrum = Vec::with_capacity(d);
        spectrum.push(mu);
        spectrum.push(l);
        for _ in 2..d {
            let t: f64 = rng.random();
            spectrum.push((lo + t * (hi - lo)).exp().clamp(mu, l));
        }
        let u1 = unit_normal(&mut rng, d);
        let u2 = unit_normal(&mut rng, d);
        let q: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();

        let mut p = Self {
            d,
            mu,
            l,
            seed,
            spectrum,
            u1,
            u2,
            q,
            x_star: Vec::new(),
            f_star: 0.0,
        };
        // x* = −V Λ⁻¹ Vᵀ q
        let mut x = p.q.clone();
        p.apply_vt(&mut x);
        for (xi, lam) in x.iter_mut().zip(&p.spectrum) {
            *xi = -*xi / lam;
        }
        p.apply_v(&mut x);
        p.f_star = 0.5 * dot(&p.q, &x);
        p.x_star = x;
        Ok(p)
    }

    fn apply_v(&self, v: &mut [f64]) {
        reflect(&self.u2, v);
        reflect(&self.u1, v);
    }

    fn apply_vt(&self, v: &mut [f64]) {
        reflect(&self.u1, v);
        reflect(&self.u2, v);
    }

    /// `out ← Qx`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        self.apply_vt(out);
        for (o, lam) in out.iter_mut().zip(&self.spectrum) {
            *o *= lam;
        }
        self.apply_v(out);
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut qx = vec![0.0; self.d];
        self.matvec(x, &mut qx);
        0.5 * dot(x, &qx) + dot(&self.q, x)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    /// Writes the generator parameters: magic, then `d`, `μ`, `L`, seed, all
    /// little-endian (8 bytes each).
    pub fn write_params<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(QP_MAGIC)?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&self.mu.to_le_bytes())?;
        w.write_all(&self.l.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        Ok(())
    }

    /// Regenerates a problem from parameters written by [`write_params`](Self::write_params).
    pub fn read_params<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != QP_MAGIC {
            return Err(Error::Config("not a QP parameter file (bad magic)".into()));
        }
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let d = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let mu = f64::from_le_bytes(b);
        r.read_exact(&mut b)?;
        let l = f64::from_le_bytes(b);
        r.read_exact(&mut b)?;
        let seed = u64::from_le_bytes(b);
        Self::generate(d, mu, l, seed)
    }
}

impl Loss for QpProblem {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_components(&self) -> usize {
        1
    }

    fn full(&self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        check_dim(self.d, g.len())?;
        self.matvec(x, g);
        let quad = dot(x, g);
        for (gi, qi) in g.iter_mut().zip(&self.q) {
            *gi += qi;
        }
        Ok(0.5 * quad + dot(&self.q, x))
    }

    fn partial(&self, x: &[f64], g: &mut [f64], indices: &[usize]) -> Result<f64> {
        if let Some(&bad) = indices.iter().find(|&&i| i != 0) {
            return Err(Error::IndexOutOfRange { index: bad, n: 1 });
        }
        if indices.is_empty() {
            g.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0.0);
        }
        let f = self.full(x, g)?;
        let m = indices.len() as f64;
        if m != 1.0 {
            g.iter_mut().for_each(|v| *v *= m);
        }
        Ok(f * m)
    }
}
