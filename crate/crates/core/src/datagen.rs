//! Seeded generation of the Gaussian and Toeplitz benchmark setups.
//!
//! Random draws come from a single ChaCha8 stream seeded with `seed`, in
//! this fixed order:
//!
//! 1. dictionary entries, column by column (Gaussian setup only);
//! 2. the support of `x_true` (uniform, without replacement);
//! 3. one sign per support entry;
//! 4. one standard normal `a` per support entry (amplitude `s(1 + |a|)`);
//! 5. `m` standard normals for the noise, scaled by `σ`.
//!
//! Then `σ = ‖A x_true‖ / √(10m)`, `λ = 2σ² ln(n/k − 1)` and
//! `M = 1.5 ‖Aᵀy‖∞`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::Instance;

/// Name of the pseudo-random generator, recorded in instance metadata.
pub const PRNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    Gaussian,
    Toeplitz,
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setup::Gaussian => "gaussian",
            Setup::Toeplitz => "toeplitz",
        })
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Setup::Gaussian),
            "toeplitz" => Ok(Setup::Toeplitz),
            other => Err(Error::InvalidSpec(format!(
                "unknown setup '{other}' (expected gaussian or toeplitz)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub setup: Setup,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Width `w` of the sinc atom, `None` for the default `m / 50`.
    /// Ignored by the Gaussian setup.
    pub sinc_width: Option<f64>,
}

impl GenSpec {
    pub fn new(setup: Setup, m: usize, n: usize, k: usize, seed: u64) -> Self {
        Self {
            setup,
            m,
            n,
            k,
            seed,
            sinc_width: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidSpec(format!(
                "m and n must be positive, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidSpec(format!(
                "k must satisfy 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if self.n as f64 / self.k as f64 - 1.0 <= 1.0 {
            return Err(Error::InvalidSpec(format!(
                "lambda = 2 sigma^2 log(n/k - 1) needs n/k - 1 > 1, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if let Some(w) = self.sinc_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSpec(format!("sinc width must be positive, got {w}")));
            }
        }
        Ok(())
    }

    pub fn effective_sinc_width(&self) -> f64 {
        self.sinc_width.unwrap_or(self.m as f64 / 50.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub instance: Instance,
    pub x_true: DVector<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub spec: GenSpec,
}

impl GeneratedInstance {
    /// Support of `x_true`, ascending, 0-based.
    pub fn true_support(&self) -> Vec<usize> {
        crate::model::support(&self.x_true)
    }

    /// Key/value pairs recorded alongside the instance on disk.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let support = self.true_support();
        let join = |items: Vec<String>| items.join(",");
        let mut meta = BTreeMap::new();
        meta.insert("setup".into(), self.spec.setup.to_string());
        meta.insert("seed".into(), self.seed.to_string());
        meta.insert("k".into(), self.spec.k.to_string());
        meta.insert("prng".into(), PRNG_NAME.into());
        meta.insert("sigma".into(), format!("{:.16e}", self.sigma));
        meta.insert(
            "x_true_support".into(),
            join(support.iter().map(|i| i.to_string()).collect()),
        );
        meta.insert(
            "x_true_values".into(),
            join(support.iter().map(|&i| format!("{:.16e}", self.x_true[i])).collect()),
        );
        if self.spec.setup == Setup::Toeplitz {
            meta.insert(
                "sinc_width".into(),
                format!("{:.16e}", self.spec.effective_sinc_width()),
            );
        }
        meta
    }
}

/// `sin(πt) / (πt)`, with `sinc(0) = 1`.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Unnormalized Toeplitz dictionary: first column `c[j] = sinc((j − m/2)/w)`,
/// column `i` is `c` circularly shifted down by `i` rows, so
/// `A[r, i] = c[(r − i) mod m]`.
pub fn toeplitz_dictionary(m: usize, n: usize, width: f64) -> DMatrix<f64> {
    let half = m as f64 / 2.0;
    let first: Vec<f64> = (0..m).map(|j| sinc((j as f64 - half) / width)).collect();
    DMatrix::from_fn(m, n, |r, i| first[(r + m - i % m) % m])
}

/// `2σ² ln(n/k − 1)`.
pub fn lambda_for(sigma: f64, n: usize, k: usize) -> f64 {
    2.0 * sigma * sigma * (n as f64 / k as f64 - 1.0).ln()
}

/// `1.5 ‖Aᵀy‖∞`.
pub fn big_m_for(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    1.5 * a.tr_mul(y).amax()
}

fn normalize_columns(a: &mut DMatrix<f64>) -> Result<()> {
    for (i, mut col) in a.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::InvalidSpec(format!("column {i} of the dictionary is zero")));
        }
        col /= norm;
    }
    Ok(())
}

pub fn generate(spec: &GenSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let (m, n, k) = (spec.m, spec.n, spec.k);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut a = match spec.setup {
        Setup::Gaussian => {
            let entries: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
            DMatrix::from_vec(m, n, entries)
        }
        Setup::Toeplitz => toeplitz_dictionary(m, n, spec.effective_sinc_width()),
    };
    normalize_columns(&mut a)?;

    let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let signs: Vec<f64> = (0..k)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let amplitudes: Vec<f64> = (0..k)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            1.0 + a.abs()
        })
        .collect();
    let mut x_true = DVector::zeros(n);
    for ((&i, s), amp) in support.iter().zip(&signs).zip(&amplitudes) {
        x_true[i] = s * amp;
    }

    let clean = &a * &x_true;
    let sigma = clean.norm() / (10.0 * m as f64).sqrt();
    let noise = DVector::from_fn(m, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let y = clean + noise;

    let lambda = lambda_for(sigma, n, k);
    let big_m = big_m_for(&a, &y);
    let instance = Instance::new(a, y, lambda, big_m)?;
    Ok(GeneratedInstance {
        instance,
        x_true,
        sigma,
        seed: spec.seed,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        for setup in [Setup::Gaussian, Setup::Toeplitz] {
            let spec = GenSpec::new(setup, 20, 30, 3, 7);
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a, b);
            let c = generate(&GenSpec { seed: 8, ..spec }).unwrap();
            assert_ne!(a.instance.y(), c.instance.y());
        }
    }

    #[test]
    fn gaussian_calibration() {
        let g = generate(&GenSpec::new(Setup::Gaussian, 500, 1000, 5, 1)).unwrap();
        for col in g.instance.a().column_iter() {
            assert!((col.norm() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(crate::model::l0_count(&g.x_true), 5);
        assert_eq!(g.instance.lambda(), 2.0 * g.sigma * g.sigma * 199f64.ln());
        assert_eq!(g.instance.big_m(), 1.5 * g.instance.a().tr_mul(g.instance.y()).amax());
        for &i in &g.true_support() {
            assert!(g.x_true[i].abs() >= 1.0);
        }
    }

    #[test]
    fn toeplitz_has_constant_diagonals() {
        let raw = toeplitz_dictionary(40, 25, 0.8);
        for r in 1..40 {
            for c in 1..25 {
                assert_eq!(raw[(r, c)], raw[(r - 1, c - 1)]);
            }
        }
        assert_eq!(raw[(20, 0)], 1.0);
        let g = generate(&GenSpec::new(Setup::Toeplitz, 40, 25, 3, 2)).unwrap();
        for col in g.instance.a().column_iter() {
            assert!((col.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate(&GenSpec::new(Setup::Gaussian, 20, 30, 30, 1)).is_err());
        assert!(generate(&GenSpec::new(Setup::Gaussian, 20, 30, 15, 1)).is_err());
        assert!(generate(&GenSpec::new(Setup::Gaussian, 20, 30, 0, 1)).is_err());
        assert!(generate(&GenSpec::new(Setup::Gaussian, 0, 30, 3, 1)).is_err());
        assert!(generate(&GenSpec::new(Setup::Gaussian, 20, 30, 14, 1)).is_ok());
    }

    #[test]
    fn setup_names_round_trip() {
        for s in [Setup::Gaussian, Setup::Toeplitz] {
            assert_eq!(s.to_string().parse::<Setup>().unwrap(), s);
        }
        assert!("circulant".parse::<Setup>().is_err());
    }
}
