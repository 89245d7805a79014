//! Disorder average over the relative position of the two atoms.
//!
//! At second order in the coupling every observable factorizes into the
//! atomic dynamics, `|g(r)|^2 |Delta_{+1,+1}(n)|^2` and the cone phase, so the
//! default path multiplies per-unit results by analytic factors. Monte Carlo
//! sampling of the configuration is kept as an independent cross-check.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::C64;
use crate::error::{CbsError, Result};
use crate::liouvillian::{channel_weight, coupling_constant, transverse_projector, DriveConfig};
use crate::model::PointSolver;
use crate::steady_state::IntensityBreakdown;

/// Samples per independent random stream.
const CHUNK: usize = 4096;

/// Scattering angles beyond this are outside the small-angle cone formula.
pub const SMALL_ANGLE_LIMIT: f64 = 0.1;

/// Isotropic orientation and a uniform distance window around `mean_separation`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisorderModel {
    /// k0 l.
    pub mean_separation: f64,
    /// Width of the distance window in units of 1/k0; one wavelength is 2 pi.
    pub width: f64,
    pub samples: usize,
    pub seed: u64,
}

impl DisorderModel {
    pub fn new(mean_separation: f64, samples: usize, seed: u64) -> Result<Self> {
        let m = Self {
            mean_separation,
            width: 2.0 * PI,
            samples,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width >= 0.0) {
            return Err(CbsError::InvalidParameter(format!(
                "distance window width must be non-negative, got {}",
                self.width
            )));
        }
        if !(self.mean_separation.is_finite() && self.mean_separation - 0.5 * self.width > 0.0) {
            return Err(CbsError::InvalidParameter(format!(
                "distance window [{} +- {}] must stay at positive separation",
                self.mean_separation,
                0.5 * self.width
            )));
        }
        if self.mean_separation < 10.0 {
            log::warn!(
                "k0 l = {} is not large compared with one; far-field coupling is questionable",
                self.mean_separation
            );
        }
        Ok(())
    }

    /// `|g|^2` at the mean separation.
    pub fn mean_coupling_sqr(&self) -> f64 {
        (1.5 / self.mean_separation).powi(2)
    }

    /// `<|g(r)|^2>` over the distance window, exact for a uniform window.
    pub fn averaged_coupling_sqr(&self) -> f64 {
        let lo = self.mean_separation - 0.5 * self.width;
        let hi = self.mean_separation + 0.5 * self.width;
        2.25 / (lo * hi)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Configuration {
        let cos_t: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let u: f64 = rng.random();
        Configuration {
            n_hat: Vector3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t),
            k0_r12: self.mean_separation + (u - 0.5) * self.width,
        }
    }
}

/// One sampled relative position `r1 - r2 = n k0_r12 / k0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    pub n_hat: Vector3<f64>,
    pub k0_r12: f64,
}

impl Configuration {
    pub fn coupling(&self) -> Result<C64> {
        coupling_constant(self.k0_r12)
    }

    /// `|Delta_{+1,+1}|^2 = sin^4(theta_n) / 4`.
    pub fn channel_weight(&self) -> f64 {
        transverse_projector(&self.n_hat)
            .map(|p| channel_weight(&p))
            .unwrap_or(0.0)
    }

    /// `|g|^2 |Delta_{+1,+1}|^2`.
    pub fn weight(&self) -> f64 {
        (1.5 / self.k0_r12).powi(2) * self.channel_weight()
    }

    /// `(k + k_L) . r12` for a momentum transfer `q` in units of k0.
    pub fn cone_phase(&self, q: &Vector3<f64>) -> f64 {
        q.dot(&self.n_hat) * self.k0_r12
    }
}

/// Analytic angular factors of the orientation average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularFactors {
    /// `<|Delta_{+1,+1}|^2>`.
    pub background: Rational64,
    /// Coefficient of `(k l theta)^2` in the crossed-term average.
    pub curvature: Rational64,
}

pub fn angular_factor_analytic() -> AngularFactors {
    AngularFactors {
        background: Rational64::new(2, 15),
        curvature: Rational64::new(1, 35),
    }
}

/// Mean and standard error per component.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
}

// Running mean and sum of squared deviations.
#[derive(Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(width: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for (k, &v) in x.iter().enumerate() {
            let d = v - self.mean[k];
            self.mean[k] += d / self.n;
            self.m2[k] += d * (v - self.mean[k]);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        for k in 0..self.mean.len() {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * other.n / n;
            self.m2[k] += other.m2[k] + d * d * self.n * other.n / n;
        }
        self.n = n;
    }
}

/// Monte Carlo average of a vector-valued per-configuration evaluator.
///
/// The evaluator writes `width` values per configuration. Sample `i` belongs
/// to chunk `i / 4096`, which draws from its own ChaCha stream, and chunks are
/// merged in order, so the result is bit-identical for a fixed seed
/// regardless of the thread count.
pub fn monte_carlo_average<F>(model: &DisorderModel, width: usize, evaluator: F) -> Result<MonteCarloEstimate>
where
    F: Fn(&Configuration, &mut [f64]) -> Result<()> + Sync,
{
    if model.samples == 0 {
        return Err(CbsError::NoSamples);
    }
    model.validate()?;
    let chunks = model.samples.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(model.samples - c * CHUNK);
            let mut acc = Moments::new(width);
            let mut buf = vec![0.0; width];
            for _ in 0..n {
                let cfg = model.sample(&mut rng);
                evaluator(&cfg, &mut buf)?;
                acc.push(&buf);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::new(width);
    for p in parts {
        total.merge(&p?);
    }
    let n = total.n;
    let std_error = total
        .m2
        .iter()
        .map(|m2| if n > 1.0 { (m2 / (n - 1.0) / n).sqrt() } else { f64::INFINITY })
        .collect();
    Ok(MonteCarloEstimate {
        mean: total.mean,
        std_error,
        samples: model.samples,
    })
}

/// Averaged intensities in absolute units, from per-unit values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AveragedIntensities {
    /// `|g_bar|^2` with `g_bar = g(l)`.
    pub mean_coupling_sqr: f64,
    /// Per-unit values times `(2/15) |g_bar|^2`.
    pub analytic: IntensityBreakdown,
    /// Per-unit values times the sampled `<|g|^2 |Delta|^2>`, when requested.
    pub sampled: Option<IntensityBreakdown>,
    /// Standard error of the sampled prefactor.
    pub sampled_std_error: Option<f64>,
}

pub fn average_intensities(
    per_unit: &IntensityBreakdown,
    model: &DisorderModel,
    sample: bool,
) -> Result<AveragedIntensities> {
    model.validate()?;
    let g2 = model.mean_coupling_sqr();
    let analytic = per_unit.scaled(2.0 / 15.0 * g2);
    let (sampled, sampled_std_error) = if sample {
        let est = monte_carlo_average(model, 1, |c, out| {
            out[0] = c.weight();
            Ok(())
        })?;
        (Some(per_unit.scaled(est.mean[0])), Some(est.std_error[0]))
    } else {
        (None, None)
    };
    Ok(AveragedIntensities {
        mean_coupling_sqr: g2,
        analytic,
        sampled,
        sampled_std_error,
    })
}

/// Full cross-check evaluator: rebuilds the generator for each sampled
/// orientation and reports `|g|^2` times the orientation-specific
/// `(L_tot, C_tot)`. Expensive; meant for a few hundred samples.
pub fn full_configuration_evaluator(
    drive: DriveConfig,
) -> impl Fn(&Configuration, &mut [f64]) -> Result<()> + Sync {
    move |c: &Configuration, out: &mut [f64]| {
        let w = c.channel_weight();
        if w < 1e-12 {
            out[0] = 0.0;
            out[1] = 0.0;
            return Ok(());
        }
        let ib = PointSolver::with_orientation(&drive, &c.n_hat)?.intensities()?;
        let g2 = c.coupling()?.norm_sqr();
        out[0] = g2 * w * ib.l_tot;
        out[1] = g2 * w * ib.c_tot;
        Ok(())
    }
}

/// Crossed-to-ladder ratio versus scattering angle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConeProfile {
    pub theta: Vec<f64>,
    /// `C_tot(theta) / L_tot` from the small-angle expansion.
    pub analytic: Vec<f64>,
    /// False where the small-angle expansion does not apply.
    pub valid: Vec<bool>,
    pub monte_carlo: Option<Vec<f64>>,
    pub monte_carlo_error: Option<Vec<f64>>,
}

/// Cone profile around exact backscattering, for drive results `ib` in
/// per-unit form. The analytic branch uses
/// `<|Delta|^2 cos(q . r)> = 2/15 - (k l theta)^2 / 35`.
pub fn cbs_cone(
    theta_grid: &[f64],
    ib: &IntensityBreakdown,
    model: &DisorderModel,
    monte_carlo: bool,
) -> Result<ConeProfile> {
    model.validate()?;
    if theta_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CbsError::InvalidParameter(
            "scattering angles must be finite and non-negative".into(),
        ));
    }
    let contrast = ib.c_tot / ib.l_tot;
    let f = angular_factor_analytic();
    let curv = (f.curvature / f.background).to_f64();
    let kl = model.mean_separation;
    let mut analytic = Vec::with_capacity(theta_grid.len());
    let mut valid = Vec::with_capacity(theta_grid.len());
    for &t in theta_grid {
        let shape = 1.0 - curv * (kl * t).powi(2);
        let ok = t < SMALL_ANGLE_LIMIT && shape >= 0.0;
        analytic.push(contrast * shape);
        valid.push(ok);
    }
    let outside = valid.iter().filter(|v| !**v).count();
    if outside > 0 {
        log::warn!("{outside} of {} angles lie outside the small-angle cone expansion", valid.len());
    }
    let (mc, mc_err) = if monte_carlo {
        let n = theta_grid.len();
        // Momentum transfer k + k_L for detection tilted in the xz plane.
        let q: Vec<Vector3<f64>> = theta_grid
            .iter()
            .map(|&t| Vector3::new(t.sin(), 0.0, 1.0 - t.cos()))
            .collect();
        let est = monte_carlo_average(model, n + 1, |c, out| {
            let w = c.weight();
            out[n] = w;
            for (k, qk) in q.iter().enumerate() {
                out[k] = w * c.cone_phase(qk).cos();
            }
            Ok(())
        })?;
        let den = est.mean[n];
        (
            Some(est.mean[..n].iter().map(|m| contrast * m / den).collect()),
            Some(est.std_error[..n].iter().map(|e| (contrast * e / den).abs()).collect()),
        )
    } else {
        (None, None)
    };
    Ok(ConeProfile {
        theta: theta_grid.to_vec(),
        analytic,
        valid,
        monte_carlo: mc,
        monte_carlo_error: mc_err,
    })
}

/// Angle at which the analytic crossed term falls to half its peak.
pub fn cone_half_width(mean_separation: f64) -> f64 {
    let f = angular_factor_analytic();
    (0.5 / (f.curvature / f.background).to_f64()).sqrt() / mean_separation
}

trait ToF64 {
    fn to_f64(self) -> f64;
}

impl ToF64 for Rational64 {
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
