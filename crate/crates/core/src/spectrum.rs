//! Spectrum of the scattered light in the helicity-preserving channel.
//!
//! Two-time correlations `<sigma_21^alpha(0) Q_n(tau)>` obey the same linear
//! equations as `<Q_n>`, with initial values obtained by multiplying the
//! stationary state from the left by `sigma_21^alpha`. Their Laplace images
//! are expanded to second order in the coupling; the pole at `z = 0` is the
//! elastic component and is carried separately as a weight of delta(nu).

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::basis::{flip, kron, OperatorBasis, SingleAtomOperator, C64, PAIR_DIM, REDUCED_DIM};
use crate::error::{CbsError, Result};
use crate::liouvillian::{Channel, GeneratorSet, Geometry};
use crate::resolvent::Propagator;
use crate::steady_state::{
    dipole_observable, elastic_intensities, ChannelOperators, IntensityBreakdown, Observable,
    Pairing, PerturbativeState,
};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Default relative tolerance of the sum rules.
pub const SUM_RULE_TOLERANCE: f64 = 1e-3;

/// Matrix of `Q_n -> sigma_21^alpha Q_n` in the full 256-element basis,
/// `S[n][m] = Tr(Q_m^dag sigma_21^alpha Q_n)`.
fn qrt_map(atom: usize) -> &'static CsrMatrix<C64> {
    static MAPS: OnceLock<[CsrMatrix<C64>; 2]> = OnceLock::new();
    let maps = MAPS.get_or_init(|| {
        let basis = OperatorBasis::get();
        let id = SingleAtomOperator::identity();
        std::array::from_fn(|a| {
            let s21 = if a == 0 {
                kron(&flip(2, 1), &id)
            } else {
                kron(&id, &flip(2, 1))
            };
            let mut coo = CooMatrix::new(PAIR_DIM, PAIR_DIM);
            for n in 0..PAIR_DIM {
                let c = basis.expand_pair(&(s21 * basis.pair(n)));
                for (m, v) in c.iter().enumerate() {
                    if *v != ZERO {
                        coo.push(n, m, *v);
                    }
                }
            }
            CsrMatrix::from(&coo)
        })
    });
    &maps[atom]
}

/// Applies the map to a reduced stationary vector; `trace` is `<Q_0>`.
/// Returns the reduced initial vector and `<sigma_21^alpha>`.
pub fn apply_qrt(atom: usize, x: &DVector<C64>, trace: C64) -> (DVector<C64>, C64) {
    let map = qrt_map(atom);
    let full = |m: usize| if m == 0 { trace } else { x[m - 1] };
    let mut out = DVector::zeros(REDUCED_DIM);
    let mut source = ZERO;
    for (n, row) in map.row_iter().enumerate() {
        let v: C64 = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&m, c)| c * full(m))
            .sum();
        if n == 0 {
            // <sigma_21 Q_0> = <sigma_21> / 4
            source = v * 4.0;
        } else {
            out[n - 1] = v;
        }
    }
    (out, source)
}

/// Initial condition `s_alpha(0) = <sigma_21^alpha Q>` of the regression
/// equations, per perturbative order and per coupling channel.
#[derive(Clone)]
pub struct CorrelationVector {
    pub atom: usize,
    /// Totals at orders 0, 1, 2 with the couplings of the state.
    pub s0: [DVector<C64>; 3],
    /// `<sigma_21^alpha>` at orders 0, 1, 2.
    pub source_weight: [C64; 3],
    /// Order-1 initial vector per channel.
    pub first: [DVector<C64>; 4],
    /// `<sigma_21^alpha>` at order 1 per channel.
    pub first_source: [C64; 4],
    /// Order-2 initial vector per channel pair `[u][v]`.
    pub second: [[DVector<C64>; 4]; 4],
}

pub fn qrt_initial(atom: usize, state: &PerturbativeState) -> CorrelationVector {
    assert!(atom < 2, "atom index must be 0 or 1");
    let (s00, w0) = apply_qrt(atom, &state.order0, C64::new(0.25, 0.0));
    let (s01, w1) = apply_qrt(atom, &state.order1, ZERO);
    let (s02, w2) = apply_qrt(atom, &state.order2, ZERO);
    let first_pairs = Channel::ALL.map(|u| apply_qrt(atom, state.first(u), ZERO));
    let second = Channel::ALL.map(|u| Channel::ALL.map(|v| apply_qrt(atom, state.second(u, v), ZERO).0));
    CorrelationVector {
        atom,
        s0: [s00, s01, s02],
        source_weight: [w0, w1, w2],
        first: first_pairs.clone().map(|p| p.0),
        first_source: first_pairs.map(|p| p.1),
        second,
    }
}

/// Spectral densities on a frequency grid plus the elastic weight.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectrumResult {
    /// nu = omega - omega_L.
    pub nu_grid: Vec<f64>,
    pub ladder_density: Vec<f64>,
    pub crossed_density: Vec<f64>,
    /// Weight of delta(nu), `L_el + C_el`.
    pub elastic_weight: f64,
    /// Grid points dropped because the resolvent was ill-conditioned.
    pub skipped: Vec<f64>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.nu_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu_grid.is_empty()
    }

    /// Multiplies densities and elastic weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nu_grid: self.nu_grid.clone(),
            ladder_density: self.ladder_density.iter().map(|v| v * factor).collect(),
            crossed_density: self.crossed_density.iter().map(|v| v * factor).collect(),
            elastic_weight: self.elastic_weight * factor,
            skipped: self.skipped.clone(),
        }
    }
}

/// Uniform grid of `points` frequencies on `[min, max]`.
pub fn uniform_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(min < max) || !min.is_finite() || !max.is_finite() {
        return Err(CbsError::InvalidParameter(format!(
            "frequency grid needs at least 2 points and min < max, got [{min}, {max}] with {points}"
        )));
    }
    let h = (max - min) / (points - 1) as f64;
    Ok((0..points).map(|i| min + h * i as f64).collect())
}

/// Default grid `[-2.5 W - 10, 2.5 W + 10]` with W the generalized Rabi frequency.
pub fn default_grid(rabi: f64, detuning: f64, points: usize) -> Result<Vec<f64>> {
    let half = 2.5 * rabi.hypot(detuning) + 10.0;
    uniform_grid(-half, half, points)
}

/// Precomputed pieces of the second-order Laplace images, shared by all
/// frequencies.
pub struct SpectrumKernel<'a> {
    prop: &'a Propagator,
    ops: &'a ChannelOperators,
    corr: [&'a CorrelationVector; 2],
    j: DVector<C64>,
    x0: DVector<C64>,
    p: [DVector<C64>; 2],
    g0t_p: [DVector<C64>; 2],
    cone: C64,
    weight: f64,
}

impl<'a> SpectrumKernel<'a> {
    pub fn new(
        gen: &GeneratorSet,
        state: &PerturbativeState,
        prop: &'a Propagator,
        ops: &'a ChannelOperators,
        corr: [&'a CorrelationVector; 2],
        geom: &Geometry,
    ) -> Result<Self> {
        let weight = state.channel_weight;
        if !(weight > 1e-300) {
            return Err(CbsError::InvalidParameter(
                "orientation along the laser axis does not couple to the detected channel".into(),
            ));
        }
        let p: [DVector<C64>; 2] = std::array::from_fn(|b| dipole_observable(b).p);
        let g0t_p = std::array::from_fn(|b| prop.g0_transpose(&p[b]));
        Ok(Self {
            prop,
            ops,
            corr,
            j: gen.j.clone(),
            x0: state.order0.clone(),
            p,
            g0t_p,
            cone: C64::from_polar(1.0, geom.cone_phase()),
            weight,
        })
    }

    /// Configuration-averaged inelastic Laplace images `G_ab(z)` of
    /// `<sigma_21^a(0) sigma_12^b(tau)>`, per unit `|g|^2 |Delta_{+1,+1}|^2`,
    /// with the cone phase applied to the crossed pair.
    pub fn correlations(&self, z: C64) -> Result<[[C64; 2]; 2]> {
        self.evaluate(z, false)
    }

    /// Same as [`correlations`](Self::correlations) but with the pole
    /// subtraction done by explicit division by z.
    pub fn correlations_unstabilized(&self, z: C64) -> Result<[[C64; 2]; 2]> {
        self.evaluate(z, true)
    }

    fn evaluate(&self, z: C64, naive: bool) -> Result<[[C64; 2]; 2]> {
        let w: Vec<DVector<C64>> = self
            .p
            .iter()
            .map(|p| self.prop.solve_transpose(z, p))
            .collect::<Result<_>>()?;
        let y: Vec<Vec<DVector<C64>>> = self
            .corr
            .iter()
            .map(|c| {
                c.first
                    .iter()
                    .map(|s| self.prop.solve(z, s))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let gj = self.prop.solve(z, &self.j)?;
        let gx0 = self.prop.solve(z, &self.x0)?;
        let g0t_w: Vec<DVector<C64>> = w.iter().map(|v| self.prop.g0_transpose(v)).collect();

        let mut out = [[ZERO; 2]; 2];
        for (a, corr) in self.corr.iter().enumerate() {
            for b in 0..2 {
                let pairing = Pairing::of_atoms(a, b);
                let mut acc = ZERO;
                for (u, v) in pairing.products() {
                    // G V G s^[1]
                    acc += self.ops.bilinear(u, &w[b], &y[a][v.index()]);
                    // G s^[2]
                    acc += w[b].dot(&corr.second[u.index()][v.index()]);
                    // <sigma_21>^[1] times the pole-free difference term
                    let src = corr.first_source[u.index()];
                    if src != ZERO {
                        let diff = if naive {
                            let x0_v = self.ops.apply(v, &self.x0);
                            let g0_v = self.prop.g0(&x0_v);
                            (self.ops.bilinear(v, &w[b], &gj) - self.p[b].dot(&g0_v)) / z
                        } else {
                            -self.ops.bilinear(v, &g0t_w[b], &gj)
                                - self.ops.bilinear(v, &self.g0t_p[b], &gx0)
                        };
                        acc += src * diff;
                    }
                }
                let phase = match pairing {
                    Pairing::SameAtom => C64::new(1.0, 0.0),
                    Pairing::Crossed12 => self.cone,
                    Pairing::Crossed21 => self.cone.conj(),
                };
                out[a][b] = acc * phase / self.weight;
            }
        }
        Ok(out)
    }

    /// Ladder and crossed spectral densities at frequency `nu`.
    pub fn densities(&self, nu: f64) -> Result<(f64, f64)> {
        let g = self.correlations(C64::new(0.0, -nu))?;
        let ladder = (g[0][0] + g[1][1]).re / PI;
        let crossed = (g[0][1] + g[1][0]).re / PI;
        Ok((ladder, crossed))
    }
}

/// Inelastic ladder and crossed spectra on `nu_grid`, configuration-averaged
/// and in units of `|g|^2 |Delta_{+1,+1}|^2`.
pub fn inelastic_spectrum(
    gen: &GeneratorSet,
    state: &PerturbativeState,
    corr: [&CorrelationVector; 2],
    nu_grid: &[f64],
    geom: &Geometry,
) -> Result<SpectrumResult> {
    let prop = Propagator::new(gen)?;
    let ops = ChannelOperators::from_generators(gen);
    spectrum_with(gen, state, &prop, &ops, corr, nu_grid, geom)
}

pub fn spectrum_with(
    gen: &GeneratorSet,
    state: &PerturbativeState,
    prop: &Propagator,
    ops: &ChannelOperators,
    corr: [&CorrelationVector; 2],
    nu_grid: &[f64],
    geom: &Geometry,
) -> Result<SpectrumResult> {
    let kernel = SpectrumKernel::new(gen, state, prop, ops, corr, geom)?;
    let values: Vec<Result<(f64, f64)>> = nu_grid.par_iter().map(|&nu| kernel.densities(nu)).collect();
    let mut out = SpectrumResult {
        nu_grid: Vec::with_capacity(nu_grid.len()),
        ladder_density: Vec::with_capacity(nu_grid.len()),
        crossed_density: Vec::with_capacity(nu_grid.len()),
        elastic_weight: elastic_weight(state, geom)?,
        skipped: Vec::new(),
    };
    for (&nu, v) in nu_grid.iter().zip(values) {
        match v {
            Ok((l, c)) => {
                out.nu_grid.push(nu);
                out.ladder_density.push(l);
                out.crossed_density.push(c);
            }
            Err(e @ (CbsError::IllConditioned { .. } | CbsError::Singular { .. })) => {
                log::warn!("skipping nu = {nu}: {e}");
                out.skipped.push(nu);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Weight `L_el + C_el` of the delta(nu) component, per unit `|g|^2 |Delta_{+1,+1}|^2`.
pub fn elastic_weight(state: &PerturbativeState, geom: &Geometry) -> Result<f64> {
    let (l, c) = elastic_intensities(state, geom)?;
    Ok(l + c)
}

/// Integral of sampled values by the trapezoidal rule plus power-law tail
/// estimates beyond both ends. Returns `(integral, tail)`.
pub fn integrate_with_tails(nu: &[f64], f: &[f64]) -> (f64, f64) {
    let n = nu.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let mut body = 0.0;
    for i in 1..n {
        body += 0.5 * (nu[i] - nu[i - 1]) * (f[i] + f[i - 1]);
    }
    let tail = tail_estimate(nu[n - 2], nu[n - 1], f[n - 2], f[n - 1])
        + tail_estimate(-nu[1], -nu[0], f[1], f[0]);
    (body + tail, tail)
}

// Integral from `x1` to infinity of a power law through (x0, f0), (x1, f1).
fn tail_estimate(x0: f64, x1: f64, f0: f64, f1: f64) -> f64 {
    if x1 <= 0.0 || x0 <= 0.0 || f1 == 0.0 {
        return 0.0;
    }
    let p = if f0 != 0.0 && f1 / f0 > 0.0 && f1.abs() < f0.abs() {
        (f0 / f1).ln() / (x1 / x0).ln()
    } else {
        2.0
    };
    if p <= 1.0 {
        return f1 * x1;
    }
    f1 * x1 / (p - 1.0)
}

/// Comparison of spectral integrals with the stationary inelastic intensities.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SumRuleReport {
    pub ladder_integral: f64,
    pub crossed_integral: f64,
    pub ladder_tail: f64,
    pub crossed_tail: f64,
    pub l_inel: f64,
    pub c_inel: f64,
    pub ladder_error: f64,
    pub crossed_error: f64,
    pub tolerance: f64,
}

impl SumRuleReport {
    pub fn passed(&self) -> bool {
        self.ladder_error <= self.tolerance && self.crossed_error <= self.tolerance
    }
}

/// Relative deviations of the integrated spectra from `L_inel` and `C_inel`.
pub fn sum_rule_report(spec: &SpectrumResult, ib: &IntensityBreakdown, tolerance: f64) -> SumRuleReport {
    let (li, lt) = integrate_with_tails(&spec.nu_grid, &spec.ladder_density);
    let (ci, ct) = integrate_with_tails(&spec.nu_grid, &spec.crossed_density);
    let rel = |a: f64, b: f64| {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    };
    SumRuleReport {
        ladder_integral: li,
        crossed_integral: ci,
        ladder_tail: lt,
        crossed_tail: ct,
        l_inel: ib.l_inel,
        c_inel: ib.c_inel,
        ladder_error: rel(li, ib.l_inel),
        crossed_error: rel(ci, ib.c_inel),
        tolerance,
    }
}

/// Sum-rule check that fails when either relative deviation exceeds `tolerance`.
pub fn check_sum_rule(
    spec: &SpectrumResult,
    ib: &IntensityBreakdown,
    tolerance: f64,
) -> Result<SumRuleReport> {
    let report = sum_rule_report(spec, ib, tolerance);
    if report.ladder_error > tolerance {
        return Err(CbsError::SumRule {
            term: "ladder",
            integral: report.ladder_integral,
            intensity: report.l_inel,
        });
    }
    if report.crossed_error > tolerance {
        return Err(CbsError::SumRule {
            term: "crossed",
            integral: report.crossed_integral,
            intensity: report.c_inel,
        });
    }
    Ok(report)
}

/// Densities divided by `L_inel`, so that the ladder integrates to one.
pub fn normalized_spectra(spec: &SpectrumResult, ib: &IntensityBreakdown) -> Result<SpectrumResult> {
    if !(ib.l_inel > 0.0) {
        return Err(CbsError::InvalidParameter(
            "cannot normalize by a vanishing inelastic ladder intensity".into(),
        ));
    }
    Ok(spec.scaled(1.0 / ib.l_inel))
}

/// `<sigma_21^alpha>` as an observable, for callers assembling their own terms.
pub fn lowering_conjugate_observable(atom: usize) -> Observable {
    Observable::on_atom(atom, &flip(2, 1))
}
