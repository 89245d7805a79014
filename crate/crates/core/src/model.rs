//! One-stop solver for a single drive point.
//!
//! Configuration-averaged results in units of `|g|^2 |Delta_{+1,+1}|^2` do
//! not depend on the orientation, the distance or the laser phases, so the
//! solver works in a canonical frame: `n = x`, unit coupling, zero phases.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::basis::C64;
use crate::error::Result;
use crate::liouvillian::{assemble_with, DriveConfig, GeneratorSet, Geometry};
use crate::resolvent::Propagator;
use crate::spectrum::{
    default_grid, qrt_initial, spectrum_with, sum_rule_report, CorrelationVector, SpectrumKernel,
    SpectrumResult, SumRuleReport,
};
use crate::steady_state::{
    intensities, perturbative_steady_state_with, ChannelOperators, IntensityBreakdown,
    PerturbativeState,
};

/// Separation used for the canonical frame. Only the orientation enters the
/// generator, since the coupling is supplied separately.
const CANONICAL_SEPARATION: f64 = 100.0;

pub struct PointSolver {
    pub geometry: Geometry,
    pub generators: GeneratorSet,
    pub propagator: Propagator,
    pub operators: ChannelOperators,
    pub state: PerturbativeState,
}

impl PointSolver {
    pub fn new(drive: &DriveConfig) -> Result<Self> {
        Self::with_orientation(drive, &Vector3::x())
    }

    /// Solver for atoms separated along `n_hat` (must not be parallel to z).
    pub fn with_orientation(drive: &DriveConfig, n_hat: &Vector3<f64>) -> Result<Self> {
        let geometry = Geometry::separated(*n_hat, CANONICAL_SEPARATION)?;
        let generators = assemble_with(drive, &geometry, C64::new(1.0, 0.0), [0.0, 0.0])?;
        let propagator = Propagator::new(&generators)?;
        let operators = ChannelOperators::from_generators(&generators);
        let state = perturbative_steady_state_with(&generators, &propagator, &operators)?;
        Ok(Self {
            geometry,
            generators,
            propagator,
            operators,
            state,
        })
    }

    pub fn drive(&self) -> &DriveConfig {
        &self.generators.drive
    }

    pub fn intensities(&self) -> Result<IntensityBreakdown> {
        intensities(&self.state, &self.geometry)
    }

    pub fn correlations(&self) -> [CorrelationVector; 2] {
        [qrt_initial(0, &self.state), qrt_initial(1, &self.state)]
    }

    pub fn spectrum(&self, nu_grid: &[f64]) -> Result<SpectrumResult> {
        let corr = self.correlations();
        spectrum_with(
            &self.generators,
            &self.state,
            &self.propagator,
            &self.operators,
            [&corr[0], &corr[1]],
            nu_grid,
            &self.geometry,
        )
    }

    /// Spectrum on the default grid for this drive.
    pub fn default_spectrum(&self, points: usize) -> Result<SpectrumResult> {
        let d = self.drive();
        self.spectrum(&default_grid(d.rabi, d.detuning, points)?)
    }

    /// Evaluates `f` with a kernel borrowing this solver, for pointwise queries.
    pub fn with_kernel<T>(&self, f: impl FnOnce(&SpectrumKernel<'_>) -> Result<T>) -> Result<T> {
        let corr = self.correlations();
        let kernel = SpectrumKernel::new(
            &self.generators,
            &self.state,
            &self.propagator,
            &self.operators,
            [&corr[0], &corr[1]],
            &self.geometry,
        )?;
        f(&kernel)
    }

    pub fn sum_rules(&self, spec: &SpectrumResult, tolerance: f64) -> Result<SumRuleReport> {
        Ok(sum_rule_report(spec, &self.intensities()?, tolerance))
    }
}

/// Intensities over a list of drive points, evaluated in parallel and
/// returned in input order.
pub fn intensity_sweep(points: &[DriveConfig]) -> Vec<Result<IntensityBreakdown>> {
    points
        .par_iter()
        .map(|d| PointSolver::new(d)?.intensities())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::alpha_closed_form;

    #[test]
    fn sweep_preserves_order() {
        let pts: Vec<DriveConfig> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&s| DriveConfig::resonant_with_saturation(s).unwrap())
            .collect();
        let out = intensity_sweep(&pts);
        for (d, r) in pts.iter().zip(out) {
            let ib = r.unwrap();
            let s = d.saturation();
            assert!((ib.alpha - alpha_closed_form(s)).abs() < 1e-9);
        }
    }
}
