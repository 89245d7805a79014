//! The four run modes.

use std::f64::consts::PI;

use cbs_core::averaging::{
    angular_factor_analytic, cbs_cone, cone_half_width, monte_carlo_average, DisorderModel,
};
use cbs_core::liouvillian::{channel_weight, coupling_constant, transverse_projector};
use cbs_core::model::intensity_sweep;
use cbs_core::oracles::{
    alpha_closed_form, to_f64, crossed_closed_form, elastic_closed_form, ladder_closed_form};
use cbs_core::spectrum::{
    check_sum_rule, default_grid, integrate_with_tails, normalized_spectra, uniform_grid, SUM_RULE_TOLERANCE,
};
use cbs_core::{CbsError, DriveConfig, PointSolver};
use nalgebra::Vector3;

use crate::config::{units, ConfigError, Disorder, RawConfig, Units};
use crate::output::Table;

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(String),
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "invalid configuration: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<CbsError> for RunError {
    fn from(e: CbsError) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else {
            RunError::Config(e.to_string())
        }
    }
}

/// Largest tolerated deviation of compare-oracles from the closed forms.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    IntensitySweep,
    Spectrum,
    CompareOracles,
    Cone,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::IntensitySweep => "intensity-sweep",
            Mode::Spectrum => "spectrum",
            Mode::CompareOracles => "compare-oracles",
            Mode::Cone => "cone",
        }
    }
}

pub fn run(mode: Mode, raw: &RawConfig, seed: u64) -> Result<Table, RunError> {
    match mode {
        Mode::IntensitySweep => sweep(raw, seed),
        Mode::Spectrum => spectrum(raw, seed),
        Mode::CompareOracles => compare(raw),
        Mode::Cone => cone(raw, seed),
    }
}

fn drive(raw: &RawConfig) -> Result<DriveConfig, RunError> {
    let Some(rabi) = raw.number("rabi")? else {
        return Err(RunError::Config("'rabi' is required".into()));
    };
    let detuning = raw.number("detuning")?.unwrap_or(0.0);
    Ok(DriveConfig::new(rabi, detuning)?)
}

fn disorder_model(d: &Disorder, seed: u64) -> Result<DisorderModel, RunError> {
    let m = DisorderModel {
        mean_separation: d.mean_separation,
        width: d.width,
        samples: d.samples,
        seed,
    };
    m.validate()?;
    Ok(m)
}

/// Multiplier from per-unit values to the requested units; records the
/// relevant inputs and prefactors in the table.
fn unit_factor(raw: &RawConfig, seed: u64, table: &mut Table) -> Result<f64, RunError> {
    match units(raw)? {
        Units::Unit => {
            table.input("units", "unit");
            Ok(1.0)
        }
        Units::Configuration { k0_r12, polar } => {
            table.input("units", "configuration");
            table.input("k0_r12", k0_r12);
            table.input("orientation_polar", polar);
            let n = Vector3::new(polar.sin(), 0.0, polar.cos());
            let w = channel_weight(&transverse_projector(&n)?);
            let f = coupling_constant(k0_r12)?.norm_sqr() * w;
            table.result("prefactor", f);
            Ok(f)
        }
        Units::Averaged => {
            table.input("units", "averaged");
            let d = Disorder::from_raw(raw)?;
            let model = disorder_model(&d, seed)?;
            record_disorder(table, &d);
            let f = to_f64(angular_factor_analytic().background) * model.mean_coupling_sqr();
            table.result("prefactor", f);
            if d.monte_carlo {
                let est = monte_carlo_average(&model, 1, |c, o| {
                    o[0] = c.weight();
                    Ok(())
                })?;
                table.result("sampled_prefactor", est.mean[0]);
                table.result("sampled_prefactor_std_error", est.std_error[0]);
            }
            Ok(f)
        }
    }
}

fn record_disorder(table: &mut Table, d: &Disorder) {
    table.input("mean_separation", d.mean_separation);
    table.input("width", d.width);
    table.input("samples", d.samples);
    table.input("monte_carlo", d.monte_carlo);
}

fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>, RunError> {
    if !(min > 0.0 && max >= min) || points == 0 || (points == 1 && min != max) || (points > 1 && min == max) {
        return Err(RunError::Config(format!(
            "Rabi grid needs 0 < rabi_min <= rabi_max and a matching point count, got [{min}, {max}] with {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect())
}

fn sweep(raw: &RawConfig, seed: u64) -> Result<Table, RunError> {
    let mut t = Table::new(
        Mode::IntensitySweep.name(),
        &["rabi", "detuning", "l_el", "c_el", "l_inel", "c_inel", "alpha"],
    );
    let rabi = match (raw.number("rabi_min")?, raw.number("rabi_max")?, raw.number("rabi")?) {
        (None, None, Some(o)) => {
            t.input("rabi", o);
            vec![o]
        }
        (lo, hi, _) => {
            let lo = lo.unwrap_or(0.1);
            let hi = hi.unwrap_or(1000.0);
            let n = raw.parsed("rabi_points")?.unwrap_or(61);
            t.input("rabi_min", lo);
            t.input("rabi_max", hi);
            t.input("rabi_points", n);
            log_grid(lo, hi, n)?
        }
    };
    let detunings = match (raw.list("detunings")?, raw.number("detuning")?) {
        (Some(l), _) => l,
        (None, Some(d)) => vec![d],
        (None, None) => vec![0.0],
    };
    t.input(
        "detunings",
        detunings.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
    );
    t.input("seed", seed);
    let factor = unit_factor(raw, seed, &mut t)?;
    let mut points = Vec::new();
    for &d in &detunings {
        for &o in &rabi {
            points.push(DriveConfig::new(o, d)?);
        }
    }
    for (p, r) in points.iter().zip(intensity_sweep(&points)) {
        let ib = r?.scaled(factor);
        t.push(vec![p.rabi, p.detuning, ib.l_el, ib.c_el, ib.l_inel, ib.c_inel, ib.alpha]);
    }
    Ok(t)
}

fn spectrum(raw: &RawConfig, seed: u64) -> Result<Table, RunError> {
    let d = drive(raw)?;
    let points = raw.parsed("points")?.unwrap_or(2001usize);
    let grid = match (raw.number("nu_min")?, raw.number("nu_max")?) {
        (Some(lo), Some(hi)) => uniform_grid(lo, hi, points)?,
        (None, None) => default_grid(d.rabi, d.detuning, points)?,
        _ => return Err(RunError::Config("give both 'nu_min' and 'nu_max'".into())),
    };
    let normalize = raw.flag("normalize")?.unwrap_or(false);
    let tolerance = raw.number("sum_rule_tolerance")?.unwrap_or(SUM_RULE_TOLERANCE);
    if tolerance <= 0.0 {
        return Err(RunError::Config("'sum_rule_tolerance' must be positive".into()));
    }
    let mut t = Table::new(Mode::Spectrum.name(), &["nu", "ladder", "crossed"]);
    t.input("rabi", d.rabi);
    t.input("detuning", d.detuning);
    t.input("nu_min", grid[0]);
    t.input("nu_max", grid[grid.len() - 1]);
    t.input("points", points);
    t.input("normalize", normalize);
    t.input("sum_rule_tolerance", tolerance);
    t.input("seed", seed);
    let factor = if normalize {
        t.input("units", "unit");
        1.0
    } else {
        unit_factor(raw, seed, &mut t)?
    };

    let solver = PointSolver::new(&d)?;
    let ib = solver.intensities()?;
    let spec = solver.spectrum(&grid)?;
    if !spec.skipped.is_empty() {
        log::warn!("{} grid points skipped as ill-conditioned", spec.skipped.len());
    }
    let report = check_sum_rule(&spec, &ib, tolerance)?;
    let (out, ib_out) = if normalize {
        (normalized_spectra(&spec, &ib)?, ib.scaled(1.0 / ib.l_inel))
    } else {
        (spec.scaled(factor), ib.scaled(factor))
    };
    let (li, _) = integrate_with_tails(&out.nu_grid, &out.ladder_density);
    let (ci, _) = integrate_with_tails(&out.nu_grid, &out.crossed_density);
    t.result("elastic_weight", out.elastic_weight);
    t.result("l_el", ib_out.l_el);
    t.result("c_el", ib_out.c_el);
    t.result("l_inel", ib_out.l_inel);
    t.result("c_inel", ib_out.c_inel);
    t.result("alpha", ib.alpha);
    t.result("ladder_integral", li);
    t.result("crossed_integral", ci);
    t.result("ladder_sum_rule_error", report.ladder_error);
    t.result("crossed_sum_rule_error", report.crossed_error);
    t.result("skipped", spec.skipped.len() as f64);
    for i in 0..out.len() {
        t.push(vec![out.nu_grid[i], out.ladder_density[i], out.crossed_density[i]]);
    }
    Ok(t)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn compare(raw: &RawConfig) -> Result<Table, RunError> {
    let sat = raw.list("saturations")?.unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
    if sat.is_empty() || sat.iter().any(|&s| s <= 0.0) {
        return Err(RunError::Config("'saturations' must be positive".into()));
    }
    let mut t = Table::new(
        Mode::CompareOracles.name(),
        &[
            "s", "rabi", "alpha", "alpha_oracle", "alpha_rel_err", "l_tot", "l_tot_oracle",
            "l_tot_rel_err", "c_tot", "c_tot_oracle", "c_tot_rel_err", "l_el", "l_el_oracle",
            "l_el_rel_err",
        ],
    );
    t.input("saturations", sat.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    let points: Vec<DriveConfig> = sat
        .iter()
        .map(|&s| DriveConfig::resonant_with_saturation(s))
        .collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for (&s, r) in sat.iter().zip(intensity_sweep(&points)) {
        let ib = r?;
        let (a, l, c, e) = (
            alpha_closed_form(s),
            ladder_closed_form(s),
            crossed_closed_form(s),
            elastic_closed_form(s, 0.0),
        );
        let errs = [rel(ib.alpha, a), rel(ib.l_tot, l), rel(ib.c_tot, c), rel(ib.l_el, e)];
        worst = errs.iter().cloned().fold(worst, f64::max);
        t.push(vec![
            s,
            (2.0 * s).sqrt(),
            ib.alpha,
            a,
            errs[0],
            ib.l_tot,
            l,
            errs[1],
            ib.c_tot,
            c,
            errs[2],
            ib.l_el,
            e,
            errs[3],
        ]);
    }
    let alpha_worst = t.rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    t.result("max_alpha_rel_err", alpha_worst);
    t.result("max_rel_err", worst);
    eprintln!("max relative error of alpha vs closed form: {alpha_worst:.3e}");
    if worst > ORACLE_TOLERANCE {
        return Err(RunError::Numerical(format!(
            "numeric results deviate from the closed forms by {worst:.3e}"
        )));
    }
    Ok(t)
}

fn cone(raw: &RawConfig, seed: u64) -> Result<Table, RunError> {
    let d = drive(raw)?;
    let dis = Disorder::from_raw(raw)?;
    let model = disorder_model(&dis, seed)?;
    let theta_max = raw
        .number("theta_max")?
        .unwrap_or(2.0 * cone_half_width(dis.mean_separation));
    let n: usize = raw.parsed("theta_points")?.unwrap_or(101);
    if !(theta_max > 0.0) || theta_max > PI || n < 2 {
        return Err(RunError::Config(
            "cone needs 0 < theta_max <= pi and at least 2 angles".into(),
        ));
    }
    let theta = uniform_grid(0.0, theta_max, n)?;
    let ib = PointSolver::new(&d)?.intensities()?;
    let p = cbs_cone(&theta, &ib, &model, dis.monte_carlo)?;
    let mut cols = vec!["theta", "analytic", "valid"];
    if dis.monte_carlo {
        cols.extend(["monte_carlo", "monte_carlo_error"]);
    }
    let mut t = Table::new(Mode::Cone.name(), &cols);
    t.input("rabi", d.rabi);
    t.input("detuning", d.detuning);
    t.input("theta_max", theta_max);
    t.input("theta_points", n);
    record_disorder(&mut t, &dis);
    t.input("seed", seed);
    t.result("alpha", ib.alpha);
    t.result("half_width", cone_half_width(dis.mean_separation));
    for i in 0..n {
        let mut row = vec![theta[i], p.analytic[i], if p.valid[i] { 1.0 } else { 0.0 }];
        if let (Some(m), Some(e)) = (&p.monte_carlo, &p.monte_carlo_error) {
            row.push(m[i]);
            row.push(e[i]);
        }
        t.push(row);
    }
    Ok(t)
}
