//! Closed-form limits of the two-atom spectra used as reference values.
//!
//! Frequencies in units of gamma. Intensities are per unit
//! `|g|^2 |Delta_{+1,+1}|^2` unless stated otherwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Rational64;

/// `£(x1, x2) = x1 / (pi (x1^2 + x2^2))`: a Lorentzian of full width `2 x1`
/// in `x2`, or a dispersive resonance of width `2 x2` in `x1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianKernel {
    pub x1: f64,
    pub x2: f64,
}

impl LorentzianKernel {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn value(&self) -> f64 {
        kernel(self.x1, self.x2)
    }
}

pub fn kernel(x1: f64, x2: f64) -> f64 {
    x1 / (PI * (x1 * x1 + x2 * x2))
}

/// `(R1, R2, P)` of the resonant stationary intensities.
pub fn polynomials(s: f64) -> (f64, f64, f64) {
    let r1 = 2.0 / 9.0 * s * (6912.0 + s * (3168.0 + s * (264.0 + s * (20.0 + s))));
    let r2 = s * (1152.0 + s * (528.0 + s * (132.0 + s * 7.0))) / 3.0;
    let p = (1.0 + s).powi(2) * (12.0 + s) * (32.0 + 20.0 * s + s * s);
    (r1, r2, p)
}

/// Total ladder intensity `R2 / P` at zero detuning.
pub fn ladder_closed_form(s: f64) -> f64 {
    let (_, r2, p) = polynomials(s);
    r2 / p
}

/// Total crossed intensity `R1 / ((4 + s) P)` at zero detuning.
pub fn crossed_closed_form(s: f64) -> f64 {
    let (r1, _, p) = polynomials(s);
    r1 / ((4.0 + s) * p)
}

/// Enhancement factor `1 + R1 / ((4 + s) R2)` at zero detuning.
pub fn alpha_closed_form(s: f64) -> f64 {
    if s == 0.0 {
        return 2.0;
    }
    // the common factor s cancels
    let r1 = 2.0 / 9.0 * (6912.0 + s * (3168.0 + s * (264.0 + s * (20.0 + s))));
    let r2 = (1152.0 + s * (528.0 + s * (132.0 + s * 7.0))) / 3.0;
    1.0 + r1 / ((4.0 + s) * r2)
}

/// Limit of the enhancement factor for s -> infinity.
pub fn alpha_asymptotic() -> Rational64 {
    Rational64::new(23, 21)
}

/// Elastic ladder (= crossed) intensity `s / ((1 + s)^4 (1 + delta^2))`.
pub fn elastic_closed_form(s: f64, delta: f64) -> f64 {
    s / ((1.0 + s).powi(4) * (1.0 + delta * delta))
}

/// Direct and reversed two-photon amplitudes `(E1, E2)` in the weak-field limit.
pub fn weak_field_amplitudes(nu: f64, delta: f64, phi: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let e1 = -Complex64::from_polar(1.0, -phi / 2.0) * (one + i * delta)
        / ((one + i * (delta - nu)) * (one + i * (delta + nu)).powi(2));
    let e2 = -Complex64::from_polar(1.0, phi / 2.0) / ((one + i * delta).powi(2) + nu * nu);
    (e1, e2)
}

/// Weak-field ladder and crossed lineshapes (without the `Omega^4` prefactor).
pub fn weak_field_spectra(nu: f64, delta: f64) -> (f64, f64) {
    let den = (1.0 + (delta - nu).powi(2)) * (1.0 + (delta + nu).powi(2)).powi(2);
    let ladder = (2.0 * (1.0 + delta * delta) + 2.0 * delta * nu + nu * nu) / den;
    let crossed = 2.0 * (1.0 + delta * (delta + nu)) / den;
    (ladder, crossed)
}

/// Resonant weak-field densities including their `Omega^4` scale.
pub fn weak_field_resonant_densities(nu: f64, rabi: f64) -> (f64, f64) {
    let o4 = rabi.powi(4);
    let d = 1.0 + nu * nu;
    let ladder = o4 * (2.0 + nu * nu) / (2.0 * PI * d.powi(3));
    let crossed = o4 / (PI * d.powi(3));
    (ladder, crossed)
}

/// Resonant weak-field inelastic intensities `(7/16, 3/8) Omega^4`.
pub fn weak_field_inelastic(rabi: f64) -> (f64, f64) {
    let o4 = rabi.powi(4);
    (7.0 / 16.0 * o4, 3.0 / 8.0 * o4)
}

/// One Lorentzian term of a strong-field spectrum: `weight * £(width, nu - center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub weight: Rational64,
    pub width: Rational64,
    /// Center in units of Omega.
    pub center: Rational64,
}

impl Line {
    fn new(w: (i64, i64), width: (i64, i64), center: (i64, i64)) -> Self {
        Self {
            weight: Rational64::new(w.0, w.1),
            width: Rational64::new(width.0, width.1),
            center: Rational64::new(center.0, center.1),
        }
    }

    pub fn eval(&self, nu: f64, rabi: f64) -> f64 {
        to_f64(self.weight) * kernel(to_f64(self.width), nu - to_f64(self.center) * rabi)
    }
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn symmetric(out: &mut Vec<Line>, w: (i64, i64), width: (i64, i64), center: (i64, i64)) {
    out.push(Line::new(w, width, (-center.0, center.1)));
    out.push(Line::new(w, width, center));
}

/// Lorentzian terms of the strong-field ladder spectrum, to be multiplied by `(1/Omega)^2`.
pub fn strong_field_ladder_lines() -> Vec<Line> {
    let mut out = vec![Line::new((1, 2), (1, 1), (0, 1)), Line::new((1, 4), (3, 1), (0, 1))];
    symmetric(&mut out, (14, 9), (3, 2), (1, 2));
    symmetric(&mut out, (1, 9), (3, 2), (1, 1));
    symmetric(&mut out, (5, 18), (5, 2), (1, 1));
    symmetric(&mut out, (1, 72), (3, 1), (2, 1));
    out
}

/// Lorentzian terms of the strong-field crossed spectrum, to be multiplied by `(1/Omega)^2`.
pub fn strong_field_crossed_lines() -> Vec<Line> {
    let mut out = vec![Line::new((1, 2), (2, 1), (0, 1)), Line::new((1, 4), (3, 1), (0, 1))];
    symmetric(&mut out, (-1, 6), (5, 2), (1, 1));
    symmetric(&mut out, (1, 72), (3, 1), (2, 1));
    out
}

/// Weight of the dispersive pair of the crossed spectrum, multiplied by `(1/Omega)^3`.
pub fn strong_field_dispersive_weight() -> Rational64 {
    Rational64::new(208, 45)
}

pub fn total_weight(lines: &[Line]) -> Rational64 {
    lines.iter().map(|l| l.weight).sum()
}

/// Strong-field ladder and crossed densities at zero detuning.
pub fn strong_field_spectra(nu: f64, rabi: f64) -> (f64, f64) {
    let scale = rabi.powi(-2);
    let ladder: f64 = strong_field_ladder_lines().iter().map(|l| l.eval(nu, rabi)).sum();
    let crossed: f64 = strong_field_crossed_lines().iter().map(|l| l.eval(nu, rabi)).sum();
    let disp = to_f64(strong_field_dispersive_weight())
        * (kernel(nu + rabi / 2.0, 1.5) - kernel(nu - rabi / 2.0, 1.5));
    (scale * ladder, scale * crossed + disp / rabi.powi(3))
}

/// Strong-field inelastic intensities `(14/3, 4/9) / Omega^2`.
pub fn strong_field_inelastic(rabi: f64) -> (f64, f64) {
    let scale = rabi.powi(-2);
    (
        scale * to_f64(total_weight(&strong_field_ladder_lines())),
        scale * to_f64(total_weight(&strong_field_crossed_lines())),
    )
}

/// Centers of the seven resonances for a strong detuned drive, ascending:
/// `-2W, -W, -(W + delta)/2, 0, (W - delta)/2, W, 2W` with `W = sqrt(Omega^2 + delta^2)`.
pub fn line_positions(rabi: f64, delta: f64) -> [f64; 7] {
    let w = rabi.hypot(delta);
    let mut out = [
        -2.0 * w,
        -w,
        -(w + delta) / 2.0,
        0.0,
        (w - delta) / 2.0,
        w,
        2.0 * w,
    ];
    out.sort_by(f64::total_cmp);
    out
}
