//! Stationary state to second order in the photon-exchange coupling and the
//! intensities of the helicity-preserving channel.
//!
//! Every order is kept resolved by coupling channel: the first order is a sum
//! of `c_u x_u`, the second of `c_u c_v x_uv`. The configuration average
//! keeps the monomials whose phase dependence on the distance (through g) and
//! on the laser phase difference (through k_L . r12) cancels against the
//! detection phase of the observable. What survives is proportional to |g|^2,
//! so the averaged quantities are assembled from unit-amplitude channels.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::basis::{flip, kron, OperatorBasis, PairOperator, SingleAtomOperator, C64, REDUCED_DIM};
use crate::error::{CbsError, Result};
use crate::liouvillian::{Channel, GeneratorSet, Geometry};
use crate::resolvent::Propagator;

pub use crate::resolvent::resolvent_solve;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Sparse copies of the unit channel matrices.
#[derive(Clone)]
pub struct ChannelOperators {
    ops: [CsrMatrix<C64>; 4],
}

impl ChannelOperators {
    pub fn new(channels: &[DMatrix<C64>; 4]) -> Self {
        Self {
            ops: std::array::from_fn(|u| {
                let m = &channels[u];
                let mut coo = CooMatrix::new(m.nrows(), m.ncols());
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        let v = m[(r, c)];
                        if v != ZERO {
                            coo.push(r, c, v);
                        }
                    }
                }
                CsrMatrix::from(&coo)
            }),
        }
    }

    pub fn from_generators(gen: &GeneratorSet) -> Self {
        Self::new(&gen.channels)
    }

    /// `K_u x`.
    pub fn apply(&self, ch: Channel, x: &DVector<C64>) -> DVector<C64> {
        let m = &self.ops[ch.index()];
        let mut out = DVector::zeros(m.nrows());
        for (r, row) in m.row_iter().enumerate() {
            out[r] = row
                .col_indices()
                .iter()
                .zip(row.values())
                .map(|(&c, v)| v * x[c])
                .sum();
        }
        out
    }

    /// `K_u^T w`.
    pub fn apply_transpose(&self, ch: Channel, w: &DVector<C64>) -> DVector<C64> {
        let m = &self.ops[ch.index()];
        let mut out = DVector::zeros(m.ncols());
        for (r, row) in m.row_iter().enumerate() {
            let wr = w[r];
            if wr == ZERO {
                continue;
            }
            for (&c, v) in row.col_indices().iter().zip(row.values()) {
                out[c] += v * wr;
            }
        }
        out
    }

    /// `w^T K_u x`.
    pub fn bilinear(&self, ch: Channel, w: &DVector<C64>, x: &DVector<C64>) -> C64 {
        let m = &self.ops[ch.index()];
        let mut acc = ZERO;
        for (r, row) in m.row_iter().enumerate() {
            let wr = w[r];
            if wr == ZERO {
                continue;
            }
            let s: C64 = row
                .col_indices()
                .iter()
                .zip(row.values())
                .map(|(&c, v)| v * x[c])
                .sum();
            acc += wr * s;
        }
        acc
    }
}

/// Which atoms an observable involves, which fixes the phase its
/// configuration average must compensate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Both operators on the same atom.
    SameAtom,
    /// `sigma_21` on atom 1 and `sigma_12` on atom 2, detected with exp(i k . r12).
    Crossed12,
    /// `sigma_21` on atom 2 and `sigma_12` on atom 1, detected with exp(-i k . r12).
    Crossed21,
}

impl Pairing {
    /// Sum of channel laser charges that survives the configuration average.
    pub fn laser_charge(self) -> i32 {
        match self {
            Pairing::SameAtom => 0,
            Pairing::Crossed12 => 2,
            Pairing::Crossed21 => -2,
        }
    }

    pub fn of_atoms(alpha: usize, beta: usize) -> Self {
        match (alpha, beta) {
            (a, b) if a == b => Pairing::SameAtom,
            (0, 1) => Pairing::Crossed12,
            _ => Pairing::Crossed21,
        }
    }

    /// Channel pairs `(u, v)` whose product `c_u c_v` survives the average.
    pub fn products(self) -> Vec<(Channel, Channel)> {
        let mut out = Vec::new();
        for u in Channel::ALL {
            for v in Channel::ALL {
                if u.distance_charge() + v.distance_charge() == 0
                    && u.laser_charge() + v.laser_charge() == self.laser_charge()
                {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Channel pairs `(u, v)` whose product `c_u^* c_v` survives the average.
    pub fn conjugate_products(self) -> Vec<(Channel, Channel)> {
        let mut out = Vec::new();
        for u in Channel::ALL {
            for v in Channel::ALL {
                if v.distance_charge() == u.distance_charge()
                    && v.laser_charge() - u.laser_charge() == self.laser_charge()
                {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Stationary expectation values `<Q_n>` for n = 1..255 at orders 0, 1, 2 in g.
#[derive(Clone)]
pub struct PerturbativeState {
    pub order0: DVector<C64>,
    /// `sum_u c_u x_u` with the couplings of the generator set.
    pub order1: DVector<C64>,
    /// `sum_uv c_u c_v x_uv`.
    pub order2: DVector<C64>,
    pub couplings: [C64; 4],
    /// `x_u = G0 K_u x0`.
    pub first: [DVector<C64>; 4],
    /// `x_uv = G0 K_u G0 K_v x0`, indexed `[u][v]`.
    pub second: [[DVector<C64>; 4]; 4],
    /// `|Delta_{+1,+1}|^2` of the configuration.
    pub channel_weight: f64,
}

impl PerturbativeState {
    pub fn first(&self, u: Channel) -> &DVector<C64> {
        &self.first[u.index()]
    }

    pub fn second(&self, u: Channel, v: Channel) -> &DVector<C64> {
        &self.second[u.index()][v.index()]
    }

    /// Configuration-averaged second order for an observable of the given
    /// pairing, for unit |g|.
    pub fn averaged_order2(&self, pairing: Pairing) -> DVector<C64> {
        let mut out = DVector::zeros(REDUCED_DIM);
        for (u, v) in pairing.products() {
            out += self.second(u, v);
        }
        out
    }
}

pub fn perturbative_steady_state(gen: &GeneratorSet) -> Result<PerturbativeState> {
    let prop = Propagator::new(gen)?;
    perturbative_steady_state_with(gen, &prop, &ChannelOperators::from_generators(gen))
}

pub fn perturbative_steady_state_with(
    gen: &GeneratorSet,
    prop: &Propagator,
    ops: &ChannelOperators,
) -> Result<PerturbativeState> {
    let order0 = prop.g0(&gen.j);
    let first = Channel::ALL.map(|u| prop.g0(&ops.apply(u, &order0)));
    let second = Channel::ALL.map(|u| Channel::ALL.map(|v| prop.g0(&ops.apply(u, &first[v.index()]))));
    let couplings = Channel::ALL.map(|u| u.amplitude(gen.g));
    let mut order1 = DVector::zeros(REDUCED_DIM);
    let mut order2 = DVector::zeros(REDUCED_DIM);
    for u in Channel::ALL {
        order1 += &first[u.index()] * couplings[u.index()];
        for v in Channel::ALL {
            order2 += &second[u.index()][v.index()] * (couplings[u.index()] * couplings[v.index()]);
        }
    }
    for x in [&order0, &order1, &order2] {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CbsError::Numerical("non-finite steady state".into()));
        }
    }
    Ok(PerturbativeState {
        order0,
        order1,
        order2,
        couplings,
        first,
        second,
        channel_weight: gen.channel_weight(),
    })
}

/// All-orders stationary state `(A + V) <Q> + j = 0`, for consistency checks.
pub fn exact_steady_state(gen: &GeneratorSet) -> Result<DVector<C64>> {
    let m = &gen.a + &gen.v;
    resolvent_solve(&m, ZERO, &gen.j)
}

/// Coefficients `p` with `<op> = p0 / 4 + p . <Q>` for a two-atom operator.
#[derive(Debug, Clone)]
pub struct Observable {
    pub trace: C64,
    pub p: DVector<C64>,
}

impl Observable {
    pub fn new(op: &PairOperator) -> Self {
        let c = OperatorBasis::get().expand_pair(op);
        Self {
            trace: c[0],
            p: DVector::from_fn(REDUCED_DIM, |r, _| c[r + 1]),
        }
    }

    pub fn on_atom(atom: usize, op: &SingleAtomOperator) -> Self {
        let id = SingleAtomOperator::identity();
        Self::new(&if atom == 0 { kron(op, &id) } else { kron(&id, op) })
    }

    /// Expectation value from a vector of order k >= 1 (no trace contribution).
    pub fn eval(&self, x: &DVector<C64>) -> C64 {
        self.p.dot(x)
    }

    /// Expectation value at order zero.
    pub fn eval_order0(&self, x0: &DVector<C64>) -> C64 {
        self.trace * 0.25 + self.p.dot(x0)
    }
}

/// `sigma_12` of atom `atom`, the operator detected in the h||h channel.
pub fn dipole_observable(atom: usize) -> Observable {
    Observable::on_atom(atom, &flip(1, 2))
}

/// `sigma_22` of atom `atom`.
pub fn population_observable(atom: usize) -> Observable {
    Observable::on_atom(atom, &flip(2, 2))
}

/// `sigma_21^1 sigma_12^2`.
pub fn crossed_observable() -> Observable {
    Observable::new(&kron(&flip(2, 1), &flip(1, 2)))
}

/// Stationary intensities of the detected channel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntensityBreakdown {
    pub l_el: f64,
    pub c_el: f64,
    pub l_inel: f64,
    pub c_inel: f64,
    pub l_tot: f64,
    pub c_tot: f64,
    pub alpha: f64,
}

impl IntensityBreakdown {
    pub fn from_parts(l_el: f64, c_el: f64, l_tot: f64, c_tot: f64) -> Result<Self> {
        if !(l_tot > 0.0) {
            return Err(CbsError::Numerical(format!(
                "non-positive ladder intensity {l_tot:e}"
            )));
        }
        Ok(Self {
            l_el,
            c_el,
            l_inel: l_tot - l_el,
            c_inel: c_tot - c_el,
            l_tot,
            c_tot,
            alpha: 1.0 + c_tot / l_tot,
        })
    }

    /// All intensities multiplied by `factor`; alpha is unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            l_el: self.l_el * factor,
            c_el: self.c_el * factor,
            l_inel: self.l_inel * factor,
            c_inel: self.c_inel * factor,
            l_tot: self.l_tot * factor,
            c_tot: self.c_tot * factor,
            alpha: self.alpha,
        }
    }

    pub fn elastic(&self) -> f64 {
        self.l_el + self.c_el
    }
}

/// Channel-resolved first-order dipoles `<sigma_12^alpha>` per channel.
fn first_order_dipoles(state: &PerturbativeState) -> [[C64; 4]; 2] {
    std::array::from_fn(|atom| {
        let obs = dipole_observable(atom);
        Channel::ALL.map(|u| obs.eval(state.first(u)))
    })
}

fn checked_weight(state: &PerturbativeState) -> Result<f64> {
    let w = state.channel_weight;
    if !(w > 1e-300) {
        return Err(CbsError::InvalidParameter(
            "orientation along the laser axis does not couple to the detected channel".into(),
        ));
    }
    Ok(w)
}

/// Configuration-averaged elastic intensities `(L_el, C_el)` in units of
/// `|g|^2 |Delta_{+1,+1}|^2`.
pub fn elastic_intensities(state: &PerturbativeState, geom: &Geometry) -> Result<(f64, f64)> {
    let w = checked_weight(state)?;
    let cone = C64::from_polar(1.0, geom.cone_phase());
    let d = first_order_dipoles(state);
    let mut l_el = 0.0;
    for atom in d.iter() {
        for (u, v) in Pairing::SameAtom.conjugate_products() {
            l_el += (atom[u.index()].conj() * atom[v.index()]).re;
        }
    }
    let mut e12 = ZERO;
    for (u, v) in Pairing::Crossed12.conjugate_products() {
        e12 += d[0][u.index()].conj() * d[1][v.index()];
    }
    let c_el = 2.0 * (e12 * cone).re;
    Ok((l_el / w, c_el / w))
}

/// Configuration-averaged intensities in units of `|g|^2 |Delta_{+1,+1}|^2`.
///
/// The crossed terms carry the cone phase `(k + k_L) . r12` of `geom`, which
/// vanishes at exact backscattering.
pub fn intensities(state: &PerturbativeState, geom: &Geometry) -> Result<IntensityBreakdown> {
    let w = checked_weight(state)?;
    let cone = C64::from_polar(1.0, geom.cone_phase());
    let mut l_tot = 0.0;
    for atom in 0..2 {
        l_tot += population_observable(atom)
            .eval(&state.averaged_order2(Pairing::SameAtom))
            .re;
    }
    let c12 = crossed_observable().eval(&state.averaged_order2(Pairing::Crossed12));
    let c_tot = 2.0 * (c12 * cone).re;
    let (l_el, c_el) = elastic_intensities(state, geom)?;
    IntensityBreakdown::from_parts(l_el, c_el, l_tot / w, c_tot / w)
}

/// Intensities of a single configuration without any averaging, using the
/// couplings and laser phases stored in the generator set and the detection
/// phase factor exp(i k . r12). Speckle terms are included; units are absolute.
pub fn configuration_intensities(
    state: &PerturbativeState,
    phase: C64,
) -> Result<IntensityBreakdown> {
    let l_tot: f64 = (0..2)
        .map(|a| population_observable(a).eval(&state.order2).re)
        .sum();
    let c_tot = 2.0 * (crossed_observable().eval(&state.order2) * phase).re;
    let d: Vec<C64> = (0..2).map(|a| dipole_observable(a).eval(&state.order1)).collect();
    let l_el = d[0].norm_sqr() + d[1].norm_sqr();
    let c_el = 2.0 * (d[0].conj() * d[1] * phase).re;
    IntensityBreakdown::from_parts(l_el, c_el, l_tot, c_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{assemble, assemble_with, DriveConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn canonical(rabi: f64, detuning: f64) -> (GeneratorSet, Geometry) {
        let geom = Geometry::separated(Vector3::x(), 100.0).unwrap();
        let gen = assemble_with(
            &DriveConfig::new(rabi, detuning).unwrap(),
            &geom,
            C64::new(1.0, 0.0),
            [0.0, 0.0],
        )
        .unwrap();
        (gen, geom)
    }

    #[test]
    fn selection_rules() {
        use Channel::*;
        let same = Pairing::SameAtom.products();
        assert_eq!(same, vec![(Ket12, Bra12), (Bra12, Ket12), (Ket21, Bra21), (Bra21, Ket21)]);
        assert_eq!(Pairing::Crossed12.products(), vec![(Bra12, Ket21), (Ket21, Bra12)]);
        assert_eq!(Pairing::Crossed21.products(), vec![(Ket12, Bra21), (Bra21, Ket12)]);
        assert_eq!(Pairing::SameAtom.conjugate_products().len(), 4);
        assert!(Pairing::SameAtom.conjugate_products().iter().all(|(u, v)| u == v));
    }

    #[test]
    fn dark_without_drive() {
        let (gen, geom) = canonical(0.0, 0.0);
        let st = perturbative_steady_state(&gen).unwrap();
        // both atoms in |1>
        let p11 = Observable::on_atom(0, &flip(1, 1));
        assert_abs_diff_eq!(p11.eval_order0(&st.order0).re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!((&gen.a * &st.order0 + &gen.j).norm(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(dipole_observable(0).eval(&st.order1).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(crossed_observable().eval(&st.order2).norm(), 0.0, epsilon = 1e-15);
        if let Ok(ib) = intensities(&st, &geom) {
            assert!(ib.l_tot.abs() < 1e-20 && ib.l_el.abs() < 1e-20);
        }
    }

    #[test]
    fn order0_is_product_state() {
        let (gen, _) = canonical(1.3, 0.4);
        let st = perturbative_steady_state(&gen).unwrap();
        let basis = OperatorBasis::get();
        let single: Vec<C64> = {
            let m = gen.single[0];
            let a = m.fixed_view::<15, 15>(1, 1).into_owned();
            let rhs = -m.fixed_view::<15, 1>(1, 0).into_owned() * C64::new(0.5, 0.0);
            let x = a.lu().solve(&rhs).unwrap();
            std::iter::once(C64::new(0.5, 0.0)).chain(x.iter().copied()).collect()
        };
        for n in 1..256 {
            let (l, m) = (n / 16, n % 16);
            let _ = basis;
            assert_abs_diff_eq!((st.order0[n - 1] - single[l] * single[m]).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn order2_crossed_elements_are_conjugate() {
        let geom = Geometry::separated(Vector3::new(0.48, 0.6, 0.64), 30.0).unwrap();
        let gen = assemble(&DriveConfig::new(2.0, 1.0).unwrap(), &geom).unwrap();
        let st = perturbative_steady_state(&gen).unwrap();
        let a = st.order2[151];
        let b = st.order2[136];
        assert_abs_diff_eq!((a - b.conj()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn orders_scale_with_coupling() {
        let geom = Geometry::separated(Vector3::new(0.0, 0.6, 0.8), 30.0).unwrap();
        let cfg = DriveConfig::new(1.5, 0.5).unwrap();
        let g = C64::new(0.01, 0.02);
        let one = perturbative_steady_state(&assemble_with(&cfg, &geom, g, [0.1, 0.7]).unwrap()).unwrap();
        let two = perturbative_steady_state(&assemble_with(&cfg, &geom, g * 2.0, [0.1, 0.7]).unwrap()).unwrap();
        assert!((&two.order1 - &one.order1 * C64::new(2.0, 0.0)).norm() <= 1e-10 * two.order1.norm());
        assert!((&two.order2 - &one.order2 * C64::new(4.0, 0.0)).norm() <= 1e-10 * two.order2.norm());
    }

    #[test]
    fn breakdown_identities() {
        let (gen, geom) = canonical(3.0, 1.0);
        let st = perturbative_steady_state(&gen).unwrap();
        let ib = intensities(&st, &geom).unwrap();
        assert_abs_diff_eq!(ib.l_tot, ib.l_el + ib.l_inel, epsilon = 1e-15);
        assert_abs_diff_eq!(ib.c_tot, ib.c_el + ib.c_inel, epsilon = 1e-15);
        assert_abs_diff_eq!(ib.alpha, 1.0 + ib.c_tot / ib.l_tot, epsilon = 1e-15);
        assert!(ib.l_tot > 0.0 && ib.l_el >= 0.0 && ib.l_inel >= 0.0);
        let s = ib.scaled(4.0);
        assert_abs_diff_eq!(s.l_inel, 4.0 * ib.l_inel, epsilon = 1e-15);
        assert_eq!(s.alpha, ib.alpha);
    }
}
