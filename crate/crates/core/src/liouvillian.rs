//! Generator of the two-atom master equation for expectation values.
//!
//! Operators evolve in the Heisenberg picture, in the frame rotating at the
//! laser frequency. Frequencies are in units of gamma (half the excited-state
//! decay rate) and lengths in units of 1/k0. The quantization axis is the
//! laser direction; the laser drives |1> <-> |4> with polarization e_{+1},
//! scattered light is detected on |1> <-> |2> with e_{-1}.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};

use crate::basis::{
    flip, on_first, on_second, OperatorBasis, PairOperator, SingleAtomOperator, C64, PAIR_DIM,
    REDUCED_DIM, SINGLE_DIM,
};
use crate::error::{CbsError, Result};

/// Units of all rates and frequencies.
pub const GAMMA: f64 = 1.0;

/// Far-field coupling strength above which the perturbative treatment is suspect.
pub const FAR_FIELD_LIMIT: f64 = 0.1;

pub type SingleGenerator = SMatrix<C64, SINGLE_DIM, SINGLE_DIM>;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Laser parameters. The laser polarization is fixed to e_{+1}.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriveConfig {
    /// Rabi frequency on the |1> <-> |4> transition.
    pub rabi: f64,
    /// Laser detuning from the atomic resonance.
    pub detuning: f64,
}

impl DriveConfig {
    pub fn new(rabi: f64, detuning: f64) -> Result<Self> {
        let cfg = Self { rabi, detuning };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(CbsError::InvalidParameter(format!(
                "Rabi frequency must be finite and non-negative, got {}",
                self.rabi
            )));
        }
        if !self.detuning.is_finite() {
            return Err(CbsError::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        GAMMA
    }

    /// Saturation parameter `s = Omega^2 / 2 (gamma^2 + delta^2)`.
    pub fn saturation(&self) -> f64 {
        self.rabi * self.rabi / (2.0 * (GAMMA * GAMMA + self.detuning * self.detuning))
    }

    /// Drive at exact resonance with the given saturation parameter.
    pub fn resonant_with_saturation(s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(CbsError::InvalidParameter(format!(
                "saturation must be non-negative, got {s}"
            )));
        }
        Self::new((2.0 * s).sqrt() * GAMMA, 0.0)
    }

    /// Generalized Rabi frequency `sqrt(Omega^2 + delta^2)`.
    pub fn generalized_rabi(&self) -> f64 {
        self.rabi.hypot(self.detuning)
    }
}

/// Positions of the two atoms together with laser and detection directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub r1: Vector3<f64>,
    pub r2: Vector3<f64>,
    /// Laser propagation direction; must be the quantization axis z.
    pub laser_dir: Vector3<f64>,
    /// Detection direction.
    pub detection_dir: Vector3<f64>,
}

impl Geometry {
    pub fn new(
        r1: Vector3<f64>,
        r2: Vector3<f64>,
        laser_dir: Vector3<f64>,
        detection_dir: Vector3<f64>,
    ) -> Result<Self> {
        let geom = Self {
            r1,
            r2,
            laser_dir,
            detection_dir,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Backscattering geometry: laser along z, detection along -z.
    pub fn backscattering(r1: Vector3<f64>, r2: Vector3<f64>) -> Result<Self> {
        Self::new(r1, r2, Vector3::z(), -Vector3::z())
    }

    /// Atoms separated by `k0_r12` along the unit vector `n_hat`, atom 2 at the origin.
    pub fn separated(n_hat: Vector3<f64>, k0_r12: f64) -> Result<Self> {
        check_unit(&n_hat)?;
        Self::backscattering(n_hat * k0_r12, Vector3::zeros())
    }

    pub fn validate(&self) -> Result<()> {
        check_unit(&self.laser_dir)?;
        check_unit(&self.detection_dir)?;
        if (self.laser_dir - Vector3::z()).norm() > 1e-12 {
            return Err(CbsError::InvalidParameter(
                "the laser must propagate along the quantization axis z".into(),
            ));
        }
        if self.separation() <= 0.0 {
            return Err(CbsError::InvalidParameter("atoms must not coincide".into()));
        }
        Ok(())
    }

    pub fn separation(&self) -> f64 {
        (self.r1 - self.r2).norm()
    }

    /// Dimensionless separation k0 r12.
    pub fn k0_r12(&self) -> f64 {
        self.separation()
    }

    /// Unit vector along r1 - r2.
    pub fn n_hat(&self) -> Vector3<f64> {
        (self.r1 - self.r2) / self.separation()
    }

    /// Laser phases k_L . r_alpha of the two atoms.
    pub fn laser_phases(&self) -> [f64; 2] {
        [self.laser_dir.dot(&self.r1), self.laser_dir.dot(&self.r2)]
    }

    /// Angle between the detection direction and exact backscattering.
    pub fn scattering_angle(&self) -> f64 {
        let q = (self.detection_dir + self.laser_dir).norm();
        2.0 * (0.5 * q).min(1.0).asin()
    }

    /// Phase factor exp(i k . r12) of the detected field (|k| = k0).
    pub fn detection_phase(&self) -> C64 {
        C64::from_polar(1.0, self.detection_dir.dot(&(self.r1 - self.r2)))
    }

    /// Cone phase (k + k_L) . r12, zero at exact backscattering.
    pub fn cone_phase(&self) -> f64 {
        (self.detection_dir + self.laser_dir).dot(&(self.r1 - self.r2))
    }
}

fn check_unit(v: &Vector3<f64>) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(CbsError::NonUnitVector { norm });
    }
    Ok(())
}

/// Spherical helicity vectors: e_{+-1} = -+(x +- i y)/sqrt(2), e_0 = z.
pub fn helicity_vector(q: i32) -> Vector3<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match q {
        1 => Vector3::new(C64::new(-s, 0.0), C64::new(0.0, -s), ZERO),
        -1 => Vector3::new(C64::new(s, 0.0), C64::new(0.0, -s), ZERO),
        0 => Vector3::new(ZERO, ZERO, C64::new(1.0, 0.0)),
        _ => panic!("helicity must be -1, 0 or +1"),
    }
}

/// Far-field coupling `g = (3i / 2 k0 r) exp(i k0 r)`.
pub fn coupling_constant(k0_r12: f64) -> Result<C64> {
    if !(k0_r12.is_finite() && k0_r12 > 0.0) {
        return Err(CbsError::InvalidParameter(format!(
            "interatomic distance must be positive, got {k0_r12}"
        )));
    }
    let g = I * (1.5 / k0_r12) * C64::from_polar(1.0, k0_r12);
    if g.norm() >= FAR_FIELD_LIMIT {
        log::warn!(
            "|g| = {:.3} at k0 r12 = {k0_r12}: outside the far-field regime",
            g.norm()
        );
    }
    Ok(g)
}

/// Transverse projector `1 - n n`.
pub fn transverse_projector(n_hat: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_unit(n_hat)?;
    Ok(Matrix3::identity() - n_hat * n_hat.transpose())
}

/// Bilinear helicity component `e_q1 . P . e_q2` (no complex conjugation).
pub fn helicity_component(projector: &Matrix3<f64>, q1: i32, q2: i32) -> C64 {
    let a = helicity_vector(q1);
    let b = helicity_vector(q2);
    let p = projector.map(|v| C64::new(v, 0.0));
    (a.transpose() * p * b)[(0, 0)]
}

/// `|Delta_{+1,+1}|^2`, the geometric weight of the detected channel.
pub fn channel_weight(projector: &Matrix3<f64>) -> f64 {
    helicity_component(projector, 1, 1).norm_sqr()
}

/// Cartesian components of the dipole lowering operator
/// `D = -e_{-1} s12 + e_0 s13 - e_{+1} s14`.
pub fn dipole_lowering() -> [SingleAtomOperator; 3] {
    let em = helicity_vector(-1);
    let e0 = helicity_vector(0);
    let ep = helicity_vector(1);
    let (s12, s13, s14) = (flip(1, 2), flip(1, 3), flip(1, 4));
    std::array::from_fn(|i| s12 * (-em[i]) + s13 * e0[i] - s14 * ep[i])
}

/// Laser coupling operator `D^dag . e_L` with e_L = e_{+1}.
pub fn laser_raising() -> SingleAtomOperator {
    let d = dipole_lowering();
    let el = helicity_vector(1);
    (0..3).fold(SingleAtomOperator::zeros(), |acc, i| {
        acc + d[i].adjoint() * el[i]
    })
}

/// Operator-valued pieces of one atom's Liouvillian, embedded in a Hilbert
/// space of arbitrary size so that the same formula acts on single-atom
/// and two-atom operators.
struct LocalTerms<const N: usize> {
    detuning: f64,
    excited: SMatrix<C64, N, N>,
    drive: SMatrix<C64, N, N>,
    lowering: [SMatrix<C64, N, N>; 3],
}

impl<const N: usize> LocalTerms<N> {
    fn new(
        cfg: &DriveConfig,
        laser_phase: f64,
        embed: impl Fn(&SingleAtomOperator) -> SMatrix<C64, N, N>,
    ) -> Self {
        let d = dipole_lowering();
        let excited = d.iter().fold(SingleAtomOperator::zeros(), |acc, di| {
            acc + di.adjoint() * di
        });
        let omega = C64::from_polar(cfg.rabi, laser_phase);
        let x = laser_raising();
        let drive = x * omega + x.adjoint() * omega.conj();
        Self {
            detuning: cfg.detuning,
            excited: embed(&excited),
            drive: embed(&drive),
            lowering: std::array::from_fn(|i| embed(&d[i])),
        }
    }

    fn apply(&self, q: &SMatrix<C64, N, N>) -> SMatrix<C64, N, N> {
        let comm = |a: &SMatrix<C64, N, N>, b: &SMatrix<C64, N, N>| a * b - b * a;
        let mut out = comm(&self.excited, q) * (-I * self.detuning);
        out += comm(&self.drive, q) * (-0.5 * I);
        for d in &self.lowering {
            let dd = d.adjoint();
            out += (dd * comm(q, d) + comm(&dd, q) * d) * C64::new(GAMMA, 0.0);
        }
        out
    }
}

/// One atom's Liouvillian, evaluated by matrix algebra on 4x4 operators.
pub struct SingleAtomGenerator {
    terms: LocalTerms<4>,
}

impl SingleAtomGenerator {
    pub fn apply(&self, q: &SingleAtomOperator) -> SingleAtomOperator {
        self.terms.apply(q)
    }

    /// Matrix `M` with `L q_n = sum_m M[n, m] q_m`.
    pub fn matrix(&self) -> SingleGenerator {
        let basis = OperatorBasis::get();
        let mut m = SingleGenerator::zeros();
        for n in 0..SINGLE_DIM {
            let row = basis.expand_single(&self.apply(basis.single(n)));
            for (k, v) in row.iter().enumerate() {
                m[(n, k)] = *v;
            }
        }
        m
    }
}

/// Liouvillian of an atom whose laser phase is `laser_phase = k_L . r`.
pub fn build_single_atom_generator(cfg: &DriveConfig, laser_phase: f64) -> SingleAtomGenerator {
    SingleAtomGenerator {
        terms: LocalTerms::new(cfg, laser_phase, |a| *a),
    }
}

/// Independent-atom Liouvillian acting directly on 16x16 pair operators.
pub struct PairLocalGenerator {
    atoms: [LocalTerms<16>; 2],
}

impl PairLocalGenerator {
    pub fn new(cfg: &DriveConfig, laser_phases: [f64; 2]) -> Self {
        Self {
            atoms: [
                LocalTerms::new(cfg, laser_phases[0], on_first),
                LocalTerms::new(cfg, laser_phases[1], on_second),
            ],
        }
    }

    pub fn apply(&self, q: &PairOperator) -> PairOperator {
        self.atoms[0].apply(q) + self.atoms[1].apply(q)
    }
}

/// The four pieces of the photon-exchange Liouvillian. `Ket12` and `Bra12`
/// are the two terms of L_12 (atom 2 emits, atom 1 absorbs) proportional to
/// g and g* respectively; `Ket21`, `Bra21` likewise for L_21.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Ket12,
    Bra12,
    Ket21,
    Bra21,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Ket12, Channel::Bra12, Channel::Ket21, Channel::Bra21];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Power of exp(i arg g) carried by the channel amplitude.
    pub fn distance_charge(self) -> i32 {
        match self {
            Channel::Ket12 | Channel::Ket21 => 1,
            Channel::Bra12 | Channel::Bra21 => -1,
        }
    }

    /// Power of exp(i k_L . r12) acquired when the laser phases are moved
    /// from the atoms into the couplings.
    pub fn laser_charge(self) -> i32 {
        match self {
            Channel::Ket12 | Channel::Bra21 => -1,
            Channel::Bra12 | Channel::Ket21 => 1,
        }
    }

    /// Amplitude multiplying this channel for coupling constant `g`.
    pub fn amplitude(self, g: C64) -> C64 {
        if self.distance_charge() > 0 {
            g
        } else {
            g.conj()
        }
    }
}

/// Photon-exchange Liouvillian L_12 + L_21 on pair operators, with the
/// coupling constant factored out of each channel.
pub struct InteractionGenerator {
    // sum_i T_ij D^dag_{alpha,i} for the absorbing atom alpha, per component j.
    absorb: [[PairOperator; 3]; 2],
    lowering: [[PairOperator; 3]; 2],
}

impl InteractionGenerator {
    pub fn new(projector: &Matrix3<f64>) -> Self {
        let d = dipole_lowering();
        let lowering = [
            std::array::from_fn(|i| on_first(&d[i])),
            std::array::from_fn(|i| on_second(&d[i])),
        ];
        let absorb = std::array::from_fn(|atom| {
            std::array::from_fn(|j| {
                (0..3).fold(PairOperator::zeros(), |acc, i| {
                    acc + lowering[atom][i].adjoint() * C64::new(GAMMA * projector[(i, j)], 0.0)
                })
            })
        });
        Self { absorb, lowering }
    }

    /// Action of one channel with unit amplitude.
    pub fn apply_channel(&self, channel: Channel, q: &PairOperator) -> PairOperator {
        let (absorber, emitter) = match channel {
            Channel::Ket12 | Channel::Bra12 => (0, 1),
            Channel::Ket21 | Channel::Bra21 => (1, 0),
        };
        let mut out = PairOperator::zeros();
        match channel {
            // D_a^dag . T . [Q, D_b]
            Channel::Ket12 | Channel::Ket21 => {
                for j in 0..3 {
                    let d = &self.lowering[emitter][j];
                    out += self.absorb[absorber][j] * (q * d - d * q);
                }
            }
            // [D_b^dag, Q] . T* . D_a
            Channel::Bra12 | Channel::Bra21 => {
                for j in 0..3 {
                    let dd = self.lowering[emitter][j].adjoint();
                    let t_d = self.absorb[absorber][j].adjoint();
                    out += (dd * q - q * dd) * t_d;
                }
            }
        }
        out
    }

    /// Full action for a given coupling constant.
    pub fn apply(&self, g: C64, q: &PairOperator) -> PairOperator {
        Channel::ALL.iter().fold(PairOperator::zeros(), |acc, &ch| {
            acc + self.apply_channel(ch, q) * ch.amplitude(g)
        })
    }
}

pub fn build_interaction_generator(geom: &Geometry) -> Result<InteractionGenerator> {
    Ok(InteractionGenerator::new(&transverse_projector(&geom.n_hat())?))
}

/// Linear equations of motion `d<Q>/dt = (A + V) <Q> + j` on the 255-element
/// space, together with the pieces they were assembled from.
#[derive(Clone)]
pub struct GeneratorSet {
    pub drive: DriveConfig,
    /// Independent-atom part.
    pub a: DMatrix<C64>,
    /// Photon exchange for the coupling constant `g`.
    pub v: DMatrix<C64>,
    /// Inhomogeneity from the trace element.
    pub j: DVector<C64>,
    pub g: C64,
    pub laser_phases: [f64; 2],
    /// Single-atom generators; `A` is their Kronecker sum with the trace element removed.
    pub single: [SingleGenerator; 2],
    /// Unit-amplitude channel matrices, `V = sum_c amplitude(c) * channels[c]`.
    pub channels: [DMatrix<C64>; 4],
    pub projector: Matrix3<f64>,
}

impl GeneratorSet {
    pub fn channel(&self, ch: Channel) -> &DMatrix<C64> {
        &self.channels[ch.index()]
    }

    /// Geometric weight |Delta_{+1,+1}|^2 of this configuration.
    pub fn channel_weight(&self) -> f64 {
        channel_weight(&self.projector)
    }
}

/// Reduced matrix of the Kronecker sum `M1 (x) 1 + 1 (x) M2` and the
/// inhomogeneity produced by the trace element `<Q_0> = 1/4`.
pub fn kronecker_reduced(m1: &SingleGenerator, m2: &SingleGenerator) -> (DMatrix<C64>, DVector<C64>) {
    let full = |n: usize, k: usize| -> C64 {
        let (l, m) = (n / SINGLE_DIM, n % SINGLE_DIM);
        let (lp, mp) = (k / SINGLE_DIM, k % SINGLE_DIM);
        let mut v = ZERO;
        if m == mp {
            v += m1[(l, lp)];
        }
        if l == lp {
            v += m2[(m, mp)];
        }
        v
    };
    let a = DMatrix::from_fn(REDUCED_DIM, REDUCED_DIM, |r, c| full(r + 1, c + 1));
    let j = DVector::from_fn(REDUCED_DIM, |r, _| full(r + 1, 0) * 0.25);
    (a, j)
}

/// Projects a pair superoperator onto the basis, returning the full 256x256
/// matrix `M[n, m]` with `S Q_n = sum_m M[n, m] Q_m`.
pub fn superoperator_matrix(action: impl Fn(&PairOperator) -> PairOperator) -> DMatrix<C64> {
    let basis = OperatorBasis::get();
    let mut m = DMatrix::zeros(PAIR_DIM, PAIR_DIM);
    for n in 0..PAIR_DIM {
        let row = basis.expand_pair(&action(&basis.pair(n)));
        for (k, v) in row.iter().enumerate() {
            m[(n, k)] = *v;
        }
    }
    m
}

/// Generator for the physical configuration: laser phases and coupling
/// constant both follow from the atom positions.
pub fn assemble(cfg: &DriveConfig, geom: &Geometry) -> Result<GeneratorSet> {
    let g = coupling_constant(geom.k0_r12())?;
    assemble_with(cfg, geom, g, geom.laser_phases())
}

/// Generator with the coupling constant and the laser phases supplied
/// independently of the geometry, which then only fixes the orientation.
pub fn assemble_with(
    cfg: &DriveConfig,
    geom: &Geometry,
    g: C64,
    laser_phases: [f64; 2],
) -> Result<GeneratorSet> {
    cfg.validate()?;
    geom.validate()?;
    let projector = transverse_projector(&geom.n_hat())?;
    let single = [
        build_single_atom_generator(cfg, laser_phases[0]).matrix(),
        build_single_atom_generator(cfg, laser_phases[1]).matrix(),
    ];
    check_unique_steady_state(&single)?;
    let (a, j) = kronecker_reduced(&single[0], &single[1]);
    let channels = interaction_channels(&projector);
    let v = combine_channels(&channels, g);
    Ok(GeneratorSet {
        drive: *cfg,
        a,
        v,
        j,
        g,
        laser_phases,
        single,
        channels,
        projector,
    })
}

/// Unit-amplitude channel matrices on the reduced space.
pub fn interaction_channels(projector: &Matrix3<f64>) -> [DMatrix<C64>; 4] {
    let inter = InteractionGenerator::new(projector);
    Channel::ALL.map(|ch| {
        let full = superoperator_matrix(|q| inter.apply_channel(ch, q));
        full.view((1, 1), (REDUCED_DIM, REDUCED_DIM)).into_owned()
    })
}

pub fn combine_channels(channels: &[DMatrix<C64>; 4], g: C64) -> DMatrix<C64> {
    let mut v = DMatrix::zeros(REDUCED_DIM, REDUCED_DIM);
    for ch in Channel::ALL {
        v += &channels[ch.index()] * ch.amplitude(g);
    }
    v
}

// A is singular exactly when one of the atoms has more than one stationary
// state, i.e. when its reduced 15x15 block is singular.
fn check_unique_steady_state(single: &[SingleGenerator; 2]) -> Result<()> {
    for m in single {
        let block = m.fixed_view::<15, 15>(1, 1).into_owned();
        let lu = block.lu();
        let diag = lu.u().diagonal();
        let max = diag.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let min = diag.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(min > 1e-13 * max.max(1.0)) {
            return Err(CbsError::Numerical(
                "single-atom generator has no unique steady state; A is singular".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn coupling_constant_values() {
        let g = coupling_constant(1.5 * PI).unwrap();
        assert_abs_diff_eq!(g.re, 1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(g.im, 0.0, epsilon = 1e-15);
        for r in [0.5, 3.0, 17.0, 1e4] {
            assert_abs_diff_eq!(coupling_constant(r).unwrap().norm(), 1.5 / r, epsilon = 1e-15);
        }
        assert!(coupling_constant(1e9).unwrap().norm() < 1e-8);
        assert!(coupling_constant(0.0).is_err());
        assert!(coupling_constant(-2.0).is_err());
    }

    #[test]
    fn projector_properties() {
        let p = transverse_projector(&Vector3::z()).unwrap();
        assert_eq!(p, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)));
        let px = transverse_projector(&Vector3::x()).unwrap();
        let c = helicity_component(&px, 1, 1);
        assert_abs_diff_eq!(c.re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-15);
        assert!(transverse_projector(&Vector3::new(1.0, 1.0, 0.0)).is_err());

        for (theta, phi) in [(0.3, 1.1), (1.2, -2.0), (2.9, 0.4)] {
            let n = Vector3::new(
                f64::sin(theta) * f64::cos(phi),
                f64::sin(theta) * f64::sin(phi),
                f64::cos(theta),
            );
            let p = transverse_projector(&n).unwrap();
            assert_abs_diff_eq!((p * p - p).norm(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!((p - p.transpose()).norm(), 0.0, epsilon = 0.0);
            let mut eig: Vec<f64> = p.symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            assert_abs_diff_eq!(eig[0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(eig[1], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(eig[2], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(
                channel_weight(&p),
                theta.sin().powi(4) / 4.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn helicity_vectors_are_orthonormal() {
        for q1 in -1..=1 {
            for q2 in -1..=1 {
                let a = helicity_vector(q1);
                let b = helicity_vector(q2);
                let ip = a.dotc(&b);
                assert_abs_diff_eq!(ip.re, if q1 == q2 { 1.0 } else { 0.0 }, epsilon = 1e-15);
                assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
            }
        }
        // laser couples |1> -> |4>
        let x = laser_raising();
        assert_abs_diff_eq!((x + flip(4, 1)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn excited_population_decays_at_twice_gamma() {
        let gen = build_single_atom_generator(&DriveConfig::new(0.0, 0.7).unwrap(), 0.0);
        let out = gen.apply(&flip(2, 2));
        assert_abs_diff_eq!((out + flip(2, 2) * C64::new(2.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let gen = build_single_atom_generator(&DriveConfig::new(3.0, -1.0).unwrap(), 0.4);
        assert_abs_diff_eq!(gen.apply(&SingleAtomOperator::identity()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn single_atom_steady_state_matches_two_level_bloch() {
        for rabi in [0.1, 1.0, 4.0] {
            let cfg = DriveConfig::new(rabi, 0.0).unwrap();
            let m = build_single_atom_generator(&cfg, 0.0).matrix();
            // <q_n>: solve rows 1..16 with <q_0> = 1/2
            let a = m.fixed_view::<15, 15>(1, 1).into_owned();
            let rhs = -m.fixed_view::<15, 1>(1, 0).into_owned() * C64::new(0.5, 0.0);
            let x = a.lu().solve(&rhs).unwrap();
            // sigma_44 = (1 - mu2 - mu3 + mu1) / 4 -> coefficients on q0..q3 are (1/2, 1/2, -1/2, -1/2)
            let p4 = 0.25 * C64::new(1.0, 0.0) + 0.5 * (x[0] - x[1] - x[2]);
            let s = cfg.saturation();
            assert_abs_diff_eq!(p4.re, s / (2.0 * (1.0 + s)), epsilon = 1e-13);
            assert_abs_diff_eq!(p4.im, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn interaction_vanishes_without_coupling_and_is_real_linear() {
        let geom = Geometry::separated(Vector3::new(0.6, 0.0, 0.8), 40.0).unwrap();
        let inter = build_interaction_generator(&geom).unwrap();
        let basis = OperatorBasis::get();
        let q = basis.pair(152) + basis.pair(37) * C64::new(0.3, -0.2);
        assert_eq!(inter.apply(C64::new(0.0, 0.0), &q), PairOperator::zeros());
        let g = C64::new(0.02, -0.013);
        let once = inter.apply(g, &q);
        let twice = inter.apply(g * 2.0, &q);
        assert_abs_diff_eq!((twice - once * C64::new(2.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn interaction_preserves_hermiticity() {
        let geom = Geometry::separated(Vector3::new(0.0, 0.6, -0.8), 25.0).unwrap();
        let inter = build_interaction_generator(&geom).unwrap();
        let local = PairLocalGenerator::new(&DriveConfig::new(2.0, 1.5).unwrap(), [0.3, -1.1]);
        // deterministic pseudo-random Hermitian operator
        let mut h = PairOperator::zeros();
        for i in 0..16 {
            for j in 0..16 {
                let x = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
                let y = ((i * 7 + j * 29) % 11) as f64 / 11.0 - 0.5;
                h[(i, j)] = C64::new(x, y);
            }
        }
        let h = (h + h.adjoint()) * C64::new(0.5, 0.0);
        let g = C64::new(0.03, 0.05);
        let out = inter.apply(g, &h);
        assert_abs_diff_eq!((out - out.adjoint()).norm(), 0.0, epsilon = 1e-14);
        let out = local.apply(&h);
        assert_abs_diff_eq!((out - out.adjoint()).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn channels_have_no_trace_component() {
        let geom = Geometry::separated(Vector3::new(0.0, 0.6, -0.8), 25.0).unwrap();
        let inter = build_interaction_generator(&geom).unwrap();
        for ch in Channel::ALL {
            let full = superoperator_matrix(|q| inter.apply_channel(ch, q));
            assert_abs_diff_eq!(full.row(0).norm(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(full.column(0).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::backscattering(Vector3::zeros(), Vector3::zeros()).is_err());
        assert!(Geometry::new(
            Vector3::x(),
            Vector3::zeros(),
            Vector3::x(),
            -Vector3::x()
        )
        .is_err());
        let g = Geometry::separated(Vector3::x(), 10.0).unwrap();
        assert_abs_diff_eq!(g.scattering_angle(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.cone_phase(), 0.0, epsilon = 1e-15);
    }
}
