//! Operator basis for a single J=0 -> J=1 atom and its two-atom tensor products.
//!
//! Levels are ordered |1> (ground, m=0), |2> (m=-1), |3> (m=0), |4> (m=+1).
//! The sixteen single-atom basis operators are trace-orthonormal, so every
//! expansion coefficient is a Hilbert-Schmidt projection and no coefficient
//! table is ever written by hand.

use std::sync::OnceLock;

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{CbsError, Result};

pub type C64 = Complex64;
/// Operator on one atom (4x4).
pub type SingleAtomOperator = SMatrix<C64, 4, 4>;
/// Operator on the atom pair, atom 1 is the outer Kronecker factor (16x16).
pub type PairOperator = SMatrix<C64, 16, 16>;

/// Number of single-atom basis operators.
pub const SINGLE_DIM: usize = 16;
/// Size of the two-atom operator space, trace element included.
pub const PAIR_DIM: usize = 256;
/// Size of the reduced space with the trace element removed.
pub const REDUCED_DIM: usize = 255;

/// Basis positions of the operators the scattering observables need.
pub mod idx {
    pub const HALF_IDENTITY: usize = 0;
    pub const SIGMA_14: usize = 4;
    pub const SIGMA_41: usize = 5;
    pub const SIGMA_12: usize = 8;
    pub const SIGMA_21: usize = 9;
}

/// `|k><l|` with 1-based level labels.
pub fn flip(k: usize, l: usize) -> SingleAtomOperator {
    let mut m = SingleAtomOperator::zeros();
    m[(k - 1, l - 1)] = C64::new(1.0, 0.0);
    m
}

fn diag(values: [f64; 4]) -> SingleAtomOperator {
    let mut m = SingleAtomOperator::zeros();
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = C64::new(*v, 0.0);
    }
    m
}

/// The sixteen single-atom basis operators in their fixed order:
/// 1/2, mu1/2, mu2/2, mu3/2, s14, s41, s13, s31, s12, s21, s34, s43, s42, s24, s32, s23.
pub fn single_atom_basis() -> [SingleAtomOperator; SINGLE_DIM] {
    // mu1 = s22 - s33 + s44 - s11, mu2 = s22 - s33 - s44 + s11, mu3 = s22 + s33 - s44 - s11
    [
        diag([0.5, 0.5, 0.5, 0.5]),
        diag([-0.5, 0.5, -0.5, 0.5]),
        diag([0.5, 0.5, -0.5, -0.5]),
        diag([-0.5, 0.5, 0.5, -0.5]),
        flip(1, 4),
        flip(4, 1),
        flip(1, 3),
        flip(3, 1),
        flip(1, 2),
        flip(2, 1),
        flip(3, 4),
        flip(4, 3),
        flip(4, 2),
        flip(2, 4),
        flip(3, 2),
        flip(2, 3),
    ]
}

/// Position `(l, m)` of a two-atom basis element `q_l (x) q_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwoAtomIndex {
    pub l: usize,
    pub m: usize,
}

impl TwoAtomIndex {
    pub fn new(l: usize, m: usize) -> Result<Self> {
        if l >= SINGLE_DIM || m >= SINGLE_DIM {
            return Err(CbsError::InvalidParameter(format!(
                "basis index ({l}, {m}) out of range 0..16"
            )));
        }
        Ok(Self { l, m })
    }

    /// Packed index `n = 16 l + m`, including the trace element `n = 0`.
    pub fn full(self) -> usize {
        SINGLE_DIM * self.l + self.m
    }

    /// Position in a 255-element reduced vector (`n - 1`).
    pub fn slot(self) -> Result<usize> {
        pack_index(self.l, self.m).map(|n| n - 1)
    }
}

/// Packed index of `(l, m)` in the 255-element space. The trace element
/// `(0, 0)` is not part of that space and is rejected.
pub fn pack_index(l: usize, m: usize) -> Result<usize> {
    let idx = TwoAtomIndex::new(l, m)?;
    if l == 0 && m == 0 {
        return Err(CbsError::ExcludedTraceElement);
    }
    Ok(idx.full())
}

/// Inverse of [`pack_index`].
pub fn unpack_index(n: usize) -> Result<TwoAtomIndex> {
    if n == 0 || n >= PAIR_DIM {
        return Err(CbsError::InvalidParameter(format!(
            "packed index {n} outside 1..=255"
        )));
    }
    Ok(TwoAtomIndex {
        l: n / SINGLE_DIM,
        m: n % SINGLE_DIM,
    })
}

/// `a (x) b` with atom 1 as the outer factor.
pub fn kron(a: &SingleAtomOperator, b: &SingleAtomOperator) -> PairOperator {
    let mut out = PairOperator::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..4 {
                for l in 0..4 {
                    out[(4 * i + k, 4 * j + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Single-atom operator acting on atom 1 of the pair.
pub fn on_first(a: &SingleAtomOperator) -> PairOperator {
    kron(a, &SingleAtomOperator::identity())
}

/// Single-atom operator acting on atom 2 of the pair.
pub fn on_second(a: &SingleAtomOperator) -> PairOperator {
    kron(&SingleAtomOperator::identity(), a)
}

/// Precomputed basis with the sparsity pattern of every element, shared
/// read-only by all projections.
pub struct OperatorBasis {
    single: [SingleAtomOperator; SINGLE_DIM],
    // Nonzero entries (row, col, value) of each single-atom element.
    entries: Vec<Vec<(usize, usize, C64)>>,
}

impl OperatorBasis {
    pub fn get() -> &'static OperatorBasis {
        static BASIS: OnceLock<OperatorBasis> = OnceLock::new();
        BASIS.get_or_init(|| {
            let single = single_atom_basis();
            let entries = single
                .iter()
                .map(|q| {
                    let mut nz = Vec::new();
                    for r in 0..4 {
                        for c in 0..4 {
                            if q[(r, c)].norm() > 0.0 {
                                nz.push((r, c, q[(r, c)]));
                            }
                        }
                    }
                    nz
                })
                .collect();
            OperatorBasis { single, entries }
        })
    }

    pub fn single(&self, i: usize) -> &SingleAtomOperator {
        &self.single[i]
    }

    pub fn singles(&self) -> &[SingleAtomOperator; SINGLE_DIM] {
        &self.single
    }

    /// Two-atom basis element `Q_n = q_l (x) q_m`.
    pub fn pair(&self, n: usize) -> PairOperator {
        kron(&self.single[n / SINGLE_DIM], &self.single[n % SINGLE_DIM])
    }

    /// Coefficients `Tr(q_i^dag a)` of a single-atom operator.
    pub fn expand_single(&self, a: &SingleAtomOperator) -> [C64; SINGLE_DIM] {
        let mut out = [C64::new(0.0, 0.0); SINGLE_DIM];
        for (i, nz) in self.entries.iter().enumerate() {
            out[i] = nz.iter().map(|&(r, c, v)| v.conj() * a[(r, c)]).sum();
        }
        out
    }

    /// Coefficients `c_n = Tr(Q_n^dag op)` so that `op = sum_n c_n Q_n`.
    pub fn expand_pair(&self, op: &PairOperator) -> [C64; PAIR_DIM] {
        let mut out = [C64::new(0.0, 0.0); PAIR_DIM];
        for (l, nz_l) in self.entries.iter().enumerate() {
            for (m, nz_m) in self.entries.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(a, b, ql) in nz_l {
                    for &(c, d, qm) in nz_m {
                        acc += (ql * qm).conj() * op[(4 * a + c, 4 * b + d)];
                    }
                }
                out[SINGLE_DIM * l + m] = acc;
            }
        }
        out
    }

    /// Inverse of [`OperatorBasis::expand_pair`].
    pub fn reconstruct_pair(&self, coeffs: &[C64]) -> PairOperator {
        assert_eq!(coeffs.len(), PAIR_DIM);
        let mut out = PairOperator::zeros();
        for (l, nz_l) in self.entries.iter().enumerate() {
            for (m, nz_m) in self.entries.iter().enumerate() {
                let c = coeffs[SINGLE_DIM * l + m];
                if c.norm() == 0.0 {
                    continue;
                }
                for &(a, b, ql) in nz_l {
                    for &(cc, d, qm) in nz_m {
                        out[(4 * a + cc, 4 * b + d)] += c * ql * qm;
                    }
                }
            }
        }
        out
    }
}

/// Free-function form of [`OperatorBasis::expand_pair`].
pub fn expand_two_atom_operator(op: &PairOperator) -> [C64; PAIR_DIM] {
    OperatorBasis::get().expand_pair(op)
}
