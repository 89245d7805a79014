//! Solvers for `(z - A) x = b` on the reduced 255-element space.
//!
//! `A` is the Kronecker sum of two 16x16 single-atom generators with the trace
//! element removed. Away from `z = 0` the system is solved as a Sylvester
//! equation in the complex Schur bases of the single-atom generators, which
//! costs O(16^3) per right-hand side. At `z = 0` a dense LU factorization of
//! `A` is used.

use nalgebra::linalg::{Schur, LU};
use nalgebra::{DMatrix, DVector, Dyn, SMatrix};

use crate::basis::{C64, REDUCED_DIM, SINGLE_DIM};
use crate::error::{CbsError, Result};
use crate::liouvillian::{GeneratorSet, SingleGenerator};

/// Largest acceptable condition estimate.
pub const MAX_CONDITION: f64 = 1e12;

/// Below this |z| the Sylvester route is replaced by a dense solve.
const DENSE_THRESHOLD: f64 = 1e-8;

type Mat16 = SMatrix<C64, SINGLE_DIM, SINGLE_DIM>;

/// Dense solve of `(z - A) x = rhs` for an arbitrary square `A`.
pub fn resolvent_solve(a: &DMatrix<C64>, z: C64, rhs: &DVector<C64>) -> Result<DVector<C64>> {
    let n = a.nrows();
    if a.ncols() != n || rhs.len() != n {
        return Err(CbsError::InvalidParameter(format!(
            "dimension mismatch: {}x{} matrix, {} right-hand side",
            a.nrows(),
            a.ncols(),
            rhs.len()
        )));
    }
    let m = DMatrix::identity(n, n) * z - a;
    let lu = factorize(&m, z)?;
    let mut x = lu.solve(rhs).ok_or(CbsError::Singular { z })?;
    // one step of iterative refinement
    let r = rhs - &m * &x;
    if r.norm() > 1e-14 * rhs.norm() {
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }
    let res = (rhs - &m * &x).norm();
    if res > 1e-10 * rhs.norm().max(f64::MIN_POSITIVE) {
        return Err(CbsError::Numerical(format!(
            "resolvent residual {res:.3e} at z = {z}"
        )));
    }
    Ok(x)
}

fn factorize(m: &DMatrix<C64>, z: C64) -> Result<LU<C64, Dyn, Dyn>> {
    let lu = m.clone().lu();
    let diag = lu.u().diagonal();
    let max = diag.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min = diag.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        return Err(CbsError::Singular { z });
    }
    let condition = max / min;
    if condition > MAX_CONDITION {
        return Err(CbsError::IllConditioned { z, condition });
    }
    Ok(lu)
}

struct SchurForm {
    q: Mat16,
    t: Mat16,
}

impl SchurForm {
    fn new(m: &Mat16) -> Result<Self> {
        // The generators have an exact zero eigenvalue, which stalls the
        // relative deflation test; the shift leaves the Schur vectors unchanged.
        // The QR iteration occasionally stalls for particular parameters;
        // other shift directions then converge.
        for k in 0..8 {
            let angle = k as f64 * 0.7;
            let shift = Mat16::identity() * C64::from_polar(1.0 + m.norm(), angle);
            if let Some(schur) = Schur::try_new(m + shift, f64::EPSILON, 10_000) {
                let (q, t) = schur.unpack();
                return Ok(Self { q, t: t - shift });
            }
        }
        Err(CbsError::Numerical("Schur decomposition did not converge".into()))
    }

    fn eigenvalues(&self) -> [C64; SINGLE_DIM] {
        std::array::from_fn(|i| self.t[(i, i)])
    }
}

/// Solver for `z X - M1 X - X M2^T = B` with both factors in Schur form.
struct Sylvester {
    left: SchurForm,
    right: SchurForm,
    null_pair: (usize, usize),
    scale: f64,
}

impl Sylvester {
    fn new(m1: &Mat16, m2t: &Mat16) -> Result<Self> {
        let left = SchurForm::new(m1)?;
        let right = SchurForm::new(m2t)?;
        let smallest = |e: [C64; SINGLE_DIM]| {
            (0..SINGLE_DIM)
                .min_by(|&i, &j| e[i].norm().total_cmp(&e[j].norm()))
                .unwrap()
        };
        let null_pair = (smallest(left.eigenvalues()), smallest(right.eigenvalues()));
        let scale = m1.norm() + m2t.norm();
        Ok(Self {
            left,
            right,
            null_pair,
            scale,
        })
    }

    fn condition(&self, z: C64) -> f64 {
        let (l, r) = (self.left.eigenvalues(), self.right.eigenvalues());
        let mut gap = f64::INFINITY;
        for (i, li) in l.iter().enumerate() {
            for (k, rk) in r.iter().enumerate() {
                if (i, k) != self.null_pair {
                    gap = gap.min((z - li - rk).norm());
                }
            }
        }
        (self.scale + z.norm()) / gap
    }

    fn solve(&self, z: C64, b: &Mat16) -> Mat16 {
        let (q1, t) = (&self.left.q, &self.left.t);
        let (q2, s) = (&self.right.q, &self.right.t);
        let bt = q1.adjoint() * b * q2;
        let mut x = Mat16::zeros();
        for k in 0..SINGLE_DIM {
            let mut rhs = bt.column(k).into_owned();
            for i in 0..k {
                rhs += x.column(i) * s[(i, k)];
            }
            let shift = z - s[(k, k)];
            for row in (0..SINGLE_DIM).rev() {
                let mut acc = rhs[row];
                for c in row + 1..SINGLE_DIM {
                    acc += t[(row, c)] * x[(c, k)];
                }
                let d = shift - t[(row, row)];
                x[(row, k)] = if (row, k) == self.null_pair && d.norm() == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    acc / d
                };
            }
        }
        q1 * x * q2.adjoint()
    }
}

fn to_grid(v: &DVector<C64>, first: C64) -> Mat16 {
    Mat16::from_fn(|l, m| {
        let n = l * SINGLE_DIM + m;
        if n == 0 {
            first
        } else {
            v[n - 1]
        }
    })
}

fn from_grid(x: &Mat16) -> DVector<C64> {
    DVector::from_fn(REDUCED_DIM, |r, _| {
        let n = r + 1;
        x[(n / SINGLE_DIM, n % SINGLE_DIM)]
    })
}

/// Resolvent `G(z) = (z - A)^{-1}` of the independent-atom generator.
pub struct Propagator {
    a: DMatrix<C64>,
    forward: Sylvester,
    transposed: Sylvester,
    // Right null vector of the 256-dim Kronecker sum, normalized to 1 on the trace element.
    null_right: Mat16,
    lu0: LU<C64, Dyn, Dyn>,
    g0: DMatrix<C64>,
}

impl Propagator {
    pub fn new(gen: &GeneratorSet) -> Result<Self> {
        Self::from_single(&gen.single[0], &gen.single[1])
    }

    pub fn from_single(m1: &SingleGenerator, m2: &SingleGenerator) -> Result<Self> {
        let (a, _) = crate::liouvillian::kronecker_reduced(m1, m2);
        let forward = Sylvester::new(m1, &m2.transpose())?;
        let transposed = Sylvester::new(&m1.transpose(), m2)?;
        let r1 = single_null_vector(m1)?;
        let r2 = single_null_vector(m2)?;
        let null_right = r1 * r2.transpose();
        let z = C64::new(0.0, 0.0);
        let lu0 = factorize(&(-&a), z)?;
        let g0 = lu0
            .try_inverse()
            .ok_or(CbsError::Singular { z })?;
        Ok(Self {
            a,
            forward,
            transposed,
            null_right,
            lu0,
            g0,
        })
    }

    pub fn a(&self) -> &DMatrix<C64> {
        &self.a
    }

    /// Dense `G(0) = -A^{-1}`.
    pub fn g0_matrix(&self) -> &DMatrix<C64> {
        &self.g0
    }

    /// `G(0) b = -A^{-1} b`.
    pub fn g0(&self, b: &DVector<C64>) -> DVector<C64> {
        let mut x = self.lu0.solve(b).expect("factorization checked at construction");
        let r = b - (-&self.a) * &x;
        if let Some(dx) = self.lu0.solve(&r) {
            x += dx;
        }
        x
    }

    /// `G(0)^T b`.
    pub fn g0_transpose(&self, b: &DVector<C64>) -> DVector<C64> {
        self.g0.tr_mul(b)
    }

    /// Condition estimate of `z - A` from the eigenvalue gaps of the Kronecker sum.
    pub fn condition(&self, z: C64) -> f64 {
        self.forward.condition(z)
    }

    fn check(&self, z: C64) -> Result<()> {
        let condition = self.condition(z);
        if !condition.is_finite() {
            return Err(CbsError::Singular { z });
        }
        if condition > MAX_CONDITION {
            return Err(CbsError::IllConditioned { z, condition });
        }
        Ok(())
    }

    /// `G(z) b`.
    pub fn solve(&self, z: C64, b: &DVector<C64>) -> Result<DVector<C64>> {
        if z.norm() < DENSE_THRESHOLD {
            return if z.norm() == 0.0 {
                Ok(self.g0(b))
            } else {
                resolvent_solve(&self.a, z, b)
            };
        }
        self.check(z)?;
        let x = self.forward.solve(z, &to_grid(b, C64::new(0.0, 0.0)));
        // The exact solution has no trace component; remove the rounding
        // error that the null mode of the Kronecker sum amplifies by 1/z.
        let x = x - self.null_right * x[(0, 0)];
        Ok(from_grid(&x))
    }

    /// `G(z)^T b`.
    pub fn solve_transpose(&self, z: C64, b: &DVector<C64>) -> Result<DVector<C64>> {
        if z.norm() < DENSE_THRESHOLD {
            return if z.norm() == 0.0 {
                Ok(self.g0_transpose(b))
            } else {
                resolvent_solve(&self.a.transpose(), z, b)
            };
        }
        self.check(z)?;
        // The trace row decouples; choose its source so that the transposed
        // system has no component along the null mode.
        let mut grid = to_grid(b, C64::new(0.0, 0.0));
        let overlap: C64 = grid.component_mul(&self.null_right).sum();
        grid[(0, 0)] = -overlap / self.null_right[(0, 0)];
        let x = self.transposed.solve(z, &grid);
        Ok(from_grid(&x))
    }
}

fn single_null_vector(m: &SingleGenerator) -> Result<SMatrix<C64, SINGLE_DIM, 1>> {
    let block = m.fixed_view::<15, 15>(1, 1).into_owned();
    let rhs = -m.fixed_view::<15, 1>(1, 0).into_owned();
    let tail = block
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CbsError::Numerical("single-atom generator is singular".into()))?;
    let mut r = SMatrix::<C64, SINGLE_DIM, 1>::zeros();
    r[0] = C64::new(1.0, 0.0);
    r.fixed_rows_mut::<15>(1).copy_from(&tail);
    Ok(r)
}
