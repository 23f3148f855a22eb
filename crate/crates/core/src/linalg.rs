//! Factorization helpers: a QR-based least-squares solver for the real design
//! matrix and an LU-based solver for the complex impedance systems, both with
//! reciprocal condition estimates.

use nalgebra::{DMatrix, DVector};
use num_complex::{Complex64, ComplexFloat};

use crate::error::{Error, Result};

/// Reciprocal condition estimates below this are treated as rank deficient.
pub const RCOND_THRESHOLD: f64 = 1e-13;

/// Thin QR factorization of a tall real matrix `D = Q R`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    rcond: f64,
}

impl LeastSquares {
    /// Factorizes `design`; fails when it is not of full column rank.
    pub fn new(design: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = design.shape();
        if cols == 0 || rows < cols {
            return Err(Error::DegenerateDesign { rcond: 0.0 });
        }
        let qr = design.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let sv = r.singular_values();
        let max = sv.max();
        let min = sv.min();
        let rcond = if max > 0.0 { min / max } else { 0.0 };
        if !(rcond >= RCOND_THRESHOLD) {
            return Err(Error::DegenerateDesign { rcond });
        }
        Ok(Self { q, r, rcond })
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// Minimizer of `|D x - rhs|`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let qtb = self.q.tr_mul(rhs);
        self.r
            .solve_upper_triangular(&qtb)
            .expect("R has a nonzero diagonal once the rank check passed")
    }

    /// Column-wise minimizer for a matrix right-hand side.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let qtb = self.q.tr_mul(rhs);
        self.r
            .solve_upper_triangular(&qtb)
            .expect("R has a nonzero diagonal once the rank check passed")
    }

    /// `Tr((D^T D)^-1) = |R^-1|_F^2`, from triangular solves on `R^T`.
    pub fn trace_inverse_normal(&self) -> f64 {
        let n = self.r.ncols();
        let rt = self.r.transpose();
        // Column i of R^-T is the solution of R^T w = e_i; its squared norm is
        // the i-th diagonal entry of (R^T R)^-1.
        let w = rt
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("R has a nonzero diagonal once the rank check passed");
        w.norm_squared()
    }
}

/// LU factorization of a square complex matrix with a 1-norm reciprocal
/// condition estimate.
#[derive(Debug, Clone)]
pub struct ComplexSystem {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    l: DMatrix<Complex64>,
    u: DMatrix<Complex64>,
    rcond: f64,
}

impl ComplexSystem {
    pub fn new(a: DMatrix<Complex64>) -> Result<Self> {
        assert!(a.is_square(), "complex system must be square");
        let n = a.nrows();
        let anorm = one_norm(&a);
        let lu = a.lu();
        let u = lu.u();
        let u_diag_ok = (0..n).all(|i| u[(i, i)].norm() > 0.0);
        if !u_diag_ok || !anorm.is_finite() {
            return Err(Error::SingularModel { row: None, rcond: 0.0 });
        }
        let l = lu.l();
        let mut system = Self { lu, l, u, rcond: 0.0 };
        let inv_norm = system.estimate_inverse_one_norm();
        system.rcond = if inv_norm.is_finite() && inv_norm > 0.0 {
            1.0 / (anorm * inv_norm)
        } else {
            0.0
        };
        if !(system.rcond >= RCOND_THRESHOLD) {
            return Err(Error::SingularModel {
                row: None,
                rcond: system.rcond,
            });
        }
        Ok(system)
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        self.lu.solve(b).expect("nonsingular after construction")
    }

    /// Solves `A^H x = b` with the stored factors (`P A = L U`).
    fn solve_adjoint(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let w = self.u.ad_solve_upper_triangular(b).expect("nonsingular U");
        let mut v = self.l.ad_solve_lower_triangular(&w).expect("unit lower L");
        self.lu.p().inv_permute_rows(&mut v);
        v
    }

    /// Hager/Higham estimate of `|A^-1|_1`.
    fn estimate_inverse_one_norm(&self) -> f64 {
        let n = self.u.nrows();
        let mut x = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            estimate = y.iter().map(|v| v.norm()).sum::<f64>();
            let xi = y.map(|v| if v.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { v / v.norm() });
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx = z.iter().zip(x.iter()).map(|(zi, xi)| (zi.conj() * xi).re).sum::<f64>();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = DVector::zeros(n);
            x[j] = Complex64::new(1.0, 0.0);
        }
        // Higham's alternating-sign lower bound guards against the greedy
        // iteration stopping on an unlucky vector.
        let alt = DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)), 0.0)
        });
        let alt_est = 2.0 * self.solve(&alt).iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        estimate.max(alt_est)
    }
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_complex(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let d = random_real(20, 6, 3);
        let b = DVector::from_fn(20, |i, _| (i as f64).sin());
        let ls = LeastSquares::new(&d).unwrap();
        let x = ls.solve(&b);
        let normal = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * &b;
        for (a, e) in x.iter().zip(normal.iter()) {
            assert_relative_eq!(*a, *e, max_relative = 1e-10);
        }
        let tr = (d.transpose() * &d).try_inverse().unwrap().trace();
        assert_relative_eq!(ls.trace_inverse_normal(), tr, max_relative = 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let mut d = random_real(10, 4, 5);
        let col = d.column(0).into_owned();
        d.set_column(3, &(col * 2.0));
        assert!(matches!(LeastSquares::new(&d), Err(Error::DegenerateDesign { .. })));
        assert!(LeastSquares::new(&random_real(3, 4, 1)).is_err());
    }

    #[test]
    fn complex_condition_estimate_is_close() {
        for seed in 0..5 {
            let a = random_complex(12, seed);
            let sys = ComplexSystem::new(a.clone()).unwrap();
            let inv = a.clone().try_inverse().unwrap();
            let exact = 1.0 / (one_norm(&a) * one_norm(&inv));
            // The estimate never undershoots |A^-1|_1 by more than a small factor.
            assert!(sys.rcond() >= exact * 0.999 && sys.rcond() <= exact * 10.0, "{} vs {exact}", sys.rcond());
        }
    }

    #[test]
    fn adjoint_solve() {
        let a = random_complex(7, 11);
        let sys = ComplexSystem::new(a.clone()).unwrap();
        let b = DVector::from_fn(7, |i, _| Complex64::new(i as f64, 1.0));
        let x = sys.solve_adjoint(&b);
        let r = a.adjoint() * x - b;
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn singular_complex_system() {
        let mut a = random_complex(4, 2);
        let row = a.row(0).into_owned();
        a.set_row(2, &row);
        assert!(matches!(ComplexSystem::new(a), Err(Error::SingularModel { .. })));
    }
}
