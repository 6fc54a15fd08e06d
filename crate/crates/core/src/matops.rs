//! Dense matrix helpers shared by every other module.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>`. The systems handled here are
//! tiny (state and input dimension of a few units, Kronecker blocks up to
//! 36×36), so everything is dense and solved directly.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default cap on the 1-norm condition estimate before a system is declared singular.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;
/// Absolute symmetry tolerance used by the PSD checks.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Default tolerance for `is_psd`.
pub const PSD_TOL: f64 = 1e-9;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

/// Builds a matrix from row slices, rejecting ragged rows and non-finite entries.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Dimension("matrix must have at least one row and one column".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    let m = Mat::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Kronecker product; block (i, j) equals `a[(i, j)] * b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(a.nrows() * br, a.ncols() * bc);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let s = a[(i, j)];
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Column-stacking vectorization (first column first).
pub fn vec(a: &Mat) -> Vector {
    // nalgebra storage is column-major, so the raw slice is already vec(a).
    Vector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Mat::from_column_slice(rows, cols, v.as_slice()))
}

/// Solution of a square linear system together with its 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: Mat,
    pub condition: f64,
}

fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `m * x = rhs` by LU with partial pivoting.
pub fn solve_linear(m: &Mat, rhs: &Mat) -> Result<Solved> {
    solve_linear_capped(m, rhs, DEFAULT_CONDITION_CAP)
}

pub fn solve_linear_capped(m: &Mat, rhs: &Mat, condition_cap: f64) -> Result<Solved> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("solve_linear: {}x{} is not square", m.nrows(), m.ncols())));
    }
    if rhs.nrows() != m.nrows() {
        return Err(Error::Dimension(format!(
            "solve_linear: rhs has {} rows, matrix has {}",
            rhs.nrows(),
            m.nrows()
        )));
    }
    let lu = m.clone().lu();
    let inv = match lu.try_inverse() {
        Some(inv) => inv,
        None => return Err(Error::Singular { condition: f64::INFINITY }),
    };
    let condition = (norm1(m) * norm1(&inv)).max(1.0);
    if !condition.is_finite() || condition > condition_cap {
        return Err(Error::Singular { condition });
    }
    let mut solution = lu.solve(rhs).ok_or(Error::Singular { condition })?;
    // one step of iterative refinement keeps the residual at roundoff level
    let residual = rhs - m * &solution;
    if let Some(corr) = lu.solve(&residual) {
        solution += corr;
    }
    ensure_finite(&solution, "linear solve result")?;
    Ok(Solved { solution, condition })
}

/// Largest eigenvalue modulus via a real Schur decomposition.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension("spectral_radius needs a square matrix".into()));
    }
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or(Error::EigenNoConvergence { iterations: SCHUR_MAX_ITER })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
}

/// Smallest eigenvalue of a symmetric matrix (input is symmetrized first).
pub fn min_eigenvalue_sym(m: &Mat) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// `λ_min(m) ≥ −tol`. The eigenvalue is only known to within a few ulps of
/// `‖m‖`, so that roundoff floor is added to `tol`.
pub fn is_psd(m: &Mat, tol: f64) -> Result<bool> {
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::Asymmetric);
    }
    let roundoff = 16.0 * f64::EPSILON * m.norm();
    Ok(min_eigenvalue_sym(m) >= -(tol + roundoff))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Mat {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn kron_examples() {
        let b = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(kron(&identity(1), &b), b);
        assert_eq!(kron(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])), m(&[&[3.0, 6.0], &[4.0, 8.0]]));
        assert_eq!(kron(&Mat::zeros(2, 2), &b), Mat::zeros(4, 4));
    }

    #[test]
    fn vec_and_unvec() {
        let a = m(&[&[1.0, 3.0], &[2.0, 4.0]]);
        assert_eq!(vec(&a).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let col = m(&[&[5.0], &[6.0]]);
        assert_eq!(vec(&col).as_slice(), col.as_slice());
        let back = unvec(&Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), 2, 2).unwrap();
        assert_eq!(back, a);
        assert!(matches!(unvec(&Vector::zeros(5), 2, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn kron_mixed_product_and_vec_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (a, b, c, d) = (random(&mut rng, 2, 2), random(&mut rng, 2, 2), random(&mut rng, 2, 2), random(&mut rng, 2, 2));
            let lhs = kron(&a, &b) * kron(&c, &d);
            assert!((lhs - kron(&(&a * &c), &(&b * &d))).norm() <= 1e-12);

            let (e, g, f) = (a, b, c);
            let lhs = vec(&(&e * &g * &f));
            let rhs = kron(&f.transpose(), &e) * vec(&g);
            assert!((lhs - rhs).norm() <= 1e-12);
        }
    }

    #[test]
    fn solve_examples() {
        let b = m(&[&[1.0], &[2.0]]);
        let s = solve_linear(&identity(2), &b).unwrap();
        assert_eq!(s.solution, b);
        assert!(s.condition >= 1.0);
        let s = solve_linear(&m(&[&[2.0, 1.0], &[1.0, 2.0]]), &m(&[&[1.5], &[1.5]])).unwrap();
        assert!((s.solution - m(&[&[0.5], &[0.5]])).norm() < 1e-15);
        assert!(matches!(solve_linear(&Mat::zeros(2, 2), &b), Err(Error::Singular { .. })));
        assert!(matches!(solve_linear(&Mat::zeros(2, 3), &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn solve_residual_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..=9);
            let a = random(&mut rng, n, n) + identity(n) * (n as f64);
            let rhs = random(&mut rng, n, 2);
            let s = solve_linear(&a, &rhs).unwrap();
            assert!((&a * &s.solution - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&m(&[&[0.5, 0.0], &[0.0, -0.9]])).unwrap() - 0.9).abs() < 1e-8);
        assert!(spectral_radius(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap().abs() < 1e-8);
        assert!((spectral_radius(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&identity(3), 0.0).unwrap());
        assert!(!is_psd(&m(&[&[1.0, 0.0], &[0.0, -1e-3]]), 1e-9).unwrap());
        assert!(matches!(is_psd(&m(&[&[1.0, 1.0], &[0.0, 1.0]]), 0.0), Err(Error::Asymmetric)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v = random(&mut rng, 4, 1);
            // rank-1 Gram matrix
            assert!(is_psd(&(&v * v.transpose()), 0.0).unwrap());
        }
    }

    #[test]
    fn from_rows_rejects_bad_input() {
        assert!(from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(from_rows(&[vec![f64::NAN]]).is_err());
        assert!(from_rows(&[]).is_err());
    }
}
