//! Dense symmetric/Hermitian eigenvalue helpers shared by the covariance,
//! spectral, and simulation code, plus the few scalar special functions the
//! crate needs. Everything here works on small-to-medium matrices held in
//! memory; there is no sparse or out-of-core path.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{PclsError, Result};

pub type Complex64 = Complex<f64>;

/// Iteration cap for the QR eigenvalue sweep. Generous: the solver needs
/// a handful of iterations per eigenvalue in practice.
const EIGEN_MAX_ITER: usize = 200_000;

/// Symmetric eigendecomposition of a real matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with `m = V * diag(w) * V^T`.
/// The eigenvalues are not sorted.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.nrows() != m.ncols() {
        return Err(PclsError::Numeric(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| PclsError::Numeric("symmetric eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let (w, _) = sym_eigen(m)?;
    Ok(w.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Projects a real symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero. Returns `(clipped, original_min_eigenvalue)`. The
/// result is re-symmetrized to remove round-off asymmetry.
pub fn clip_to_psd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (w, v) = sym_eigen(m)?;
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let clipped_w = DVector::from_iterator(w.len(), w.iter().map(|&x| x.max(0.0)));
    let mut out = &v * DMatrix::from_diagonal(&clipped_w) * v.transpose();
    symmetrize(&mut out);
    Ok((out, min))
}

/// Factor `B` with `B * B^T` equal to the PSD clipping of `m`, together with
/// the pre-clip minimum eigenvalue. Used to turn covariance matrices into
/// sampling operators; unlike Cholesky it tolerates semidefinite (and
/// slightly indefinite) input.
pub fn psd_factor_clipped(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (w, v) = sym_eigen(m)?;
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let sqrt_w = DVector::from_iterator(w.len(), w.iter().map(|&x| x.max(0.0).sqrt()));
    let mut b = v;
    for (j, s) in sqrt_w.iter().enumerate() {
        b.column_mut(j).scale_mut(*s);
    }
    Ok((b, min))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for k in (i + 1)..n {
            let avg = 0.5 * (m[(i, k)] + m[(k, i)]);
            m[(i, k)] = avg;
            m[(k, i)] = avg;
        }
    }
}

/// Real-symmetric embedding of a Hermitian matrix: `H = A + iB` maps to
/// `[[A, -B], [B, A]]`, which has the same spectrum with every eigenvalue
/// doubled. Lets the real eigensolver serve complex Hermitian input.
fn embed_hermitian(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            let z = h[(i, k)];
            m[(i, k)] = z.re;
            m[(i + n, k + n)] = z.re;
            m[(i, k + n)] = -z.im;
            m[(i + n, k)] = z.im;
        }
    }
    m
}

/// Smallest eigenvalue of a complex Hermitian matrix.
pub fn herm_min_eigenvalue(h: &DMatrix<Complex64>) -> Result<f64> {
    min_eigenvalue(&embed_hermitian(h))
}

/// PSD clipping for a complex Hermitian matrix, via the real embedding.
/// Returns `(clipped, original_min_eigenvalue)`.
pub fn herm_clip_to_psd(h: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, f64)> {
    let n = h.nrows();
    let (clipped, min) = clip_to_psd(&embed_hermitian(h))?;
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for k in 0..n {
            let re = 0.5 * (clipped[(i, k)] + clipped[(i + n, k + n)]);
            let im = 0.5 * (clipped[(i + n, k)] - clipped[(i, k + n)]);
            out[(i, k)] = Complex64::new(re, im);
        }
    }
    // Enforce exact Hermitian symmetry on the extracted matrix.
    for i in 0..n {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for k in (i + 1)..n {
            let avg = 0.5 * (out[(i, k)] + out[(k, i)].conj());
            out[(i, k)] = avg;
            out[(k, i)] = avg.conj();
        }
    }
    Ok((out, min))
}

/// Deterministic pairwise summation. More accurate than a running sum for
/// long arrays and independent of thread count (it is sequential).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Complementary error function, accurate to ~1e-14 relative over the real
/// line. Power series below 2, Laguerre-style continued fraction above.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

/// Inverse of `erfc` on (0, 2), by bisection (monotone decreasing).
pub fn erfc_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 2.0) {
        return Err(PclsError::Domain(format!(
            "erfc_inv argument must lie in (0, 2), got {p}"
        )));
    }
    let (mut lo, mut hi) = (-30.0_f64, 30.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erfc(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum_{n>=0} (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let contrib = term / (2 * n + 1) as f64;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() + 1e-300 {
            break;
        }
    }
    sum * std::f64::consts::FRAC_2_SQRT_PI
}

fn erfc_cf(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
    // evaluated backwards with a fixed depth; depth 80 is ample for x >= 2.
    let mut v = 0.0;
    for n in (1..=80).rev() {
        v = (n as f64 / 2.0) / (x + v);
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + v)
}
