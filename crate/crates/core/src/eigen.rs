//! Dense complex non-Hermitian eigensolver.
//!
//! Householder reduction to upper Hessenberg form, single-shift complex QR
//! with Wilkinson shifts to a Schur form T = Zᴴ M Z, then eigenvectors of T
//! by back substitution mapped back through Z.

use std::cmp::Ordering;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ULP: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub compute_vectors: bool,
    /// Largest accepted matrix dimension.
    pub max_dim: usize,
    /// QR sweeps allowed per eigenvalue before giving up.
    pub max_sweeps_per_eigenvalue: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { compute_vectors: true, max_dim: 2048, max_sweeps_per_eigenvalue: 30 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted by the quasienergy key, see [`phase_key`].
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: Option<Array2<Complex64>>,
    pub sweeps: usize,
}

/// (−arg λ wrapped to (−π, π], ln|λ|): real and imaginary part of i·ln λ.
pub fn phase_key(lambda: Complex64) -> (f64, f64) {
    let mut re = -lambda.arg();
    if re <= -std::f64::consts::PI {
        re = std::f64::consts::PI;
    }
    (re, lambda.norm().ln())
}

fn key_order(a: Complex64, b: Complex64) -> Ordering {
    let (ar, ai) = phase_key(a);
    let (br, bi) = phase_key(b);
    ar.total_cmp(&br).then(ai.total_cmp(&bi))
}

pub fn eigendecompose(matrix: &Array2<Complex64>, opts: &EigenOptions) -> Result<EigenDecomposition> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, expected square", n, matrix.ncols())));
    }
    if n > opts.max_dim {
        return Err(Error::InvalidInput(format!("matrix dimension {n} exceeds cap {}", opts.max_dim)));
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(EigenDecomposition { eigenvalues: vec![], eigenvectors: opts.compute_vectors.then(|| Array2::zeros((0, 0))), sweeps: 0 });
    }

    let mut h = matrix.clone();
    let mut z = Array2::<Complex64>::eye(n);
    reduce_to_hessenberg(&mut h, &mut z);
    let sweeps = schur_qr(&mut h, &mut z, opts.max_sweeps_per_eigenvalue)?;

    let raw: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key_order(raw[a], raw[b]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&i| raw[i]).collect();

    let eigenvectors = opts.compute_vectors.then(|| {
        let vecs = schur_eigenvectors(&h, &z);
        let mut sorted = Array2::zeros((n, n));
        for (dst, &src) in order.iter().enumerate() {
            sorted.column_mut(dst).assign(&vecs.column(src));
        }
        sorted
    });
    Ok(EigenDecomposition { eigenvalues, eigenvectors, sweeps })
}

fn reduce_to_hessenberg(h: &mut Array2<Complex64>, z: &mut Array2<Complex64>) {
    let n = h.nrows();
    for k in 0..n.saturating_sub(2) {
        let col_norm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if col_norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * col_norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if v_norm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / v_norm2;

        // H ← P H with P = I − β v vᴴ acting on rows k+1..n.
        for j in k..n {
            let s: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum::<Complex64>() * beta;
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * s;
            }
        }
        // H ← H P and Z ← Z P on columns k+1..n.
        for m in [&mut *h, &mut *z] {
            for r in 0..n {
                let s: Complex64 = v.iter().enumerate().map(|(i, vi)| m[(r, k + 1 + i)] * vi).sum::<Complex64>() * beta;
                for (i, vi) in v.iter().enumerate() {
                    m[(r, k + 1 + i)] -= s * vi.conj();
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Complex Givens rotation G = [c s; −s̄ c] with G·(x, y)ᵀ = (r, 0)ᵀ.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64, Complex64) {
    if y.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), x);
    }
    if x.norm() == 0.0 {
        let ay = y.norm();
        return (0.0, y.conj() / ay, Complex64::new(ay, 0.0));
    }
    let ax = x.norm();
    let norm = ax.hypot(y.norm());
    let phase = x / ax;
    (ax / norm, phase * y.conj() / norm, phase * norm)
}

fn l1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

fn wilkinson_shift(h: &Array2<Complex64>, hi: usize) -> Complex64 {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (mu1, mu2) = (mid + disc, mid - disc);
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Drives the Hessenberg matrix to upper triangular form in place,
/// accumulating the rotations into `z`. Returns the number of QR sweeps.
fn schur_qr(h: &mut Array2<Complex64>, z: &mut Array2<Complex64>, max_sweeps: usize) -> Result<usize> {
    let n = h.nrows();
    let scale = h.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut since_deflation = 0usize;

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let mut s = l1(h[(lo - 1, lo - 1)]) + l1(h[(lo, lo)]);
            if s == 0.0 {
                s = scale;
            }
            if l1(h[(lo, lo - 1)]) <= ULP * s {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        since_deflation += 1;
        total += 1;
        if since_deflation > max_sweeps {
            return Err(Error::Eigensolver { iterations: total, unconverged: hi + 1 });
        }
        let shift = if since_deflation % 10 == 0 {
            h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].re.abs()
        } else {
            wilkinson_shift(h, hi)
        };

        let mut x = h[(lo, lo)] - shift;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s, r) = givens(x, y);
            let first_col = if k > lo {
                h[(k, k - 1)] = r;
                h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
                k
            } else {
                lo
            };
            for j in first_col..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = c * a + s * b;
                h[(k + 1, j)] = -s.conj() * a + c * b;
            }
            let last_row = (k + 2).min(hi);
            for i in 0..=last_row {
                let p = h[(i, k)];
                let q = h[(i, k + 1)];
                h[(i, k)] = c * p + s.conj() * q;
                h[(i, k + 1)] = -s * p + c * q;
            }
            for i in 0..n {
                let p = z[(i, k)];
                let q = z[(i, k + 1)];
                z[(i, k)] = c * p + s.conj() * q;
                z[(i, k + 1)] = -s * p + c * q;
            }
        }
    }
    Ok(total)
}

/// Right eigenvectors of M = Z T Zᴴ from the triangular factor T.
fn schur_eigenvectors(t: &Array2<Complex64>, z: &Array2<Complex64>) -> Array2<Complex64> {
    let n = t.nrows();
    let t_norm = t.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out = Array2::zeros((n, n));
    let mut x = Array1::<Complex64>::zeros(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let floor = (ULP * lambda.norm()).max(ULP * t_norm).max(f64::MIN_POSITIVE);
        x.fill(Complex64::new(0.0, 0.0));
        x[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let s: Complex64 = (j + 1..=k).map(|i| t[(j, i)] * x[i]).sum();
            let mut d = t[(j, j)] - lambda;
            if d.norm() < floor {
                d = Complex64::new(floor, 0.0);
            }
            x[j] = -s / d;
            let big = x[j].norm();
            if big > 1e100 {
                for v in x.iter_mut().take(k + 1) {
                    *v /= big;
                }
            }
        }
        let mut col = out.column_mut(k);
        for r in 0..n {
            col[r] = (0..=k).map(|i| z[(r, i)] * x[i]).sum();
        }
        let norm = col.iter().map(|c: &Complex64| c.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|c: Complex64| c / norm);
    }
    out
}

/// Lower estimate of the spectral norm by power iteration on MᴴM.
pub fn spectral_norm_estimate(m: &Array2<Complex64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut sigma = 0.0;
    for _ in 0..60 {
        let w = m.dot(&v);
        let u = m.t().mapv(|c| c.conj()).dot(&w);
        let norm = u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        sigma = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v = u.mapv(|c| c / norm);
    }
    sigma.max(m.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max))
}

/// ‖M v − λ v‖ / ‖M‖₂ for every returned pair.
pub fn backward_errors(m: &Array2<Complex64>, dec: &EigenDecomposition) -> Option<Vec<f64>> {
    let vecs = dec.eigenvectors.as_ref()?;
    let norm = spectral_norm_estimate(m).max(f64::MIN_POSITIVE);
    Some(
        dec.eigenvalues
            .iter()
            .zip(vecs.columns())
            .map(|(&lambda, v)| {
                let mv = m.dot(&v);
                mv.iter().zip(v.iter()).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt() / norm
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Deterministic pseudo-random complex matrix (64-bit LCG).
    fn lcg_matrix(n: usize, seed: u64) -> Array2<Complex64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        Array2::from_shape_fn((n, n), |_| c(next(), next()))
    }

    #[test]
    fn diagonal_matrix_returns_its_diagonal_sorted() {
        let d = [c(0.5, 0.0), c(0.0, 1.0), c(-2.0, 0.0), c(1.0, -1.0)];
        let m = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { d[i] } else { c(0.0, 0.0) });
        let dec = eigendecompose(&m, &EigenOptions::default()).unwrap();
        let mut expect = d.to_vec();
        expect.sort_by(|a, b| key_order(*a, *b));
        for (got, want) in dec.eigenvalues.iter().zip(&expect) {
            assert!((got - want).norm() < 1e-15);
        }
        let keys: Vec<(f64, f64)> = dec.eigenvalues.iter().map(|&l| phase_key(l)).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn swap_matrix_has_plus_minus_one() {
        let m = Array2::from_shape_vec((2, 2), vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let dec = eigendecompose(&m, &EigenOptions::default()).unwrap();
        // phase keys: +1 → 0, −1 → π
        assert!((dec.eigenvalues[0] - 1.0).norm() < 1e-15);
        assert!((dec.eigenvalues[1] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn random_matrix_pairs_have_small_backward_error() {
        let m = lcg_matrix(64, 7);
        let dec = eigendecompose(&m, &EigenOptions::default()).unwrap();
        let errs = backward_errors(&m, &dec).unwrap();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
        // trace is preserved
        let tr: Complex64 = (0..64).map(|i| m[(i, i)]).sum();
        let sum: Complex64 = dec.eigenvalues.iter().sum();
        assert!((tr - sum).norm() < 1e-10);
    }

    #[test]
    fn jordan_like_block_still_has_small_residual() {
        let mut m = Array2::<Complex64>::zeros((6, 6));
        for i in 0..6 {
            m[(i, i)] = c(0.3, 0.4);
            if i + 1 < 6 {
                m[(i, i + 1)] = c(1.0, 0.0);
            }
        }
        let dec = eigendecompose(&m, &EigenOptions::default()).unwrap();
        let worst = backward_errors(&m, &dec).unwrap().into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn rejects_bad_input() {
        let opts = EigenOptions { max_dim: 4, ..EigenOptions::default() };
        assert!(eigendecompose(&Array2::eye(5), &opts).is_err());
        let mut m = Array2::<Complex64>::eye(3);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(eigendecompose(&m, &EigenOptions::default()).is_err());
        assert!(eigendecompose(&Array2::zeros((2, 3)), &EigenOptions::default()).is_err());
    }

    #[test]
    fn sweep_budget_exhaustion_is_an_error() {
        let m = lcg_matrix(16, 3);
        let opts = EigenOptions { max_sweeps_per_eigenvalue: 0, ..EigenOptions::default() };
        assert!(matches!(eigendecompose(&m, &opts), Err(Error::Eigensolver { .. })));
    }

    #[test]
    fn values_only_mode_matches() {
        let m = lcg_matrix(20, 11);
        let a = eigendecompose(&m, &EigenOptions::default()).unwrap();
        let b = eigendecompose(&m, &EigenOptions { compute_vectors: false, ..EigenOptions::default() }).unwrap();
        assert!(b.eigenvectors.is_none());
        assert_eq!(a.eigenvalues, b.eigenvalues);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn backward_error_contract_holds(n in 1usize..40, seed in any::<u64>()) {
            let m = lcg_matrix(n, seed);
            let dec = eigendecompose(&m, &EigenOptions::default()).unwrap();
            let worst = backward_errors(&m, &dec).unwrap().into_iter().fold(0.0, f64::max);
            prop_assert!(worst < 1e-10, "n={} worst={}", n, worst);
        }
    }
}
