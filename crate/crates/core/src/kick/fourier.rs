//! Series route: expand g(θ) = exp(−iε cos θ + γ sin θ) in harmonics e^{imθ},
//! θ = 2πx/μ, and sum the closed-form overlaps ∫ψ_n ψ_l e^{iqx} dx.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::KickMatrix;
use crate::error::{Error, Result};
use crate::model::SystemParams;

pub const DEFAULT_COEFF_CUTOFF: f64 = 1e-14;
pub const DEFAULT_MAX_HARMONIC: usize = 512;
/// Half-width of the band around a removable singularity where the series
/// form of sin(z)/z takes over.
pub const DEFAULT_GUARD_BAND: f64 = 1e-6;

const INITIAL_HARMONIC: usize = 8;

/// Coefficients c_m, m = −M..=M, of g(θ) = Σ c_m e^{imθ}.
#[derive(Debug, Clone)]
pub struct FourierKickExpansion {
    coefficients: Vec<Complex64>,
    truncation: usize,
    tail_bound: f64,
}

impl FourierKickExpansion {
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Largest |c_m| computed but dropped beyond ±M.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// c_m, zero outside the retained range.
    pub fn coefficient(&self, m: i64) -> Complex64 {
        let big_m = self.truncation as i64;
        if m.abs() > big_m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[(m + big_m) as usize]
        }
    }

    /// (m, c_m) in ascending m.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let big_m = self.truncation as i64;
        self.coefficients.iter().enumerate().map(move |(i, &c)| (i as i64 - big_m, c))
    }
}

pub fn fourier_coefficients(params: &SystemParams, cutoff: f64) -> Result<FourierKickExpansion> {
    fourier_coefficients_with_cap(params, cutoff, DEFAULT_MAX_HARMONIC)
}

/// Samples g on 4M+4 uniform points, projects with an FFT and doubles M until
/// every coefficient between M and the Nyquist limit is below `cutoff`.
pub fn fourier_coefficients_with_cap(params: &SystemParams, cutoff: f64, max_harmonic: usize) -> Result<FourierKickExpansion> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidInput(format!("coefficient cutoff must be > 0, got {cutoff}")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut big_m = INITIAL_HARMONIC.min(max_harmonic.max(1));
    loop {
        let samples = 4 * big_m + 4;
        let mut buf: Vec<Complex64> = (0..samples)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / samples as f64;
                Complex64::new(params.gamma * theta.sin(), -params.epsilon * theta.cos()).exp()
            })
            .collect();
        planner.plan_fft_forward(samples).process(&mut buf);
        let scale = 1.0 / samples as f64;
        let reach = 2 * big_m + 1;
        let at = |m: i64| buf[m.rem_euclid(samples as i64) as usize] * scale;

        // Largest modulus at |m| = k, for k = 0..=reach.
        let shell: Vec<f64> = (0..=reach as i64).map(|k| at(k).norm().max(at(-k).norm())).collect();
        let tail = shell[big_m + 1..].iter().copied().fold(0.0, f64::max);
        if tail < cutoff {
            let mut keep = big_m;
            while keep > 0 && shell[keep] < cutoff {
                keep -= 1;
            }
            let tail_bound = shell[keep + 1..].iter().copied().fold(0.0, f64::max);
            let coefficients = (-(keep as i64)..=keep as i64).map(at).collect();
            return Ok(FourierKickExpansion { coefficients, truncation: keep, tail_bound });
        }
        if big_m >= max_harmonic {
            return Err(Error::Convergence { what: "kick Fourier coefficients", last_delta: tail });
        }
        big_m = (2 * big_m).min(max_harmonic);
    }
}

/// ∫₀ᴸ e^{isx} dx = L·e^{isL/2}·sinc(sL/2), with sinc from its Taylor series
/// when |s| is inside the guard band.
fn plane_wave_integral(s: f64, length: f64, band: f64) -> Complex64 {
    let z = 0.5 * s * length;
    let sinc = if s.abs() < band {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0))
    } else {
        z.sin() / z
    };
    Complex64::from_polar(length * sinc, z)
}

#[inline]
fn shifted(q: f64, j: i64, length: f64) -> f64 {
    q + j as f64 * PI / length
}

/// ∫₀ᴸ ψ_n(x) ψ_l(x) e^{iqx} dx in closed form.
///
/// With a = (n−l)π/L and b = (n+l)π/L the product of modes is
/// [cos(ax) − cos(bx)]/L, so the integral is a sum of four plane-wave
/// integrals at q ± a and q ± b. Those are singular (removably) where the
/// shifted frequency vanishes.
pub fn overlap_integral(n: usize, l: usize, q: f64, params: &SystemParams) -> Result<Complex64> {
    overlap_integral_with_band(n, l, q, params, DEFAULT_GUARD_BAND)
}

pub fn overlap_integral_with_band(n: usize, l: usize, q: f64, params: &SystemParams, band: f64) -> Result<Complex64> {
    if n == 0 || l == 0 {
        return Err(Error::Domain(format!("mode indices must be >= 1, got ({n}, {l})")));
    }
    let length = params.length;
    let e = |j: i64| plane_wave_integral(shifted(q, j, length), length, band);
    let (n, l) = (n as i64, l as i64);
    Ok((e(n - l) + e(l - n) - e(n + l) - e(-(n + l))) / (2.0 * length))
}

pub fn kick_matrix_fourier(params: &SystemParams) -> Result<KickMatrix> {
    kick_matrix_fourier_with(params, DEFAULT_COEFF_CUTOFF, DEFAULT_MAX_HARMONIC)
}

/// V(n, l) = Σ_m c_m · overlap(n, l, 2πm/μ), summed in ascending m.
pub fn kick_matrix_fourier_with(params: &SystemParams, cutoff: f64, max_harmonic: usize) -> Result<KickMatrix> {
    params.validate()?;
    let expansion = fourier_coefficients_with_cap(params, cutoff, max_harmonic)?;
    let n = params.n_basis;
    let length = params.length;
    let span = 2 * n as i64;
    let k = params.wave_number();

    // For each harmonic, plane-wave integrals at every shift jπ/L, |j| ≤ 2N.
    let tables: Vec<(Complex64, Vec<Complex64>)> = expansion
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(m, c)| {
            let q = k * m as f64;
            let table = (-span..=span).map(|j| plane_wave_integral(shifted(q, j, length), length, DEFAULT_GUARD_BAND)).collect();
            (c, table)
        })
        .collect();

    let scale = 1.0 / (2.0 * length);
    let rows: Vec<Complex64> = (1..=n as i64)
        .into_par_iter()
        .flat_map_iter(|row| {
            let tables = &tables;
            (1..=n as i64).map(move |col| {
                let idx = |j: i64| (j + span) as usize;
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, t) in tables {
                    let overlap =
                        (t[idx(row - col)] + t[idx(col - row)] - t[idx(row + col)] - t[idx(-(row + col))]) * scale;
                    acc += c * overlap;
                }
                acc
            })
        })
        .collect();
    let entries = Array2::from_shape_vec((n, n), rows).expect("square kick matrix");
    Ok(KickMatrix::new(entries, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kick::{kick_matrix_quadrature, QuadratureConfig};
    use crate::quadrature::GaussLegendre;

    fn params(epsilon: f64, gamma: f64, length: f64, wavelength: f64, n_basis: usize) -> SystemParams {
        SystemParams { epsilon, gamma, length, wavelength, n_basis, ..SystemParams::default() }
    }

    fn factorial(k: u32) -> f64 {
        (1..=k).map(f64::from).product()
    }

    /// Power series of J_m (sign = −1) or I_m (sign = +1), m ≥ 0.
    fn bessel_series(m: u32, x: f64, sign: f64) -> f64 {
        (0..40u32).map(|k| sign.powi(k as i32) * (x / 2.0).powi((2 * k + m) as i32) / (factorial(k) * factorial(k + m))).sum()
    }

    /// (−i)^m
    fn minus_i_pow(m: i64) -> Complex64 {
        Complex64::new(0.0, -1.0).powi(m as i32)
    }

    /// Direct Fourier integral of g over one period with a composite
    /// Gauss–Legendre rule.
    fn fourier_integral(g: impl Fn(f64) -> Complex64, m: i64) -> Complex64 {
        let rule = GaussLegendre::new(48);
        let (xs, ws) = rule.composite_points(0.0, 2.0 * PI, 8);
        xs.iter().zip(&ws).map(|(&t, &w)| w * g(t) * Complex64::from_polar(1.0, -(m as f64) * t)).sum::<Complex64>() / (2.0 * PI)
    }

    #[test]
    fn zero_coupling_is_a_single_coefficient() {
        let e = fourier_coefficients(&params(0.0, 0.0, 3.3, 1.3, 8), 1e-14).unwrap();
        assert_eq!(e.truncation(), 0);
        assert!((e.coefficient(0) - 1.0).norm() < 1e-15);
        assert_eq!(e.coefficient(3), Complex64::new(0.0, 0.0));
        assert!(e.tail_bound() < 1e-14);
    }

    #[test]
    fn real_kick_matches_jacobi_anger() {
        let e = fourier_coefficients(&params(0.3, 0.0, 3.3, 1.3, 8), 1e-14).unwrap();
        assert!(e.tail_bound() < 1e-14);
        for m in -8i64..=8 {
            let series = minus_i_pow(m) * bessel_series(m.unsigned_abs() as u32, 0.3, -1.0) * if m < 0 && m % 2 != 0 { -1.0 } else { 1.0 };
            let direct = fourier_integral(|t| Complex64::new(0.0, -0.3 * t.cos()).exp(), m);
            assert!((series - direct).norm() < 1e-13, "oracles disagree at m={m}");
            assert!((e.coefficient(m) - direct).norm() < 1e-12, "m={m}: {} vs {direct}", e.coefficient(m));
        }
    }

    #[test]
    fn gain_kick_has_alternating_parity() {
        let e = fourier_coefficients(&params(0.0, 0.3, 3.3, 1.3, 8), 1e-14).unwrap();
        for m in 0i64..=8 {
            let direct = fourier_integral(|t| Complex64::new(0.3 * t.sin(), 0.0).exp(), m);
            let series = minus_i_pow(m) * bessel_series(m as u32, 0.3, 1.0);
            assert!((series - direct).norm() < 1e-13);
            assert!((e.coefficient(m) - direct).norm() < 1e-12);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((e.coefficient(-m) - sign * e.coefficient(m)).norm() < 1e-12);
        }
    }

    #[test]
    fn coefficients_decay_super_exponentially() {
        let e = fourier_coefficients(&params(1.0, 1.0, 3.3, 1.3, 8), 1e-14).unwrap();
        let mags: Vec<f64> = (0..=e.truncation() as i64).map(|m| e.coefficient(m).norm()).collect();
        // ratio |c_{m+1}|/|c_m| keeps shrinking once past the bulk
        let ratios: Vec<f64> = mags.windows(2).skip(3).map(|w| w[1] / w[0]).collect();
        assert!(ratios.windows(2).all(|r| r[1] < r[0]), "{ratios:?}");
    }

    #[test]
    fn harmonic_cap_is_enforced() {
        let err = fourier_coefficients_with_cap(&params(40.0, 40.0, 3.3, 1.3, 8), 1e-14, 16).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
        assert!(fourier_coefficients(&params(0.1, 0.0, 3.3, 1.3, 8), 0.0).is_err());
    }

    fn overlap_oracle(n: usize, l: usize, q: f64, length: f64) -> Complex64 {
        let rule = GaussLegendre::new(64);
        let (xs, ws) = rule.composite_points(0.0, length, 64);
        let norm = 2.0 / length;
        xs.iter()
            .zip(&ws)
            .map(|(&x, &w)| {
                w * norm * (PI * n as f64 * x / length).sin() * (PI * l as f64 * x / length).sin() * Complex64::from_polar(1.0, q * x)
            })
            .sum()
    }

    #[test]
    fn overlap_at_zero_frequency_is_orthonormality() {
        let p = params(0.0, 0.0, 3.3, 1.3, 8);
        for n in 1..6 {
            for l in 1..6 {
                let v = overlap_integral(n, l, 0.0, &p).unwrap();
                let target = if n == l { 1.0 } else { 0.0 };
                assert!((v - target).norm() < 1e-15, "({n},{l}) {v}");
            }
        }
        assert!(overlap_integral(1, 2, 0.0, &p).unwrap().norm() < 1e-15);
        assert!(overlap_integral(0, 2, 0.0, &p).is_err());
    }

    #[test]
    fn overlap_matches_quadrature_near_and_across_singular_frequency() {
        let p = params(0.0, 0.0, 3.3, 1.3, 8);
        let l = p.length;
        let q_star = 2.0 * PI / l;
        let probe = [3.0 * PI / l * 0.9997, q_star, q_star + 5e-7, q_star - 5e-7, q_star + 2e-6, q_star - 2e-6, q_star * (1.0 + 1e-9)];
        for q in probe {
            let got = overlap_integral(1, 1, q, &p).unwrap();
            let oracle = overlap_oracle(1, 1, q, l);
            assert!((got - oracle).norm() < 1e-9, "q={q}: {got} vs {oracle}");
        }
        // Series and direct forms agree where the guard band hands over.
        for dq in [0.999e-6, -0.999e-6, 0.5e-6, 1e-8] {
            let banded = overlap_integral(1, 1, q_star + dq, &p).unwrap();
            let direct = overlap_integral_with_band(1, 1, q_star + dq, &p, 0.0).unwrap();
            assert!((banded - direct).norm() < 1e-9, "dq={dq}");
        }
    }

    #[test]
    fn overlap_matches_quadrature_for_generic_frequencies() {
        let p = params(0.0, 0.0, 10.0, 1.0, 8);
        for (n, l, q) in [(1, 3, 0.7), (4, 2, -2.5), (5, 5, 6.283185307179586), (7, 1, 2.0 * PI * 3.0)] {
            let got = overlap_integral(n, l, q, &p).unwrap();
            let oracle = overlap_oracle(n, l, q, p.length);
            assert!((got - oracle).norm() < 1e-12, "({n},{l},{q}) {got} vs {oracle}");
        }
    }

    #[test]
    fn zero_coupling_series_matrix_is_identity() {
        let v = kick_matrix_fourier(&params(0.0, 0.0, 3.3, 1.3, 32)).unwrap();
        for ((i, j), z) in v.entries().indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((z - target).norm() < 1e-12);
        }
    }

    #[test]
    fn series_route_matches_quadrature_route() {
        for (eps, gamma, l, mu) in [(0.1, 0.1, 3.3, 1.3), (1.0, 1.0, 10.0, 1.0)] {
            let p = params(eps, gamma, l, mu, 64);
            let a = kick_matrix_fourier(&p).unwrap();
            let b = kick_matrix_quadrature(&p, &QuadratureConfig::default()).unwrap();
            let d = a.max_abs_diff(&b);
            assert!(d < 1e-10, "({eps},{gamma},{l},{mu}): {d}");
        }
    }

    #[test]
    fn matrix_entry_uses_the_same_overlaps_as_the_public_function() {
        let p = params(0.5, 0.2, 3.3, 1.3, 6);
        let e = fourier_coefficients(&p, DEFAULT_COEFF_CUTOFF).unwrap();
        let v = kick_matrix_fourier(&p).unwrap();
        let direct: Complex64 = e.iter().map(|(m, c)| c * overlap_integral(2, 5, p.wave_number() * m as f64, &p).unwrap()).sum();
        assert!((v.entry(2, 5).unwrap() - direct).norm() < 1e-15);
    }
}
