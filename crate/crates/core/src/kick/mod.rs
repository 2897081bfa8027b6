//! One-kick matrix elements
//!
//! ```text
//! V(n, l) = ∫₀ᴸ ψ_n(x) · exp(−iε cos(2πx/μ) + γ sin(2πx/μ)) · ψ_l(x) dx
//! ```
//!
//! Entry (n, l) is row n, column l, so one period of the map is the matrix
//! product A(t+T) = V·D·A(t) with D = diag(e^{−iE_l T}).
//!
//! Two routes compute the same matrix: composite Gauss–Legendre quadrature in
//! position space, and a Fourier series of the multiplier combined with closed
//! form overlap integrals. They share nothing beyond the basis definition and
//! are used to check each other.

mod fourier;
mod quadrature;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::model::{ParamsFingerprint, SystemParams};

pub use fourier::{
    fourier_coefficients, fourier_coefficients_with_cap, kick_matrix_fourier, kick_matrix_fourier_with,
    overlap_integral, overlap_integral_with_band, FourierKickExpansion, DEFAULT_COEFF_CUTOFF,
    DEFAULT_GUARD_BAND, DEFAULT_MAX_HARMONIC,
};
pub use quadrature::{kick_matrix_quadrature, QuadratureConfig};

/// Exponent of the one-kick multiplier: −iε cos(2πx/μ) + γ sin(2πx/μ).
pub fn kick_exponent(x: f64, params: &SystemParams) -> Complex64 {
    let theta = params.wave_number() * x;
    Complex64::new(params.gamma * theta.sin(), -params.epsilon * theta.cos())
}

/// Which numerical route produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    Quadrature,
    #[default]
    Fourier,
    /// Both routes, cross-checked; the quadrature matrix is kept.
    Both,
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Route::Quadrature),
            "fourier" => Ok(Route::Fourier),
            "both" => Ok(Route::Both),
            other => Err(Error::InvalidInput(format!(
                "unknown route {other:?} (expected quadrature, fourier or both)"
            ))),
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Quadrature => "quadrature",
            Route::Fourier => "fourier",
            Route::Both => "both",
        })
    }
}

#[derive(Debug, Clone)]
pub struct KickMatrix {
    entries: Array2<Complex64>,
    fingerprint: ParamsFingerprint,
    /// Last refinement delta of the quadrature route, if that route was used.
    achieved_tolerance: Option<f64>,
    /// Max entrywise difference between the routes when both were run.
    route_discrepancy: Option<f64>,
}

impl KickMatrix {
    pub(crate) fn new(entries: Array2<Complex64>, params: &SystemParams) -> Self {
        Self { entries, fingerprint: params.fingerprint(), achieved_tolerance: None, route_discrepancy: None }
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry (n, l), 1-based.
    pub fn entry(&self, n: usize, l: usize) -> Option<Complex64> {
        if n == 0 || l == 0 {
            return None;
        }
        self.entries.get((n - 1, l - 1)).copied()
    }

    pub fn fingerprint(&self) -> &ParamsFingerprint {
        &self.fingerprint
    }

    pub fn achieved_tolerance(&self) -> Option<f64> {
        self.achieved_tolerance
    }

    pub fn route_discrepancy(&self) -> Option<f64> {
        self.route_discrepancy
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &KickMatrix) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    /// Debug dump: `n,l,re,im`, row-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,l,re,im")?;
        for ((i, j), v) in self.entries.indexed_iter() {
            writeln!(w, "{},{},{},{}", i + 1, j + 1, fmt_f64(v.re), fmt_f64(v.im))?;
        }
        w.flush()
    }
}

pub(crate) fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Options shared by the two routes.
#[derive(Debug, Clone, Copy)]
pub struct KickOptions {
    pub quadrature: QuadratureConfig,
    pub coeff_cutoff: f64,
    /// Required agreement when `Route::Both` is selected.
    pub route_tolerance: f64,
}

impl Default for KickOptions {
    fn default() -> Self {
        Self { quadrature: QuadratureConfig::default(), coeff_cutoff: DEFAULT_COEFF_CUTOFF, route_tolerance: 1e-10 }
    }
}

pub fn build_kick_matrix(params: &SystemParams, route: Route, opts: &KickOptions) -> Result<KickMatrix> {
    params.validate()?;
    match route {
        Route::Quadrature => kick_matrix_quadrature(params, &opts.quadrature),
        Route::Fourier => kick_matrix_fourier_with(params, opts.coeff_cutoff, DEFAULT_MAX_HARMONIC),
        Route::Both => {
            let mut quad = kick_matrix_quadrature(params, &opts.quadrature)?;
            let series = kick_matrix_fourier_with(params, opts.coeff_cutoff, DEFAULT_MAX_HARMONIC)?;
            let max_diff = quad.max_abs_diff(&series);
            if max_diff.is_nan() || max_diff >= opts.route_tolerance {
                return Err(Error::RouteMismatch { max_diff, tolerance: opts.route_tolerance });
            }
            quad.route_discrepancy = Some(max_diff);
            Ok(quad)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn params(epsilon: f64, gamma: f64, length: f64, wavelength: f64, n_basis: usize) -> SystemParams {
        SystemParams { epsilon, gamma, length, wavelength, n_basis, ..SystemParams::default() }
    }

    #[test]
    fn exponent_examples() {
        let p = params(0.5, 0.2, 3.3, 1.3, 8);
        let z = kick_exponent(0.0, &p);
        assert!((z - Complex64::new(0.0, -0.5)).norm() < 1e-15);

        let p = params(0.0, 1.0, 3.3, 1.3, 8);
        let z = kick_exponent(1.3 / 4.0, &p);
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let p = params(1.0, 1.0, 3.3, 1.3, 8);
        let z = kick_exponent(1.3 / 8.0, &p);
        assert!((z - Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn route_parses() {
        assert_eq!("both".parse::<Route>().unwrap(), Route::Both);
        assert_eq!(Route::Quadrature.to_string().parse::<Route>().unwrap(), Route::Quadrature);
        assert!("gauss".parse::<Route>().is_err());
    }

    #[test]
    fn both_routes_record_discrepancy() {
        let p = params(0.1, 0.1, 3.3, 1.3, 16);
        let v = build_kick_matrix(&p, Route::Both, &KickOptions::default()).unwrap();
        let d = v.route_discrepancy().unwrap();
        assert!(d < 1e-10, "{d}");
        assert!(v.achieved_tolerance().is_some());
    }

    #[test]
    fn both_routes_fail_under_impossible_tolerance() {
        let p = params(1.0, 1.0, 10.0, 1.0, 16);
        let opts = KickOptions { route_tolerance: 0.0, ..KickOptions::default() };
        let err = build_kick_matrix(&p, Route::Both, &opts).unwrap_err();
        assert!(matches!(err, Error::RouteMismatch { .. }));
    }

    #[test]
    fn csv_dump_layout() {
        let p = params(0.1, 0.1, 3.3, 1.3, 3);
        let v = kick_matrix_fourier(&p).unwrap();
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,l,re,im");
        assert_eq!(lines.len(), 10);
        assert!(lines[1].starts_with("1,1,"));
        assert!(lines[2].starts_with("1,2,"));
        assert!(lines[9].starts_with("3,3,"));
        let fields: Vec<&str> = lines[5].split(',').collect();
        let re: f64 = fields[2].parse().unwrap();
        assert_eq!(re, v.entry(2, 2).unwrap().re);
    }
}
