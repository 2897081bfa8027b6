use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{kick_exponent, max_abs_diff, KickMatrix};
use crate::error::{Error, Result};
use crate::model::{mode_value, SystemParams};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub nodes_per_panel: usize,
    /// Starting panel count; `None` picks ceil(L/μ)·8, raised so a panel never
    /// spans more than four half-waves of the highest retained mode.
    pub initial_panels: Option<usize>,
    /// Refinement stops once the max entrywise change drops below this.
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes_per_panel: 64, initial_panels: None, tolerance: 1e-12, max_refinements: 6 }
    }
}

impl QuadratureConfig {
    fn starting_panels(&self, params: &SystemParams) -> usize {
        self.initial_panels.unwrap_or_else(|| {
            let per_wavelength = (params.length / params.wavelength).ceil() as usize * 8;
            per_wavelength.max(params.n_basis.div_ceil(4)).max(1)
        })
    }
}

/// Composite Gauss–Legendre evaluation of every V(n, l), with panel doubling
/// until consecutive matrices agree to `quad.tolerance`.
pub fn kick_matrix_quadrature(params: &SystemParams, quad: &QuadratureConfig) -> Result<KickMatrix> {
    params.validate()?;
    quadrature_matrix_with(params, quad, |x| kick_exponent(x, params).exp())
}

pub(crate) fn quadrature_matrix_with<F>(params: &SystemParams, quad: &QuadratureConfig, multiplier: F) -> Result<KickMatrix>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    if !(quad.tolerance > 0.0) {
        return Err(Error::InvalidInput(format!("quadrature tolerance must be > 0, got {}", quad.tolerance)));
    }
    if quad.nodes_per_panel == 0 {
        return Err(Error::InvalidInput("nodes_per_panel must be >= 1".into()));
    }
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let mut panels = quad.starting_panels(params);
    let mut current = evaluate(params, &rule, panels, &multiplier);
    let mut last_delta = f64::INFINITY;
    for _ in 0..quad.max_refinements {
        panels *= 2;
        let refined = evaluate(params, &rule, panels, &multiplier);
        last_delta = max_abs_diff(&current, &refined);
        current = refined;
        if last_delta < quad.tolerance {
            let mut v = KickMatrix::new(current, params);
            v.achieved_tolerance = Some(last_delta);
            return Ok(v);
        }
    }
    Err(Error::Convergence { what: "kick-matrix quadrature", last_delta })
}

fn evaluate<F>(params: &SystemParams, rule: &GaussLegendre, panels: usize, multiplier: &F) -> Array2<Complex64>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let n = params.n_basis;
    let (xs, ws) = rule.composite_points(0.0, params.length, panels);
    let weighted: Vec<Complex64> = xs.iter().zip(&ws).map(|(&x, &w)| w * multiplier(x)).collect();
    // modes[l][j] = ψ_{l+1}(x_j)
    let modes: Vec<Vec<f64>> =
        (1..=n).into_par_iter().map(|l| xs.iter().map(|&x| mode_value(l, x, params.length)).collect()).collect();

    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|row| {
            let left: Vec<Complex64> = modes[row].iter().zip(&weighted).map(|(&p, &g)| g * p).collect();
            modes
                .iter()
                .map(|col| {
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for (a, &b) in left.iter().zip(col) {
                        re += a.re * b;
                        im += a.im * b;
                    }
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect()).expect("square kick matrix")
}
