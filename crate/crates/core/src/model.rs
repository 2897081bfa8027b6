//! System parameters, the unperturbed box basis and amplitude states.
//!
//! Units are dimensionless with ħ = m = 1. The basis is the Dirichlet sine
//! basis ψ_n(x) = √(2/L)·sin(πnx/L), n = 1..N; every public index is 1-based.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Physical and numerical parameters of the kicked box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Box length L.
    pub length: f64,
    /// Kick wavelength μ.
    pub wavelength: f64,
    /// Real kick strength ε.
    pub epsilon: f64,
    /// Non-Hermitian strength γ ≥ 0.
    pub gamma: f64,
    /// Kick period T.
    pub period: f64,
    /// Number of sine modes N.
    pub n_basis: usize,
    /// Factor c in E_l = c·(πl/L)².
    pub dispersion_coeff: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            length: 3.3,
            wavelength: 1.3,
            epsilon: 0.1,
            gamma: 0.0,
            period: 0.01,
            n_basis: 128,
            dispersion_coeff: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("L", self.length)?;
        positive("mu", self.wavelength)?;
        positive("T", self.period)?;
        positive("dispersion_coeff", self.dispersion_coeff)?;
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidInput(format!("epsilon must be finite, got {}", self.epsilon)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if self.n_basis < 2 {
            return Err(Error::InvalidInput(format!("n_basis must be >= 2, got {}", self.n_basis)));
        }
        Ok(())
    }

    /// Kick wave number k = 2π/μ.
    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// K = εT.
    pub fn kick_parameter(&self) -> f64 {
        self.epsilon * self.period
    }

    pub fn fingerprint(&self) -> ParamsFingerprint {
        ParamsFingerprint {
            length: self.length,
            wavelength: self.wavelength,
            epsilon: self.epsilon,
            gamma: self.gamma,
            n_basis: self.n_basis,
        }
    }

    /// Free energies E_1..E_N.
    pub fn box_energies(&self) -> Vec<f64> {
        (1..=self.n_basis).map(|n| self.mode_energy(n)).collect()
    }

    pub(crate) fn mode_energy(&self, n: usize) -> f64 {
        let q = PI * n as f64 / self.length;
        self.dispersion_coeff * q * q
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_n_basis(mut self, n_basis: usize) -> Self {
        self.n_basis = n_basis;
        self
    }
}

/// The parameters a kick matrix depends on. T and the dispersion only enter
/// the free flight, so they are not part of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsFingerprint {
    pub length: f64,
    pub wavelength: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub n_basis: usize,
}

impl ParamsFingerprint {
    pub(crate) fn check(&self, params: &SystemParams) -> Result<()> {
        if *self == params.fingerprint() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "kick matrix was built for {self:?}, parameters are {:?}",
                params.fingerprint()
            )))
        }
    }
}

/// E_n = c·(πn/L)².
pub fn box_energy(n: i64, params: &SystemParams) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("mode index must be >= 1, got {n}")));
    }
    Ok(params.mode_energy(n as usize))
}

/// ψ_n(x) = √(2/L)·sin(πnx/L) on [0, L].
pub fn box_wavefunction(n: i64, x: f64, params: &SystemParams) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("mode index must be >= 1, got {n}")));
    }
    if !(0.0..=params.length).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, {}]", params.length)));
    }
    Ok(mode_value(n as usize, x, params.length))
}

#[inline]
pub(crate) fn mode_value(n: usize, x: f64, length: f64) -> f64 {
    (2.0 / length).sqrt() * (PI * n as f64 * x / length).sin()
}

/// Amplitudes A_1..A_N over the sine basis plus the number of kicks applied.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
    kick_count: u64,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<Complex64>, kick_count: u64) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidInput("amplitudes must be finite".into()));
        }
        Ok(Self { amplitudes, kick_count })
    }

    pub(crate) fn from_raw(amplitudes: Vec<Complex64>, kick_count: u64) -> Self {
        Self { amplitudes, kick_count }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// A_n for 1-based n.
    pub fn amplitude(&self, n: usize) -> Option<Complex64> {
        n.checked_sub(1).and_then(|i| self.amplitudes.get(i).copied())
    }

    pub fn kick_count(&self) -> u64 {
        self.kick_count
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn time(&self, params: &SystemParams) -> f64 {
        self.kick_count as f64 * params.period
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Unit vector e_n (1-based).
    SingleMode(usize),
    /// Arbitrary amplitudes, normalized on construction.
    Custom(Vec<Complex64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::SingleMode(1)
    }
}

pub fn make_initial_state(kind: &InitialState, params: &SystemParams) -> Result<QuantumState> {
    let n = params.n_basis;
    match kind {
        InitialState::SingleMode(n0) => {
            if !(1..=n).contains(n0) {
                return Err(Error::InvalidInput(format!("initial mode {n0} outside 1..={n}")));
            }
            let mut amps = vec![Complex64::new(0.0, 0.0); n];
            amps[n0 - 1] = Complex64::new(1.0, 0.0);
            Ok(QuantumState::from_raw(amps, 0))
        }
        InitialState::Custom(v) => {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "custom state has {} amplitudes, basis has {n}",
                    v.len()
                )));
            }
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidInput("custom state must be nonzero and finite".into()));
            }
            Ok(QuantumState::from_raw(v.iter().map(|a| a / norm).collect(), 0))
        }
    }
}
