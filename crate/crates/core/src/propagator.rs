//! The one-period quantum map and the per-kick observables.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::floquet::{apply_matrix, build_floquet_matrix};
use crate::kick::{overlap_integral, KickMatrix};
use crate::model::{QuantumState, SystemParams};

/// A run aborts once any |A_n| exceeds this.
pub const OVERFLOW_CEILING: f64 = 1e100;

/// Σ|A_n|².
pub fn norm(state: &QuantumState) -> f64 {
    state.amplitudes().iter().map(|a| a.norm_sqr()).sum()
}

/// Σ E_n |A_n|², not divided by the norm.
pub fn kinetic_energy(state: &QuantumState, params: &SystemParams) -> f64 {
    state.amplitudes().iter().enumerate().map(|(i, a)| params.mode_energy(i + 1) * a.norm_sqr()).sum()
}

/// ⟨Ψ|H₀ + W|Ψ⟩ and the same divided by the norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalEnergy {
    pub value: Complex64,
    pub normalized: Complex64,
}

/// Box Hamiltonian plus the kick profile W(x) = ε cos(2πx/μ) + iγ sin(2πx/μ)
/// with the delta comb stripped, in the sine basis.
#[derive(Debug, Clone)]
pub struct EnergyOperator {
    energies: Vec<f64>,
    profile: Array2<Complex64>,
}

impl EnergyOperator {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_basis;
        let k = params.wave_number();
        let mut profile = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let o = overlap_integral(i + 1, j + 1, k, params)?;
                let w = Complex64::new(params.epsilon * o.re, params.gamma * o.im);
                profile[(i, j)] = w;
                profile[(j, i)] = w;
            }
        }
        Ok(Self { energies: params.box_energies(), profile })
    }

    /// W(n, l), 1-based.
    pub fn profile_element(&self, n: usize, l: usize) -> Complex64 {
        self.profile[(n - 1, l - 1)]
    }

    pub fn expectation(&self, state: &QuantumState) -> TotalEnergy {
        let a = state.amplitudes();
        let kinetic: f64 = a.iter().zip(&self.energies).map(|(x, e)| e * x.norm_sqr()).sum();
        let mut potential = Complex64::new(0.0, 0.0);
        for (i, ai) in a.iter().enumerate() {
            if *ai == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row: Complex64 = self.profile.row(i).iter().zip(a).map(|(w, aj)| w * aj).sum();
            potential += ai.conj() * row;
        }
        let value = potential + kinetic;
        let n = norm(state);
        let normalized = if n > 0.0 { value / n } else { Complex64::new(f64::NAN, f64::NAN) };
        TotalEnergy { value, normalized }
    }
}

pub fn total_energy(state: &QuantumState, params: &SystemParams) -> Result<TotalEnergy> {
    Ok(EnergyOperator::new(params)?.expectation(state))
}

/// Floquet matrix F = V·D cached for repeated application.
#[derive(Debug, Clone)]
pub struct Propagator {
    floquet: Array2<Complex64>,
    params: SystemParams,
}

impl Propagator {
    pub fn new(kick: &KickMatrix, params: &SystemParams) -> Result<Self> {
        let floquet = build_floquet_matrix(params, kick)?;
        Ok(Self { floquet, params: *params })
    }

    pub fn floquet_matrix(&self) -> &Array2<Complex64> {
        &self.floquet
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Free flight over one period followed by the kick.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.len() != self.params.n_basis {
            return Err(Error::InvalidInput(format!(
                "state has {} amplitudes, basis has {}",
                state.len(),
                self.params.n_basis
            )));
        }
        let next = apply_matrix(&self.floquet, state.amplitudes());
        let kick = state.kick_count() + 1;
        let max_amplitude = next.iter().map(|a| a.norm()).fold(0.0, |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x) });
        if !max_amplitude.is_finite() || max_amplitude > OVERFLOW_CEILING {
            return Err(Error::Overflow { kick, max_amplitude });
        }
        Ok(QuantumState::from_raw(next, kick))
    }
}

/// A(t+T) = V·D·A(t).
pub fn step(state: &QuantumState, kick: &KickMatrix, params: &SystemParams) -> Result<QuantumState> {
    Propagator::new(kick, params)?.apply(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub kick_index: u64,
    pub time: f64,
    pub norm: f64,
    pub e_kin: f64,
    pub e_kin_normalized: f64,
    pub e_tot: Complex64,
    pub e_tot_normalized: Complex64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub records: Vec<Record>,
}

impl TimeSeries {
    pub const CSV_HEADER: &'static str = "kick,time,norm,e_kin,e_kin_normalized,e_tot_re,e_tot_im";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.records.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_kinetic(&self) -> f64 {
        self.records.iter().map(|r| r.e_kin).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.kick_index,
                fmt_f64(r.time),
                fmt_f64(r.norm),
                fmt_f64(r.e_kin),
                fmt_f64(r.e_kin_normalized),
                fmt_f64(r.e_tot.re),
                fmt_f64(r.e_tot.im)
            )?;
        }
        w.flush()
    }
}

fn observe(state: &QuantumState, params: &SystemParams, energy: &EnergyOperator) -> Record {
    let n = norm(state);
    let e_kin = kinetic_energy(state, params);
    let e_tot = energy.expectation(state);
    Record {
        kick_index: state.kick_count(),
        time: state.time(params),
        norm: n,
        e_kin,
        e_kin_normalized: e_kin / n,
        e_tot: e_tot.value,
        e_tot_normalized: e_tot.normalized,
    }
}

/// Applies `n_kicks` periods, recording the observables of the state at
/// kick 0 and at every multiple of `record_every` (just before that kick).
pub fn evolve(
    state: &QuantumState,
    n_kicks: u64,
    kick: &KickMatrix,
    params: &SystemParams,
    record_every: u64,
) -> Result<(TimeSeries, QuantumState)> {
    if record_every == 0 {
        return Err(Error::InvalidInput("record_every must be >= 1".into()));
    }
    let propagator = Propagator::new(kick, params)?;
    let energy = EnergyOperator::new(params)?;
    evolve_with(&propagator, &energy, state, n_kicks, record_every)
}

pub fn evolve_with(
    propagator: &Propagator,
    energy: &EnergyOperator,
    state: &QuantumState,
    n_kicks: u64,
    record_every: u64,
) -> Result<(TimeSeries, QuantumState)> {
    if record_every == 0 {
        return Err(Error::InvalidInput("record_every must be >= 1".into()));
    }
    let params = propagator.params();
    let mut series = TimeSeries { records: Vec::with_capacity((n_kicks / record_every + 1) as usize) };
    let mut current = state.clone();
    for done in 0..=n_kicks {
        if done % record_every == 0 {
            series.records.push(observe(&current, params, energy));
        }
        if done < n_kicks {
            current = propagator.apply(&current).map_err(|e| e.at(format!("kick {}", current.kick_count() + 1)))?;
        }
    }
    Ok((series, current))
}
