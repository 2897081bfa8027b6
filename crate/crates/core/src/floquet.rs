//! Floquet operator F = V·D, its complex spectrum, quasienergies φ = i·ln λ,
//! PT-breaking detection and parameter scans.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::csv::fmt_f64;
use crate::eigen::{backward_errors, eigendecompose, phase_key, EigenOptions};
use crate::error::{Error, Result};
use crate::kick::{build_kick_matrix, KickMatrix, KickOptions, Route};
use crate::model::{ParamsFingerprint, SystemParams};

/// Default threshold on |Im φ| for calling a level broken.
pub const DEFAULT_BREAKING_TOL: f64 = 1e-6;

/// F(n, l) = V(n, l)·e^{−iE_l T}.
pub fn build_floquet_matrix(params: &SystemParams, kick: &KickMatrix) -> Result<Array2<Complex64>> {
    params.validate()?;
    kick.fingerprint().check(params)?;
    let phases: Vec<Complex64> =
        params.box_energies().iter().map(|e| Complex64::from_polar(1.0, -e * params.period)).collect();
    let mut f = kick.entries().clone();
    for mut row in f.rows_mut() {
        for (z, p) in row.iter_mut().zip(&phases) {
            *z *= p;
        }
    }
    Ok(f)
}

/// Matrix-vector product with a fixed left-to-right reduction per row.
pub fn apply_matrix(m: &Array2<Complex64>, a: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), a.len());
    m.rows()
        .into_iter()
        .map(|row| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, y) in row.iter().zip(a) {
                acc += x * y;
            }
            acc
        })
        .collect()
}

/// Wraps an angle to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// φ = i·ln λ on the principal branch: Re φ = −arg λ in (−π, π], Im φ = ln|λ|.
pub fn quasienergies(eigenvalues: &[Complex64]) -> Result<Vec<Complex64>> {
    eigenvalues
        .iter()
        .enumerate()
        .map(|(index, &lambda)| {
            if lambda.norm() == 0.0 || !lambda.norm().is_finite() {
                return Err(Error::DegenerateEigenvalue { index });
            }
            let (re, im) = phase_key(lambda);
            Ok(Complex64::new(re, im))
        })
        .collect()
}

/// Distance between quasienergies with the real part taken modulo 2π.
pub fn phi_distance(a: Complex64, b: Complex64) -> f64 {
    wrap_phase(a.re - b.re).hypot(a.im - b.im)
}

#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    eigenvalues: Vec<Complex64>,
    quasienergies: Vec<Complex64>,
    eigenvectors: Option<Array2<Complex64>>,
    max_backward_error: Option<f64>,
    fingerprint: ParamsFingerprint,
}

impl FloquetSpectrum {
    /// Eigenvalues sorted by (Re φ, Im φ).
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn quasienergies(&self) -> &[Complex64] {
        &self.quasienergies
    }

    /// Unit-norm right eigenvectors as columns, in eigenvalue order.
    pub fn eigenvectors(&self) -> Option<&Array2<Complex64>> {
        self.eigenvectors.as_ref()
    }

    /// Largest ‖Fv − λv‖ / ‖F‖ over all pairs, when vectors were computed.
    pub fn max_backward_error(&self) -> Option<f64> {
        self.max_backward_error
    }

    pub fn fingerprint(&self) -> &ParamsFingerprint {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Weight of each eigenvector on the upper half of the basis.
    pub fn upper_half_weights(&self) -> Option<Vec<f64>> {
        let v = self.eigenvectors.as_ref()?;
        let half = v.nrows() / 2;
        Some(v.columns().into_iter().map(|c| c.iter().skip(half).map(|z| z.norm_sqr()).sum()).collect())
    }

    /// Mean mode number Σ n|v_n|² of each eigenvector.
    pub fn mode_centroids(&self) -> Option<Vec<f64>> {
        let v = self.eigenvectors.as_ref()?;
        Some(
            v.columns()
                .into_iter()
                .map(|c| c.iter().enumerate().map(|(i, z)| (i + 1) as f64 * z.norm_sqr()).sum())
                .collect(),
        )
    }

    /// Indices of the N/2 levels least supported on modes above N/2, i.e.
    /// the ones the truncation resolves. All levels if no vectors are stored.
    pub fn resolved_levels(&self) -> Vec<usize> {
        match self.upper_half_weights() {
            None => (0..self.len()).collect(),
            Some(w) => {
                let mut idx: Vec<usize> = (0..w.len()).collect();
                idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
                idx.truncate(w.len() / 2);
                idx.sort_unstable();
                idx
            }
        }
    }

    /// The `count` levels with the lowest mode centroid, lowest first.
    pub fn low_levels(&self, count: usize) -> Result<Vec<usize>> {
        let c = self
            .mode_centroids()
            .ok_or_else(|| Error::InvalidInput("low-level selection needs eigenvectors".into()))?;
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
        idx.truncate(count);
        Ok(idx)
    }
}

pub fn floquet_spectrum(params: &SystemParams, kick: &KickMatrix, opts: &EigenOptions) -> Result<FloquetSpectrum> {
    let f = build_floquet_matrix(params, kick)?;
    spectrum_of(&f, params.fingerprint(), opts)
}

fn spectrum_of(f: &Array2<Complex64>, fingerprint: ParamsFingerprint, opts: &EigenOptions) -> Result<FloquetSpectrum> {
    let dec = eigendecompose(f, opts)?;
    let max_backward_error = backward_errors(f, &dec).map(|e| e.into_iter().fold(0.0, f64::max));
    let quasienergies = quasienergies(&dec.eigenvalues)?;
    Ok(FloquetSpectrum {
        eigenvalues: dec.eigenvalues,
        quasienergies,
        eigenvectors: dec.eigenvectors,
        max_backward_error,
        fingerprint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtBreaking {
    pub broken: bool,
    pub max_im: f64,
    /// Levels with Im φ > tol.
    pub gain_count: usize,
    /// Levels with Im φ < −tol.
    pub loss_count: usize,
    pub levels_considered: usize,
}

/// Classifies the resolved levels by |Im φ| against `tol`.
pub fn detect_pt_breaking(spectrum: &FloquetSpectrum, tol: f64) -> Result<PtBreaking> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("breaking tolerance must be > 0, got {tol}")));
    }
    let levels = spectrum.resolved_levels();
    let phi = spectrum.quasienergies();
    let ims: Vec<f64> = levels.iter().map(|&i| phi[i].im).collect();
    let max_im = ims.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(PtBreaking {
        broken: max_im > tol,
        max_im,
        gain_count: ims.iter().filter(|&&x| x > tol).count(),
        loss_count: ims.iter().filter(|&&x| x < -tol).count(),
        levels_considered: levels.len(),
    })
}

/// Smallest d such that the multiset {φ} can be matched one-to-one onto
/// {conj φ} with every pair within d (bottleneck matching).
pub fn conjugation_defect(phis: &[Complex64]) -> f64 {
    let n = phis.len();
    if n == 0 {
        return 0.0;
    }
    let dist: Vec<Vec<f64>> =
        phis.iter().map(|a| phis.iter().map(|b| phi_distance(*a, b.conj())).collect()).collect();
    let mut candidates: Vec<f64> = dist.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // The identity pairing bounds the answer from above.
    let upper = (0..n).map(|i| dist[i][i]).fold(0.0, f64::max);
    let hi_idx = candidates.partition_point(|&d| d < upper);
    let (mut lo, mut hi) = (0usize, hi_idx.min(candidates.len() - 1));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching_within(&dist, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Kuhn's augmenting-path bipartite matching restricted to edges ≤ d.
fn perfect_matching_within(dist: &[Vec<f64>], d: f64) -> bool {
    let n = dist.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(u: usize, d: f64, dist: &[Vec<f64>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for v in 0..dist.len() {
            if dist[u][v] <= d && !seen[v] {
                seen[v] = true;
                if owner[v].map_or(true, |w| augment(w, d, dist, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    for u in 0..n {
        let mut seen = vec![false; n];
        if !augment(u, d, dist, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

/// Bound on ||λ| − 1| from the truncation alone: at γ = 0 every eigenvalue
/// modulus lies between the extreme singular values of the truncated kick,
/// so −ln σ_min bounds |Im φ|.
pub fn truncation_floor(params: &SystemParams, opts: &KickOptions) -> Result<f64> {
    let hermitian = params.with_gamma(0.0);
    let v = build_kick_matrix(&hermitian, Route::Fourier, opts)?;
    let e = v.entries();
    let gram = e.t().mapv(|z| z.conj()).dot(e);
    let dec = eigendecompose(&gram, &EigenOptions { compute_vectors: false, ..EigenOptions::default() })?;
    let smallest = dec.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    Ok(if smallest > 0.0 { -0.5 * smallest.ln() } else { f64::INFINITY })
}

/// Largest distance from each of the `count` lowest-centroid levels of
/// `coarse` to its nearest level in `fine`.
pub fn low_level_shift(coarse: &FloquetSpectrum, fine: &FloquetSpectrum, count: usize) -> Result<f64> {
    let levels = coarse.low_levels(count)?;
    Ok(levels
        .iter()
        .map(|&i| {
            let a = coarse.quasienergies()[i];
            fine.quasienergies().iter().map(|&b| phi_distance(a, b)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

/// How the kick strength is held along a k-scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanStrength {
    /// ε from the parameters.
    Epsilon,
    /// ε = K/T.
    FixedK(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub route: Route,
    pub kick: KickOptions,
    pub eigen: EigenOptions,
    pub breaking_tol: f64,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            route: Route::Fourier,
            kick: KickOptions::default(),
            eigen: EigenOptions::default(),
            breaking_tol: DEFAULT_BREAKING_TOL,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub value: f64,
    pub spectrum: FloquetSpectrum,
    pub breaking: PtBreaking,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    /// First axis value where breaking is detected.
    pub breaking_onset: Option<f64>,
}

impl ScanResult {
    pub fn axis(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let rows: Vec<(f64, &FloquetSpectrum)> = self.points.iter().map(|p| (p.value, &p.spectrum)).collect();
        write_spectrum_csv(w, &rows)
    }

    /// Follows the given starting levels of the first point through the scan
    /// by greedy nearest-neighbour assignment in φ. Returns, per level, its
    /// index at every point.
    pub fn track_levels(&self, start: &[usize]) -> Vec<Vec<usize>> {
        let mut paths: Vec<Vec<usize>> = start.iter().map(|&i| vec![i]).collect();
        for w in self.points.windows(2) {
            let (prev, next) = (w[0].spectrum.quasienergies(), w[1].spectrum.quasienergies());
            let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::new();
            for (t, path) in paths.iter().enumerate() {
                let from = prev[*path.last().expect("non-empty path")];
                for (j, to) in next.iter().enumerate() {
                    pairs.push((phi_distance(from, *to), to.im, t, j));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then((a.2, a.3).cmp(&(b.2, b.3))));
            let mut assigned = vec![None; paths.len()];
            let mut taken = vec![false; next.len()];
            for (_, _, t, j) in pairs {
                if assigned[t].is_none() && !taken[j] {
                    assigned[t] = Some(j);
                    taken[j] = true;
                }
            }
            for (path, a) in paths.iter_mut().zip(assigned) {
                path.push(a.expect("as many candidates as tracked levels"));
            }
        }
        paths
    }
}

/// Long-format spectrum CSV, one row per (scan value, level).
pub fn write_spectrum_csv<W: Write>(mut w: W, rows: &[(f64, &FloquetSpectrum)]) -> std::io::Result<()> {
    writeln!(w, "scan_param,level_index,re_lambda,im_lambda,re_phi,im_phi")?;
    for (value, spec) in rows {
        for (i, (l, p)) in spec.eigenvalues().iter().zip(spec.quasienergies()).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(*value),
                i + 1,
                fmt_f64(l.re),
                fmt_f64(l.im),
                fmt_f64(p.re),
                fmt_f64(p.im)
            )?;
        }
    }
    w.flush()
}

fn check_grid(grid: &[f64], name: &str, strictly_positive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput(format!("{name} grid is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} grid has non-finite values")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!("{name} grid must be strictly increasing")));
    }
    let bad = if strictly_positive { grid[0] <= 0.0 } else { grid[0] < 0.0 };
    if bad {
        return Err(Error::InvalidInput(format!(
            "{name} grid must be {}",
            if strictly_positive { "positive" } else { "non-negative" }
        )));
    }
    Ok(())
}

fn run_scan(axis: &[f64], label: &str, opts: &ScanOptions, point: impl Fn(f64) -> SystemParams + Sync) -> Result<ScanResult> {
    let solve = |value: f64| -> Result<ScanPoint> {
        let params = point(value);
        let kick = build_kick_matrix(&params, opts.route, &opts.kick)?;
        let spectrum = floquet_spectrum(&params, &kick, &opts.eigen)?;
        let breaking = detect_pt_breaking(&spectrum, opts.breaking_tol)?;
        Ok(ScanPoint { value, spectrum, breaking })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        if jobs == 0 {
            return Err(Error::InvalidInput("jobs must be >= 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let results: Vec<Result<ScanPoint>> = pool.install(|| axis.par_iter().map(|&v| solve(v)).collect());
    let points = results
        .into_iter()
        .zip(axis)
        .map(|(r, v)| r.map_err(|e| e.at(format!("{label} = {v}"))))
        .collect::<Result<Vec<_>>>()?;
    let breaking_onset = points.iter().find(|p| p.breaking.broken).map(|p| p.value);
    Ok(ScanResult { points, breaking_onset })
}

/// Spectra along k = 2π/μ.
pub fn scan_vs_k(params: &SystemParams, k_grid: &[f64], strength: ScanStrength, opts: &ScanOptions) -> Result<ScanResult> {
    check_grid(k_grid, "k", true)?;
    let epsilon = match strength {
        ScanStrength::Epsilon => params.epsilon,
        ScanStrength::FixedK(k) => k / params.period,
    };
    let base = SystemParams { epsilon, ..*params };
    base.validate()?;
    run_scan(k_grid, "k", opts, |k| SystemParams { wavelength: 2.0 * PI / k, ..base })
}

/// Spectra along γ; `breaking_onset` is the first γ where breaking is detected.
pub fn scan_vs_gamma(params: &SystemParams, gamma_grid: &[f64], opts: &ScanOptions) -> Result<ScanResult> {
    check_grid(gamma_grid, "gamma", false)?;
    params.validate()?;
    run_scan(gamma_grid, "gamma", opts, |g| params.with_gamma(g))
}

/// max − min of each path's Re φ, unwrapped across the ±π cut.
pub fn level_fluctuations(scan: &ScanResult, paths: &[Vec<usize>]) -> Vec<f64> {
    paths
        .iter()
        .map(|path| {
            let mut acc = scan.points[0].spectrum.quasienergies()[path[0]].re;
            let (mut lo, mut hi) = (acc, acc);
            for (w, idx) in scan.points.windows(2).zip(path.windows(2)) {
                let a = w[0].spectrum.quasienergies()[idx[0]].re;
                let b = w[1].spectrum.quasienergies()[idx[1]].re;
                acc += wrap_phase(b - a);
                lo = lo.min(acc);
                hi = hi.max(acc);
            }
            hi - lo
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kick::kick_matrix_fourier;
    use crate::propagator::step;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn commensurate(epsilon: f64, gamma: f64, n_basis: usize) -> SystemParams {
        SystemParams { length: 10.0, wavelength: 1.0, epsilon, gamma, n_basis, ..SystemParams::default() }
    }

    #[test]
    fn free_floquet_matrix_is_diagonal_phase() {
        let p = SystemParams { epsilon: 0.0, gamma: 0.0, n_basis: 12, ..SystemParams::default() };
        let f = build_floquet_matrix(&p, &kick_matrix_fourier(&p).unwrap()).unwrap();
        for ((i, j), z) in f.indexed_iter() {
            if i == j {
                let e = p.box_energies()[i];
                assert!((z - Complex64::from_polar(1.0, -e * p.period)).norm() < 1e-14);
            } else {
                assert!(z.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn floquet_application_is_bitwise_step() {
        let p = SystemParams { epsilon: 0.4, gamma: 0.2, n_basis: 32, ..SystemParams::default() };
        let v = kick_matrix_fourier(&p).unwrap();
        let f = build_floquet_matrix(&p, &v).unwrap();
        let amps: Vec<Complex64> = (0..32).map(|i| c((0.37 * i as f64).sin(), (0.11 * i as f64).cos())).collect();
        let s = crate::model::QuantumState::new(amps.clone(), 0).unwrap();
        let stepped = step(&s, &v, &p).unwrap();
        assert_eq!(stepped.amplitudes(), apply_matrix(&f, &amps).as_slice());
    }

    #[test]
    fn interior_block_of_floquet_matrix_is_unitary() {
        let p = SystemParams { epsilon: 0.1, gamma: 0.0, n_basis: 128, ..SystemParams::default() };
        let f = build_floquet_matrix(&p, &kick_matrix_fourier(&p).unwrap()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let s: Complex64 = (0..128).map(|r| f[(r, i)].conj() * f[(r, j)]).sum();
                worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).norm());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn mismatched_kick_is_rejected() {
        let p = SystemParams { n_basis: 8, ..SystemParams::default() };
        let v = kick_matrix_fourier(&p).unwrap();
        assert!(matches!(build_floquet_matrix(&p.with_gamma(0.5), &v), Err(Error::InvalidInput(_))));
        assert!(build_floquet_matrix(&p.with_n_basis(16), &v).is_err());
    }

    #[test]
    fn quasienergy_examples() {
        let phi = quasienergies(&[c(1.0, 0.0), Complex64::from_polar(1.0, -0.5)]).unwrap();
        assert!(phi[0].norm() < 1e-15);
        assert!((phi[1] - c(0.5, 0.0)).norm() < 1e-15);
        let phi = quasienergies(&[c(-1.0, 0.0)]).unwrap();
        assert_eq!(phi[0].re, PI);
        let phi = quasienergies(&[Complex64::from_polar(0.1f64.exp(), 1.0)]).unwrap();
        assert!((phi[0] - c(-1.0, 0.1)).norm() < 1e-15);
        assert!(matches!(quasienergies(&[c(1.0, 0.0), c(0.0, 0.0)]), Err(Error::DegenerateEigenvalue { index: 1 })));
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(0.25) - 0.25).abs() < 1e-15);
        for k in -50..50 {
            let w = wrap_phase(0.37 * k as f64);
            assert!(w > -PI && w <= PI);
        }
    }

    #[test]
    fn free_spectrum_is_wrapped_box_energies() {
        for (length, period) in [(3.3, 0.01), (10.0, 1.0), (1.0, 0.37)] {
            let p = SystemParams { length, period, epsilon: 0.0, gamma: 0.0, n_basis: 40, ..SystemParams::default() };
            let spec = floquet_spectrum(&p, &kick_matrix_fourier(&p).unwrap(), &EigenOptions::default()).unwrap();
            let mut expect: Vec<f64> = p.box_energies().iter().map(|e| wrap_phase(e * period)).collect();
            expect.sort_by(f64::total_cmp);
            let got: Vec<f64> = spec.quasienergies().iter().map(|z| z.re).collect();
            for (g, e) in got.iter().zip(&expect) {
                assert!(phi_distance(c(*g, 0.0), c(*e, 0.0)) < 1e-10, "{g} vs {e}");
            }
            assert!(spec.quasienergies().iter().all(|z| z.im.abs() < 1e-10));
        }
    }

    #[test]
    fn branch_reproduces_eigenvalues() {
        let p = commensurate(0.5, 0.5, 48);
        let spec = floquet_spectrum(&p, &kick_matrix_fourier(&p).unwrap(), &EigenOptions::default()).unwrap();
        for (l, phi) in spec.eigenvalues().iter().zip(spec.quasienergies()) {
            let back = (-Complex64::i() * phi).exp();
            assert!((back - l).norm() < 1e-12 * l.norm().max(1.0));
        }
        assert!(spec.max_backward_error().unwrap() < 1e-10);
    }

    fn synthetic(phis: &[Complex64]) -> FloquetSpectrum {
        let eigenvalues: Vec<Complex64> = phis.iter().map(|p| (-Complex64::i() * p).exp()).collect();
        FloquetSpectrum {
            quasienergies: quasienergies(&eigenvalues).unwrap(),
            eigenvalues,
            eigenvectors: None,
            max_backward_error: None,
            fingerprint: SystemParams::default().fingerprint(),
        }
    }

    #[test]
    fn breaking_detection_examples() {
        let unbroken = synthetic(&[c(0.1, 0.0), c(0.5, 1e-9), c(-2.0, -1e-9)]);
        let r = detect_pt_breaking(&unbroken, DEFAULT_BREAKING_TOL).unwrap();
        assert!(!r.broken);
        assert_eq!((r.gain_count, r.loss_count, r.levels_considered), (0, 0, 3));

        let one = synthetic(&[c(0.1, 0.0), c(0.5, 0.1), c(0.5, -0.1)]);
        let r = detect_pt_breaking(&one, DEFAULT_BREAKING_TOL).unwrap();
        assert!(r.broken);
        assert!((r.max_im - 0.1).abs() < 1e-14);
        assert_eq!((r.gain_count, r.loss_count), (1, 1));

        assert!(detect_pt_breaking(&one, 0.0).is_err());
    }

    #[test]
    fn hermitian_spectrum_is_unbroken() {
        let p = commensurate(0.1, 0.0, 128);
        let spec = floquet_spectrum(&p, &kick_matrix_fourier(&p).unwrap(), &EigenOptions::default()).unwrap();
        let r = detect_pt_breaking(&spec, DEFAULT_BREAKING_TOL).unwrap();
        assert!(!r.broken, "{r:?}");
        assert_eq!(r.levels_considered, 64);
    }

    #[test]
    fn conjugation_defect_examples() {
        assert_eq!(conjugation_defect(&[]), 0.0);
        assert_eq!(conjugation_defect(&[c(0.3, 0.0), c(-1.0, 0.0)]), 0.0);
        let pair = [c(0.3, 0.2), c(0.3, -0.2), c(1.0, 0.0)];
        assert!(conjugation_defect(&pair) < 1e-15);
        // an unpaired gain level must travel to its own conjugate
        let lone = [c(0.3, 0.2), c(1.0, 0.0)];
        assert!((conjugation_defect(&lone) - 0.4).abs() < 1e-15);
        // matching beats the identity pairing
        let skew = [c(0.0, 0.1), c(0.01, -0.1)];
        assert!((conjugation_defect(&skew) - 0.01).abs() < 1e-15);
        // the real part is compared modulo 2π
        let cut = [c(PI, 0.05), c(-PI + 1e-3, -0.05)];
        assert!((conjugation_defect(&cut) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn truncation_floor_bounds_hermitian_levels() {
        let p = commensurate(0.1, 0.0, 64);
        let floor = truncation_floor(&p, &KickOptions::default()).unwrap();
        let spec = floquet_spectrum(&p, &kick_matrix_fourier(&p).unwrap(), &EigenOptions::default()).unwrap();
        let max_im = spec.quasienergies().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(max_im <= floor * (1.0 + 1e-9) + 1e-13, "{max_im} > {floor}");
        assert!(floor.is_finite());
    }

    #[test]
    fn low_levels_follow_mode_centroid() {
        let p = SystemParams { epsilon: 0.0, gamma: 0.0, n_basis: 16, ..SystemParams::default() };
        let spec = floquet_spectrum(&p, &kick_matrix_fourier(&p).unwrap(), &EigenOptions::default()).unwrap();
        let low = spec.low_levels(3).unwrap();
        let energies = p.box_energies();
        for (rank, &i) in low.iter().enumerate() {
            let expect = wrap_phase(energies[rank] * p.period);
            assert!((spec.quasienergies()[i].re - expect).abs() < 1e-12);
        }
        assert!(synthetic(&[c(0.0, 0.0)]).low_levels(1).is_err());
    }

    #[test]
    fn gamma_scan_of_single_point() {
        let p = commensurate(0.1, 0.0, 128);
        let scan = scan_vs_gamma(&p, &[0.0], &ScanOptions::default()).unwrap();
        assert_eq!(scan.points.len(), 1);
        assert_eq!(scan.breaking_onset, None);
    }

    #[test]
    fn gamma_scan_finds_onset_inside_grid() {
        let p = commensurate(0.1, 0.0, 128);
        let grid = [0.0, 1.0, 2.0];
        let scan = scan_vs_gamma(&p, &grid, &ScanOptions::default()).unwrap();
        let onset = scan.breaking_onset.expect("onset");
        assert!(onset > 0.0 && onset <= 2.0);
        assert!(!scan.points[0].breaking.broken);
    }

    #[test]
    fn free_k_scan_is_flat() {
        let p = SystemParams { epsilon: 0.0, gamma: 0.0, n_basis: 16, ..SystemParams::default() };
        let scan = scan_vs_k(&p, &[1.0, 2.0, 5.0], ScanStrength::Epsilon, &ScanOptions::default()).unwrap();
        let first = scan.points[0].spectrum.quasienergies();
        for pt in &scan.points[1..] {
            for (a, b) in first.iter().zip(pt.spectrum.quasienergies()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_k_sets_epsilon_from_period() {
        let p = SystemParams { period: 0.5, n_basis: 16, ..SystemParams::default() };
        let scan = scan_vs_k(&p, &[4.0], ScanStrength::FixedK(0.2), &ScanOptions::default()).unwrap();
        let fp = scan.points[0].spectrum.fingerprint();
        assert!((fp.epsilon - 0.4).abs() < 1e-15);
        assert!((fp.wavelength - 2.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let p = SystemParams { n_basis: 8, ..SystemParams::default() };
        let o = ScanOptions::default();
        assert!(scan_vs_k(&p, &[], ScanStrength::Epsilon, &o).is_err());
        assert!(scan_vs_k(&p, &[2.0, 1.0], ScanStrength::Epsilon, &o).is_err());
        assert!(scan_vs_k(&p, &[0.0, 1.0], ScanStrength::Epsilon, &o).is_err());
        assert!(scan_vs_gamma(&p, &[-0.1, 1.0], &o).is_err());
        assert!(scan_vs_gamma(&p, &[0.0, 0.0], &o).is_err());
        let zero_jobs = ScanOptions { jobs: Some(0), ..o };
        assert!(scan_vs_gamma(&p, &[0.0], &zero_jobs).is_err());
    }

    #[test]
    fn scan_output_independent_of_jobs() {
        let p = commensurate(0.3, 0.0, 24);
        let grid = [0.0, 0.3, 0.6, 0.9, 1.2];
        let mut outputs = Vec::new();
        for jobs in [1, 3] {
            let scan = scan_vs_gamma(&p, &grid, &ScanOptions { jobs: Some(jobs), ..ScanOptions::default() }).unwrap();
            let mut buf = Vec::new();
            scan.write_csv(&mut buf).unwrap();
            outputs.push(buf);
        }
        assert_eq!(outputs[0], outputs[1]);
    }

    #[test]
    fn spectrum_csv_layout() {
        let p = SystemParams { n_basis: 4, ..SystemParams::default() };
        let scan = scan_vs_gamma(&p, &[0.0, 0.5], &ScanOptions::default()).unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scan_param,level_index,re_lambda,im_lambda,re_phi,im_phi");
        assert_eq!(lines.len(), 9);
        assert!(lines[1].contains(",1,"));
        assert!(lines[8].contains(",4,"));
        let first: f64 = lines[5].split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, 0.5);
    }

    #[test]
    fn tracking_follows_slowly_moving_levels() {
        let p = commensurate(0.1, 0.0, 24);
        let grid: Vec<f64> = (0..5).map(|i| 6.0 + 0.01 * i as f64).collect();
        let scan = scan_vs_k(&p, &grid, ScanStrength::Epsilon, &ScanOptions::default()).unwrap();
        let start = scan.points[0].spectrum.low_levels(3).unwrap();
        let paths = scan.track_levels(&start);
        assert_eq!(paths.len(), 3);
        for (path, &s) in paths.iter().zip(&start) {
            assert_eq!(path.len(), 5);
            assert_eq!(path[0], s);
            for (w, idx) in scan.points.windows(2).zip(path.windows(2)) {
                let a = w[0].spectrum.quasienergies()[idx[0]];
                let b = w[1].spectrum.quasienergies()[idx[1]];
                assert!(phi_distance(a, b) < 1e-2);
            }
        }
        let fl = level_fluctuations(&scan, &paths);
        assert!(fl.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn eigenvector_is_scaled_by_one_step() {
        let p = commensurate(0.3, 0.2, 32);
        let v = kick_matrix_fourier(&p).unwrap();
        let spec = floquet_spectrum(&p, &v, &EigenOptions::default()).unwrap();
        let i = spec.low_levels(1).unwrap()[0];
        let vec: Vec<Complex64> = spec.eigenvectors().unwrap().column(i).to_vec();
        let s = crate::model::QuantumState::new(vec.clone(), 0).unwrap();
        let out = step(&s, &v, &p).unwrap();
        let lambda = spec.eigenvalues()[i];
        for (a, b) in out.amplitudes().iter().zip(&vec) {
            assert!((a - lambda * b).norm() < 1e-10);
        }
    }
}
