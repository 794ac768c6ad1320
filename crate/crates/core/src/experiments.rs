//! Seeded Monte-Carlo experiments: perturbation sweeps over `delta`,
//! convergence studies with error envelopes and batched spectra.
//!
//! Every trial draws its seeds from `derive_seed(base, delta_index, ...)`, so
//! its outcome does not depend on which other trials run or in what order.
//! Results are collected in `(delta_index, trial)` order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run, SimulationParams};
use crate::error::{Error, Result};
use crate::geometry::SwarmConfig;
use crate::graph::{compute_links, is_infinitesimally_rigid, rigidity_matrix, DEFAULT_RANK_TOL};
use crate::interaction::InteractionFunction;
use crate::lattice::{generate_triangular, is_triangular, link_error, perturb, GrowthPolicy, LatticeSpec};
use crate::linearization::{jacobian, max_principal_angle_sine, rigid_motion_basis, spectral_analysis};
use crate::seed::derive_seed;

/// Terminal link error below which a rigid trial counts as converged.
pub const DEFAULT_CONVERGE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub lattice: u64,
    pub perturb: u64,
}

impl TrialSeeds {
    pub fn derive(base: u64, delta_index: usize, trial: usize) -> Self {
        let t = trial as u64;
        TrialSeeds {
            lattice: derive_seed(base, delta_index as u64, t << 1),
            perturb: derive_seed(base, delta_index as u64, (t << 1) | 1),
        }
    }
}

/// Everything a single trial needs besides the simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n: usize,
    pub delta: f64,
    pub seeds: TrialSeeds,
    pub growth: GrowthPolicy,
    pub converge_tol: f64,
    pub rank_tol: f64,
    /// Test rigidity at every recorded state, not only the terminal one.
    pub track_rigidity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub delta: f64,
    pub delta_index: usize,
    pub trial: usize,
    pub lattice_seed: u64,
    pub perturb_seed: u64,
    pub e_initial: f64,
    /// NaN when the run diverged or ended without links.
    pub e_final: f64,
    pub rigid: bool,
    pub converged: bool,
    /// `None` unless rigidity was tracked.
    pub rigid_throughout: Option<bool>,
    pub diverged: bool,
    pub coincident_events: usize,
}

/// Time series of one trial, one entry per recorded state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialSeries {
    pub times: Vec<f64>,
    pub e: Vec<f64>,
    /// Empty unless rigidity was tracked.
    pub rigid: Vec<bool>,
}

fn validate_trial(spec: &TrialSpec) -> Result<()> {
    if !(spec.delta >= 0.0 && spec.delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be non-negative, got {}", spec.delta)));
    }
    if !(spec.converge_tol > 0.0) {
        return Err(Error::invalid("converge_tol must be positive"));
    }
    Ok(())
}

fn error_or_nan(config: &SwarmConfig, params: &SimulationParams) -> f64 {
    link_error(config, params.r, params.r_a).unwrap_or(f64::NAN)
}

/// Generate a lattice, perturb it, integrate over the horizon and assess the
/// terminal state. Divergence is recorded, not propagated.
pub fn run_trial_with_series(
    spec: &TrialSpec,
    delta_index: usize,
    trial: usize,
    params: &SimulationParams,
    f: &InteractionFunction,
) -> Result<(TrialRecord, TrialSeries)> {
    validate_trial(spec)?;
    params.validate()?;
    let lattice = generate_triangular(
        &LatticeSpec::new(spec.n, params.r, spec.seeds.lattice).with_growth(spec.growth),
        params.r_a,
    )?;
    let initial = perturb(&lattice, spec.delta, spec.seeds.perturb);

    let mut series = TrialSeries::default();
    let mut rank_error = None;
    let mut observer = |_: usize, t: f64, s: &SwarmConfig| {
        series.times.push(t);
        series.e.push(error_or_nan(s, params));
        if spec.track_rigidity {
            match is_infinitesimally_rigid(s, &compute_links(s, params.r_a), spec.rank_tol) {
                Ok(r) => series.rigid.push(r),
                Err(e) => {
                    rank_error.get_or_insert(e);
                    series.rigid.push(false);
                }
            }
        }
    };
    let outcome = run(&initial, f, params, &mut observer);
    if let Some(e) = rank_error {
        return Err(e);
    }

    let mut record = TrialRecord {
        delta: spec.delta,
        delta_index,
        trial,
        lattice_seed: spec.seeds.lattice,
        perturb_seed: spec.seeds.perturb,
        e_initial: error_or_nan(&initial, params),
        e_final: f64::NAN,
        rigid: false,
        converged: false,
        rigid_throughout: spec.track_rigidity.then(|| series.rigid.iter().all(|&r| r)),
        diverged: false,
        coincident_events: 0,
    };
    match outcome {
        Ok(out) => {
            let report = is_triangular(&out.terminal, params.r, params.r_a, spec.converge_tol, spec.rank_tol)?;
            record.e_final = report.max_length_deviation.unwrap_or(f64::NAN);
            record.rigid = report.rigid;
            record.converged = report.triangular;
            record.coincident_events = out.coincident_events;
        }
        Err(Error::Diverged { .. }) => {
            record.diverged = true;
            record.rigid_throughout = record.rigid_throughout.map(|_| false);
        }
        Err(e) => return Err(e),
    }
    Ok((record, series))
}

/// [`run_trial_with_series`] without keeping the series.
pub fn run_trial(
    spec: &TrialSpec,
    delta_index: usize,
    trial: usize,
    params: &SimulationParams,
    f: &InteractionFunction,
) -> Result<TrialRecord> {
    run_trial_with_series(spec, delta_index, trial, params, f).map(|(r, _)| r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n: usize,
    pub deltas: Vec<f64>,
    pub trials_per_delta: usize,
    pub base_seed: u64,
    pub growth: GrowthPolicy,
    pub converge_tol: f64,
    pub rank_tol: f64,
    pub params: SimulationParams,
}

impl SweepSpec {
    pub fn new(n: usize, deltas: Vec<f64>, trials_per_delta: usize, base_seed: u64) -> Self {
        SweepSpec {
            n,
            deltas,
            trials_per_delta,
            base_seed,
            growth: GrowthPolicy::default(),
            converge_tol: DEFAULT_CONVERGE_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            params: SimulationParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(Error::invalid("delta grid is empty"));
        }
        if self.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("delta values must be non-negative"));
        }
        if self.deltas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("delta values must be sorted ascending"));
        }
        if self.trials_per_delta == 0 {
            return Err(Error::invalid("trials_per_delta must be >= 1"));
        }
        if self.n < 3 {
            return Err(Error::invalid(format!("a triangular lattice needs n >= 3, got {}", self.n)));
        }
        self.params.validate()
    }

    fn trial_spec(&self, delta_index: usize, trial: usize) -> TrialSpec {
        TrialSpec {
            n: self.n,
            delta: self.deltas[delta_index],
            seeds: TrialSeeds::derive(self.base_seed, delta_index, trial),
            growth: self.growth,
            converge_tol: self.converge_tol,
            rank_tol: self.rank_tol,
            track_rigidity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Fraction of trials ending infinitesimally rigid.
    pub rho: f64,
    pub e_mean: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub trials: usize,
    /// Fraction ending rigid with every link within `converge_tol` of `R`.
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRecord>,
}

/// Mean, min and max of the finite values; NaN when there are none.
fn stats(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut sum, mut count, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        sum += v;
        count += 1;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if count == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (sum / count as f64, lo, hi)
    }
}

pub fn delta_sweep(spec: &SweepSpec, f: &InteractionFunction) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.deltas.len())
        .flat_map(|d| (0..spec.trials_per_delta).map(move |t| (d, t)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(d, t)| run_trial(&spec.trial_spec(d, t), d, t, &spec.params, f))
        .collect::<Result<Vec<_>>>()?;

    let rows = spec
        .deltas
        .iter()
        .enumerate()
        .map(|(d, &delta)| {
            let group = &trials[d * spec.trials_per_delta..(d + 1) * spec.trials_per_delta];
            let k = group.len() as f64;
            let (e_mean, e_min, e_max) = stats(group.iter().map(|r| r.e_final));
            SweepRow {
                delta,
                rho: group.iter().filter(|r| r.rigid).count() as f64 / k,
                e_mean,
                e_min,
                e_max,
                trials: group.len(),
                converged_fraction: group.iter().filter(|r| r.converged).count() as f64 / k,
            }
        })
        .collect();
    Ok(SweepResult { rows, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub records: Vec<TrialRecord>,
    pub series: Vec<TrialSeries>,
    pub envelope: Vec<EnvelopePoint>,
}

/// `trials` runs at a single `delta` recording `e(t)` (and rigidity when
/// `track_rigidity`) at every recorded state.
pub fn convergence_study(
    n: usize,
    delta: f64,
    trials: usize,
    base_seed: u64,
    track_rigidity: bool,
    params: &SimulationParams,
    f: &InteractionFunction,
) -> Result<ConvergenceStudy> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let spec = |t: usize| TrialSpec {
        n,
        delta,
        seeds: TrialSeeds::derive(base_seed, 0, t),
        growth: GrowthPolicy::default(),
        converge_tol: DEFAULT_CONVERGE_TOL,
        rank_tol: DEFAULT_RANK_TOL,
        track_rigidity,
    };
    let results = (0..trials)
        .into_par_iter()
        .map(|t| run_trial_with_series(&spec(t), 0, t, params, f))
        .collect::<Result<Vec<_>>>()?;
    let (records, series): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    // Diverged trials stop early; the envelope uses whatever is available.
    let longest = series.iter().max_by_key(|s| s.times.len()).map(|s| s.times.clone()).unwrap_or_default();
    let envelope = longest
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (mean, min, max) = stats(series.iter().filter_map(|s| s.e.get(k).copied()));
            EnvelopePoint { t, mean, min, max }
        })
        .collect();
    Ok(ConvergenceStudy { records, series, envelope })
}

/// One row of the lattice spectrum batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub seed: u64,
    pub zero_count: usize,
    pub negative_count: usize,
    pub unclassified_count: usize,
    pub kernel_aligned: bool,
    pub max_kernel_residual: f64,
    /// NaN when every eigenvalue is classified as zero.
    pub max_real_nonzero_eig: f64,
    pub spectral_radius: f64,
    /// Sine of the largest principal angle between the zero-eigenspace and the
    /// rigid motions; NaN unless exactly three zero eigenvalues were found.
    pub rigid_angle_sine: f64,
    pub j2_max_abs: f64,
}

/// Spectrum of the Jacobian at a freshly generated lattice.
pub fn lattice_spectrum(
    n: usize,
    seed: u64,
    growth: GrowthPolicy,
    r: f64,
    r_a: f64,
    tol_zero: f64,
    f: &InteractionFunction,
) -> Result<SpectrumRow> {
    let config = generate_triangular(&LatticeSpec::new(n, r, seed).with_growth(growth), r_a)?;
    let jac = jacobian(&config, f, r_a)?;
    let links = compute_links(&config, r_a);
    let m = rigidity_matrix(&config, &links)?;
    let analysis = spectral_analysis(&jac.total(), &m, tol_zero).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("n = {n}, seed = {seed}: {msg}")),
        other => other,
    })?;
    let rigid_angle_sine = if analysis.report.zero_count == 3 {
        let basis = nalgebra::DMatrix::from_columns(&rigid_motion_basis(&config)?);
        max_principal_angle_sine(&basis, &analysis.zero_space)
    } else {
        f64::NAN
    };
    let rep = analysis.report;
    Ok(SpectrumRow {
        n,
        seed,
        zero_count: rep.zero_count,
        negative_count: rep.negative_count,
        unclassified_count: rep.unclassified_count,
        kernel_aligned: rep.kernel_aligned,
        max_kernel_residual: rep.max_kernel_residual,
        max_real_nonzero_eig: rep.max_real_nonzero_eig.unwrap_or(f64::NAN),
        spectral_radius: rep.spectral_radius,
        rigid_angle_sine,
        j2_max_abs: jac.j2.amax(),
    })
}

/// [`lattice_spectrum`] for every `(n, seed)` pair, in input order.
pub fn spectrum_batch(
    sizes: &[usize],
    seeds: &[u64],
    growth: GrowthPolicy,
    r: f64,
    r_a: f64,
    tol_zero: f64,
    f: &InteractionFunction,
) -> Result<Vec<SpectrumRow>> {
    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    jobs.par_iter()
        .map(|&(n, s)| lattice_spectrum(n, s, growth, r, r_a, tol_zero, f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_params() -> SimulationParams {
        SimulationParams { horizon: 1.0, ..Default::default() }
    }

    /// Sensing limited to link range, where lattices are exact equilibria.
    fn link_range_params() -> SimulationParams {
        SimulationParams { r_s: crate::interaction::DEFAULT_MAX_LINK, ..short_params() }
    }

    fn spec(delta: f64, trial: usize) -> TrialSpec {
        TrialSpec {
            n: 20,
            delta,
            seeds: TrialSeeds::derive(7, 0, trial),
            growth: GrowthPolicy::default(),
            converge_tol: DEFAULT_CONVERGE_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            track_rigidity: true,
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = TrialSeeds::derive(1, 0, 0);
        assert_ne!(a.lattice, a.perturb);
        assert_ne!(a, TrialSeeds::derive(1, 0, 1));
        assert_ne!(a, TrialSeeds::derive(1, 1, 0));
        assert_eq!(a, TrialSeeds::derive(1, 0, 0));
    }

    #[test]
    fn zero_delta_trial_stays_converged() {
        let f = InteractionFunction::reference();
        let (rec, series) = run_trial_with_series(&spec(0.0, 0), 0, 0, &link_range_params(), &f).unwrap();
        assert!(rec.e_initial < 1e-12);
        assert!(rec.rigid && rec.converged && !rec.diverged);
        assert_eq!(rec.rigid_throughout, Some(true));
        assert_eq!(series.times.len(), 101);
        assert!(series.e.iter().all(|e| *e < 1e-3));
    }

    #[test]
    fn trial_rejects_negative_delta() {
        let f = InteractionFunction::reference();
        assert!(run_trial(&spec(-0.1, 0), 0, 0, &short_params(), &f).is_err());
    }

    #[test]
    fn converged_implies_triangular_terminal() {
        let f = InteractionFunction::reference();
        for t in 0..3 {
            let rec = run_trial(&spec(0.05, t), 0, t, &short_params(), &f).unwrap();
            if rec.converged {
                assert!(rec.rigid && rec.e_final <= DEFAULT_CONVERGE_TOL);
            }
        }
    }

    #[test]
    fn sweep_validation() {
        let mut s = SweepSpec::new(10, vec![0.1, 0.05], 2, 0);
        assert!(s.validate().is_err());
        s.deltas = vec![];
        assert!(s.validate().is_err());
        s.deltas = vec![-0.1];
        assert!(s.validate().is_err());
        s.deltas = vec![0.1];
        s.trials_per_delta = 0;
        assert!(s.validate().is_err());
        s.trials_per_delta = 1;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn sweep_is_ordered_and_seed_independent() {
        let f = InteractionFunction::reference();
        let mut s = SweepSpec::new(12, vec![0.0, 0.3], 3, 11);
        s.params = link_range_params();
        let full = delta_sweep(&s, &f).unwrap();
        let order: Vec<(usize, usize)> = full.trials.iter().map(|r| (r.delta_index, r.trial)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
        assert_eq!(full.rows[0].rho, 1.0);
        assert!(full.rows[0].e_max < 1e-12);
        for row in &full.rows {
            assert!(row.e_min <= row.e_mean && row.e_mean <= row.e_max);
            assert!((0.0..=1.0).contains(&row.rho));
        }
        s.trials_per_delta = 1;
        let fewer = delta_sweep(&s, &f).unwrap();
        assert_eq!(fewer.trials[0], full.trials[0]);
        assert_eq!(fewer.trials[1], full.trials[3]);
    }

    #[test]
    fn convergence_envelope_brackets_series() {
        let f = InteractionFunction::reference();
        let study = convergence_study(15, 0.1, 3, 5, false, &short_params(), &f).unwrap();
        assert_eq!(study.series.len(), 3);
        for (k, p) in study.envelope.iter().enumerate() {
            for s in &study.series {
                assert!(p.min <= s.e[k] && s.e[k] <= p.max);
            }
        }
        for r in &study.records {
            assert!(r.e_initial <= 2.0 * 0.1);
        }
    }

    #[test]
    fn zero_delta_study_is_flat() {
        let f = InteractionFunction::reference();
        let study = convergence_study(10, 0.0, 2, 1, false, &link_range_params(), &f).unwrap();
        assert!(study.envelope.iter().all(|p| p.max < 1e-12));
    }

    #[test]
    fn triangle_spectrum_row() {
        let f = InteractionFunction::reference();
        let r_a = crate::interaction::DEFAULT_MAX_LINK;
        let row = lattice_spectrum(3, 0, GrowthPolicy::default(), 1.0, r_a, 1e-8, &f).unwrap();
        assert_eq!((row.zero_count, row.negative_count), (3, 3));
        assert!(row.rigid_angle_sine < 1e-6);
        let rows = spectrum_batch(&[3, 6], &[0, 1], GrowthPolicy::default(), 1.0, r_a, 1e-8, &f).unwrap();
        assert_eq!(rows.iter().map(|r| (r.n, r.seed)).collect::<Vec<_>>(), vec![(3, 0), (3, 1), (6, 0), (6, 1)]);
        assert!(lattice_spectrum(2, 0, GrowthPolicy::default(), 1.0, r_a, 1e-8, &f).is_err());
    }
}
