//! Experiment configuration as TOML with dotted sections. Missing keys take
//! the reference values; unknown keys are rejected.
//!
//! ```toml
//! [geometry]
//! r = 1.0
//! r_a = 1.3660254037844386
//! r_s = 3.0
//!
//! [experiment]
//! n = 100
//! deltas = [0.05, 0.15, 0.25]
//! trials = 20
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CoincidencePolicy, SimulationParams};
use crate::error::{Error, Result};
use crate::experiments::{SweepSpec, DEFAULT_CONVERGE_TOL};
use crate::graph::DEFAULT_RANK_TOL;
use crate::interaction::{InteractionFunction, LennardJonesParams, Profile, DEFAULT_MAX_LINK};
use crate::lattice::GrowthPolicy;
use crate::linearization::DEFAULT_ZERO_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    #[default]
    LennardJones,
    TruncatedLennardJones,
    LinearSpring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionSection {
    pub profile: ProfileKind,
    pub a: f64,
    pub b: f64,
    pub c: u32,
    pub saturation: f64,
    /// Linear spring only.
    pub gain: f64,
}

impl Default for InteractionSection {
    fn default() -> Self {
        let lj = LennardJonesParams::default();
        InteractionSection {
            profile: ProfileKind::default(),
            a: lj.a,
            b: lj.b,
            c: lj.c,
            saturation: lj.saturation,
            gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub r: f64,
    pub r_a: f64,
    pub r_s: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            r: 1.0,
            r_a: DEFAULT_MAX_LINK,
            r_s: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub coincidence: CoincidencePolicy,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            dt: 0.01,
            horizon: 20.0,
            record_every: 1,
            coincidence: CoincidencePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n: usize,
    /// Perturbation radius for single runs and convergence studies.
    pub delta: f64,
    /// Grid for sweeps.
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub growth: GrowthPolicy,
    pub converge_tol: f64,
    pub rank_tol: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            n: 100,
            delta: 0.2,
            deltas: (0..=14).map(|k| k as f64 * 0.05).collect(),
            trials: 20,
            seed: 0,
            growth: GrowthPolicy::default(),
            converge_tol: DEFAULT_CONVERGE_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub tol_zero: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            sizes: vec![25, 50, 100],
            seeds: vec![0, 1, 2],
            tol_zero: DEFAULT_ZERO_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub interaction: InteractionSection,
    pub geometry: GeometrySection,
    pub simulation: SimulationSection,
    pub experiment: ExperimentSection,
    pub spectrum: SpectrumSection,
    pub output: OutputSection,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) | Error::Domain(msg) => Error::Config(msg),
        other => other,
    }
}

impl ExperimentConfig {
    /// Parses and validates. Syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation_params(0).validate().map_err(config_err)?;
        self.interaction().map_err(config_err)?;
        let i = &self.interaction;
        // Checked even when the selected profile ignores them.
        for (name, v) in [("a", i.a), ("b", i.b), ("saturation", i.saturation), ("gain", i.gain)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("interaction.{name} must be finite, got {v}")));
            }
        }
        let e = &self.experiment;
        if e.n < 3 {
            return Err(Error::Config(format!("experiment.n must be >= 3, got {}", e.n)));
        }
        if !(e.delta >= 0.0 && e.delta.is_finite()) {
            return Err(Error::Config(format!("experiment.delta must be non-negative, got {}", e.delta)));
        }
        if e.trials == 0 {
            return Err(Error::Config("experiment.trials must be >= 1".into()));
        }
        if !(e.converge_tol > 0.0 && e.rank_tol > 0.0) {
            return Err(Error::Config("experiment tolerances must be positive".into()));
        }
        self.sweep_spec().validate().map_err(config_err)?;
        let s = &self.spectrum;
        // TOML integers are signed 64-bit.
        if let Some(seed) = std::iter::once(&e.seed).chain(&s.seeds).find(|&&v| v > i64::MAX as u64) {
            return Err(Error::Config(format!("seed {seed} exceeds {}", i64::MAX)));
        }
        if let Some(&n) = s.sizes.iter().find(|&&n| n < 3) {
            return Err(Error::Config(format!(
                "spectrum.sizes: a triangular lattice needs n >= 3, got {n}"
            )));
        }
        if !(s.tol_zero > 0.0) {
            return Err(Error::Config("spectrum.tol_zero must be positive".into()));
        }
        Ok(())
    }

    pub fn interaction(&self) -> Result<InteractionFunction> {
        let i = &self.interaction;
        let lj = LennardJonesParams {
            a: i.a,
            b: i.b,
            c: i.c,
            saturation: i.saturation,
        };
        let profile = match i.profile {
            ProfileKind::LennardJones => Profile::LennardJones(lj),
            ProfileKind::TruncatedLennardJones => Profile::TruncatedLennardJones(lj),
            ProfileKind::LinearSpring => Profile::LinearSpring { gain: i.gain },
        };
        InteractionFunction::new(profile, self.geometry.r, self.geometry.r_a)
    }

    pub fn simulation_params(&self, seed: u64) -> SimulationParams {
        SimulationParams {
            r: self.geometry.r,
            r_a: self.geometry.r_a,
            r_s: self.geometry.r_s,
            dt: self.simulation.dt,
            horizon: self.simulation.horizon,
            seed,
            record_every: self.simulation.record_every,
            coincidence: self.simulation.coincidence,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let e = &self.experiment;
        SweepSpec {
            n: e.n,
            deltas: e.deltas.clone(),
            trials_per_delta: e.trials,
            base_seed: e.seed,
            growth: e.growth,
            converge_tol: e.converge_tol,
            rank_tol: e.rank_tol,
            params: self.simulation_params(e.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_values() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.simulation_params(0), SimulationParams::default());
        assert_eq!(c.interaction().unwrap(), InteractionFunction::reference());
        assert_eq!(c.experiment.deltas.len(), 15);
        assert!((c.experiment.deltas[14] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sections_override_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "[experiment]\nn = 25\ntrials = 5\n\n[simulation]\nhorizon = 2.0\n\n[interaction]\nprofile = \"linear-spring\"\ngain = 2.0\n",
        )
        .unwrap();
        assert_eq!(c.experiment.n, 25);
        assert_eq!(c.experiment.trials, 5);
        assert_eq!(c.simulation.horizon, 2.0);
        assert_eq!(c.interaction().unwrap().force(0.5), 1.0);
    }

    #[test]
    fn syntax_errors_report_line() {
        let err = ExperimentConfig::from_toml_str("[geometry]\nr = 1.0\nr_a = \n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[geometry]\nradius = 2\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[nonsense]\n").is_err());
    }

    #[test]
    fn semantic_validation() {
        for bad in [
            "[geometry]\nr_a = 1.8\n",
            "[geometry]\nr_s = 1.0\n",
            "[simulation]\ndt = 0\n",
            "[experiment]\nn = 2\n",
            "[experiment]\ndeltas = [0.2, 0.1]\n",
            "[experiment]\ntrials = 0\n",
            "[spectrum]\nsizes = [2]\n",
            "[interaction]\nc = 0\n",
            "[geometry]\nr_s = inf\n",
            "[interaction]\na = nan\n",
            "[interaction]\ngain = nan\n",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn oversized_seed_is_rejected() {
        let mut c = ExperimentConfig::default();
        c.experiment.seed = u64::MAX;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.experiment.seed = 99;
        c.output.dir = Some(PathBuf::from("out"));
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }
}
