//! Lyapunov function `V = |x_c* - x_c|^2 + sum_k P(|r_k|)` and numerical
//! checks of its dissipation along trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::{velocities, CoincidencePolicy, SimulationParams, Trajectory};
use crate::error::Result;
use crate::geometry::{Point, SwarmConfig};
use crate::graph::compute_links;
use crate::interaction::InteractionFunction;

/// Agreement tolerance between the finite-difference and analytic `dV/dt`.
pub const DEFAULT_VDOT_TOL: f64 = 1e-3;

/// `V` with links recomputed from `config` at range `r_a`.
pub fn lyapunov_v(config: &SwarmConfig, reference_center: Point, f: &InteractionFunction, r_a: f64) -> f64 {
    let offset = (reference_center - config.center()).norm_squared();
    let links = compute_links(config, r_a);
    offset + links.iter().map(|l| f.potential(l.length)).sum::<f64>()
}

/// `-sum_i |u_i|^2` under the control law.
pub fn vdot_analytic(config: &SwarmConfig, f: &InteractionFunction, r_s: f64) -> Result<f64> {
    vdot_with_policy(config, f, r_s, CoincidencePolicy::default())
}

fn vdot_with_policy(
    config: &SwarmConfig,
    f: &InteractionFunction,
    r_s: f64,
    policy: CoincidencePolicy,
) -> Result<f64> {
    Ok(-velocities(config, f, r_s, policy)?.kinetic())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Vdot_analytic")]
    pub vdot_analytic: f64,
    /// Forward difference to the next recorded sample; `None` for the last one.
    #[serde(rename = "Vdot_numeric")]
    pub vdot_numeric: Option<f64>,
    pub links: usize,
    /// Link set differs from the previous sample's.
    pub links_changed: bool,
    /// Link set differs between this sample and the next one, so the forward
    /// difference straddles a discontinuity of `V`.
    pub flagged: bool,
    /// `|Vdot_numeric - Vdot_analytic| <= tol (1 + |Vdot_analytic|)`.
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub samples: Vec<LyapunovSample>,
    pub tol_v: f64,
    /// Differences that do not straddle a link-set change.
    pub checked: usize,
    pub agreeing: usize,
    pub flagged: usize,
    /// Unflagged differences where `V` increased.
    pub increases: usize,
    pub max_increase: f64,
}

impl DissipationReport {
    pub fn agreement_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.checked as f64
        }
    }
}

/// Compares `(V(t+h) - V(t))/h` with `Vdot_analytic(t)` over consecutive
/// recorded states (`h = dt * record_every`; the check is meant for stride 1).
///
/// The reference center is the center of the first recorded state. Pairs of
/// samples whose link sets differ are flagged and excluded from the statistics.
pub fn dissipation_check(
    traj: &Trajectory,
    f: &InteractionFunction,
    params: &SimulationParams,
    tol_v: f64,
) -> Result<DissipationReport> {
    let Some(first) = traj.states.first() else {
        return Ok(DissipationReport {
            samples: Vec::new(),
            tol_v,
            checked: 0,
            agreeing: 0,
            flagged: 0,
            increases: 0,
            max_increase: 0.0,
        });
    };
    let reference = first.center();
    let link_sets: Vec<_> = traj.states.iter().map(|s| compute_links(s, params.r_a)).collect();
    let values: Vec<f64> = traj
        .states
        .iter()
        .zip(&link_sets)
        .map(|(s, links)| {
            (reference - s.center()).norm_squared() + links.iter().map(|l| f.potential(l.length)).sum::<f64>()
        })
        .collect();

    let mut samples = Vec::with_capacity(traj.len());
    let (mut checked, mut agreeing, mut flagged, mut increases) = (0, 0, 0, 0);
    let mut max_increase = 0.0f64;
    for k in 0..traj.len() {
        let vdot = vdot_with_policy(&traj.states[k], f, params.r_s, params.coincidence)?;
        let links_changed = k > 0 && !link_sets[k].same_pairs(&link_sets[k - 1]);
        let (vdot_numeric, step_flagged, agrees) = if k + 1 < traj.len() {
            let h = traj.times[k + 1] - traj.times[k];
            let numeric = (values[k + 1] - values[k]) / h;
            let straddles = !link_sets[k + 1].same_pairs(&link_sets[k]);
            if straddles {
                flagged += 1;
                (Some(numeric), true, None)
            } else {
                checked += 1;
                let ok = (numeric - vdot).abs() <= tol_v * (1.0 + vdot.abs());
                agreeing += usize::from(ok);
                let rise = values[k + 1] - values[k];
                if rise > 0.0 {
                    increases += 1;
                    max_increase = max_increase.max(rise);
                }
                (Some(numeric), false, Some(ok))
            }
        } else {
            (None, false, None)
        };
        samples.push(LyapunovSample {
            t: traj.times[k],
            v: values[k],
            vdot_analytic: vdot,
            vdot_numeric,
            links: link_sets[k].len(),
            links_changed,
            flagged: step_flagged,
            agrees,
        });
    }
    Ok(DissipationReport {
        samples,
        tol_v,
        checked,
        agreeing,
        flagged,
        increases,
        max_increase,
    })
}
