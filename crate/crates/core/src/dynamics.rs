//! Single-integrator swarm under the virtual-force control law, integrated
//! with synchronous forward Euler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SwarmConfig};
use crate::interaction::{InteractionFunction, DEFAULT_MAX_LINK};

/// Distances below this are treated as coincident agents.
pub const COINCIDENCE_EPS: f64 = 1e-12;

/// What to do when two agents (numerically) coincide.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoincidencePolicy {
    /// Drop the pair's contribution and count the event.
    #[default]
    ZeroWithWarning,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    /// Desired link length.
    pub r: f64,
    /// Maximum link length.
    pub r_a: f64,
    /// Sensing radius.
    pub r_s: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub record_every: usize,
    #[serde(default)]
    pub coincidence: CoincidencePolicy,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            r: 1.0,
            r_a: DEFAULT_MAX_LINK,
            r_s: 3.0,
            dt: 0.01,
            horizon: 20.0,
            seed: 0,
            record_every: 1,
            coincidence: CoincidencePolicy::ZeroWithWarning,
        }
    }
}

impl SimulationParams {
    pub fn validate(&self) -> Result<()> {
        let sqrt3 = 3f64.sqrt();
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid(format!("R must be positive, got {}", self.r)));
        }
        if !(self.r_a > self.r && self.r_a < self.r * sqrt3) {
            return Err(Error::invalid(format!(
                "R_a must lie in (R, R*sqrt(3)) = ({}, {}), got {}",
                self.r,
                self.r * sqrt3,
                self.r_a
            )));
        }
        if !(self.r_s >= self.r_a && self.r_s.is_finite()) {
            return Err(Error::invalid(format!(
                "sensing radius R_s = {} must be at least R_a = {}",
                self.r_s, self.r_a
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be >= 1"));
        }
        Ok(())
    }

    /// Number of Euler steps covering the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Agents `j != i` within the sensing radius (inclusive), ascending.
pub fn interaction_set(i: usize, config: &SwarmConfig, r_s: f64) -> Vec<usize> {
    let xi = config.position(i);
    config
        .positions()
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != i && (xi - p).norm() <= r_s)
        .map(|(j, _)| j)
        .collect()
}

/// Velocities of all agents plus the number of coincident pairs skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocities {
    pub u: Vec<Point>,
    pub coincident_pairs: usize,
}

impl Velocities {
    pub fn max_speed(&self) -> f64 {
        self.u.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sum_i |u_i|^2`.
    pub fn kinetic(&self) -> f64 {
        self.u.iter().map(|v| v.norm_squared()).sum()
    }
}

enum PairTerm {
    Outside,
    Coincident,
    Force(Point),
}

/// Contribution of agent `j` to the velocity of agent `i`. The contribution
/// to `j` from `i` is the exact negation.
#[inline]
fn pair_term(
    xi: Point,
    xj: Point,
    i: usize,
    j: usize,
    f: &InteractionFunction,
    r_s: f64,
    policy: CoincidencePolicy,
) -> Result<PairTerm> {
    let r = xi - xj;
    let d = r.norm();
    if d > r_s {
        return Ok(PairTerm::Outside);
    }
    if d < COINCIDENCE_EPS {
        return match policy {
            CoincidencePolicy::ZeroWithWarning => Ok(PairTerm::Coincident),
            CoincidencePolicy::Abort => Err(Error::CoincidentAgents { i, j, distance: d }),
        };
    }
    Ok(PairTerm::Force(r * (f.force(d) / d)))
}

/// `u_i = sum_{j in I_i} f(|r_ij|) r_ij / |r_ij|`, summed in ascending `j`.
///
/// Returns the velocity and the number of coincident neighbours ignored.
pub fn control_input(
    i: usize,
    config: &SwarmConfig,
    f: &InteractionFunction,
    r_s: f64,
    policy: CoincidencePolicy,
) -> Result<(Point, usize)> {
    let pos = config.positions();
    let xi = pos[i];
    let mut u = Point::zeros();
    let mut skipped = 0;
    for (j, &xj) in pos.iter().enumerate() {
        if j == i {
            continue;
        }
        match pair_term(xi, xj, i.min(j), i.max(j), f, r_s, policy)? {
            PairTerm::Force(t) => u += t,
            PairTerm::Coincident => skipped += 1,
            PairTerm::Outside => {}
        }
    }
    Ok((u, skipped))
}

/// Velocities of every agent.
///
/// Each pair is evaluated once and applied with opposite signs, so action and
/// reaction cancel exactly; every agent still accumulates its neighbours in
/// ascending index order, matching [`control_input`] bit for bit.
pub fn velocities(
    config: &SwarmConfig,
    f: &InteractionFunction,
    r_s: f64,
    policy: CoincidencePolicy,
) -> Result<Velocities> {
    let pos = config.positions();
    let n = pos.len();
    let mut u = vec![Point::zeros(); n];
    let mut coincident_pairs = 0;
    for i in 0..n {
        let xi = pos[i];
        for j in (i + 1)..n {
            match pair_term(xi, pos[j], i, j, f, r_s, policy)? {
                PairTerm::Force(t) => {
                    u[i] += t;
                    u[j] -= t;
                }
                PairTerm::Coincident => coincident_pairs += 1,
                PairTerm::Outside => {}
            }
        }
    }
    Ok(Velocities {
        u,
        coincident_pairs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub config: SwarmConfig,
    pub coincident_pairs: usize,
}

/// One synchronous forward-Euler step `x_i += dt * u_i`.
pub fn step_euler(
    config: &SwarmConfig,
    f: &InteractionFunction,
    params: &SimulationParams,
) -> Result<StepOutcome> {
    let v = velocities(config, f, params.r_s, params.coincidence)?;
    let next: Vec<Point> = config
        .positions()
        .iter()
        .zip(&v.u)
        .map(|(x, u)| x + u * params.dt)
        .collect();
    if next.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::Diverged {
            step: 0,
            time: 0.0,
            snapshot: Box::new(config.clone()),
        });
    }
    Ok(StepOutcome {
        config: SwarmConfig::from_positions_unchecked(next),
        coincident_pairs: v.coincident_pairs,
    })
}

/// Callback invoked on every recorded state (including the initial one).
pub trait Observer {
    fn on_record(&mut self, step: usize, t: f64, state: &SwarmConfig);
}

impl Observer for () {
    fn on_record(&mut self, _: usize, _: f64, _: &SwarmConfig) {}
}

impl<F: FnMut(usize, f64, &SwarmConfig)> Observer for F {
    fn on_record(&mut self, step: usize, t: f64, state: &SwarmConfig) {
        self(step, t, state)
    }
}

/// Result of a run without trajectory storage.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub terminal: SwarmConfig,
    pub terminal_time: f64,
    pub steps: usize,
    /// Total coincident pairs skipped over all steps.
    pub coincident_events: usize,
}

/// Integrates for `params.steps()` steps, reporting every `record_every`-th
/// state to `observer`.
pub fn run(
    initial: &SwarmConfig,
    f: &InteractionFunction,
    params: &SimulationParams,
    observer: &mut dyn Observer,
) -> Result<RunOutcome> {
    params.validate()?;
    let steps = params.steps();
    let mut state = initial.clone();
    let mut coincident_events = 0;
    observer.on_record(0, 0.0, &state);
    for k in 1..=steps {
        let out = step_euler(&state, f, params).map_err(|e| match e {
            Error::Diverged { snapshot, .. } => Error::Diverged {
                step: k,
                time: k as f64 * params.dt,
                snapshot,
            },
            other => other,
        })?;
        coincident_events += out.coincident_pairs;
        state = out.config;
        if k % params.record_every == 0 {
            observer.on_record(k, k as f64 * params.dt, &state);
        }
    }
    Ok(RunOutcome {
        terminal: state,
        terminal_time: steps as f64 * params.dt,
        steps,
        coincident_events,
    })
}

/// Recorded states of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SwarmConfig>,
    pub params: SimulationParams,
    pub terminal: SwarmConfig,
    pub coincident_events: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// [`run`] that also stores every recorded state.
pub fn simulate(
    initial: &SwarmConfig,
    f: &InteractionFunction,
    params: &SimulationParams,
    observer: &mut dyn Observer,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut recorder = |step: usize, t: f64, s: &SwarmConfig| {
        observer.on_record(step, t, s);
        times.push(t);
        states.push(s.clone());
    };
    let out = run(initial, f, params, &mut recorder)?;
    Ok(Trajectory {
        times,
        states,
        params: *params,
        terminal: out.terminal,
        coincident_events: out.coincident_events,
    })
}

/// Largest displacement of the swarm center from its initial position.
pub fn center_drift(traj: &Trajectory) -> f64 {
    let Some(first) = traj.states.first() else {
        return 0.0;
    };
    let c0 = first.center();
    traj.states
        .iter()
        .map(|s| (s.center() - c0).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{generate_triangular, perturb, LatticeSpec};

    fn reference() -> InteractionFunction {
        InteractionFunction::reference()
    }

    fn hexagon_with_center(r: f64) -> SwarmConfig {
        let mut pts = vec![(0.0, 0.0)];
        for k in 0..6 {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            pts.push((r * a.cos(), r * a.sin()));
        }
        SwarmConfig::from_xy(&pts).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SimulationParams::default().validate().is_ok());
        let bad_ra = SimulationParams { r_a: 1.8, ..Default::default() };
        assert!(bad_ra.validate().is_err());
        let bad_rs = SimulationParams { r_s: 1.2, ..Default::default() };
        assert!(bad_rs.validate().is_err());
        let bad_dt = SimulationParams { dt: 0.0, ..Default::default() };
        assert!(bad_dt.validate().is_err());
        let short = SimulationParams { horizon: 0.001, ..Default::default() };
        assert!(short.validate().is_err());
        assert_eq!(SimulationParams::default().steps(), 2000);
    }

    #[test]
    fn interaction_set_examples() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (2.5, 0.0)]).unwrap();
        assert_eq!(interaction_set(0, &c, 3.0), vec![1]);
        assert_eq!(interaction_set(1, &c, 3.0), vec![0]);
        let far = SwarmConfig::from_xy(&[(0.0, 0.0), (4.0, 0.0)]).unwrap();
        assert!(interaction_set(0, &far, 3.0).is_empty());
    }

    #[test]
    fn interaction_set_exceeds_adjacency_in_lattice() {
        let lattice = generate_triangular(&LatticeSpec::new(40, 1.0, 3), DEFAULT_MAX_LINK).unwrap();
        let mut strictly_larger = false;
        for i in 0..lattice.n() {
            let adj = interaction_set(i, &lattice, DEFAULT_MAX_LINK);
            let int = interaction_set(i, &lattice, 3.0);
            assert!(adj.iter().all(|j| int.contains(j)));
            strictly_larger |= int.len() > adj.len();
        }
        assert!(strictly_larger);
    }

    #[test]
    fn pair_at_desired_length_is_at_rest() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let v = velocities(&c, &reference(), 3.0, CoincidencePolicy::Abort).unwrap();
        assert_eq!(v.u, vec![Point::zeros(), Point::zeros()]);
    }

    #[test]
    fn close_pair_repels() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (0.8, 0.0)]).unwrap();
        let (u0, _) = control_input(0, &c, &reference(), 3.0, CoincidencePolicy::Abort).unwrap();
        let (u1, _) = control_input(1, &c, &reference(), 3.0, CoincidencePolicy::Abort).unwrap();
        assert!(u0.x < 0.0 && u0.y == 0.0);
        assert!(u1.x > 0.0);
    }

    #[test]
    fn symmetric_hexagon_center_is_at_rest() {
        let c = hexagon_with_center(1.0);
        let (u, _) = control_input(0, &c, &reference(), 3.0, CoincidencePolicy::Abort).unwrap();
        assert!(u.norm() < 1e-12, "{u}");
    }

    #[test]
    fn coincident_agents_follow_policy() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]).unwrap();
        let f = reference();
        assert!(matches!(
            velocities(&c, &f, 3.0, CoincidencePolicy::Abort),
            Err(Error::CoincidentAgents { i: 0, j: 1, .. })
        ));
        let v = velocities(&c, &f, 3.0, CoincidencePolicy::ZeroWithWarning).unwrap();
        assert_eq!(v.coincident_pairs, 1);
        assert!(v.u.iter().all(|u| u.x.is_finite()));
        let (_, skipped) = control_input(0, &c, &f, 3.0, CoincidencePolicy::ZeroWithWarning).unwrap();
        assert_eq!(skipped, 1);
    }

    #[test]
    fn per_agent_and_batched_velocities_agree_bitwise() {
        let base = generate_triangular(&LatticeSpec::new(30, 1.0, 11), DEFAULT_MAX_LINK).unwrap();
        let c = perturb(&base, 0.3, 5);
        let f = reference();
        let all = velocities(&c, &f, 3.0, CoincidencePolicy::Abort).unwrap();
        for i in 0..c.n() {
            let (u, _) = control_input(i, &c, &f, 3.0, CoincidencePolicy::Abort).unwrap();
            assert_eq!(u, all.u[i]);
        }
    }

    #[test]
    fn pair_separates_by_saturated_speed() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (0.5, 0.0)]).unwrap();
        let params = SimulationParams::default();
        let next = step_euler(&c, &reference(), &params).unwrap().config;
        assert!((next.position(0).x - -0.01).abs() < 1e-15);
        assert!((next.position(1).x - 0.51).abs() < 1e-15);
        assert_eq!(next.position(0).y, 0.0);
    }

    #[test]
    fn single_agent_is_unchanged() {
        let c = SwarmConfig::from_xy(&[(0.3, 0.4)]).unwrap();
        let next = step_euler(&c, &reference(), &SimulationParams::default()).unwrap();
        assert_eq!(next.config, c);
    }

    #[test]
    fn lattice_is_fixed_point_with_link_range_sensing() {
        // Sensing limited to R_a: only the exact-length links act.
        let params = SimulationParams { r_s: DEFAULT_MAX_LINK, horizon: 1.0, ..Default::default() };
        let lattice = generate_triangular(&LatticeSpec::new(25, 1.0, 1), DEFAULT_MAX_LINK).unwrap();
        let traj = simulate(&lattice, &reference(), &params, &mut ()).unwrap();
        let moved = lattice
            .positions()
            .iter()
            .zip(traj.terminal.positions())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(moved < 1e-12, "{moved}");
    }

    #[test]
    fn divergence_is_reported_with_snapshot() {
        let spring = InteractionFunction::new(
            crate::interaction::Profile::LinearSpring { gain: 1e300 },
            1.0,
            DEFAULT_MAX_LINK,
        )
        .unwrap();
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (2.0, 0.0)]).unwrap();
        let params = SimulationParams { dt: 1e10, horizon: 1e11, ..Default::default() };
        match run(&c, &spring, &params, &mut ()) {
            Err(Error::Diverged { step, snapshot, .. }) => {
                assert!(step >= 1);
                assert_eq!(snapshot.n(), 2);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_records_with_stride() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (0.9, 0.0)]).unwrap();
        let params = SimulationParams { horizon: 0.1, record_every: 3, ..Default::default() };
        let traj = simulate(&c, &reference(), &params, &mut ()).unwrap();
        assert_eq!(traj.states[0], c);
        assert_eq!(traj.times.len(), 4);
        for w in traj.times.windows(2) {
            assert!((w[1] - w[0] - 0.03).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_pair_keeps_center() {
        let c = SwarmConfig::from_xy(&[(0.1, 0.2), (0.6, -0.1)]).unwrap();
        let params = SimulationParams { horizon: 2.0, ..Default::default() };
        let traj = simulate(&c, &reference(), &params, &mut ()).unwrap();
        assert!(center_drift(&traj) < 1e-15);
    }

    #[test]
    fn external_disturbance_shows_drift() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let params = SimulationParams { horizon: 0.5, ..Default::default() };
        let mut traj = simulate(&c, &reference(), &params, &mut ()).unwrap();
        for (k, s) in traj.states.iter_mut().enumerate() {
            *s = s.translated(Point::new(1e-3 * k as f64, 0.0));
        }
        assert!(center_drift(&traj) > 1e-3);
    }
}
