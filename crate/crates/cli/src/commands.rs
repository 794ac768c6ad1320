use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde_json::json;

use swarm_lattice::config::ExperimentConfig;
use swarm_lattice::diagnostics::{dissipation_check, DEFAULT_VDOT_TOL};
use swarm_lattice::dynamics::{center_drift, simulate as integrate};
use swarm_lattice::experiments::{convergence_study, delta_sweep, spectrum_batch, TrialSeeds};
use swarm_lattice::interaction::validate_profile;
use swarm_lattice::io;
use swarm_lattice::lattice::{generate_triangular, is_triangular, link_error, perturb, LatticeSpec, DEFAULT_LENGTH_TOL};
use swarm_lattice::Error;

use crate::{manifest, Failure};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the resolved configuration so the run can be repeated with `--config`.
fn prepare(dir: &Path, config: &ExperimentConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml_string()?)?;
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))
}

pub fn simulate(config: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    prepare(dir, config)?;
    let e = &config.experiment;
    let f = config.interaction()?;
    let seeds = TrialSeeds::derive(e.seed, 0, 0);
    let params = config.simulation_params(e.seed);
    let lattice = generate_triangular(
        &LatticeSpec::new(e.n, params.r, seeds.lattice).with_growth(e.growth),
        params.r_a,
    )?;
    let initial = perturb(&lattice, e.delta, seeds.perturb);
    io::write_config_csv(create(dir, "initial.csv")?, &initial)?;

    let traj = match integrate(&initial, &f, &params, &mut ()) {
        Ok(t) => t,
        Err(Error::Diverged { step, time, snapshot }) => {
            let path = dir.join("snapshot.csv");
            io::write_config_csv(File::create(&path)?, &snapshot)?;
            return Err(Failure::Numerical(format!(
                "integration diverged at step {step} (t = {time}); last finite configuration written to {}",
                path.display()
            )));
        }
        Err(other) => return Err(other.into()),
    };
    let report = dissipation_check(&traj, &f, &params, DEFAULT_VDOT_TOL)?;
    io::write_trajectory_csv(create(dir, "trajectory.csv")?, &traj)?;
    io::write_diagnostics_csv(create(dir, "diagnostics.csv")?, &report)?;
    io::write_config_csv(create(dir, "terminal.csv")?, &traj.terminal)?;

    let terminal = is_triangular(&traj.terminal, params.r, params.r_a, e.converge_tol, e.rank_tol)?;
    let summary = json!({
        "n": e.n,
        "delta": e.delta,
        "e_initial": link_error(&initial, params.r, params.r_a).ok(),
        "e_final": terminal.max_length_deviation,
        "rigid": terminal.rigid,
        "converged": terminal.triangular,
        "center_drift": center_drift(&traj),
        "coincident_events": traj.coincident_events,
        "V_initial": report.samples.first().map(|s| s.v),
        "V_final": report.samples.last().map(|s| s.v),
        "dissipation": {
            "checked": report.checked,
            "agreeing": report.agreeing,
            "agreement_fraction": report.agreement_fraction(),
            "flagged": report.flagged,
            "increases": report.increases,
            "max_increase": report.max_increase,
        },
    });
    std::fs::write(dir.join("summary.json"), to_json(&summary)?)?;
    manifest::write(
        dir,
        "simulate",
        config,
        json!({ "base": e.seed, "lattice": seeds.lattice, "perturb": seeds.perturb }),
        &["config.toml", "initial.csv", "trajectory.csv", "diagnostics.csv", "terminal.csv", "summary.json"],
    )?;
    println!(
        "e_final = {} rigid = {} converged = {} -> {}",
        terminal.max_length_deviation.map_or("n/a".to_string(), |v| format!("{v:.3e}")),
        terminal.rigid,
        terminal.triangular,
        dir.display()
    );
    Ok(())
}

pub fn sweep(config: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    prepare(dir, config)?;
    let f = config.interaction()?;
    let result = delta_sweep(&config.sweep_spec(), &f)?;
    io::write_sweep_summary(create(dir, "sweep_summary.csv")?, &result)?;
    io::write_trials(create(dir, "trials.csv")?, &result)?;
    manifest::write(
        dir,
        "sweep",
        config,
        json!({ "base": config.experiment.seed, "derivation": "derive_seed(base, delta_index, 2*trial [+1])" }),
        &["config.toml", "sweep_summary.csv", "trials.csv"],
    )?;
    println!("{:>8} {:>6} {:>10} {:>10}", "delta", "rho", "converged", "e_mean");
    for r in &result.rows {
        println!("{:>8.3} {:>6.2} {:>10.2} {:>10.3e}", r.delta, r.rho, r.converged_fraction, r.e_mean);
    }
    Ok(())
}

pub fn converge(config: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    prepare(dir, config)?;
    let e = &config.experiment;
    let f = config.interaction()?;
    let params = config.simulation_params(e.seed);
    let study = convergence_study(e.n, e.delta, e.trials, e.seed, true, &params, &f)?;
    io::write_convergence_study(dir, &study)?;
    std::fs::write(dir.join("trials.json"), to_json(&study.records)?)?;
    manifest::write(
        dir,
        "converge",
        config,
        json!({ "base": e.seed, "trials": study.records.iter().map(|r| [r.lattice_seed, r.perturb_seed]).collect::<Vec<_>>() }),
        &["config.toml", "envelope.csv", "trials.json"],
    )?;
    let last = study.envelope.last();
    println!(
        "{} trials, final e mean {:.3e} max {:.3e}, rigid throughout: {}",
        study.records.len(),
        last.map_or(f64::NAN, |p| p.mean),
        last.map_or(f64::NAN, |p| p.max),
        study.records.iter().all(|r| r.rigid_throughout == Some(true))
    );
    Ok(())
}

pub fn spectrum(config: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    prepare(dir, config)?;
    let f = config.interaction()?;
    let s = &config.spectrum;
    let rows = spectrum_batch(
        &s.sizes,
        &s.seeds,
        config.experiment.growth,
        config.geometry.r,
        config.geometry.r_a,
        s.tol_zero,
        &f,
    )?;
    io::write_spectrum_rows(create(dir, "spectrum.csv")?, &rows)?;
    manifest::write(dir, "spectrum", config, json!({ "lattice": s.seeds }), &["config.toml", "spectrum.csv"])?;
    for r in &rows {
        println!(
            "n = {:>4} seed = {:>4}: zero {} negative {} aligned {}",
            r.n, r.seed, r.zero_count, r.negative_count, r.kernel_aligned
        );
    }
    Ok(())
}

pub fn validate(config: &ExperimentConfig, grid_step: f64) -> Result<(), Failure> {
    let report = validate_profile(&config.interaction()?, grid_step)?;
    println!("{}", to_json(&report)?);
    if report.core_passed() {
        Ok(())
    } else {
        Err(Failure::Criterion("interaction function fails the null-point, sign or continuity check".into()))
    }
}

pub fn rigidity(config: &ExperimentConfig, positions: &Path) -> Result<(), Failure> {
    let swarm = io::load_config(positions).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", positions.display())),
        other => Failure::Config(format!("{}: {other}", positions.display())),
    })?;
    let g = &config.geometry;
    let report = is_triangular(&swarm, g.r, g.r_a, DEFAULT_LENGTH_TOL * g.r, config.experiment.rank_tol)?;
    println!("{}", to_json(&report)?);
    if report.rigid {
        Ok(())
    } else {
        Err(Failure::Criterion(format!(
            "not infinitesimally rigid: rank {} < {}",
            report.rank, report.expected_rank
        )))
    }
}
