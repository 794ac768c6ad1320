//! File formats: configurations as CSV (`agent,x,y`) or JSON (`[[x, y], ...]`),
//! trajectories, Lyapunov diagnostics and experiment tables.
//!
//! Floats are written with 17 significant digits so values round-trip exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::diagnostics::DissipationReport;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceStudy, SpectrumRow, SweepResult, TrialSeries};
use crate::geometry::{Point, SwarmConfig};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

/// Parses `agent,x,y` rows (header required). Agents may come in any order
/// but must be exactly `0..n`.
pub fn read_config_csv<R: Read>(reader: R) -> Result<SwarmConfig> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["agent", "x", "y"] {
        return Err(Error::invalid(format!(
            "expected header agent,x,y, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: Vec<(usize, Point)> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let bad = |what: &str| Error::invalid(format!("row {}: cannot parse {what}", line + 2));
        let agent: usize = field(0).parse().map_err(|_| bad("agent index"))?;
        let x: f64 = field(1).parse().map_err(|_| bad("x"))?;
        let y: f64 = field(2).parse().map_err(|_| bad("y"))?;
        rows.push((agent, Point::new(x, y)));
    }
    rows.sort_by_key(|(a, _)| *a);
    for (k, (a, _)) in rows.iter().enumerate() {
        if *a != k {
            return Err(Error::invalid(format!(
                "agent indices must be 0..{} without gaps or repeats (found {a} at position {k})",
                rows.len()
            )));
        }
    }
    SwarmConfig::new(rows.into_iter().map(|(_, p)| p).collect())
}

pub fn parse_config_csv(text: &str) -> Result<SwarmConfig> {
    read_config_csv(text.as_bytes())
}

pub fn write_config_csv<W: Write>(w: W, config: &SwarmConfig) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["agent", "x", "y"])?;
    for (i, p) in config.positions().iter().enumerate() {
        out.write_record([i.to_string(), fmt_f64(p.x), fmt_f64(p.y)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_config_json(text: &str) -> Result<SwarmConfig> {
    Ok(serde_json::from_str(text)?)
}

pub fn config_to_json(config: &SwarmConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(config)?)
}

/// Reads a configuration, choosing the format from the extension (`.json`,
/// anything else is CSV).
pub fn load_config(path: &Path) -> Result<SwarmConfig> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => parse_config_json(&text),
        _ => parse_config_csv(&text),
    }
}

/// `t,agent,x,y`, one row per agent per recorded state.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "agent", "x", "y"])?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let t = fmt_f64(*t);
        for (i, p) in s.positions().iter().enumerate() {
            out.write_record([t.as_str(), &i.to_string(), &fmt_f64(p.x), &fmt_f64(p.y)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,V,Vdot_analytic,Vdot_numeric,links,links_changed`; `Vdot_numeric` is
/// empty on the last row.
pub fn write_diagnostics_csv<W: Write>(w: W, report: &DissipationReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "V", "Vdot_analytic", "Vdot_numeric", "links", "links_changed"])?;
    for s in &report.samples {
        out.write_record([
            fmt_f64(s.t),
            fmt_f64(s.v),
            fmt_f64(s.vdot_analytic),
            s.vdot_numeric.map(fmt_f64).unwrap_or_default(),
            s.links.to_string(),
            s.links_changed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `delta,rho,e_mean,e_min,e_max,trials,converged_fraction`.
pub fn write_sweep_summary<W: Write>(w: W, result: &SweepResult) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["delta", "rho", "e_mean", "e_min", "e_max", "trials", "converged_fraction"])?;
    for r in &result.rows {
        out.write_record([
            fmt_f64(r.delta),
            fmt_f64(r.rho),
            fmt_f64(r.e_mean),
            fmt_f64(r.e_min),
            fmt_f64(r.e_max),
            r.trials.to_string(),
            fmt_f64(r.converged_fraction),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `delta,trial,lattice_seed,perturb_seed,e_final,rigid,converged`.
pub fn write_trials<W: Write>(w: W, result: &SweepResult) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["delta", "trial", "lattice_seed", "perturb_seed", "e_final", "rigid", "converged"])?;
    for r in &result.trials {
        out.write_record([
            fmt_f64(r.delta),
            r.trial.to_string(),
            r.lattice_seed.to_string(),
            r.perturb_seed.to_string(),
            fmt_f64(r.e_final),
            r.rigid.to_string(),
            r.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `t,e[,rigid]` for one trial.
pub fn write_series<W: Write>(w: W, series: &TrialSeries) -> Result<()> {
    let mut out = writer(w);
    let with_rigid = !series.rigid.is_empty();
    if with_rigid {
        out.write_record(["t", "e", "rigid"])?;
    } else {
        out.write_record(["t", "e"])?;
    }
    for (k, (t, e)) in series.times.iter().zip(&series.e).enumerate() {
        if with_rigid {
            out.write_record([fmt_f64(*t), fmt_f64(*e), series.rigid[k].to_string()])?;
        } else {
            out.write_record([fmt_f64(*t), fmt_f64(*e)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,mean,min,max`.
pub fn write_envelope<W: Write>(w: W, study: &ConvergenceStudy) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "mean", "min", "max"])?;
    for p in &study.envelope {
        out.write_record([fmt_f64(p.t), fmt_f64(p.mean), fmt_f64(p.min), fmt_f64(p.max)])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `series_<trial>.csv` for every trial plus `envelope.csv` into `dir`.
pub fn write_convergence_study(dir: &Path, study: &ConvergenceStudy) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, s) in study.series.iter().enumerate() {
        write_series(std::fs::File::create(dir.join(format!("series_{k}.csv")))?, s)?;
    }
    write_envelope(std::fs::File::create(dir.join("envelope.csv"))?, study)
}

pub fn write_spectrum_rows<W: Write>(w: W, rows: &[SpectrumRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "n",
        "seed",
        "zero_count",
        "negative_count",
        "kernel_aligned",
        "max_kernel_residual",
        "max_real_nonzero_eig",
        "rigid_angle_sine",
        "j2_max_abs",
    ])?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            r.seed.to_string(),
            r.zero_count.to_string(),
            r.negative_count.to_string(),
            r.kernel_aligned.to_string(),
            fmt_f64(r.max_kernel_residual),
            fmt_f64(r.max_real_nonzero_eig),
            fmt_f64(r.rigid_angle_sine),
            fmt_f64(r.j2_max_abs),
        ])?;
    }
    out.flush()?;
    Ok(())
}
