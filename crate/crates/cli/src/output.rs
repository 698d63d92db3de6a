use std::fs;
use std::path::Path;

use anyhow::Context;

use carbofront_core::diagnostics::{self, CheckResult, DiagnosticsReport};
use carbofront_core::oracle::RefinementStudy;
use carbofront_core::solver::Trajectory;

use crate::RunConfig;

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "s",
    "sdot",
    "u_min",
    "u_max",
    "v_min",
    "v_max",
    "mass_residual",
    "dissipation_ratio",
];

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// One row per checkpoint.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for (cp, snap) in traj.checkpoints.iter().zip(&traj.snapshots) {
        let (u_min, u_max) = min_max(&snap.u_bar);
        let (v_min, v_max) = min_max(&snap.v_bar);
        let mass = diagnostics::mass_balance_residual(traj, cp.t).unwrap_or(f64::NAN);
        let diss = diagnostics::dissipation_bound_check(traj, cp.t).unwrap_or(f64::NAN);
        let row = [cp.t, cp.s, cp.sdot, u_min, u_max, v_min, v_max, mass, diss];
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn check_lines(out: &mut Vec<String>, name: &str, pass: bool, worst: f64) {
    out.push(format!("checks.{name}.pass = {pass}"));
    out.push(format!("checks.{name}.worst = {worst}"));
}

/// Flat `key = value` summary of a run.
pub fn summary_lines(
    cfg: &RunConfig,
    traj: &Trajectory,
    report: Option<&DiagnosticsReport>,
) -> Vec<String> {
    let last = traj.last();
    let mut out = vec![
        format!("scenario = {}", cfg.name),
        format!("horizon = {}", cfg.horizon),
        format!("nodes = {}", cfg.nodes),
        format!("dt = {}", cfg.control.dt),
        format!("checkpoint_every = {}", cfg.checkpoint_every),
        format!("upwind = {}", cfg.control.upwind),
        format!("complete = {}", traj.complete),
        format!("retried_steps = {}", traj.retried_steps),
        format!("t_final = {}", opt(last.map(|c| c.t))),
        format!("s_final = {}", opt(last.map(|c| c.s))),
    ];
    let Some(rep) = report else {
        out.push("checks.available = false".to_string());
        return out;
    };
    let fit = rep.fit;
    out.push(format!("beta = {}", opt(fit.map(|f| f.beta))));
    out.push(format!("amplitude = {}", opt(fit.map(|f| f.amplitude))));
    out.push(format!("fit.t_min = {}", opt(fit.map(|f| f.t_min))));
    out.push(format!("fit.t_max = {}", opt(fit.map(|f| f.t_max))));
    out.push(format!("c_star_emp = {}", opt(rep.constants.map(|c| c.0))));
    out.push(format!("C_star_emp = {}", opt(rep.constants.map(|c| c.1))));
    check_lines(&mut out, "bounds", rep.bounds.pass, rep.bounds.violation);
    let named: [(&str, &CheckResult); 3] = [
        ("mass", &rep.mass),
        ("energy", &rep.energy),
        ("dissipation", &rep.dissipation),
    ];
    for (name, c) in named {
        check_lines(&mut out, name, c.pass, c.worst);
    }
    out
}

pub fn write_summary(path: &Path, lines: &[String]) -> anyhow::Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_convergence_csv(path: &Path, study: &RefinementStudy) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["level", "nodes", "dt", "s_final", "ds", "du", "order"])?;
    for (k, l) in study.levels.iter().enumerate() {
        w.write_record([
            k.to_string(),
            l.nodes.to_string(),
            l.dt.to_string(),
            l.s_final.to_string(),
            opt(l.ds),
            opt(l.du),
            opt(l.order),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn convergence_table(study: &RefinementStudy) -> String {
    let mut s = format!(
        "study = {}\nhorizon = {}\n",
        study.kind.name(),
        study.horizon
    );
    s.push_str(&format!(
        "{:>5} {:>7} {:>12} {:>18} {:>12} {:>8}\n",
        "level", "nodes", "dt", "s", "ds", "order"
    ));
    for (k, l) in study.levels.iter().enumerate() {
        s.push_str(&format!(
            "{:>5} {:>7} {:>12.4e} {:>18.12} {:>12} {:>8}\n",
            k,
            l.nodes,
            l.dt,
            l.s_final,
            l.ds.map_or("-".to_string(), |d| format!("{d:.3e}")),
            l.order.map_or("-".to_string(), |o| format!("{o:.3}")),
        ));
    }
    let verdict = if study.exact {
        "exact".to_string()
    } else if study.reliable {
        format!(
            "order {}",
            study
                .min_order()
                .map_or("n/a".to_string(), |o| format!("{o:.3}"))
        )
    } else {
        "unreliable".to_string()
    };
    s.push_str(&format!("result = {verdict}\n"));
    s
}
