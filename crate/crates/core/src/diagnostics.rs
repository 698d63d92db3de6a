//! Checks run on a finished [`Trajectory`]: comparison bounds, the integrated
//! mass balance, the time-integrated energy inequality, the growth of the
//! `v` dissipation, and the square-root law for the front.
//!
//! Every function here is a pure function of the trajectory.

use crate::error::{Error, Result};
use crate::quad;
use crate::solver::{State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    V,
}

/// Where and when a field value was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub t: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub pass: bool,
    /// Largest distance outside `[0, star]`; zero when every value is inside.
    pub violation: f64,
    /// Field value attaining `violation` (or the extreme closest to a bound
    /// when nothing is violated).
    pub worst: f64,
    pub worst_field: Field,
    pub worst_at: Extremum,
    pub u_min: Extremum,
    pub u_max: Extremum,
    pub v_min: Extremum,
    pub v_max: Extremum,
    pub tol: f64,
}

fn extrema(snaps: &[State], pick: impl Fn(&State) -> &[f64]) -> (Extremum, Extremum) {
    let mut lo = Extremum {
        value: f64::INFINITY,
        t: 0.0,
        y: 0.0,
    };
    let mut hi = Extremum {
        value: f64::NEG_INFINITY,
        t: 0.0,
        y: 0.0,
    };
    for st in snaps {
        let dy = st.dy();
        for (i, &x) in pick(st).iter().enumerate() {
            if x < lo.value {
                lo = Extremum {
                    value: x,
                    t: st.t,
                    y: i as f64 * dy,
                };
            }
            if x > hi.value {
                hi = Extremum {
                    value: x,
                    t: st.t,
                    y: i as f64 * dy,
                };
            }
        }
    }
    (lo, hi)
}

/// Passes iff every snapshot value lies in `[-tol, star + tol]`.
pub fn bounds_check(traj: &Trajectory, u_star: f64, v_star: f64, tol: f64) -> Result<BoundsReport> {
    if traj.snapshots.is_empty() {
        return Err(Error::InsufficientData(
            "trajectory has no snapshots".into(),
        ));
    }
    let (u_min, u_max) = extrema(&traj.snapshots, |s| &s.u_bar);
    let (v_min, v_max) = extrema(&traj.snapshots, |s| &s.v_bar);
    // (distance outside the band, signed margin used when inside, field, extremum)
    let candidates = [
        (-u_min.value, Field::U, u_min),
        (u_max.value - u_star, Field::U, u_max),
        (-v_min.value, Field::V, v_min),
        (v_max.value - v_star, Field::V, v_max),
    ];
    let &(excess, worst_field, worst_at) = candidates
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("four candidates");
    Ok(BoundsReport {
        pass: excess <= tol,
        violation: excess.max(0.0),
        worst: worst_at.value,
        worst_field,
        worst_at,
        u_min,
        u_max,
        v_min,
        v_max,
        tol,
    })
}

/// Both sides of the integrated mass balance at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalance {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(rhs, 1)`
    pub residual: f64,
}

fn snapshot_index(traj: &Trajectory, t: f64) -> Result<usize> {
    traj.index_at(t).ok_or(Error::Lookup(t))
}

fn initial_snapshot(traj: &Trajectory) -> Result<&State> {
    match traj.snapshots.first() {
        Some(st) if st.t == 0.0 => Ok(st),
        _ => Err(Error::Lookup(0.0)),
    }
}

pub fn mass_balance(traj: &Trajectory, t: f64) -> Result<MassBalance> {
    let k = snapshot_index(traj, t)?;
    let init = initial_snapshot(traj)?;
    let st = &traj.snapshots[k];
    let cp = &traj.checkpoints[k];
    let m = &traj.meta;
    let acc = &cp.integrals;

    let lhs = quad::moment(&st.u_bar, &st.v_bar, st.dy(), st.s)
        + m.kappa1 * acc.u_front
        + m.kappa2 * acc.v_front
        + 0.5 * cp.s * cp.s;
    let rhs = quad::moment(&init.u_bar, &init.v_bar, init.dy(), init.s)
        + m.kappa1 * acc.g
        + m.kappa2 * acc.h
        + 0.5 * init.s * init.s;
    Ok(MassBalance {
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / rhs.max(1.0),
    })
}

/// Relative residual of the integrated mass balance at snapshot time `t`.
pub fn mass_balance_residual(traj: &Trajectory, t: f64) -> Result<f64> {
    mass_balance(traj, t).map(|mb| mb.residual)
}

/// Both sides of the time-integrated energy inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySlack {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
}

pub fn energy_inequality(traj: &Trajectory, t: f64) -> Result<EnergySlack> {
    let k = snapshot_index(traj, t)?;
    let init = initial_snapshot(traj)?;
    let st = &traj.snapshots[k];
    let m = &traj.meta;
    let acc = &traj.checkpoints[k].integrals;

    let e_t = quad::energy(&st.u_bar, &st.v_bar, m.gamma, st.dy(), st.s);
    let e_0 = quad::energy(&init.u_bar, &init.v_bar, m.gamma, init.dy(), init.s);
    let lhs = (e_t - e_0)
        + m.kappa1 * acc.grad_u_sq
        + m.kappa2 * m.gamma * acc.grad_v_sq
        + acc.psi_work
        + acc.front_jump
        + m.c_phi * acc.reaction_power;
    let rhs = -acc.data_drift + acc.reaction_forcing - acc.convective;
    Ok(EnergySlack {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

/// Signed slack of the integrated energy inequality at snapshot time `t`.
pub fn energy_inequality_check(traj: &Trajectory, t: f64) -> Result<f64> {
    energy_inequality(traj, t).map(|e| e.slack)
}

/// `int_0^t int_0^s |v_x|^2 dx dtau / (s(t) + 1)` at checkpoint time `t`.
pub fn dissipation_bound_check(traj: &Trajectory, t: f64) -> Result<f64> {
    let k = snapshot_index(traj, t)?;
    let cp = &traj.checkpoints[k];
    Ok(cp.integrals.grad_v_sq / (cp.s + 1.0))
}

/// Least-squares fit `s = amplitude * t^beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub amplitude: f64,
    pub beta: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// RMS residual in log space.
    pub rms: f64,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Fits `log s = log a + beta log t` on checkpoints with `t` in
/// `[t_min, t_max]`.
pub fn sqrt_law_fit(traj: &Trajectory, t_min: f64, t_max: f64) -> Result<PowerFit> {
    if !(t_min >= 1.0 && t_max > t_min) {
        return Err(Error::InvalidParameter(format!(
            "fit window [{t_min}, {t_max}] must satisfy 1 <= t_min < t_max"
        )));
    }
    let pts: Vec<(f64, f64)> = traj
        .checkpoints
        .iter()
        .filter(|c| c.t >= t_min && c.t <= t_max)
        .map(|c| (c.t.ln(), c.s.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} checkpoints in [{t_min}, {t_max}], need {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let beta = sxy / sxx;
    let log_a = ym - beta * xm;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - log_a - beta * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerFit {
        amplitude: log_a.exp(),
        beta,
        t_min,
        t_max,
        points: pts.len(),
        rms,
    })
}

/// Default fit window: the last decade of the run.
pub fn default_fit_window(horizon: f64) -> (f64, f64) {
    ((horizon / 10.0).max(1.0), horizon)
}

/// `(min_{t >= t_min} s/sqrt(t), max_t s/sqrt(t+1))` over the checkpoints.
pub fn empirical_constants(traj: &Trajectory, t_min: f64) -> Result<(f64, f64)> {
    let lower = traj
        .checkpoints
        .iter()
        .filter(|c| c.t >= t_min && c.t > 0.0)
        .map(|c| c.s / c.t.sqrt())
        .fold(f64::INFINITY, f64::min);
    if !lower.is_finite() {
        return Err(Error::InsufficientData(format!(
            "no checkpoint beyond t = {t_min}"
        )));
    }
    let upper = traj
        .checkpoints
        .iter()
        .map(|c| c.s / (c.t + 1.0).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lower, upper))
}

/// Outcome of a single named check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub pass: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    /// Time at which `worst` occurred.
    pub at_t: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed excursion outside the comparison bounds.
    pub bounds: f64,
    /// Allowed relative mass-balance residual.
    pub mass: f64,
    /// Energy slack must stay above `-(energy_rel |rhs| + energy_abs)`.
    pub energy_rel: f64,
    pub energy_abs: f64,
    /// Checkpoints before this time are ignored by the dissipation check.
    pub dissipation_t_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bounds: 1e-8,
            mass: 1e-2,
            energy_rel: 1e-4,
            energy_abs: 1e-10,
            dissipation_t_min: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub bounds: BoundsReport,
    pub mass: CheckResult,
    pub energy: CheckResult,
    pub dissipation: CheckResult,
    /// Per checkpoint: `(t, mass residual, energy slack, energy rhs, dissipation ratio)`.
    pub series: Vec<SeriesRow>,
    pub fit: Option<PowerFit>,
    pub constants: Option<(f64, f64)>,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub mass_residual: f64,
    pub energy_slack: f64,
    pub energy_rhs: f64,
    pub dissipation_ratio: f64,
}

impl DiagnosticsReport {
    pub fn all_pass(&self) -> bool {
        self.bounds.pass && self.mass.pass && self.energy.pass && self.dissipation.pass
    }
}

/// Runs every check over all checkpoints of `traj`.
pub fn evaluate(traj: &Trajectory, tol: &Tolerances) -> Result<DiagnosticsReport> {
    let bounds = bounds_check(traj, traj.meta.u_star, traj.meta.v_star, tol.bounds)?;
    let mut series = Vec::with_capacity(traj.checkpoints.len());
    for cp in &traj.checkpoints {
        let e = energy_inequality(traj, cp.t)?;
        series.push(SeriesRow {
            t: cp.t,
            mass_residual: mass_balance_residual(traj, cp.t)?,
            energy_slack: e.slack,
            energy_rhs: e.rhs,
            dissipation_ratio: dissipation_bound_check(traj, cp.t)?,
        });
    }

    let mut mass = CheckResult {
        pass: true,
        worst: 0.0,
        at_t: 0.0,
        tolerance: tol.mass,
    };
    let mut energy = CheckResult {
        pass: true,
        worst: f64::INFINITY,
        at_t: 0.0,
        tolerance: tol.energy_rel,
    };
    let mut dissipation = CheckResult {
        pass: true,
        worst: 0.0,
        at_t: 0.0,
        tolerance: f64::INFINITY,
    };
    for row in &series {
        if row.mass_residual > mass.worst {
            mass.worst = row.mass_residual;
            mass.at_t = row.t;
        }
        // normalized so that the check reads slack_norm >= -energy_rel
        let scale = row.energy_rhs.abs() + tol.energy_abs / tol.energy_rel;
        let normed = row.energy_slack / scale;
        if row.t > 0.0 && normed < energy.worst {
            energy.worst = normed;
            energy.at_t = row.t;
        }
        if row.t >= tol.dissipation_t_min && row.dissipation_ratio > dissipation.worst {
            dissipation.worst = row.dissipation_ratio;
            dissipation.at_t = row.t;
        }
    }
    if !energy.worst.is_finite() {
        energy.worst = 0.0;
    }
    mass.pass = mass.worst <= tol.mass;
    energy.pass = energy.worst >= -tol.energy_rel;
    dissipation.pass = dissipation.worst.is_finite() && dissipation.worst >= 0.0;

    let horizon = traj.last().map_or(0.0, |c| c.t);
    let (t0, t1) = default_fit_window(horizon);
    let fit = sqrt_law_fit(traj, t0, t1).ok();
    let constants = empirical_constants(traj, 1.0).ok();

    Ok(DiagnosticsReport {
        bounds,
        mass,
        energy,
        dissipation,
        series,
        fit,
        constants,
        tolerances: *tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Checkpoint, RunningIntegrals, TrajectoryMeta};

    fn meta() -> TrajectoryMeta {
        TrajectoryMeta {
            kappa1: 1.0,
            kappa2: 1.0,
            gamma: 1.0,
            c_phi: 1.0,
            q: 1.0,
            u_star: 1.0,
            v_star: 1.0,
        }
    }

    fn synthetic(front: impl Fn(f64) -> f64, ts: &[f64]) -> Trajectory {
        let mut tr = Trajectory::new(meta());
        for &t in ts {
            tr.checkpoints.push(Checkpoint {
                t,
                s: front(t),
                sdot: 0.0,
                integrals: RunningIntegrals::default(),
            });
        }
        tr
    }

    fn uniform_snapshot(t: f64, u: f64, v: f64) -> State {
        State {
            t,
            s: 1.0,
            sdot: 0.0,
            u_bar: vec![u; 5],
            v_bar: vec![v; 5],
        }
    }

    #[test]
    fn bounds_detector() {
        let mut tr = Trajectory::new(meta());
        tr.push(
            &uniform_snapshot(0.0, 1.0, 1.0),
            RunningIntegrals::default(),
        );
        let rep = bounds_check(&tr, 1.0, 1.0, 1e-8).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.violation, 0.0);

        let mut bad = uniform_snapshot(1.0, 0.5, 0.5);
        bad.u_bar[3] = -0.1;
        tr.push(&bad, RunningIntegrals::default());
        let rep = bounds_check(&tr, 1.0, 1.0, 1e-8).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.worst, -0.1);
        assert_eq!(rep.worst_field, Field::U);
        assert_eq!(rep.worst_at.t, 1.0);
        assert_eq!(rep.worst_at.y, 0.75);

        assert!(bounds_check(&Trajectory::new(meta()), 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn fit_recovers_exact_power_laws() {
        let ts: Vec<f64> = (1..=50).map(|k| 20.0 * k as f64).collect();
        let tr = synthetic(|t| 3.0 * t.sqrt(), &ts);
        let fit = sqrt_law_fit(&tr, 20.0, 1000.0).unwrap();
        assert!((fit.beta - 0.5).abs() < 1e-10);
        assert!((fit.amplitude - 3.0).abs() < 1e-10);
        assert_eq!(fit.points, 50);

        let tr = synthetic(|t| 2.0 * t, &ts);
        assert!((sqrt_law_fit(&tr, 20.0, 1000.0).unwrap().beta - 1.0).abs() < 1e-10);

        assert!(matches!(
            sqrt_law_fit(&tr, 20.0, 100.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(sqrt_law_fit(&tr, 0.5, 100.0).is_err());
    }

    #[test]
    fn empirical_constants_closed_form() {
        let ts: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let tr = synthetic(|t| 3.0 * t.sqrt(), &ts);
        let (c, big_c) = empirical_constants(&tr, 1.0).unwrap();
        assert!((c - 3.0).abs() < 1e-12);
        assert!((big_c - 3.0 * (100.0f64 / 101.0).sqrt()).abs() < 1e-12);
        assert!(big_c < 3.0);

        // a frozen front drives the lower constant toward zero
        let short = synthetic(|_| 1.0, &ts[..11]);
        let long = synthetic(|_| 1.0, &ts);
        let (c_short, _) = empirical_constants(&short, 1.0).unwrap();
        let (c_long, _) = empirical_constants(&long, 1.0).unwrap();
        assert!(c_long < c_short);
        assert!((c_long - 0.1).abs() < 1e-12);

        assert!(empirical_constants(&short, 50.0).is_err());
    }

    #[test]
    fn lookup_of_missing_time_fails() {
        let mut tr = Trajectory::new(meta());
        tr.push(
            &uniform_snapshot(0.0, 1.0, 1.0),
            RunningIntegrals::default(),
        );
        assert_eq!(mass_balance_residual(&tr, 0.0).unwrap(), 0.0);
        assert!(matches!(
            mass_balance_residual(&tr, 0.5),
            Err(Error::Lookup(_))
        ));
        assert!(energy_inequality_check(&tr, 0.5).is_err());
    }

    fn short_run(raw: crate::model::Scenario) -> Trajectory {
        let sc = crate::model::ValidScenario::new(raw).unwrap();
        let grid = crate::transform::FixedGrid::new(41).unwrap();
        crate::solver::run(
            &sc,
            &grid,
            &crate::solver::StepControl::with_dt(0.02),
            4.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_data_keep_the_inequality() {
        let mut raw = crate::model::Scenario::baseline();
        raw.params.kappa0 = 0.0;
        let tr = short_run(raw);
        for cp in &tr.checkpoints {
            assert!(energy_inequality_check(&tr, cp.t).unwrap() >= -1e-6);
            let d = dissipation_bound_check(&tr, cp.t).unwrap();
            assert!((0.0..1e-20).contains(&d));
        }
    }

    #[test]
    fn mass_detector() {
        let tr = short_run(crate::model::Scenario::baseline());
        let clean = mass_balance(&tr, 4.0).unwrap();
        let mut bad = tr.clone();
        let k = bad.index_at(4.0).unwrap();
        let s = bad.checkpoints[k].s;
        bad.checkpoints[k].s = (s * s + 2.0).sqrt();
        let r = mass_balance_residual(&bad, 4.0).unwrap();
        assert!((r - 1.0 / clean.rhs.max(1.0)).abs() <= clean.residual + 1e-12);
        assert!(!evaluate(&bad, &Tolerances::default()).unwrap().mass.pass);
    }

    #[test]
    fn energy_detectors() {
        let tr = short_run(crate::model::Scenario::baseline());
        let tol = Tolerances::default();
        assert!(evaluate(&tr, &tol).unwrap().energy.pass);
        for corrupt in [
            |acc: &mut RunningIntegrals| acc.convective = -acc.convective,
            |acc: &mut RunningIntegrals| acc.grad_v_sq *= 10.0,
        ] {
            let mut bad = tr.clone();
            for cp in bad.checkpoints.iter_mut() {
                corrupt(&mut cp.integrals);
            }
            assert!(energy_inequality_check(&bad, 4.0).unwrap() < 0.0);
            assert!(!evaluate(&bad, &tol).unwrap().energy.pass);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fit_is_exact_for_power_laws(a in 0.1f64..10.0, beta in 0.1f64..1.5) {
                let ts: Vec<f64> = (1..=30).map(|k| 1.0 + 10.0 * k as f64).collect();
                let tr = synthetic(|t| a * t.powf(beta), &ts);
                let fit = sqrt_law_fit(&tr, 1.0, 1000.0).unwrap();
                prop_assert!((fit.beta - beta).abs() < 1e-10);
                prop_assert!((fit.amplitude - a).abs() < 1e-10 * a.max(1.0));
            }

            #[test]
            fn constants_sandwich_every_checkpoint(a in 0.1f64..10.0, off in 0.0f64..5.0, beta in 0.2f64..0.8) {
                let ts: Vec<f64> = (0..60).map(|k| 0.5 * k as f64).collect();
                let tr = synthetic(|t| off + a * t.powf(beta), &ts);
                let (c, big_c) = empirical_constants(&tr, 1.0).unwrap();
                for cp in &tr.checkpoints {
                    if cp.t >= 1.0 {
                        prop_assert!(c * cp.t.sqrt() <= cp.s + 1e-12);
                    }
                    prop_assert!(cp.s <= big_c * (cp.t + 1.0).sqrt() + 1e-12);
                }
            }
        }
    }
}
