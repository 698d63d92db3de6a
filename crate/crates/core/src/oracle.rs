//! Reference solutions for the main solver: grid-refinement studies and an
//! explicit scheme on the moving physical domain.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ValidScenario;
use crate::solver::{
    self, integrands, RunFailure, RunningIntegrals, State, StepControl, Trajectory, TrajectoryMeta,
};
use crate::transform::FixedGrid;

/// Which resolution parameters are refined between levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// `dy` and `dt` halved together.
    Simultaneous,
    /// Only `dt` halved.
    Temporal,
    /// Only `dy` halved.
    Spatial,
}

impl Refinement {
    pub fn name(self) -> &'static str {
        match self {
            Refinement::Simultaneous => "simultaneous",
            Refinement::Temporal => "temporal",
            Refinement::Spatial => "spatial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simultaneous" => Some(Refinement::Simultaneous),
            "temporal" => Some(Refinement::Temporal),
            "spatial" => Some(Refinement::Spatial),
            _ => None,
        }
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub nodes: usize,
    pub dt: f64,
    pub s_final: f64,
    /// `|s_k - s_{k-1}|` at the horizon; `None` on the coarsest level.
    pub ds: Option<f64>,
    /// Max-norm difference of `u_bar` at the horizon on the coarse nodes.
    pub du: Option<f64>,
    /// `log2(ds_{k-1} / ds_k)`.
    pub order: Option<f64>,
}

/// Differences below this are treated as exact agreement.
pub const EXACT_TOL: f64 = 1e-13;

/// Order estimates below this mark a study unreliable.
pub const MIN_ORDER: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub kind: Refinement,
    pub horizon: f64,
    pub levels: Vec<Level>,
    /// Every successive difference vanished.
    pub exact: bool,
    pub reliable: bool,
    /// Finest trajectory; withheld when the study is unreliable.
    pub reference: Option<Trajectory>,
}

impl RefinementStudy {
    /// Smallest observed order (infinite for exact studies, `None` with
    /// fewer than three levels).
    pub fn min_order(&self) -> Option<f64> {
        if self.exact {
            return Some(f64::INFINITY);
        }
        self.levels.iter().filter_map(|l| l.order).reduce(f64::min)
    }

    /// Order estimated from the two finest levels.
    pub fn final_order(&self) -> Option<f64> {
        if self.exact {
            return Some(f64::INFINITY);
        }
        self.levels.last().and_then(|l| l.order)
    }
}

fn level_resolution(kind: Refinement, base: &FixedGrid, dt: f64, k: usize) -> (usize, f64) {
    let mut n = base.len();
    let mut dt = dt;
    for _ in 0..k {
        if kind != Refinement::Temporal {
            n = 2 * n - 1;
        }
        if kind != Refinement::Spatial {
            dt *= 0.5;
        }
    }
    (n, dt)
}

/// Runs the main solver at `levels` successively refined resolutions (in
/// parallel) and tabulates how `s(horizon)` and `u_bar(horizon)` change.
///
/// Spatial refinement uses `2n - 1` nodes so every coarse node is also a
/// fine node.
pub fn refine_run(
    scenario: &ValidScenario,
    base: &FixedGrid,
    control: &StepControl,
    horizon: f64,
    levels: usize,
    kind: Refinement,
) -> Result<RefinementStudy> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!(
            "a refinement study needs at least 3 levels, got {levels}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    control.validate()?;
    let runs: Vec<Result<(usize, f64, Trajectory)>> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let (n, dt) = level_resolution(kind, base, control.dt, k);
            let grid = FixedGrid::new(n)?;
            let ctl = StepControl { dt, ..*control };
            let tr = solver::run(scenario, &grid, &ctl, horizon, horizon).map_err(|f| f.error)?;
            Ok((n, dt, tr))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut table: Vec<Level> = Vec::with_capacity(levels);
    for (k, (n, dt, tr)) in runs.iter().enumerate() {
        let s_final = tr.final_s();
        let (ds, du) = if k == 0 {
            (None, None)
        } else {
            let (n_prev, _, prev) = &runs[k - 1];
            let stride = (n - 1) / (n_prev - 1);
            let coarse = &prev.snapshots.last().expect("final snapshot").u_bar;
            let fine = &tr.snapshots.last().expect("final snapshot").u_bar;
            let du = coarse
                .iter()
                .enumerate()
                .map(|(i, c)| (c - fine[i * stride]).abs())
                .fold(0.0, f64::max);
            (Some((s_final - prev.final_s()).abs()), Some(du))
        };
        let order = match (k, ds) {
            (k, Some(d)) if k >= 2 => {
                let prev = table[k - 1].ds.expect("difference on level >= 1");
                Some((prev / d).log2())
            }
            _ => None,
        };
        table.push(Level {
            nodes: *n,
            dt: *dt,
            s_final,
            ds,
            du,
            order,
        });
    }

    let exact = table.iter().filter_map(|l| l.ds).all(|d| d <= EXACT_TOL);
    let reliable = exact
        || table.iter().skip(2).all(|l| {
            l.ds.is_some_and(|d| d <= EXACT_TOL) || l.order.is_some_and(|o| o >= MIN_ORDER)
        });
    let reference = reliable.then(|| runs.into_iter().last().expect("levels >= 3").2);
    Ok(RefinementStudy {
        kind,
        horizon,
        levels: table,
        exact,
        reliable,
        reference,
    })
}

/// Safety factor on the explicit stability limit.
const CFL: f64 = 0.4;

/// Explicit step limit for diffusion, the exchange term and the front flux
/// at the current state.
fn stable_dt(scenario: &ValidScenario, u: &[f64], v: &[f64], dx: f64, sdot: f64) -> f64 {
    let prm = &scenario.params;
    let gamma = prm.gamma;
    let n = u.len();
    let react = (0..n)
        .map(|i| scenario.phi_eff_secant(gamma * v[i] - u[i]))
        .fold(0.0, f64::max);
    let beta = scenario.psi().secant(u[n - 1]);
    let diag_u = 2.0 * prm.kappa1 / (dx * dx) + 2.0 * (sdot + beta) / dx + react;
    let diag_v = 2.0 * prm.kappa2 / (dx * dx) + 2.0 * sdot / dx + gamma * react;
    CFL / diag_u.max(diag_v)
}

#[allow(clippy::too_many_arguments)]
fn explicit_update(
    old: &[f64],
    out: &mut [f64],
    kappa: f64,
    dx: f64,
    dt: f64,
    boundary: f64,
    end_grad: f64,
    source: impl Fn(usize) -> f64,
) {
    let n = old.len();
    out[0] = boundary;
    for i in 1..n {
        let right = if i + 1 < n {
            old[i + 1]
        } else {
            old[i - 1] + 2.0 * dx * end_grad
        };
        let lap = (old[i - 1] - 2.0 * old[i] + right) / (dx * dx);
        out[i] = old[i] + dt * (kappa * lap + source(i));
    }
}

/// Moves node values from the uniform grid on `[0, s_old]` to the uniform
/// grid on `[0, s_new]`; beyond `s_old` the field is extended with slope
/// `end_grad`.
fn regrid(field: &[f64], s_old: f64, s_new: f64, end_grad: f64, out: &mut [f64]) {
    let n = field.len();
    let dx_old = s_old / (n - 1) as f64;
    let dx_new = s_new / (n - 1) as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let x = i as f64 * dx_new;
        *o = if x >= s_old {
            field[n - 1] + (x - s_old) * end_grad
        } else {
            let k = ((x / dx_old) as usize).min(n - 2);
            let w = x / dx_old - k as f64;
            field[k] + w * (field[k + 1] - field[k])
        };
    }
}

/// Explicit forward-Euler solver on the physical interval `[0, s(t)]` with
/// the same number of nodes as `grid`. The front moves by
/// `dt * psi(u(s))` each step and the fields are re-interpolated onto the
/// new interval.
///
/// `control.dt` caps the step; the stability limit usually sets it. The
/// returned trajectory uses the same checkpoint layout as [`solver::run`]
/// (node values on `[0, s]` are node values on the unit grid).
pub fn alt_scheme_run(
    scenario: &ValidScenario,
    grid: &FixedGrid,
    control: &StepControl,
    horizon: f64,
    checkpoint_every: f64,
) -> std::result::Result<Trajectory, RunFailure> {
    let mut traj = Trajectory::new(TrajectoryMeta::of(scenario));
    let fail = |error: Error, mut partial: Trajectory| {
        partial.complete = false;
        RunFailure { error, partial }
    };
    if !(horizon >= 0.0 && horizon.is_finite()) || (horizon > 0.0 && !(checkpoint_every > 0.0)) {
        return Err(fail(
            Error::InvalidParameter(format!(
                "bad horizon {horizon} or checkpoint interval {checkpoint_every}"
            )),
            traj,
        ));
    }
    let mut state = match solver::initialize(scenario, grid, control) {
        Ok(st) => st,
        Err(e) => return Err(fail(e, traj)),
    };
    let prm = scenario.params;
    let gamma = prm.gamma;
    let psi = scenario.psi();
    let n = grid.len();
    let mut integrals = RunningIntegrals::default();
    let mut rates = integrands(&state, scenario);
    traj.push(&state, integrals);

    let mut u_tmp = vec![0.0; n];
    let mut v_tmp = vec![0.0; n];
    let mut k_cp = 1usize;
    while state.t < horizon {
        let target = (k_cp as f64 * checkpoint_every).min(horizon);
        let s = state.s;
        let dx = s / (n - 1) as f64;
        let uf = state.u_front();
        let vf = state.v_front();
        let sdot = psi.eval(uf);
        let mut dt = control
            .dt
            .min(stable_dt(scenario, &state.u_bar, &state.v_bar, dx, sdot))
            .min(target - state.t);
        let reached = target - (state.t + dt) <= 1e-12 * target.max(1.0);
        if reached {
            dt = target - state.t;
        }
        let t_new = if reached { target } else { state.t + dt };
        let (g_new, h_new) = match scenario.boundary.eval(t_new) {
            Ok(gh) => gh,
            Err(e) => return Err(fail(e, traj)),
        };

        let grad_u = -(sdot * uf + psi.eval(uf)) / prm.kappa1;
        let grad_v = -(sdot * vf) / prm.kappa2;
        let (u, v) = (&state.u_bar, &state.v_bar);
        let f = |i: usize| scenario.phi_eff(gamma * v[i] - u[i]);
        explicit_update(u, &mut u_tmp, prm.kappa1, dx, dt, g_new, grad_u, f);
        explicit_update(v, &mut v_tmp, prm.kappa2, dx, dt, h_new, grad_v, |i| -f(i));

        let s_new = s + dt * sdot;
        // slopes at the end node after the update
        let uf_new = u_tmp[n - 1];
        let vf_new = v_tmp[n - 1];
        let grad_u = -(sdot * uf_new + psi.eval(uf_new)) / prm.kappa1;
        let grad_v = -(sdot * vf_new) / prm.kappa2;
        let mut next = State {
            t: t_new,
            s: s_new,
            sdot: 0.0,
            u_bar: vec![0.0; n],
            v_bar: vec![0.0; n],
        };
        regrid(&u_tmp, s, s_new, grad_u, &mut next.u_bar);
        regrid(&v_tmp, s, s_new, grad_v, &mut next.v_bar);
        next.sdot = psi.eval(next.u_front());
        if !next.is_finite() {
            return Err(fail(Error::NumericalBlowup { t: t_new }, traj));
        }

        let next_rates = integrands(&next, scenario);
        integrals.accumulate(&rates, &next_rates, dt);
        rates = next_rates;
        state = next;
        if reached {
            traj.push(&state, integrals);
            k_cp += 1;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scenario;

    fn valid(sc: Scenario) -> ValidScenario {
        ValidScenario::new(sc).unwrap()
    }

    fn frozen() -> ValidScenario {
        let mut raw = Scenario::baseline();
        raw.params.kappa0 = 0.0;
        valid(raw)
    }

    #[test]
    fn level_layout() {
        let g = FixedGrid::new(11).unwrap();
        assert_eq!(
            level_resolution(Refinement::Simultaneous, &g, 0.1, 2),
            (41, 0.025)
        );
        assert_eq!(
            level_resolution(Refinement::Temporal, &g, 0.1, 2),
            (11, 0.025)
        );
        assert_eq!(level_resolution(Refinement::Spatial, &g, 0.1, 2), (41, 0.1));
    }

    #[test]
    fn frozen_front_refines_exactly() {
        let sc = frozen();
        let study = refine_run(
            &sc,
            &FixedGrid::new(11).unwrap(),
            &StepControl::with_dt(0.05),
            0.5,
            3,
            Refinement::Simultaneous,
        )
        .unwrap();
        assert!(study.exact && study.reliable);
        for l in &study.levels {
            assert_eq!(l.s_final, 1.0);
        }
        assert!(study.levels.iter().filter_map(|l| l.ds).all(|d| d == 0.0));
        assert_eq!(study.min_order(), Some(f64::INFINITY));
        assert!(study.reference.is_some());
    }

    #[test]
    fn equilibrium_fields_agree_across_levels() {
        // frozen front and equilibrium data: fields stay at the data values
        let sc = frozen();
        let study = refine_run(
            &sc,
            &FixedGrid::new(11).unwrap(),
            &StepControl::with_dt(0.05),
            0.5,
            3,
            Refinement::Temporal,
        )
        .unwrap();
        for l in study.levels.iter().skip(1) {
            assert!(l.du.unwrap() < 1e-14);
        }
    }

    #[test]
    fn rejects_short_studies() {
        let sc = frozen();
        let g = FixedGrid::new(11).unwrap();
        assert!(refine_run(
            &sc,
            &g,
            &StepControl::default(),
            1.0,
            2,
            Refinement::Temporal
        )
        .is_err());
        assert!(refine_run(
            &sc,
            &g,
            &StepControl::default(),
            0.0,
            3,
            Refinement::Temporal
        )
        .is_err());
    }

    #[test]
    fn baseline_differences_halve() {
        let sc = valid(Scenario::baseline());
        let study = refine_run(
            &sc,
            &FixedGrid::new(26).unwrap(),
            &StepControl::with_dt(0.02),
            1.0,
            4,
            Refinement::Simultaneous,
        )
        .unwrap();
        assert!(study.reliable && !study.exact);
        for l in study.levels.iter().skip(2) {
            let o = l.order.unwrap();
            assert!((0.8..1.3).contains(&o), "order {o}");
        }
    }

    #[test]
    fn regrid_is_identity_without_front_motion() {
        let f = [0.0, 1.0, 4.0, 9.0];
        let mut out = [0.0; 4];
        regrid(&f, 3.0, 3.0, 0.0, &mut out);
        assert_eq!(out, f);
        regrid(&[1.0, 1.0, 1.0], 1.0, 1.5, -2.0, &mut out[..3]);
        assert_eq!(out[..3], [1.0, 1.0, 0.0]);
    }

    #[test]
    fn alt_scheme_frozen_front_matches_main() {
        let sc = frozen();
        let grid = FixedGrid::new(21).unwrap();
        let ctl = StepControl::with_dt(0.01);
        let alt = alt_scheme_run(&sc, &grid, &ctl, 0.5, 0.5).unwrap();
        let main = solver::run(&sc, &grid, &ctl, 0.5, 0.5).unwrap();
        assert_eq!(alt.final_s(), main.final_s());
        let (a, m) = (
            alt.snapshots.last().unwrap(),
            main.snapshots.last().unwrap(),
        );
        for i in 0..grid.len() {
            assert!((a.u_bar[i] - m.u_bar[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn alt_scheme_stays_in_bounds() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(21).unwrap();
        let tr = alt_scheme_run(&sc, &grid, &StepControl::with_dt(0.01), 2.0, 0.5).unwrap();
        assert_eq!(tr.checkpoints.len(), 5);
        assert!(tr.checkpoints.windows(2).all(|w| w[1].s >= w[0].s));
        for st in &tr.snapshots {
            assert!(st
                .u_bar
                .iter()
                .chain(&st.v_bar)
                .all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        }
    }
}
