//! Time stepping of the front-fixed system.
//!
//! On the unit interval the fields obey
//!
//! ```text
//! u_t = (k1/s^2) u_yy + (s'/s) y u_y + f(u, v)
//! v_t = (k2/s^2) v_yy + (s'/s) y v_y - f(u, v)
//! u(t,0) = g(t),  v(t,0) = h(t)
//! -(k1/s) u_y(t,1) = s' u(t,1) + psi(u(t,1))
//! -(k2/s) v_y(t,1) = s' v(t,1)
//! s' = psi(u(t,1))
//! ```
//!
//! Each step solves two tridiagonal systems inside a Picard loop that lags
//! the front position, the front flux and the exchange term. With the
//! upwind advection stencil and `theta = 1` every system is an M-matrix, so
//! the discrete solution respects the comparison bounds of the continuous
//! problem.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{comparison_bounds, ValidScenario};
use crate::quad;
use crate::transform::{to_fixed, FixedGrid};
use crate::tridiag;

/// Number of dt halvings attempted before a step is declared failed.
pub const MAX_RETRIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    /// Relative change below which the Picard loop stops.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Upwind (true) or centered (false) differences for the advection term.
    pub upwind: bool,
    /// Implicitness of the spatial operator, in `[0.5, 1]`.
    pub theta: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt: 0.01,
            picard_tol: 1e-10,
            picard_max: 50,
            upwind: true,
            theta: 1.0,
        }
    }
}

impl StepControl {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max < 1 {
            return Err(Error::InvalidParameter(
                "picard_max must be at least 1".into(),
            ));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0.5, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Snapshot of the solution on the unit grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// Front position.
    pub s: f64,
    /// Front speed `psi(u_bar[n-1])`.
    pub sdot: f64,
    pub u_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
}

impl State {
    pub fn n_nodes(&self) -> usize {
        self.u_bar.len()
    }

    pub fn dy(&self) -> f64 {
        1.0 / (self.u_bar.len() - 1) as f64
    }

    pub fn u_front(&self) -> f64 {
        self.u_bar[self.u_bar.len() - 1]
    }

    pub fn v_front(&self) -> f64 {
        self.v_bar[self.v_bar.len() - 1]
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.s.is_finite()
            && self.sdot.is_finite()
            && self.u_bar.iter().chain(&self.v_bar).all(|x| x.is_finite())
    }
}

/// Time integrals accumulated along a run. The same struct also carries the
/// instantaneous integrands (see [`integrands`]).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningIntegrals {
    /// `int u(tau, s(tau)) dtau`
    pub u_front: f64,
    /// `int v(tau, s(tau)) dtau`
    pub v_front: f64,
    pub g: f64,
    pub h: f64,
    /// `int int |u_x|^2 dx dtau`
    pub grad_u_sq: f64,
    /// `int int |v_x|^2 dx dtau`
    pub grad_v_sq: f64,
    /// `int int |gamma v - u|^(q+1) dx dtau`
    pub reaction_power: f64,
    /// `int psi(u(s)) (u(s) - g) dtau`
    pub psi_work: f64,
    /// `int 1/2 s' (|u(s) - g|^2 + gamma |v(s) - h|^2) dtau`
    pub front_jump: f64,
    /// `int (g' int (u - g) dx + gamma h' int (v - h) dx) dtau`
    pub data_drift: f64,
    /// `int int phi_m(gamma v - u) (gamma (h - h_star) - (g - g_star)) dx dtau`
    pub reaction_forcing: f64,
    /// `int s' (g (u(s) - g) + gamma h (v(s) - h)) dtau`
    pub convective: f64,
}

impl RunningIntegrals {
    fn as_array(&self) -> [f64; 12] {
        [
            self.u_front,
            self.v_front,
            self.g,
            self.h,
            self.grad_u_sq,
            self.grad_v_sq,
            self.reaction_power,
            self.psi_work,
            self.front_jump,
            self.data_drift,
            self.reaction_forcing,
            self.convective,
        ]
    }

    fn from_array(a: [f64; 12]) -> Self {
        Self {
            u_front: a[0],
            v_front: a[1],
            g: a[2],
            h: a[3],
            grad_u_sq: a[4],
            grad_v_sq: a[5],
            reaction_power: a[6],
            psi_work: a[7],
            front_jump: a[8],
            data_drift: a[9],
            reaction_forcing: a[10],
            convective: a[11],
        }
    }

    /// Adds the trapezoid contribution of one step.
    pub fn accumulate(&mut self, before: &RunningIntegrals, after: &RunningIntegrals, dt: f64) {
        let mut acc = self.as_array();
        let (a, b) = (before.as_array(), after.as_array());
        for k in 0..acc.len() {
            acc[k] += 0.5 * dt * (a[k] + b[k]);
        }
        *self = Self::from_array(acc);
    }
}

/// Instantaneous integrands of every running integral at `state`.
pub fn integrands(state: &State, scenario: &ValidScenario) -> RunningIntegrals {
    let prm = &scenario.params;
    let gamma = prm.gamma;
    let dy = state.dy();
    let s = state.s;
    let (u, v) = (&state.u_bar, &state.v_bar);
    let (g, h) = (u[0], v[0]);
    let (gd, hd) = scenario.boundary.derivative(state.t);
    let (uf, vf) = (state.u_front(), state.v_front());
    let q1 = scenario.phi.q + 1.0;
    let n = u.len();

    let w = |i: usize| gamma * v[i] - u[i];
    let reaction_power = s * quad::trap((0..n).map(|i| crate::model::pow_real(w(i).abs(), q1)), dy);
    let phi_int = s * quad::trap((0..n).map(|i| scenario.phi_eff(w(i))), dy);
    let u_dev = s * quad::trap((0..n).map(|i| u[i] - g), dy);
    let v_dev = s * quad::trap((0..n).map(|i| v[i] - h), dy);
    let forcing_weight =
        gamma * (h - scenario.boundary.h_star()) - (g - scenario.boundary.g_star());

    RunningIntegrals {
        u_front: uf,
        v_front: vf,
        g,
        h,
        grad_u_sq: quad::grad_sq(u, dy, s),
        grad_v_sq: quad::grad_sq(v, dy, s),
        reaction_power,
        psi_work: scenario.psi().eval(uf) * (uf - g),
        front_jump: 0.5 * state.sdot * ((uf - g).powi(2) + gamma * (vf - h).powi(2)),
        data_drift: gd * u_dev + gamma * hd * v_dev,
        reaction_forcing: phi_int * forcing_weight,
        convective: state.sdot * (g * (uf - g) + gamma * h * (vf - h)),
    }
}

/// Front speed `psi(u_bar[n-1])`.
pub fn front_speed(state: &State, scenario: &ValidScenario) -> f64 {
    scenario.psi().eval(state.u_front())
}

/// Initial state: transferred initial profiles with the Dirichlet nodes
/// overwritten by the boundary data at `t = 0`.
pub fn initialize(
    scenario: &ValidScenario,
    grid: &FixedGrid,
    control: &StepControl,
) -> Result<State> {
    control.validate()?;
    if grid.len() < 3 {
        return Err(Error::InvalidParameter(
            "grid needs at least 3 nodes".into(),
        ));
    }
    let s0 = scenario.initial.s0;
    let mut u_bar = to_fixed(&scenario.initial.u0_profile(), s0, grid)?;
    let mut v_bar = to_fixed(&scenario.initial.v0_profile(), s0, grid)?;
    let (g0, h0) = scenario.boundary.eval(0.0)?;
    u_bar[0] = g0;
    v_bar[0] = h0;
    let mut st = State {
        t: 0.0,
        s: s0,
        sdot: 0.0,
        u_bar,
        v_bar,
    };
    st.sdot = front_speed(&st, scenario);
    Ok(st)
}

/// Coefficients `(lower, diag, upper)` of the semi-discrete spatial operator
/// at row `i`. `front_secant` is `psi(u)/u` at the front for `u` (zero for
/// `v`), so the front flux enters the diagonal.
#[allow(clippy::too_many_arguments)]
fn operator_row(
    i: usize,
    n: usize,
    dy: f64,
    kappa: f64,
    s: f64,
    sdot: f64,
    front_secant: f64,
    upwind: bool,
) -> (f64, f64, f64) {
    let alpha = kappa / (s * s * dy * dy);
    if i + 1 == n {
        // Ghost node eliminated with the flux condition; the advection term
        // uses the same boundary gradient.
        let flux = (2.0 / (s * dy) + sdot / kappa) * (sdot + front_secant);
        return (2.0 * alpha, -2.0 * alpha - flux, 0.0);
    }
    let a = sdot / s * (i as f64 * dy);
    if upwind {
        // a >= 0 moves information toward y = 0, so the stencil looks at i+1.
        (alpha, -2.0 * alpha - a / dy, alpha + a / dy)
    } else {
        let c = a / (2.0 * dy);
        (alpha - c, -2.0 * alpha, alpha + c)
    }
}

struct FieldSystem<'a> {
    kappa: f64,
    dy: f64,
    dt: f64,
    theta: f64,
    upwind: bool,
    s_old: f64,
    sdot_old: f64,
    secant_old: f64,
    s_new: f64,
    sdot_new: f64,
    secant_new: f64,
    old: &'a [f64],
    dirichlet: f64,
}

struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    scratch: Vec<f64>,
    react_diag: Vec<f64>,
    react_src: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            scratch: vec![0.0; n],
            react_diag: vec![0.0; n],
            react_src: vec![0.0; n],
        }
    }
}

impl FieldSystem<'_> {
    /// Solves for the new field; the reaction term contributes
    /// `-react_diag[i] * x[i] + react_src[i]` at the new level.
    fn solve(&self, ws: &mut Workspace, out: &mut [f64]) {
        let n = self.old.len();
        let th = self.theta;
        let inv_dt = 1.0 / self.dt;
        ws.lower[0] = 0.0;
        ws.diag[0] = 1.0;
        ws.upper[0] = 0.0;
        out[0] = self.dirichlet;
        #[allow(clippy::needless_range_loop)]
        for i in 1..n {
            let (lo, di, up) = operator_row(
                i,
                n,
                self.dy,
                self.kappa,
                self.s_new,
                self.sdot_new,
                self.secant_new,
                self.upwind,
            );
            ws.lower[i] = -th * lo;
            ws.diag[i] = inv_dt + ws.react_diag[i] - th * di;
            ws.upper[i] = -th * up;
            let mut rhs = self.old[i] * inv_dt + ws.react_src[i];
            if th < 1.0 {
                let (lo, di, up) = operator_row(
                    i,
                    n,
                    self.dy,
                    self.kappa,
                    self.s_old,
                    self.sdot_old,
                    self.secant_old,
                    self.upwind,
                );
                let right = if i + 1 < n { up * self.old[i + 1] } else { 0.0 };
                rhs += (1.0 - th) * (lo * self.old[i - 1] + di * self.old[i] + right);
            }
            out[i] = rhs;
        }
        tridiag::solve_in_place(&ws.lower, &ws.diag, &ws.upper, out, &mut ws.scratch);
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// One step of size `control.dt`.
pub fn advance(state: &State, scenario: &ValidScenario, control: &StepControl) -> Result<State> {
    advance_by(state, scenario, control, control.dt)
}

/// One step of size `dt` (which may differ from `control.dt`).
pub fn advance_by(
    state: &State,
    scenario: &ValidScenario,
    control: &StepControl,
    dt: f64,
) -> Result<State> {
    control.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let n = state.n_nodes();
    if n < 3 || state.v_bar.len() != n {
        return Err(Error::InvalidState(format!("state has {n} nodes")));
    }
    if !(state.s > 0.0) {
        return Err(Error::InvalidState(format!(
            "front position must be positive, got {}",
            state.s
        )));
    }
    let prm = &scenario.params;
    let gamma = prm.gamma;
    let psi = scenario.psi();
    let dy = state.dy();
    let t_new = state.t + dt;
    let (g_new, h_new) = scenario.boundary.eval(t_new)?;

    let mut ws = Workspace::new(n);
    let mut u_it = state.u_bar.clone();
    let mut v_it = state.v_bar.clone();
    let mut u_next = vec![0.0; n];
    let mut v_next = vec![0.0; n];
    let mut s_it = state.s + dt * psi.eval(state.u_front());
    let secant_old = psi.secant(state.u_front());

    let mut residual = f64::INFINITY;
    for _ in 0..control.picard_max {
        let sdot = (s_it - state.s) / dt;

        for i in 0..n {
            let c = scenario.phi_eff_secant(gamma * v_it[i] - u_it[i]);
            ws.react_diag[i] = c;
            ws.react_src[i] = c * gamma * v_it[i];
        }
        FieldSystem {
            kappa: prm.kappa1,
            dy,
            dt,
            theta: control.theta,
            upwind: control.upwind,
            s_old: state.s,
            sdot_old: state.sdot,
            secant_old,
            s_new: s_it,
            sdot_new: sdot,
            secant_new: psi.secant(u_it[n - 1]),
            old: &state.u_bar,
            dirichlet: g_new,
        }
        .solve(&mut ws, &mut u_next);

        for ((d, src), &u) in ws.react_diag.iter_mut().zip(&mut ws.react_src).zip(&u_next) {
            *src = *d * u;
            *d *= gamma;
        }
        FieldSystem {
            kappa: prm.kappa2,
            dy,
            dt,
            theta: control.theta,
            upwind: control.upwind,
            s_old: state.s,
            sdot_old: state.sdot,
            secant_old: 0.0,
            s_new: s_it,
            sdot_new: sdot,
            secant_new: 0.0,
            old: &state.v_bar,
            dirichlet: h_new,
        }
        .solve(&mut ws, &mut v_next);

        let s_next = state.s + dt * psi.eval(u_next[n - 1]);
        if !(s_next.is_finite() && u_next.iter().chain(&v_next).all(|x| x.is_finite())) {
            return Err(Error::NumericalBlowup { t: t_new });
        }

        let ds = (s_next - s_it).abs() / s_next.abs();
        let du = max_abs_diff(&u_next, &u_it) / max_abs(&u_next).max(f64::MIN_POSITIVE);
        let dv = max_abs_diff(&v_next, &v_it) / max_abs(&v_next).max(f64::MIN_POSITIVE);
        residual = ds.max(du).max(dv);

        std::mem::swap(&mut u_it, &mut u_next);
        std::mem::swap(&mut v_it, &mut v_next);
        s_it = s_next;
        if residual < control.picard_tol {
            let uf = u_it[n - 1];
            let mut st = State {
                t: t_new,
                s: state.s + dt * psi.eval(uf),
                sdot: psi.eval(uf),
                u_bar: u_it,
                v_bar: v_it,
            };
            st.u_bar[0] = g_new;
            st.v_bar[0] = h_new;
            debug_assert!(st.is_finite());
            return Ok(st);
        }
    }
    Err(Error::StepFailure {
        t: state.t,
        dt,
        residual,
    })
}

/// Checkpoint record: front data plus running integrals at that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub s: f64,
    pub sdot: f64,
    pub integrals: RunningIntegrals,
}

/// Constants the diagnostics need alongside the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryMeta {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma: f64,
    pub c_phi: f64,
    pub q: f64,
    pub u_star: f64,
    pub v_star: f64,
}

impl TrajectoryMeta {
    pub fn of(scenario: &ValidScenario) -> Self {
        let (u_star, v_star) = comparison_bounds(scenario);
        Self {
            kappa1: scenario.params.kappa1,
            kappa2: scenario.params.kappa2,
            gamma: scenario.params.gamma,
            c_phi: scenario.phi.c_phi,
            q: scenario.phi.q,
            u_star,
            v_star,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub checkpoints: Vec<Checkpoint>,
    /// Field snapshot at every checkpoint, same order.
    pub snapshots: Vec<State>,
    /// False when the run stopped before its horizon.
    pub complete: bool,
    /// Number of steps that needed at least one dt halving.
    pub retried_steps: usize,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self {
            meta,
            checkpoints: Vec::new(),
            snapshots: Vec::new(),
            complete: true,
            retried_steps: 0,
        }
    }

    pub fn push(&mut self, state: &State, integrals: RunningIntegrals) {
        self.checkpoints.push(Checkpoint {
            t: state.t,
            s: state.s,
            sdot: state.sdot,
            integrals,
        });
        self.snapshots.push(state.clone());
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn final_s(&self) -> f64 {
        self.checkpoints.last().map_or(f64::NAN, |c| c.s)
    }

    /// Index of the checkpoint recorded at `t` (to within rounding).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.checkpoints.iter().position(|c| (c.t - t).abs() <= tol)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&State> {
        self.index_at(t).map(|k| &self.snapshots[k])
    }
}

/// A run that stopped early; carries the partial trajectory.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run stopped at t = {}: {}",
            self.partial.last().map_or(0.0, |c| c.t),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {}

/// Advances the scenario to `horizon`, recording a checkpoint (with field
/// snapshot) every `checkpoint_every` and at the horizon.
pub fn run(
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
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(fail(
            Error::InvalidParameter(format!("horizon must be nonnegative, got {horizon}")),
            traj,
        ));
    }
    if horizon > 0.0 && !(checkpoint_every > 0.0) {
        return Err(fail(
            Error::InvalidParameter(format!(
                "checkpoint interval must be positive, got {checkpoint_every}"
            )),
            traj,
        ));
    }
    let mut state = match initialize(scenario, grid, control) {
        Ok(st) => st,
        Err(e) => return Err(fail(e, traj)),
    };
    let mut integrals = RunningIntegrals::default();
    let mut rates = integrands(&state, scenario);
    traj.push(&state, integrals);

    let mut k_cp = 1usize;
    while state.t < horizon {
        let target = (k_cp as f64 * checkpoint_every).min(horizon);
        let mut dt = control.dt.min(target - state.t);
        if target - (state.t + dt) < 1e-9 * control.dt {
            dt = target - state.t;
        }

        let mut attempt = 0;
        let next = loop {
            match advance_by(&state, scenario, control, dt) {
                Ok(st) => break st,
                Err(Error::StepFailure { .. }) if attempt < MAX_RETRIES => {
                    attempt += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(fail(e, traj)),
            }
        };
        if attempt > 0 {
            traj.retried_steps += 1;
        }

        let mut next = next;
        let reached = (target - next.t).abs() <= 1e-9 * control.dt;
        if reached {
            next.t = target;
        }
        let next_rates = integrands(&next, scenario);
        integrals.accumulate(&rates, &next_rates, next.t - state.t);
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

    #[test]
    fn initialize_examples() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(11).unwrap();
        let st = initialize(&sc, &grid, &StepControl::default()).unwrap();
        assert!(st.u_bar.iter().chain(&st.v_bar).all(|&x| x == 1.0));
        assert_eq!(st.sdot, 1.0);

        let mut raw = Scenario::baseline();
        raw.initial.u0 = vec![0.0, 1.0];
        let st = initialize(&valid(raw), &grid, &StepControl::default()).unwrap();
        for (i, y) in grid.nodes().iter().enumerate().skip(1) {
            assert!((st.u_bar[i] - y).abs() < 1e-15);
        }
        assert_eq!(st.u_bar[0], 1.0); // pinned to g(0)

        let mut raw = Scenario::baseline();
        raw.params.kappa0 = 2.0;
        raw.p = 2.0;
        let st = initialize(&valid(raw), &grid, &StepControl::default()).unwrap();
        assert_eq!(st.sdot, 2.0);
    }

    #[test]
    fn front_speed_examples() {
        let grid = FixedGrid::new(5).unwrap();
        let mut st =
            initialize(&valid(Scenario::baseline()), &grid, &StepControl::default()).unwrap();
        let n = st.n_nodes();
        st.u_bar[n - 1] = 0.0;
        assert_eq!(front_speed(&st, &valid(Scenario::baseline())), 0.0);
        st.u_bar[n - 1] = 1.0;
        assert_eq!(front_speed(&st, &valid(Scenario::baseline())), 1.0);
        let mut raw = Scenario::baseline();
        raw.params.kappa0 = 0.5;
        raw.p = 3.0;
        st.u_bar[n - 1] = 2.0;
        assert_eq!(front_speed(&st, &valid(raw)), 4.0);
    }

    #[test]
    fn control_validation() {
        assert!(StepControl::default().validate().is_ok());
        for bad in [
            StepControl {
                dt: 0.0,
                ..Default::default()
            },
            StepControl {
                picard_tol: 0.0,
                ..Default::default()
            },
            StepControl {
                picard_max: 0,
                ..Default::default()
            },
            StepControl {
                theta: 0.3,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidParameter(_))));
        }
        let sc = valid(Scenario::baseline());
        assert!(initialize(
            &sc,
            &FixedGrid::new(3).unwrap(),
            &StepControl::with_dt(-1.0)
        )
        .is_err());
    }

    #[test]
    fn frozen_front_does_not_move() {
        let mut raw = Scenario::baseline();
        raw.params.kappa0 = 0.0;
        let sc = valid(raw);
        let grid = FixedGrid::new(21).unwrap();
        let ctl = StepControl::with_dt(0.05);
        let st = initialize(&sc, &grid, &ctl).unwrap();
        let next = advance(&st, &sc, &ctl).unwrap();
        assert_eq!(next.s, st.s);
        assert_eq!(next.sdot, 0.0);
    }

    #[test]
    fn equilibrium_step() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(41).unwrap();
        let ctl = StepControl::with_dt(1e-3);
        let st = initialize(&sc, &grid, &ctl).unwrap();
        let next = advance(&st, &sc, &ctl).unwrap();
        // away from the front layer the fields stay at the equilibrium value
        for i in 0..10 {
            assert!(
                (next.u_bar[i] - 1.0).abs() < 1e-10,
                "u[{i}] = {}",
                next.u_bar[i]
            );
            assert!((next.v_bar[i] - 1.0).abs() < 1e-10);
        }
        // s grows by dt psi(g_star) up to O(dt^2)
        let growth = next.s - st.s;
        assert!((growth - 1e-3).abs() < 1e-4, "growth {growth}");
        assert!(next.s >= st.s);
        assert_eq!(next.u_bar[0], 1.0);
        assert_eq!(next.v_bar[0], 1.0);
        assert_eq!(front_speed(&next, &sc), next.sdot);
    }

    #[test]
    fn picard_cap_reports_step_failure() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(21).unwrap();
        let ctl = StepControl {
            dt: 0.5,
            picard_max: 1,
            picard_tol: 1e-14,
            ..Default::default()
        };
        let st = initialize(&sc, &grid, &ctl).unwrap();
        match advance(&st, &sc, &ctl) {
            Err(Error::StepFailure { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected step failure, got {other:?}"),
        }
    }

    #[test]
    fn run_with_zero_horizon_returns_initial_checkpoint() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(11).unwrap();
        let traj = run(&sc, &grid, &StepControl::default(), 0.0, 1.0).unwrap();
        assert_eq!(traj.checkpoints.len(), 1);
        assert_eq!(traj.checkpoints[0].t, 0.0);
        assert!(traj.complete);
    }

    #[test]
    fn run_hits_checkpoints_exactly_and_front_is_monotone() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(41).unwrap();
        let traj = run(&sc, &grid, &StepControl::with_dt(0.03), 2.0, 0.25).unwrap();
        let ts: Vec<f64> = traj.checkpoints.iter().map(|c| c.t).collect();
        assert_eq!(ts.len(), 9);
        for (k, t) in ts.iter().enumerate() {
            assert_eq!(*t, 0.25 * k as f64);
        }
        assert!(traj
            .checkpoints
            .windows(2)
            .all(|w| w[1].s >= w[0].s && w[1].t > w[0].t));
        for snap in &traj.snapshots {
            assert_eq!(snap.u_bar[0], 1.0);
            assert_eq!(snap.v_bar[0], 1.0);
        }
    }

    #[test]
    fn retry_halves_dt_when_picard_stalls() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(21).unwrap();
        let ctl = StepControl {
            dt: 0.5,
            picard_max: 8,
            picard_tol: 1e-10,
            ..Default::default()
        };
        let traj = run(&sc, &grid, &ctl, 1.0, 0.5).unwrap();
        assert!(traj.retried_steps > 0);
        assert!(traj.complete);
    }

    #[test]
    fn retry_cap_returns_partial_trajectory() {
        let sc = valid(Scenario::baseline());
        let grid = FixedGrid::new(21).unwrap();
        let ctl = StepControl {
            dt: 0.5,
            picard_max: 1,
            picard_tol: 1e-300,
            ..Default::default()
        };
        let err = run(&sc, &grid, &ctl, 1.0, 0.5).unwrap_err();
        assert!(matches!(err.error, Error::StepFailure { .. }));
        assert!(!err.partial.complete);
        assert_eq!(err.partial.checkpoints.len(), 1);
    }
}
