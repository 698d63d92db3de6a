//! Physical model: constants, the front-speed law, the Henry-law exchange
//! nonlinearity and its truncation, boundary and initial data, together with
//! the admissibility checks a scenario has to pass before any solver sees it.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::transform::PiecewiseLinear;

/// `x^e` that stays exact for small integer exponents.
pub(crate) fn pow_real(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Physical constants of the carbonation system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Front-speed coefficient.
    pub kappa0: f64,
    /// Diffusivity of CO2 dissolved in water (`u`).
    pub kappa1: f64,
    /// Diffusivity of CO2 in air (`v`).
    pub kappa2: f64,
    /// Henry partition coefficient.
    pub gamma: f64,
}

/// Kinetic law for the front, `r -> kappa0 * (max(r, 0))^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontSpeedPsi {
    pub kappa0: f64,
    pub p: f64,
}

impl FrontSpeedPsi {
    pub fn new(kappa0: f64, p: f64) -> Self {
        Self { kappa0, p }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            self.kappa0 * pow_real(r, self.p)
        }
    }

    /// `psi(r) / r` for `r > 0`, zero otherwise. Used to keep the front flux
    /// row of the implicit system diagonally dominant.
    pub fn secant(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            self.kappa0 * pow_real(r, self.p - 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhiShape {
    /// `a*r + b*sign(r)*|r|^q`.
    PowerLaw { a: f64, b: f64 },
    /// Monotone table, linear in between and linearly extrapolated from the
    /// end segments.
    Tabulated { r: Vec<f64>, values: Vec<f64> },
}

/// Exchange nonlinearity `phi` of the Henry law `f(u, v) = phi(gamma*v - u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityPhi {
    pub shape: PhiShape,
    /// Growth exponent of the coercivity bound.
    pub q: f64,
    /// Coercivity constant: `phi(r) r >= c_phi |r|^(1+q)`.
    pub c_phi: f64,
}

impl NonlinearityPhi {
    /// Built-in family; its coercivity constant is `b`.
    pub fn power_law(a: f64, b: f64, q: f64) -> Self {
        Self {
            shape: PhiShape::PowerLaw { a, b },
            q,
            c_phi: b,
        }
    }

    pub fn tabulated(r: Vec<f64>, values: Vec<f64>, q: f64, c_phi: f64) -> Self {
        Self {
            shape: PhiShape::Tabulated { r, values },
            q,
            c_phi,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.shape {
            PhiShape::PowerLaw { a, b } => {
                let mag = pow_real(r.abs(), self.q);
                a * r + b * mag.copysign(r)
            }
            PhiShape::Tabulated { r: xs, values } => table_eval(xs, values, r),
        }
    }

    /// Truncated nonlinearity: constant outside `[-m, m]`.
    pub fn eval_truncated(&self, m: f64, r: f64) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation level m must be positive, got {m}"
            )));
        }
        Ok(self.eval(r.clamp(-m, m)))
    }

    /// `phi(r) / r`, or the slope at the origin when `r == 0`. Nonnegative
    /// for any nondecreasing `phi` with `phi(0) = 0`.
    pub fn secant(&self, r: f64) -> f64 {
        match &self.shape {
            PhiShape::PowerLaw { a, b } => {
                if self.q == 1.0 {
                    a + b
                } else if r == 0.0 {
                    *a
                } else {
                    a + b * pow_real(r.abs(), self.q - 1.0)
                }
            }
            PhiShape::Tabulated { .. } => {
                if r.abs() > 1e-12 {
                    self.eval(r) / r
                } else {
                    let h = 1e-6;
                    (self.eval(h) - self.eval(-h)) / (2.0 * h)
                }
            }
        }
    }
}

fn table_eval(xs: &[f64], ys: &[f64], r: f64) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return ys[0];
    }
    let k = match xs.partition_point(|&x| x <= r) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let (x0, x1) = (xs[k], xs[k + 1]);
    let w = (r - x0) / (x1 - x0);
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// `cinf + amp * exp(-lambda * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpProfile {
    pub cinf: f64,
    pub amp: f64,
    pub lambda: f64,
}

impl ExpProfile {
    pub fn constant(c: f64) -> Self {
        Self {
            cinf: c,
            amp: 0.0,
            lambda: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.amp == 0.0 {
            self.cinf
        } else {
            self.cinf + self.amp * (-self.lambda * t).exp()
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.amp == 0.0 || self.lambda == 0.0 {
            0.0
        } else {
            -self.lambda * self.amp * (-self.lambda * t).exp()
        }
    }

    /// Infimum over `t >= 0`.
    pub fn inf(&self) -> f64 {
        if self.lambda == 0.0 {
            self.cinf + self.amp
        } else {
            self.cinf.min(self.cinf + self.amp)
        }
    }

    /// Supremum over `t >= 0`.
    pub fn sup(&self) -> f64 {
        if self.lambda == 0.0 {
            self.cinf + self.amp
        } else {
            self.cinf.max(self.cinf + self.amp)
        }
    }

    /// Whether `|profile - cinf|` is integrable on `[0, inf)`.
    pub fn decays(&self) -> bool {
        self.amp == 0.0 || self.lambda > 0.0
    }
}

/// Dirichlet data `u(t, 0) = g(t)`, `v(t, 0) = h(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    pub g: ExpProfile,
    pub h: ExpProfile,
}

impl BoundaryData {
    pub fn constant(g: f64, h: f64) -> Self {
        Self {
            g: ExpProfile::constant(g),
            h: ExpProfile::constant(h),
        }
    }

    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "boundary data requested at negative time {t}"
            )));
        }
        Ok((self.g.value(t), self.h.value(t)))
    }

    pub fn derivative(&self, t: f64) -> (f64, f64) {
        (self.g.derivative(t), self.h.derivative(t))
    }

    /// Certified lower bound of `g`.
    pub fn g0(&self) -> f64 {
        self.g.inf()
    }

    pub fn g_star(&self) -> f64 {
        self.g.cinf
    }

    pub fn h_star(&self) -> f64 {
        self.h.cinf
    }
}

/// Initial front position and profiles, sampled uniformly on `[0, s0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub s0: f64,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
}

impl InitialData {
    pub fn constant(s0: f64, u0: f64, v0: f64) -> Self {
        Self {
            s0,
            u0: vec![u0],
            v0: vec![v0],
        }
    }

    pub fn u0_profile(&self) -> PiecewiseLinear {
        PiecewiseLinear::uniform(self.s0, self.u0.clone())
    }

    pub fn v0_profile(&self) -> PiecewiseLinear {
        PiecewiseLinear::uniform(self.s0, self.v0.clone())
    }

    pub fn sup_u0(&self) -> f64 {
        self.u0.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_v0(&self) -> f64 {
        self.v0.iter().copied().fold(0.0, f64::max)
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    /// Exponent of the front-speed law.
    pub p: f64,
    pub phi: NonlinearityPhi,
    pub boundary: BoundaryData,
    pub initial: InitialData,
    /// Optional cutoff `m` for the truncated exchange term.
    pub truncation_m: Option<f64>,
}

impl Scenario {
    /// Linear Henry law, unit constants, constant data and a unit initial
    /// front.
    pub fn baseline() -> Self {
        Self {
            params: ModelParams {
                kappa0: 1.0,
                kappa1: 1.0,
                kappa2: 1.0,
                gamma: 1.0,
            },
            p: 1.0,
            phi: NonlinearityPhi::power_law(0.0, 1.0, 1.0),
            boundary: BoundaryData::constant(1.0, 1.0),
            initial: InitialData::constant(1.0, 1.0, 1.0),
            truncation_m: None,
        }
    }

    /// Baseline with front-speed exponent `p` and exchange exponent `q`.
    pub fn power_law(p: f64, q: f64) -> Self {
        let mut sc = Self::baseline();
        sc.p = p;
        sc.phi = NonlinearityPhi::power_law(0.0, 1.0, q);
        sc
    }

    /// Baseline with `g(t) = 1 + 0.5 exp(-lambda t)`. The initial `u` falls
    /// linearly from `g(0)` to 1 so that it matches the boundary value.
    pub fn decaying_dirichlet(lambda: f64) -> Self {
        let mut sc = Self::baseline();
        sc.boundary.g = ExpProfile {
            cinf: 1.0,
            amp: 0.5,
            lambda,
        };
        sc.initial.u0 = vec![sc.boundary.g.value(0.0), 1.0];
        sc
    }

    /// Named presets understood by the command line.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline()),
            "nonlinear" => Some(Self::power_law(2.0, 2.0)),
            "decaying-dirichlet" => Some(Self::decaying_dirichlet(0.5)),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["baseline", "nonlinear", "decaying-dirichlet"];

    pub fn psi(&self) -> FrontSpeedPsi {
        FrontSpeedPsi::new(self.params.kappa0, self.p)
    }

    /// Exchange nonlinearity, truncated when a cutoff is configured.
    pub fn phi_eff(&self, r: f64) -> f64 {
        match self.truncation_m {
            Some(m) => self.phi.eval(r.clamp(-m, m)),
            None => self.phi.eval(r),
        }
    }

    /// Secant slope of the (possibly truncated) exchange term.
    pub fn phi_eff_secant(&self, r: f64) -> f64 {
        match self.truncation_m {
            Some(m) if r.abs() > m => self.phi_eff(r) / r,
            _ => self.phi.secant(r),
        }
    }

    /// Reaction rate `f(u, v) = phi(gamma v - u)`.
    pub fn f_eval(&self, u: f64, v: f64) -> f64 {
        self.phi_eff(self.params.gamma * v - u)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_scenario(self)
    }
}

/// Assumption groups a scenario is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assumption {
    /// Positivity of the physical constants and the exponents of psi.
    Constants,
    /// Henry-law nonlinearity: monotone, vanishing at 0, coercive.
    A1,
    /// Dirichlet data: positive, bounded, approaching equilibrium.
    A2,
    /// Initial data: positive front, nonnegative bounded profiles.
    A3,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Constants => "(P)",
            Assumption::A1 => "(A1)",
            Assumption::A2 => "(A2)",
            Assumption::A3 => "(A3)",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    pub what: String,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} (value {})",
            self.assumption, self.what, self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub failures: Vec<Violation>,
    /// Admissible but outside the regime of the large-time law
    /// (currently only `kappa0 == 0`, a frozen front).
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed_assumptions(&self) -> Vec<Assumption> {
        let mut out: Vec<Assumption> = Vec::new();
        for v in &self.failures {
            if !out.contains(&v.assumption) {
                out.push(v.assumption);
            }
        }
        out
    }

    fn fail(&mut self, assumption: Assumption, what: impl Into<String>, value: f64) {
        self.failures.push(Violation {
            assumption,
            what: what.into(),
            value,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            writeln!(f, "all assumptions hold")?;
        }
        for v in &self.failures {
            writeln!(f, "{v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Symmetric sample points used for the monotonicity and coercivity checks.
fn phi_sample_grid() -> Vec<f64> {
    const HALF: usize = 1000;
    let mut pts: Vec<f64> = (0..=HALF).map(|k| 10.0 * k as f64 / HALF as f64).collect();
    let neg: Vec<f64> = pts[1..].iter().rev().map(|r| -r).collect();
    let mut grid = neg;
    grid.append(&mut pts);
    grid
}

pub fn validate_scenario(sc: &Scenario) -> ValidationReport {
    use Assumption::*;
    let mut rep = ValidationReport::default();
    let prm = &sc.params;

    for (name, val) in [
        ("kappa1 > 0", prm.kappa1),
        ("kappa2 > 0", prm.kappa2),
        ("gamma > 0", prm.gamma),
    ] {
        if !(val > 0.0 && val.is_finite()) {
            rep.fail(Constants, name, val);
        }
    }
    if !(prm.kappa0 >= 0.0 && prm.kappa0.is_finite()) {
        rep.fail(Constants, "kappa0 >= 0", prm.kappa0);
    } else if prm.kappa0 == 0.0 {
        rep.warnings
            .push("kappa0 = 0 freezes the front; the square-root law does not apply".into());
    }
    if !(sc.p >= 1.0 && sc.p.is_finite()) {
        rep.fail(Constants, "p >= 1", sc.p);
    }
    if let Some(m) = sc.truncation_m {
        if !(m > 0.0) {
            rep.fail(Constants, "truncation m > 0", m);
        }
    }

    // (A1)
    let phi = &sc.phi;
    if !(phi.q >= 1.0 && phi.q.is_finite()) {
        rep.fail(A1, "q >= 1", phi.q);
    }
    if !(phi.c_phi > 0.0) {
        rep.fail(A1, "C_phi > 0", phi.c_phi);
    }
    match &phi.shape {
        PhiShape::PowerLaw { a, b } => {
            if !(*a >= 0.0) {
                rep.fail(A1, "linear coefficient a >= 0", *a);
            }
            if !(*b > 0.0) {
                rep.fail(A1, "power coefficient b > 0", *b);
            }
        }
        PhiShape::Tabulated { r, values } => {
            if r.len() < 2 || r.len() != values.len() {
                rep.fail(
                    A1,
                    "table needs >= 2 matching abscissae and values",
                    r.len() as f64,
                );
            } else if let Some(w) = r.windows(2).find(|w| !(w[1] > w[0])) {
                rep.fail(A1, "table abscissae strictly increasing", w[1]);
            }
        }
    }
    if rep.failed_assumptions().contains(&A1) {
        return finish_a2_a3(sc, rep);
    }
    let phi0 = phi.eval(0.0);
    if phi0 != 0.0 {
        rep.fail(A1, "phi(0) = 0", phi0);
    }
    let grid = phi_sample_grid();
    let vals: Vec<f64> = grid.iter().map(|&r| phi.eval(r)).collect();
    if let Some(k) = (1..vals.len()).find(|&k| vals[k] < vals[k - 1]) {
        rep.fail(A1, "phi nondecreasing", grid[k]);
    }
    if let Some((r, _)) = grid.iter().zip(&vals).find(|(&r, &v)| {
        let bound = phi.c_phi * pow_real(r.abs(), 1.0 + phi.q);
        v * r < bound * (1.0 - 1e-12) - 1e-12
    }) {
        rep.fail(A1, "phi(r) r >= C_phi |r|^(1+q)", *r);
    }

    finish_a2_a3(sc, rep)
}

fn finish_a2_a3(sc: &Scenario, mut rep: ValidationReport) -> ValidationReport {
    use Assumption::*;
    let bd = &sc.boundary;
    for (name, prof) in [("g", &bd.g), ("h", &bd.h)] {
        if !(prof.cinf.is_finite() && prof.amp.is_finite() && prof.lambda.is_finite()) {
            rep.fail(A2, format!("{name} parameters finite"), f64::NAN);
        }
        if !(prof.lambda >= 0.0) {
            rep.fail(A2, format!("{name}.lambda >= 0"), prof.lambda);
        }
        if !prof.decays() {
            rep.fail(
                A2,
                format!("{name} - {name}_star integrable (needs lambda > 0 or amp = 0)"),
                prof.amp,
            );
        }
    }
    if !(bd.g0() > 0.0) {
        rep.fail(A2, "g >= g0 > 0", bd.g0());
    }
    if !(bd.g_star() > 0.0) {
        rep.fail(A2, "g_star > 0", bd.g_star());
    }
    if !(bd.h_star() > 0.0) {
        rep.fail(A2, "h_star > 0", bd.h_star());
    }
    if !(bd.h.inf() >= 0.0) {
        rep.fail(A2, "h >= 0", bd.h.inf());
    }
    let gh = sc.params.gamma * bd.h_star();
    if (gh - bd.g_star()).abs() > 1e-12 * gh.abs().max(bd.g_star().abs()) {
        rep.fail(A2, "gamma * h_star = g_star", gh);
    }

    let init = &sc.initial;
    if !(init.s0 > 0.0 && init.s0.is_finite()) {
        rep.fail(A3, "s0 > 0", init.s0);
    }
    for (name, samples) in [("u0", &init.u0), ("v0", &init.v0)] {
        if samples.is_empty() {
            rep.fail(A3, format!("{name} has samples"), 0.0);
        }
        if let Some(&bad) = samples.iter().find(|x| !x.is_finite()) {
            rep.fail(A3, format!("{name} bounded"), bad);
        }
        if let Some(&bad) = samples.iter().find(|&&x| x < 0.0) {
            rep.fail(A3, format!("{name} >= 0"), bad);
        }
    }
    rep
}

/// A scenario that passed [`validate_scenario`]. Solver entry points only
/// accept this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidScenario(Scenario);

impl ValidScenario {
    pub fn new(sc: Scenario) -> Result<Self> {
        let rep = validate_scenario(&sc);
        if rep.passed() {
            Ok(Self(sc))
        } else {
            Err(Error::Validation(rep))
        }
    }

    pub fn into_inner(self) -> Scenario {
        self.0
    }
}

impl TryFrom<Scenario> for ValidScenario {
    type Error = Error;
    fn try_from(sc: Scenario) -> Result<Self> {
        Self::new(sc)
    }
}

impl Deref for ValidScenario {
    type Target = Scenario;
    fn deref(&self) -> &Scenario {
        &self.0
    }
}

/// Smallest pair `(u_star, v_star)` with `u_star = gamma v_star` dominating
/// the initial and boundary data.
pub fn comparison_bounds(sc: &Scenario) -> (f64, f64) {
    let gamma = sc.params.gamma;
    let u_star = sc
        .initial
        .sup_u0()
        .max(sc.boundary.g.sup())
        .max(gamma * sc.initial.sup_v0())
        .max(gamma * sc.boundary.h.sup());
    (u_star, u_star / gamma)
}
