//! Plain-text scenario files.
//!
//! One `key = value` pair per line, `#` starts a comment. Lists are comma
//! separated. Keys not given keep their baseline value.
//!
//! ```text
//! kappa0 = 1        # front-speed constant
//! kappa1 = 1
//! kappa2 = 1
//! gamma  = 1
//! p      = 1
//! phi.a  = 0        # phi(r) = a r + b sign(r) |r|^q
//! phi.b  = 1
//! phi.q  = 1
//! g.cinf = 1        # g(t) = cinf + amp exp(-lambda t)
//! g.amp  = 0
//! g.lambda = 0
//! h.cinf = 1
//! s0 = 1
//! u0 = 1            # samples on [0, s0]
//! v0 = 1, 1, 1
//! m  = none         # truncation level
//! ```
//!
//! A tabulated exchange law is given with `phi.table.r` and `phi.table.f`
//! (plus `phi.q` and `phi.c_phi`). Setting `phi.b` also sets `phi.c_phi`;
//! set `phi.c_phi` afterwards to override it.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{PhiShape, Scenario};

pub const KEYS: [&str; 21] = [
    "kappa0",
    "kappa1",
    "kappa2",
    "gamma",
    "p",
    "phi.a",
    "phi.b",
    "phi.q",
    "phi.c_phi",
    "phi.table.r",
    "phi.table.f",
    "g.cinf",
    "g.amp",
    "g.lambda",
    "h.cinf",
    "h.amp",
    "h.lambda",
    "s0",
    "u0",
    "v0",
    "m",
];

fn number(key: &str, raw: &str) -> std::result::Result<f64, String> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got {:?}", raw.trim()))
}

fn list(key: &str, raw: &str) -> std::result::Result<Vec<f64>, String> {
    raw.split(',').map(|x| number(key, x)).collect()
}

fn power_law_mut(sc: &mut Scenario) -> (&mut f64, &mut f64) {
    if !matches!(sc.phi.shape, PhiShape::PowerLaw { .. }) {
        sc.phi.shape = PhiShape::PowerLaw { a: 0.0, b: 1.0 };
    }
    match &mut sc.phi.shape {
        PhiShape::PowerLaw { a, b } => (a, b),
        PhiShape::Tabulated { .. } => unreachable!(),
    }
}

fn table_mut(sc: &mut Scenario) -> (&mut Vec<f64>, &mut Vec<f64>) {
    if !matches!(sc.phi.shape, PhiShape::Tabulated { .. }) {
        sc.phi.shape = PhiShape::Tabulated {
            r: Vec::new(),
            values: Vec::new(),
        };
    }
    match &mut sc.phi.shape {
        PhiShape::Tabulated { r, values } => (r, values),
        PhiShape::PowerLaw { .. } => unreachable!(),
    }
}

fn apply(sc: &mut Scenario, key: &str, raw: &str) -> std::result::Result<(), String> {
    match key {
        "kappa0" => sc.params.kappa0 = number(key, raw)?,
        "kappa1" => sc.params.kappa1 = number(key, raw)?,
        "kappa2" => sc.params.kappa2 = number(key, raw)?,
        "gamma" => sc.params.gamma = number(key, raw)?,
        "p" => sc.p = number(key, raw)?,
        "phi.a" => *power_law_mut(sc).0 = number(key, raw)?,
        "phi.b" => {
            let b = number(key, raw)?;
            *power_law_mut(sc).1 = b;
            sc.phi.c_phi = b;
        }
        "phi.q" => sc.phi.q = number(key, raw)?,
        "phi.c_phi" => sc.phi.c_phi = number(key, raw)?,
        "phi.table.r" => *table_mut(sc).0 = list(key, raw)?,
        "phi.table.f" => *table_mut(sc).1 = list(key, raw)?,
        "g.cinf" => sc.boundary.g.cinf = number(key, raw)?,
        "g.amp" => sc.boundary.g.amp = number(key, raw)?,
        "g.lambda" => sc.boundary.g.lambda = number(key, raw)?,
        "h.cinf" => sc.boundary.h.cinf = number(key, raw)?,
        "h.amp" => sc.boundary.h.amp = number(key, raw)?,
        "h.lambda" => sc.boundary.h.lambda = number(key, raw)?,
        "s0" => sc.initial.s0 = number(key, raw)?,
        "u0" => sc.initial.u0 = list(key, raw)?,
        "v0" => sc.initial.v0 = list(key, raw)?,
        "m" => {
            sc.truncation_m = match raw.trim() {
                "none" | "" => None,
                other => Some(number(key, other)?),
            }
        }
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Sets one key from its textual value (as it would appear in a file).
pub fn set(sc: &mut Scenario, key: &str, value: &str) -> Result<()> {
    apply(sc, key.trim(), value).map_err(Error::InvalidParameter)
}

/// Reads a scenario, starting from the baseline.
pub fn parse(text: &str) -> Result<Scenario> {
    parse_onto(Scenario::baseline(), text)
}

/// Reads `key = value` lines on top of `base`.
pub fn parse_onto(base: Scenario, text: &str) -> Result<Scenario> {
    let mut sc = base;
    for (k, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: k + 1,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        apply(&mut sc, key.trim(), value).map_err(|msg| Error::Parse { line: k + 1, msg })?;
    }
    Ok(sc)
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes `sc` in the format read by [`parse`]; the two round-trip exactly.
pub fn to_string(sc: &Scenario) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("kappa0", format!("{:?}", sc.params.kappa0));
    kv("kappa1", format!("{:?}", sc.params.kappa1));
    kv("kappa2", format!("{:?}", sc.params.kappa2));
    kv("gamma", format!("{:?}", sc.params.gamma));
    kv("p", format!("{:?}", sc.p));
    match &sc.phi.shape {
        PhiShape::PowerLaw { a, b } => {
            kv("phi.a", format!("{a:?}"));
            kv("phi.b", format!("{b:?}"));
        }
        PhiShape::Tabulated { r, values } => {
            kv("phi.table.r", join(r));
            kv("phi.table.f", join(values));
        }
    }
    kv("phi.q", format!("{:?}", sc.phi.q));
    kv("phi.c_phi", format!("{:?}", sc.phi.c_phi));
    for (name, prof) in [("g", &sc.boundary.g), ("h", &sc.boundary.h)] {
        kv(&format!("{name}.cinf"), format!("{:?}", prof.cinf));
        kv(&format!("{name}.amp"), format!("{:?}", prof.amp));
        kv(&format!("{name}.lambda"), format!("{:?}", prof.lambda));
    }
    kv("s0", format!("{:?}", sc.initial.s0));
    kv("u0", join(&sc.initial.u0));
    kv("v0", join(&sc.initial.v0));
    kv(
        "m",
        sc.truncation_m
            .map_or("none".to_string(), |m| format!("{m:?}")),
    );
    out
}
