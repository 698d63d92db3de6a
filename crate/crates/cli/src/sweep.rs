use rayon::prelude::*;

use carbofront_core::config;
use carbofront_core::diagnostics::{self, Tolerances};
use carbofront_core::solver;

use crate::{
    fail, thread_pool, usage, validate, Failure, RunConfig, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE,
    EXIT_VALIDATION,
};

/// A swept key and its values (kept as text, parsed by the config reader).
pub type Axis = (String, Vec<String>);

const LIST_KEYS: [&str; 4] = ["u0", "v0", "phi.table.r", "phi.table.f"];

pub fn parse_axes(specs: &[String]) -> Result<Vec<Axis>, Failure> {
    let mut axes = Vec::with_capacity(specs.len());
    for spec in specs {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--grid expects key=v1,v2,..., got {spec:?}")))?;
        let key = key.trim();
        if !config::KEYS.contains(&key) || LIST_KEYS.contains(&key) {
            return Err(usage(format!("cannot sweep over {key:?}")));
        }
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(|v| v.is_empty()) {
            return Err(usage(format!("empty value in --grid {spec}")));
        }
        axes.push((key.to_string(), values));
    }
    Ok(axes)
}

/// Cartesian product of the axes, first axis slowest. No axes gives one
/// empty cell.
pub fn cells(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in axes {
        out = out
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub values: Vec<String>,
    pub status: String,
    pub code: i32,
    pub beta: Option<f64>,
    pub amplitude: Option<f64>,
    pub constants: Option<(f64, f64)>,
    pub s_final: Option<f64>,
    pub checks_pass: Option<bool>,
}

fn run_cell(cfg: &RunConfig, cell: &[(String, String)]) -> CellResult {
    let mut res = CellResult {
        values: cell.iter().map(|(_, v)| v.clone()).collect(),
        status: "ok".to_string(),
        code: EXIT_OK,
        beta: None,
        amplitude: None,
        constants: None,
        s_final: None,
        checks_pass: None,
    };
    let mut sc = cfg.scenario.clone();
    for (k, v) in cell {
        if let Err(e) = config::set(&mut sc, k, v) {
            res.status = e.to_string();
            res.code = EXIT_USAGE;
            return res;
        }
    }
    let valid = match validate(&sc) {
        Ok(v) => v,
        Err(f) => {
            res.status = format!("{:#}", f.error)
                .lines()
                .next()
                .unwrap_or("invalid")
                .to_string();
            res.code = f.code;
            return res;
        }
    };
    let traj = match solver::run(
        &valid,
        &cfg.grid(),
        &cfg.control,
        cfg.horizon,
        cfg.checkpoint_every,
    ) {
        Ok(tr) => tr,
        Err(f) => {
            res.status = f.to_string();
            res.code = EXIT_NUMERICAL;
            res.s_final = f.partial.last().map(|c| c.s);
            return res;
        }
    };
    res.s_final = traj.last().map(|c| c.s);
    if let Ok(rep) = diagnostics::evaluate(&traj, &Tolerances::default()) {
        res.beta = rep.fit.map(|f| f.beta);
        res.amplitude = rep.fit.map(|f| f.amplitude);
        res.constants = rep.constants;
        res.checks_pass = Some(rep.all_pass());
    }
    res
}

/// Runs every cell on a pool of `workers` threads (0 = all cores) and
/// returns the results in cell order.
pub fn run_cells(
    cfg: &RunConfig,
    axes: &[Axis],
    workers: usize,
) -> Result<Vec<CellResult>, Failure> {
    let cells = cells(axes);
    let pool = thread_pool(workers)?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(cfg, c)).collect()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// `sweep`: writes `sweep.csv`, one row per cell. Exits 0 iff every cell
/// completed.
pub fn cmd_sweep(cfg: &RunConfig, axes: &[Axis], workers: usize) -> Result<i32, Failure> {
    crate::ensure_dir(&cfg.out)?;
    let results = run_cells(cfg, axes, workers)?;

    let path = cfg.out.join("sweep.csv");
    let write = || -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["cell".to_string()];
        header.extend(axes.iter().map(|(k, _)| k.clone()));
        header.extend(
            [
                "status",
                "beta",
                "amplitude",
                "c_star_emp",
                "C_star_emp",
                "s_final",
                "checks_pass",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for (i, r) in results.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(r.values.iter().cloned());
            row.push(r.status.clone());
            row.push(opt(r.beta));
            row.push(opt(r.amplitude));
            row.push(opt(r.constants.map(|c| c.0)));
            row.push(opt(r.constants.map(|c| c.1)));
            row.push(opt(r.s_final));
            row.push(r.checks_pass.map_or_else(String::new, |p| p.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| fail(EXIT_USAGE, e.context(format!("writing {}", path.display()))))?;

    for (i, r) in results.iter().enumerate() {
        println!(
            "cell {i} [{}]: {} beta = {}",
            r.values.join(", "),
            r.status,
            opt(r.beta)
        );
    }
    let worst = results
        .iter()
        .map(|r| r.code)
        .fold(EXIT_OK, |acc, c| match (acc, c) {
            (EXIT_NUMERICAL, _) | (_, EXIT_NUMERICAL) => EXIT_NUMERICAL,
            (EXIT_VALIDATION, _) | (_, EXIT_VALIDATION) => EXIT_VALIDATION,
            (a, c) => a.max(c),
        });
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_order() {
        let axes = parse_axes(&["p=1,2".to_string(), "phi.q=1,2,3".to_string()]).unwrap();
        let c = cells(&axes);
        assert_eq!(c.len(), 6);
        assert_eq!(
            c[0],
            vec![("p".into(), "1".into()), ("phi.q".into(), "1".into())]
        );
        assert_eq!(
            c[5],
            vec![("p".into(), "2".into()), ("phi.q".into(), "3".into())]
        );
        assert_eq!(cells(&[]).len(), 1);
    }

    #[test]
    fn bad_axes() {
        assert!(parse_axes(&["p".to_string()]).is_err());
        assert!(parse_axes(&["nope=1".to_string()]).is_err());
        assert!(parse_axes(&["u0=1,2".to_string()]).is_err());
        assert!(parse_axes(&["p=1,,2".to_string()]).is_err());
    }
}
