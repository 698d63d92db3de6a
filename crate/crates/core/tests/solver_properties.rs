use proptest::prelude::*;

use carbofront_core::diagnostics::{evaluate, mass_balance_residual, Tolerances};
use carbofront_core::model::{
    comparison_bounds, ExpProfile, NonlinearityPhi, Scenario, ValidScenario,
};
use carbofront_core::oracle::{alt_scheme_run, refine_run, Refinement};
use carbofront_core::solver::{run, StepControl};
use carbofront_core::FixedGrid;

/// s(1) for the baseline, from the simultaneous refinement sequence
/// (51, 0.01) -> (1601, 3.125e-4), whose last difference is below 1e-5.
const GOLDEN_S1: f64 = 1.4455280481;

fn baseline() -> ValidScenario {
    ValidScenario::new(Scenario::baseline()).unwrap()
}

#[test]
fn golden_front_position_at_t1() {
    let study = refine_run(
        &baseline(),
        &FixedGrid::new(51).unwrap(),
        &StepControl::with_dt(0.01),
        1.0,
        6,
        Refinement::Simultaneous,
    )
    .unwrap();
    let last = study.levels.last().unwrap();
    assert_eq!(last.nodes, 1601);
    assert!(last.ds.unwrap() < 1e-5, "{:?}", study.levels);
    assert!(
        (last.s_final - GOLDEN_S1).abs() < 1e-8,
        "s(1) = {}",
        last.s_final
    );

    // the explicit physical-domain scheme lands on the same value
    let alt = alt_scheme_run(
        &baseline(),
        &FixedGrid::new(201).unwrap(),
        &StepControl::with_dt(0.01),
        1.0,
        1.0,
    )
    .unwrap();
    assert!(
        (alt.final_s() - GOLDEN_S1).abs() < 1e-4,
        "alt s(1) = {}",
        alt.final_s()
    );
}

#[test]
fn halving_dt_halves_the_error() {
    let study = refine_run(
        &baseline(),
        &FixedGrid::new(101).unwrap(),
        &StepControl::with_dt(0.02),
        10.0,
        3,
        Refinement::Temporal,
    )
    .unwrap();
    let d: Vec<f64> = study.levels.iter().filter_map(|l| l.ds).collect();
    let ratio = d[0] / d[1];
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn front_ratio_stabilises() {
    let tr = run(
        &baseline(),
        &FixedGrid::new(101).unwrap(),
        &StepControl::with_dt(0.02),
        400.0,
        100.0,
    )
    .unwrap();
    let at = |t: f64| tr.checkpoints[tr.index_at(t).unwrap()].s / (t + 1.0).sqrt();
    let (r100, r400) = (at(100.0), at(400.0));
    assert!((r100 - r400).abs() <= 0.1 * r400, "{r100} vs {r400}");
}

#[test]
fn tabulated_exchange_matches_power_law() {
    let mut tab = Scenario::baseline();
    let r: Vec<f64> = (-4..=4).map(f64::from).collect();
    tab.phi = NonlinearityPhi::tabulated(r.clone(), r, 1.0, 1.0);
    let grid = FixedGrid::new(41).unwrap();
    let ctl = StepControl::with_dt(0.05);
    let a = run(&ValidScenario::new(tab).unwrap(), &grid, &ctl, 5.0, 1.0).unwrap();
    let b = run(&baseline(), &grid, &ctl, 5.0, 1.0).unwrap();
    for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
        assert!((x.s - y.s).abs() < 1e-12);
    }
}

fn family() -> impl Strategy<Value = Scenario> {
    (
        (0.5f64..2.0, 0.5f64..2.0, 0.5f64..2.0, 0.5f64..2.0),
        (1.0f64..3.0, 1.0f64..3.0, 0.0f64..0.5),
        (0.5f64..2.0, -0.5f64..0.5, 0.0f64..2.0),
        (
            0.5f64..2.0,
            prop::collection::vec(0.0f64..2.0, 1..6),
            prop::collection::vec(0.0f64..2.0, 1..6),
        ),
    )
        .prop_map(
            |((k0, k1, k2, gamma), (p, q, a), (g_inf, amp, lambda), (s0, u0, v0))| {
                let mut sc = Scenario::baseline();
                sc.params.kappa0 = k0;
                sc.params.kappa1 = k1;
                sc.params.kappa2 = k2;
                sc.params.gamma = gamma;
                sc.p = p;
                sc.phi = NonlinearityPhi::power_law(a, 1.0, q);
                // amplitude bounded so g stays positive; lambda > 0 so it decays
                sc.boundary.g = ExpProfile {
                    cinf: g_inf,
                    amp: amp * g_inf,
                    lambda: lambda + 0.1,
                };
                sc.boundary.h = ExpProfile::constant(g_inf / gamma);
                sc.initial.s0 = s0;
                sc.initial.u0 = u0;
                sc.initial.v0 = v0;
                sc
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn runs_respect_bounds_monotonicity_and_boundary_data(raw in family(), n in 11usize..41) {
        let sc = ValidScenario::new(raw).unwrap();
        let (u_star, v_star) = comparison_bounds(&sc);
        let tr = run(&sc, &FixedGrid::new(n).unwrap(), &StepControl::with_dt(0.05), 2.0, 0.25).unwrap();
        prop_assert!(tr.complete);
        for w in tr.checkpoints.windows(2) {
            prop_assert!(w[1].s >= w[0].s);
            prop_assert!(w[1].t > w[0].t);
        }
        for st in &tr.snapshots {
            let (g, h) = sc.boundary.eval(st.t).unwrap();
            prop_assert_eq!(st.u_bar[0], g);
            prop_assert_eq!(st.v_bar[0], h);
            for &u in &st.u_bar {
                prop_assert!((-1e-8..=u_star + 1e-8).contains(&u), "u = {} outside [0, {}]", u, u_star);
            }
            for &v in &st.v_bar {
                prop_assert!((-1e-8..=v_star + 1e-8).contains(&v), "v = {} outside [0, {}]", v, v_star);
            }
        }
        prop_assert_eq!(mass_balance_residual(&tr, 0.0).unwrap(), 0.0);
        let a = evaluate(&tr, &Tolerances::default()).unwrap();
        let b = evaluate(&tr, &Tolerances::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn large_truncation_changes_nothing(raw in family()) {
        let (u_star, v_star) = comparison_bounds(&raw);
        let mut cut = raw.clone();
        cut.truncation_m = Some(raw.params.gamma * v_star + u_star);
        let grid = FixedGrid::new(21).unwrap();
        let ctl = StepControl::with_dt(0.05);
        let a = run(&ValidScenario::new(raw).unwrap(), &grid, &ctl, 1.0, 0.25).unwrap();
        let b = run(&ValidScenario::new(cut).unwrap(), &grid, &ctl, 1.0, 0.25).unwrap();
        for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
            prop_assert!((x.s - y.s).abs() <= 1e-12);
        }
    }
}
