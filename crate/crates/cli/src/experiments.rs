//! One function per subcommand; each returns its artifacts unwritten.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use lindblad_core::bchverify::verify_bch_truncation;
use lindblad_core::bounds::{bound_report, plan_extrapolation, DEFAULT_Q0};
use lindblad_core::model::{build_tfim, LindbladModel};
use lindblad_core::propagate::{
    exact_evolution, expectation, total_magnetization, trace_distance, trotter_evolve,
    InitialState,
};
use lindblad_core::richardson::{nodes, run_extrapolation, ExtrapolationPlan};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, Resolved};
use crate::fit::{fit_loglog, MIN_FIT_POINTS};
use crate::output::{fmt_float, Artifacts, Table};
use crate::CliError;

/// Extrapolated errors at or below this are roundoff and left out of fits.
pub const ERROR_FLOOR: f64 = 1e-12;

pub fn run(cfg: &Resolved) -> Result<Artifacts, CliError> {
    match cfg.experiment {
        Experiment::TrotterErrorScan => trotter_error_scan(cfg),
        Experiment::Simulate => simulate(cfg),
        Experiment::Extrapolate => extrapolate(cfg),
        Experiment::Bounds => bounds(cfg),
        Experiment::VerifyBch => verify_bch(cfg),
    }
}

fn model(cfg: &Resolved, n: usize, gamma: f64) -> Result<LindbladModel, CliError> {
    Ok(build_tfim(n, cfg.j_coupling, cfg.h_field, gamma)?)
}

/// One Trotter run measured against exact evolution.
#[derive(Debug, Clone)]
pub struct ErrorPoint {
    pub state: InitialState,
    pub n: usize,
    pub gamma: f64,
    pub r: usize,
    pub error: f64,
    pub expectation_trotter: f64,
    pub expectation_exact: f64,
}

fn cmp_points(a: &ErrorPoint, b: &ErrorPoint) -> Ordering {
    a.n.cmp(&b.n)
        .then(a.gamma.total_cmp(&b.gamma))
        .then(a.r.cmp(&b.r))
        .then(a.state.cmp(&b.state))
}

/// Every (state, N, γ, r) point of the grid, sorted by (N, γ, r, state).
pub fn error_grid(cfg: &Resolved) -> Result<Vec<ErrorPoint>, CliError> {
    let mut jobs = Vec::new();
    for &state in &cfg.states {
        for &n in &cfg.sites {
            for &gamma in &cfg.gammas {
                jobs.push((state, n, gamma));
            }
        }
    }
    let per_job: Vec<Vec<ErrorPoint>> = jobs
        .par_iter()
        .map(|&(state, n, gamma)| -> Result<Vec<ErrorPoint>, CliError> {
            let m = model(cfg, n, gamma)?;
            let rho0 = state.prepare(n);
            let obs = total_magnetization(n);
            let exact = exact_evolution(&m, &rho0, cfg.time)?;
            let expectation_exact = expectation(&obs, &exact)?;
            cfg.r_values
                .iter()
                .map(|&r| {
                    let approx = trotter_evolve(&m, &rho0, cfg.time, r, cfg.order, cfg.backend)?;
                    Ok(ErrorPoint {
                        state,
                        n,
                        gamma,
                        r,
                        error: trace_distance(&exact, &approx)?,
                        expectation_trotter: expectation(&obs, &approx)?,
                        expectation_exact,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut points: Vec<ErrorPoint> = per_job.into_iter().flatten().collect();
    points.sort_by(cmp_points);
    Ok(points)
}

fn error_row(cfg: &Resolved, p: &ErrorPoint) -> Vec<String> {
    vec![
        p.n.to_string(),
        fmt_float(p.gamma),
        p.r.to_string(),
        fmt_float(cfg.time),
        cfg.order.as_int().to_string(),
        p.state.name().to_string(),
        fmt_float(p.error),
    ]
}

pub const SCAN_HEADER: [&str; 7] = ["n", "gamma", "r", "t", "order", "initial_state", "trace_distance_error"];

type XyPoints = (Vec<f64>, Vec<f64>);

fn trotter_error_scan(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let points = error_grid(cfg)?;
    let table = Table {
        header: SCAN_HEADER.to_vec(),
        rows: points.iter().map(|p| error_row(cfg, p)).collect(),
    };
    let mut groups: BTreeMap<(InitialState, u64, usize), XyPoints> = BTreeMap::new();
    for p in &points {
        let g = groups.entry((p.state, p.gamma.to_bits(), p.r)).or_default();
        g.0.push(p.n as f64);
        g.1.push(p.error);
    }
    let mut fits = Vec::new();
    let mut summary = Vec::new();
    for ((state, gbits, r), (xs, ys)) in &groups {
        if xs.len() < MIN_FIT_POINTS || ys.iter().any(|&y| y <= 0.0) {
            continue;
        }
        let f = fit_loglog(xs, ys)?;
        let gamma = f64::from_bits(*gbits);
        summary.push(format!(
            "{} gamma={gamma} r={r}: error ~ N^{:.3} (R^2 {:.4})",
            state.name(),
            f.slope,
            f.r_squared
        ));
        fits.push(json!({
            "initial_state": state.name(),
            "gamma": gamma,
            "r": r,
            "x": "n",
            "y": "trace_distance_error",
            "fit": f,
        }));
    }
    Ok(Artifacts {
        table,
        fits: json!({ "fits": fits }),
        report: None,
        summary,
    })
}

fn simulate(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let points = error_grid(cfg)?;
    let mut header = SCAN_HEADER.to_vec();
    header.extend(["expectation_trotter", "expectation_exact"]);
    let rows = points
        .iter()
        .map(|p| {
            let mut row = error_row(cfg, p);
            row.push(fmt_float(p.expectation_trotter));
            row.push(fmt_float(p.expectation_exact));
            row
        })
        .collect();
    let summary = points
        .iter()
        .map(|p| {
            format!(
                "N={} gamma={} r={} {}: error {:.3e}, <O> = {:.12}",
                p.n,
                p.gamma,
                p.r,
                p.state.name(),
                p.error,
                p.expectation_trotter
            )
        })
        .collect();
    Ok(Artifacts {
        table: Table { header, rows },
        fits: json!({ "fits": [] }),
        report: None,
        summary,
    })
}

pub const EXTRAPOLATE_HEADER: [&str; 7] =
    ["r_scale", "gamma", "raw_error", "extrapolated_error", "p", "shots", "seed"];

fn single_site_count(cfg: &Resolved) -> Result<usize, CliError> {
    match cfg.sites.as_slice() {
        [n] => Ok(*n),
        _ => Err(CliError::Config(
            "model.n: extrapolate runs on a single system size".into(),
        )),
    }
}

fn single_state(cfg: &Resolved) -> Result<InitialState, CliError> {
    match cfg.states.as_slice() {
        [s] => Ok(*s),
        _ => Err(CliError::Config(
            "initial_states: extrapolate runs on a single initial state".into(),
        )),
    }
}

fn extrapolate(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let n = single_site_count(cfg)?;
    let state = single_state(cfg)?;
    let x = &cfg.config.extrapolation;
    let rho0 = state.prepare(n);
    let obs = total_magnetization(n);
    let mut rows: Vec<(u64, f64, Vec<String>)> = Vec::new();
    let mut fits = Vec::new();
    let mut summary = Vec::new();
    let mut plans = Vec::new();

    for &gamma in &cfg.gammas {
        let m = model(cfg, n, gamma)?;
        let plan_list: Vec<ExtrapolationPlan> = if let Some(eps) = x.eps {
            let q0 = x.q0.unwrap_or(DEFAULT_Q0);
            let plan = plan_extrapolation(&m, cfg.time, eps, q0, x.seed)?;
            summary.push(format!(
                "gamma={gamma}: p = {}, n = {}, nodes {:?}, planned shots {}",
                plan.p, plan.n, plan.r_nodes, plan.shots
            ));
            // shots = 0 keeps the deterministic mode
            vec![ExtrapolationPlan { shots: x.shots, ..plan }]
        } else {
            let ratios = match (&x.node_ratios, x.p) {
                (Some(r), _) => r.clone(),
                (None, Some(p)) => nodes(p)?,
                (None, None) => unreachable!("validated in config"),
            };
            x.r_scales
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|&rs| ExtrapolationPlan::new(cfg.time, rs, ratios.clone(), x.shots, x.seed))
                .collect::<Result<_, _>>()?
        };
        // planned mode may fail as infeasible; find out before the reference run
        let exact = expectation(&obs, &exact_evolution(&m, &rho0, cfg.time)?)?;
        let finest = |plan: &ExtrapolationPlan| {
            plan.r_nodes
                .iter()
                .enumerate()
                .max_by_key(|(_, r)| **r)
                .map(|(j, _)| j)
                .expect("plans have at least one node")
        };
        let results: Vec<_> = plan_list
            .par_iter()
            .map(|plan| run_extrapolation(&m, &obs, &rho0, plan, cfg.backend))
            .collect::<Result<_, _>>()?;
        let mut xs = Vec::new();
        let mut raw = Vec::new();
        let mut ext = Vec::new();
        for (plan, res) in plan_list.iter().zip(&results) {
            let raw_error = (res.per_node_means[finest(plan)] - exact).abs();
            let ext_error = (res.estimate - exact).abs();
            rows.push((
                plan.n,
                gamma,
                vec![
                    plan.n.to_string(),
                    fmt_float(gamma),
                    fmt_float(raw_error),
                    fmt_float(ext_error),
                    plan.p.to_string(),
                    plan.shots.to_string(),
                    plan.seed.to_string(),
                ],
            ));
            xs.push(plan.n as f64);
            raw.push(raw_error);
            ext.push(ext_error);
            plans.push(json!({ "gamma": gamma, "plan": plan, "result": res, "exact": exact }));
        }
        if xs.len() >= MIN_FIT_POINTS && raw.iter().all(|&v| v > 0.0) {
            let f = fit_loglog(&xs, &raw)?;
            summary.push(format!("gamma={gamma}: raw error ~ r^{:.3}", f.slope));
            fits.push(json!({ "gamma": gamma, "x": "r_scale", "y": "raw_error", "fit": f }));
        }
        let (ex, ey): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&ext)
            .filter(|(_, &e)| e > ERROR_FLOOR)
            .map(|(a, b)| (*a, *b))
            .unzip();
        if ex.len() >= MIN_FIT_POINTS {
            let f = fit_loglog(&ex, &ey)?;
            summary.push(format!(
                "gamma={gamma}: extrapolated error ~ r^{:.3} over {} points above {ERROR_FLOOR:e}",
                f.slope, f.points
            ));
            fits.push(json!({
                "gamma": gamma,
                "x": "r_scale",
                "y": "extrapolated_error",
                "error_floor": ERROR_FLOOR,
                "fit": f,
            }));
        }
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if plans.len() == 1 {
        let p = &plans[0];
        summary.push(format!(
            "estimate {} vs exact {}",
            p["result"]["estimate"], p["exact"]
        ));
    }
    Ok(Artifacts {
        table: Table {
            header: EXTRAPOLATE_HEADER.to_vec(),
            rows: rows.into_iter().map(|r| r.2).collect(),
        },
        fits: json!({ "fits": fits }),
        report: Some(json!({ "n": n, "initial_state": state.name(), "runs": plans })),
        summary,
    })
}

pub const BOUNDS_HEADER: [&str; 5] = ["n", "gamma", "q", "alpha_comm", "alpha_lattice"];

fn bounds(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let b = &cfg.config.bounds;
    let mut jobs = Vec::new();
    for &n in &cfg.sites {
        for &gamma in &cfg.gammas {
            jobs.push((n, gamma));
        }
    }
    let reports: Vec<_> = jobs
        .iter()
        .map(|&(n, gamma)| -> Result<_, CliError> {
            let m = model(cfg, n, gamma)?;
            Ok((n, gamma, bound_report(&m, cfg.time, b.eps, b.q_max, b.q0)?))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (n, gamma, r) in &reports {
        for (q, a) in &r.alpha_q {
            rows.push((
                *n,
                *gamma,
                q.parse::<usize>().unwrap_or(0),
                vec![
                    n.to_string(),
                    fmt_float(*gamma),
                    q.clone(),
                    fmt_float(*a),
                    fmt_float(r.alpha_lattice_q[q]),
                ],
            ));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut fits = Vec::new();
    let mut summary = Vec::new();
    for &gamma in &cfg.gammas {
        let sel: Vec<_> = reports.iter().filter(|r| r.1 == gamma).collect();
        for (q, _) in sel.first().map(|r| r.2.alpha_q.clone()).unwrap_or_default() {
            let xs: Vec<f64> = sel.iter().map(|r| r.0 as f64).collect();
            let ys: Vec<f64> = sel.iter().map(|r| r.2.alpha_q[&q]).collect();
            if xs.len() < MIN_FIT_POINTS || ys.iter().any(|&y| y <= 0.0) {
                continue;
            }
            let f = fit_loglog(&xs, &ys)?;
            summary.push(format!("gamma={gamma} q={q}: alpha_comm ~ N^{:.3}", f.slope));
            fits.push(json!({ "gamma": gamma, "q": q, "x": "n", "y": "alpha_comm", "fit": f }));
        }
    }
    for (n, gamma, r) in &reports {
        summary.push(format!(
            "N={n} gamma={gamma}: alpha3 {:.6}, c12 {:.6}, c24 {:.6}, r_planned {}",
            r.alpha3_numeric, r.alpha3_tight_c12, r.alpha3_tight_c24, r.r_planned
        ));
    }
    let report: Vec<Value> = reports
        .iter()
        .map(|(n, gamma, r)| json!({ "n": n, "gamma": gamma, "report": r }))
        .collect();
    Ok(Artifacts {
        table: Table {
            header: BOUNDS_HEADER.to_vec(),
            rows: rows.into_iter().map(|r| r.3).collect(),
        },
        fits: json!({ "fits": fits }),
        report: Some(Value::Array(report)),
        summary,
    })
}

pub const BCH_HEADER: [&str; 5] = ["n", "gamma", "t", "distance", "certified_bound"];

fn verify_bch(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let b = &cfg.config.bch;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut summary = Vec::new();
    let mut reports = Vec::new();
    let mut grid = b.t_grid.clone();
    grid.sort_by(f64::total_cmp);
    for &n in &cfg.sites {
        for &gamma in &cfg.gammas {
            let m = model(cfg, n, gamma)?;
            let r = verify_bch_truncation(&m, 3, &grid, b.t_ref)?;
            for p in &r.points {
                rows.push(vec![
                    n.to_string(),
                    fmt_float(gamma),
                    fmt_float(p.t),
                    fmt_float(p.distance),
                    p.certified_bound.map(fmt_float).unwrap_or_default(),
                ]);
            }
            let xs: Vec<f64> = r.points.iter().map(|p| p.t).collect();
            let ys: Vec<f64> = r.points.iter().map(|p| p.distance).collect();
            if xs.len() >= MIN_FIT_POINTS && ys.iter().all(|&y| y > 0.0) {
                let f = fit_loglog(&xs, &ys)?;
                fits.push(json!({ "n": n, "gamma": gamma, "x": "t", "y": "distance", "fit": f }));
            }
            summary.push(format!(
                "N={n} gamma={gamma}: slope {:.3}, |phi3| {:.4} <= alpha3/9 {:.4}, phi2 rel {:.1e}",
                r.slope, r.phi3_norm, r.alpha3_over_9, r.phi2_relative
            ));
            reports.push(json!({ "n": n, "gamma": gamma, "report": r }));
        }
    }
    Ok(Artifacts {
        table: Table {
            header: BCH_HEADER.to_vec(),
            rows,
        },
        fits: json!({ "fits": fits }),
        report: Some(Value::Array(reports)),
        summary,
    })
}
