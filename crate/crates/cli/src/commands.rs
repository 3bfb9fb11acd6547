use std::fmt::Write as _;
use std::path::Path;

use acoe_lab::average::{solve_discounted as solve_at, vanishing_discount, VanishingSchedule};
use acoe_lab::bounds::{argmin_set, upper_bound_u, BoundingBox, MonteCarloConfig};
use acoe_lab::dp::{bellman_discounted, OrderingModel};
use acoe_lab::instance::load_instance;
use acoe_lab::io::write_table_csv;
use acoe_lab::lattice::ValueTable;
use acoe_lab::model::{alpha_star, InventoryParams};
use acoe_lab::policy::{check_k_convex, KConvexityReport, PolicyFile, SSPolicy};
use acoe_lab::simulate::{
    simulate_average, simulate_discounted, trajectory, write_trajectory_csv, OrderRule, SimConfig,
    SimEstimate,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::Recorder;
use crate::{AverageArgs, DiscountedArgs, Failure, SimulateArgs, SweepArgs};

pub const K_CONVEX_TOL: f64 = 1e-9;
/// Box around the discounted minimizers, in grid steps on each side.
pub const BOX_WIDEN: usize = 2;

#[derive(Debug, Serialize, Deserialize)]
pub struct KConvexityRow {
    pub table: String,
    pub is_k_convex: bool,
    pub worst_violation: f64,
}

impl KConvexityRow {
    pub fn new(table: &str, r: &KConvexityReport) -> Self {
        KConvexityRow {
            table: table.to_string(),
            is_k_convex: r.is_k_convex,
            worst_violation: r.worst_violation,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiscountedReport {
    pub alpha: f64,
    pub tol: f64,
    pub iterations: usize,
    pub m_alpha: f64,
    pub s: f64,
    #[serde(rename = "S")]
    pub order_up_to: f64,
    pub bellman_residual: f64,
    pub v_table: String,
    pub u_table: String,
    pub g_table: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub alpha: f64,
    pub iterations: usize,
    pub m_alpha: f64,
    pub w_alpha: f64,
    pub s: f64,
    #[serde(rename = "S")]
    pub order_up_to: f64,
    pub u_table: String,
    pub g_table: String,
}

/// `u_α ≤ U` on the lattice, one entry per scheduled α.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoundsCheck {
    pub monte_carlo: MonteCarloConfig,
    /// `max_x u_α(x) - U(x)`; nonpositive when the bound holds.
    pub max_excess: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AverageReport {
    pub w: f64,
    pub s_star: f64,
    #[serde(rename = "S_star")]
    pub order_up_to_star: f64,
    pub acoe_residual: f64,
    pub acoe_argmax: f64,
    pub acoe_tolerance: f64,
    pub alpha_star: f64,
    pub dp_tol: f64,
    pub schedule: Vec<f64>,
    pub w_sequence: Vec<f64>,
    pub ss_sequence: Vec<SSPolicy>,
    pub runs: Vec<RunSummary>,
    pub bounding_box: BoundingBox,
    pub bounds_check: BoundsCheck,
    pub k_convexity: Vec<KConvexityRow>,
    pub warnings: Vec<String>,
    pub u_tilde_table: String,
    pub h_table: String,
    pub policy_file: String,
}

fn table_out(rec: &mut Recorder, name: &str, table: &ValueTable) -> Result<String, Failure> {
    write_table_csv(&rec.path(name), table)?;
    rec.produced(name);
    Ok(name.to_string())
}

pub fn solve_discounted(args: &DiscountedArgs) -> Result<(), Failure> {
    let params = load_instance(&args.instance)?;
    let run = solve_at(&params, args.alpha, args.tol, args.max_sweeps)?;
    let residual = bellman_discounted(&params, &run.value, args.alpha)?
        .value
        .sup_distance(&run.value);

    let mut rec = Recorder::start(
        &args.out,
        &args.instance,
        "solve-discounted",
        json!({"alpha": args.alpha, "tol": args.tol, "max_sweeps": args.max_sweeps}),
    )?;
    let report = DiscountedReport {
        alpha: run.alpha,
        tol: args.tol,
        iterations: run.iterations,
        m_alpha: run.m_alpha,
        s: run.policy.s,
        order_up_to: run.policy.order_up_to,
        bellman_residual: residual,
        v_table: table_out(&mut rec, "v.csv", &run.value)?,
        u_table: table_out(&mut rec, "u.csv", &run.u)?,
        g_table: table_out(&mut rec, "G.csv", &run.g)?,
    };
    let k = params.fixed_cost();
    let kconv = vec![
        KConvexityRow::new("G", &check_k_convex(&run.g, k, K_CONVEX_TOL)),
        KConvexityRow::new("u", &check_k_convex(&run.u, k, K_CONVEX_TOL)),
    ];
    rec.write_json("discounted.json", &report)?;
    rec.write_json("policy.json", &PolicyFile::from(&run.policy))?;
    rec.write_json("kconvexity.json", &kconv)?;
    rec.finish()?;
    println!(
        "alpha = {}  (s, S) = ({}, {})  m_alpha = {:.10}  iterations = {}  |v - Tv| = {:.3e}",
        run.alpha, run.policy.s, run.policy.order_up_to, run.m_alpha, run.iterations, residual
    );
    Ok(())
}

fn schedule_for(
    params: &InventoryParams,
    given: &Option<Vec<f64>>,
) -> Result<VanishingSchedule, Failure> {
    Ok(match given {
        Some(a) => VanishingSchedule::new(a.clone())?,
        None => VanishingSchedule::default_for(params)?,
    })
}

pub fn solve_average(args: &AverageArgs) -> Result<(), Failure> {
    let params = load_instance(&args.instance)?;
    let schedule = schedule_for(&params, &args.schedule)?;
    if let Err(e) = schedule.check_threshold(&params) {
        eprintln!("alpha* = {}", alpha_star(&params));
        return Err(e.into());
    }
    let sol = vanishing_discount(&params, &schedule, args.tol)?;
    let k = params.fixed_cost();

    let mut argmins = Vec::new();
    for r in &sol.runs {
        argmins.extend(argmin_set(&r.value, argmin_tol(&r.value)));
    }
    let bbox = BoundingBox::around(params.lattice(), &argmins, BOX_WIDEN)?;
    let mc = MonteCarloConfig::default();
    let bound = upper_bound_u(&params, bbox, &mc)?;
    let max_excess: Vec<f64> = sol.runs.iter().map(|r| bound.max_excess(&r.u)).collect();
    let bounds_check = BoundsCheck {
        monte_carlo: mc,
        pass: max_excess.iter().all(|&e| e <= 0.0),
        max_excess,
    };

    let mut rec = Recorder::start(
        &args.out,
        &args.instance,
        "solve-average",
        json!({"schedule": schedule.alphas(), "tol": args.tol}),
    )?;
    let mut runs = Vec::new();
    let mut kconv = Vec::new();
    for (n, r) in sol.runs.iter().enumerate() {
        kconv.push(KConvexityRow::new(
            &format!("G_alpha[{n}]"),
            &check_k_convex(&r.g, k, K_CONVEX_TOL),
        ));
        kconv.push(KConvexityRow::new(
            &format!("u_alpha[{n}]"),
            &check_k_convex(&r.u, k, K_CONVEX_TOL),
        ));
        runs.push(RunSummary {
            alpha: r.alpha,
            iterations: r.iterations,
            m_alpha: r.m_alpha,
            w_alpha: (1.0 - r.alpha) * r.m_alpha,
            s: r.policy.s,
            order_up_to: r.policy.order_up_to,
            u_table: table_out(&mut rec, &format!("u_alpha_{n}.csv"), &r.u)?,
            g_table: table_out(&mut rec, &format!("G_alpha_{n}.csv"), &r.g)?,
        });
    }
    kconv.push(KConvexityRow::new(
        "u_tilde",
        &check_k_convex(&sol.u_tilde, k, K_CONVEX_TOL),
    ));
    kconv.push(KConvexityRow::new(
        "H",
        &check_k_convex(&sol.h, k, K_CONVEX_TOL),
    ));

    let report = AverageReport {
        w: sol.w,
        s_star: sol.policy.s,
        order_up_to_star: sol.policy.order_up_to,
        acoe_residual: sol.acoe_residual,
        acoe_argmax: sol.acoe_argmax,
        acoe_tolerance: sol.acoe_bound,
        alpha_star: alpha_star(&params),
        dp_tol: sol.dp_tol,
        schedule: schedule.alphas().to_vec(),
        w_sequence: sol.w_sequence.clone(),
        ss_sequence: sol.ss_sequence.clone(),
        runs,
        bounding_box: bbox,
        bounds_check,
        k_convexity: kconv,
        warnings: sol.warnings.clone(),
        u_tilde_table: table_out(&mut rec, "u_tilde.csv", &sol.u_tilde)?,
        h_table: table_out(&mut rec, "H.csv", &sol.h)?,
        policy_file: "policy.json".to_string(),
    };
    rec.write_json("policy.json", &PolicyFile::from(&sol.policy))?;
    rec.write_json("average.json", &report)?;
    rec.finish()?;

    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "w = {:.10}  (s*, S*) = ({}, {})  acoe_residual = {:.3e} (tolerance {:.3e})",
        sol.w, sol.policy.s, sol.policy.order_up_to, sol.acoe_residual, sol.acoe_bound
    );
    if sol.acoe_residual > sol.acoe_bound {
        return Err(Failure::Verification(format!(
            "acoe_residual {:e} exceeds tolerance {:e}",
            sol.acoe_residual, sol.acoe_bound
        )));
    }
    Ok(())
}

/// Levels within this of `min v` count as minimizers.
pub fn argmin_tol(v: &ValueTable) -> f64 {
    1e-9 * v.min().1.abs().max(1.0)
}

#[derive(Serialize)]
struct DiscountedEstimate {
    alpha: f64,
    estimate: SimEstimate,
}

#[derive(Serialize)]
struct SimulationReport {
    config: SimConfig,
    average: SimEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    discounted: Option<DiscountedEstimate>,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let params = load_instance(&args.instance)?;
    let text = std::fs::read_to_string(&args.policy)?;
    let file: PolicyFile = serde_json::from_str(&text)
        .map_err(|e| acoe_lab::Error::Parse(format!("{}: {e}", args.policy.display())))?;
    let rule: Box<dyn OrderRule> = match &file {
        PolicyFile::SS { s, order_up_to } => Box::new(SSPolicy::new(*s, *order_up_to)?),
        PolicyFile::Tabular { .. } => Box::new(file.to_tabular(params.lattice())?),
    };
    let cfg = SimConfig {
        horizon: args.horizon,
        replications: args.replications,
        seed: args.seed,
        initial_state: args.initial_state,
        burn_in: args.burn_in,
    };
    let average = simulate_average(&params, rule.as_ref(), &cfg)?;
    let discounted = match args.alpha {
        Some(alpha) => Some(DiscountedEstimate {
            alpha,
            estimate: simulate_discounted(&params, rule.as_ref(), alpha, &cfg)?,
        }),
        None => None,
    };

    let mut rec = Recorder::start(
        &args.out,
        &args.instance,
        "simulate",
        json!({"policy": args.policy, "config": cfg, "alpha": args.alpha, "trajectory": args.trajectory}),
    )?;
    if args.trajectory {
        let rows = trajectory(&params, rule.as_ref(), &cfg)?;
        write_trajectory_csv(&rec.path("trajectory.csv"), &rows)?;
        rec.produced("trajectory.csv");
    }
    rec.write_json(
        "estimate.json",
        &SimulationReport {
            config: cfg,
            average,
            discounted,
        },
    )?;
    rec.finish()?;
    println!(
        "average cost = {:.6} ± {:.6} ({} replications)",
        average.mean, average.half_width_95, average.replications
    );
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let base = load_instance(&args.instance)?;
    let mut csv = format!("{},s_star,S_star,w\n", args.param);
    for &value in &args.values {
        let params = match args.param.as_str() {
            "K" => base.with_fixed_cost(value)?,
            _ => base.with_unit_cost(value)?,
        };
        let schedule = schedule_for(&params, &args.schedule)?;
        let sol = vanishing_discount(&params, &schedule, args.tol)?;
        writeln!(
            csv,
            "{value:.16e},{:.16e},{:.16e},{:.16e}",
            sol.policy.s, sol.policy.order_up_to, sol.w
        )
        .expect("writing to a String");
    }
    let mut rec = Recorder::start(
        &args.out,
        &args.instance,
        "sweep",
        json!({"param": args.param, "values": args.values, "schedule": args.schedule, "tol": args.tol}),
    )?;
    std::fs::write(rec.path("sweep.csv"), &csv)?;
    rec.produced("sweep.csv");
    rec.finish()?;
    print!("{csv}");
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        acoe_lab::Error::Precondition(format!("missing artifact {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| acoe_lab::Error::Parse(format!("{}: {e}", path.display())).into())
}
