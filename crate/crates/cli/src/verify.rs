//! Re-checks solve artifacts without trusting the solver's own summary.

use std::path::Path;

use acoe_lab::average::{
    acoe_residual, h_function, interior, slope_near, two_actions_at_s, verify_acoi, AcoeAnchor,
};
use acoe_lab::bounds::{argmin_set, upper_bound_u, MonteCarloConfig};
use acoe_lab::dp::{expect_after_demand, OrderingModel};
use acoe_lab::instance::load_instance;
use acoe_lab::io::read_table_csv;
use acoe_lab::lattice::ValueTable;
use acoe_lab::model::InventoryParams;
use acoe_lab::policy::{check_k_convex, modified_policy_at_s, policy_to_tabular, SSPolicy};
use serde::Serialize;
use serde_json::json;

use crate::commands::{argmin_tol, read_json, AverageReport, DiscountedReport, K_CONVEX_TOL};
use crate::manifest::Recorder;
use crate::{Failure, VerifyArgs};

#[derive(Serialize)]
struct Check {
    check: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Default, Serialize)]
struct Verification {
    checks: Vec<Check>,
    all_pass: bool,
}

impl Verification {
    fn push(&mut self, check: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check {
            check: check.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        });
    }

    fn k_convex(&mut self, name: &str, f: &ValueTable, k: f64) {
        let r = check_k_convex(f, k, K_CONVEX_TOL);
        self.push(format!("k_convex {name}"), r.worst_violation, K_CONVEX_TOL);
    }
}

fn table(dir: &Path, name: &str, params: &InventoryParams) -> Result<ValueTable, Failure> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(
            acoe_lab::Error::Precondition(format!("missing artifact {}", path.display())).into(),
        );
    }
    Ok(read_table_csv(&path, params.lattice())?)
}

pub fn run(args: &VerifyArgs) -> Result<(), Failure> {
    let params = load_instance(&args.instance)?;
    let dir = &args.out;
    let v = if dir.join("average.json").exists() {
        verify_average(&params, dir, args.seed)?
    } else if dir.join("discounted.json").exists() {
        verify_discounted(&params, dir)?
    } else {
        return Err(acoe_lab::Error::Precondition(format!(
            "missing artifact: neither average.json nor discounted.json in {}",
            dir.display()
        ))
        .into());
    };

    let mut rec = Recorder::start(dir, &args.instance, "verify", json!({"seed": args.seed}))?
        .with_manifest_name("verify_manifest.json");
    rec.write_json("verification.json", &v)?;
    rec.finish()?;
    for c in &v.checks {
        println!(
            "{}  {:<28} {:>12.4e}  <= {:.4e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.value,
            c.tolerance
        );
    }
    if v.all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = v
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.check.as_str())
            .collect();
        Err(Failure::Verification(failed.join(", ")))
    }
}

fn verify_average(
    params: &InventoryParams,
    dir: &Path,
    seed: u64,
) -> Result<Verification, Failure> {
    let report: AverageReport = read_json(&dir.join("average.json"))?;
    let k = params.fixed_cost();
    let step = params.lattice().step();
    let u_tilde = table(dir, &report.u_tilde_table, params)?;
    let h_file = table(dir, &report.h_table, params)?;
    let mut out = Verification::default();

    let mut argmins = Vec::new();
    let mut u_tables = Vec::new();
    for (n, r) in report.runs.iter().enumerate() {
        let u = table(dir, &r.u_table, params)?;
        let g = table(dir, &r.g_table, params)?;
        out.k_convex(&format!("G_alpha[{n}]"), &g, k);
        out.k_convex(&format!("u_alpha[{n}]"), &u, k);
        argmins.extend(argmin_set(&u, argmin_tol(&u)));
        u_tables.push(u);
    }
    out.k_convex("u_tilde", &u_tilde, k);
    out.k_convex("H", &h_file, k);

    let policy = SSPolicy::new(report.s_star, report.order_up_to_star)?;
    let h = h_function(
        params,
        &u_tilde,
        Some(AcoeAnchor {
            w: report.w,
            order_up_to: policy.order_up_to,
        }),
    )?;
    let scale = h.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    out.push("H matches u_tilde", h.sup_distance(&h_file), 1e-12 * scale);

    let tol = report.acoe_tolerance;
    let (residual, _) = acoe_residual(params, report.w, &u_tilde, &h)?;
    out.push("acoe_residual", residual, tol);
    out.push(
        "acoi (s*,S*)",
        verify_acoi(
            params,
            report.w,
            &u_tilde,
            &policy_to_tabular(&policy, params.lattice())?,
        )?,
        tol,
    );
    let gap = two_actions_at_s(&h, &policy, k)?;
    out.push("two actions at s*", gap, slope_near(&h, policy.s)? * step);
    out.push(
        "acoi modified at s*",
        verify_acoi(
            params,
            report.w,
            &u_tilde,
            &modified_policy_at_s(&policy, params.lattice())?,
        )?,
        tol + gap,
    );

    let bbox = report.bounding_box;
    let outside = argmins.iter().filter(|&&x| !bbox.contains(x)).count();
    out.push("argmins inside box", outside as f64, 0.0);
    let mc = MonteCarloConfig {
        seed,
        ..Default::default()
    };
    let bound = upper_bound_u(params, bbox, &mc)?;
    for (n, u) in u_tables.iter().enumerate() {
        out.push(format!("u_alpha[{n}] <= U"), bound.max_excess(u), 0.0);
    }
    out.all_pass = out.checks.iter().all(|c| c.pass);
    Ok(out)
}

fn verify_discounted(params: &InventoryParams, dir: &Path) -> Result<Verification, Failure> {
    let report: DiscountedReport = read_json(&dir.join("discounted.json"))?;
    let k = params.fixed_cost();
    let c = params.unit_cost();
    let lattice = *params.lattice();
    let v = table(dir, &report.v_table, params)?;
    let u = table(dir, &report.u_table, params)?;
    let g = table(dir, &report.g_table, params)?;
    let mut out = Verification::default();
    out.k_convex("G", &g, k);
    out.k_convex("u", &u, k);

    let inner = interior(params);
    let mut g_err: f64 = 0.0;
    for j in inner.start..lattice.len() {
        let x = lattice.level(j as isize);
        let expected =
            c * x + params.expected_holding(j) + report.alpha * expect_after_demand(params, &v, j)?;
        g_err = g_err.max((expected - g.values()[j]).abs());
    }
    out.push("G matches v", g_err, 10.0 * report.tol);

    let gv = g.values();
    let mut suffix = f64::INFINITY;
    let mut recon_err: f64 = 0.0;
    for i in (0..lattice.len()).rev() {
        suffix = suffix.min(gv[i]);
        if inner.contains(&i) {
            let rhs = (k + suffix).min(gv[i]) - c * lattice.level(i as isize);
            recon_err = recon_err.max((rhs - v.values()[i]).abs());
        }
    }
    out.push("optimality equation", recon_err, 10.0 * report.tol);
    let ss = acoe_lab::policy::extract_ss(&g, k)?;
    let mismatch = (ss.s - report.s).abs() + (ss.order_up_to - report.order_up_to).abs();
    out.push("(s,S) from G", mismatch, 0.0);
    out.all_pass = out.checks.iter().all(|c| c.pass);
    Ok(out)
}
