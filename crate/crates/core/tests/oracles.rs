mod common;

use acoe_lab::average::{
    acoe_residual, h_function, solve_discounted, two_actions_at_s, vanishing_discount, verify_acoi,
    AcoeAnchor, VanishingSchedule, MAX_SWEEPS,
};
use acoe_lab::bounds::{
    argmin_set, stopped_sum_holding, upper_bound_u, BoundingBox, MonteCarloConfig,
};
use acoe_lab::dp::{bellman_discounted, value_iteration, OrderingModel};
use acoe_lab::lattice::{BelowGrid, LinearTail, TabularPolicy, ValueTable};
use acoe_lab::model::{g_alpha, renewal_function};
use acoe_lab::policy::{
    check_k_convex, evaluate_policy_discounted, extract_ss, modified_policy_at_s,
    policy_to_tabular, SSPolicy,
};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bellman_sweep_matches_triple_loop() {
    let raw = raw_a();
    let p = instance_a();
    let alpha = 0.9;
    let v0 = ValueTable::constant(*p.lattice(), 0.0);
    let v1 = bellman_discounted(&p, &v0, alpha).unwrap().value;
    let v2 = bellman_discounted(&p, &v1, alpha).unwrap();
    let l = p.lattice();
    for (i, x) in l.levels().enumerate() {
        let x = x as i64;
        let mut best = f64::INFINITY;
        for a in 0..=(l.x_max() as i64 - x) {
            let y = x + a;
            let order = if a > 0 { raw.k + raw.c * a as f64 } else { 0.0 };
            let mut cont = 0.0;
            for &(d, pr) in &raw.demand {
                cont += pr * v1.eval((y - d) as f64).unwrap();
            }
            best = best.min(order + raw.eh(y) + alpha * cont);
        }
        let got = v2.value.values()[i];
        assert!(
            (got - best).abs() <= 1e-10 * best.abs().max(1.0),
            "x={x}: {got} vs {best}"
        );
    }
}

#[test]
fn seven_point_lattice_matches_policy_enumeration() {
    let raw = raw_tiny();
    let p = raw.params(-3.0, 3.0);
    let vi = value_iteration(&p, 0.5, 1e-12, 100_000).unwrap();
    let best = enumerate_policies(&raw, -3, 3, 0.5);
    for (got, want) in vi.value.values().iter().zip(&best) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn g_alpha_matches_direct_sum() {
    let raw = raw_a();
    let p = instance_a();
    let alpha = 0.9;
    let vi = value_iteration(&p, alpha, 1e-8, MAX_SWEEPS).unwrap();
    let g = g_alpha(&p, &vi.value, alpha).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let i = rng.gen_range(0..p.lattice().len());
        let x = p.lattice().level(i as isize);
        let direct: f64 = raw.c * x
            + raw
                .demand
                .iter()
                .map(|&(d, pr)| {
                    pr * (raw.h(x - d as f64) + alpha * vi.value.eval(x - d as f64).unwrap())
                })
                .sum::<f64>();
        assert!((g.values()[i] - direct).abs() < 1e-9, "x={x}");
    }
}

#[test]
fn optimality_equation_reconstruction() {
    let p = instance_a();
    let tol = 1e-8;
    let run = solve_discounted(&p, 0.9, tol, MAX_SWEEPS).unwrap();
    let g = run.g.values();
    let reach = p.demand_reach();
    let n = g.len();
    let mut suffix = f64::INFINITY;
    for i in (0..n).rev() {
        suffix = suffix.min(g[i]);
        if i >= reach && i < n - reach {
            let rhs =
                (p.fixed_cost() + suffix).min(g[i]) - p.unit_cost() * p.lattice().level(i as isize);
            assert!((rhs - run.value.values()[i]).abs() <= 10.0 * tol);
        }
    }
}

#[test]
fn greedy_policy_value_matches_table() {
    let p = instance_a();
    let (alpha, tol) = (0.9, 1e-8);
    let vi = value_iteration(&p, alpha, tol, MAX_SWEEPS).unwrap();
    let v = evaluate_policy_discounted(&p, &vi.policy, alpha, tol, MAX_SWEEPS).unwrap();
    assert!(v.sup_distance(&vi.value) <= 2.0 * tol / (1.0 - alpha));
}

#[test]
fn ss_value_is_linear_below_s() {
    let p = instance_a();
    let (alpha, tol) = (0.9, 1e-9);
    let run = solve_discounted(&p, alpha, tol, MAX_SWEEPS).unwrap();
    let l = p.lattice();
    let s = l.index_of(run.policy.s).unwrap();
    let c = p.unit_cost();

    let modified = modified_policy_at_s(&run.policy, l).unwrap();
    let v = evaluate_policy_discounted(&p, &modified, alpha, tol, MAX_SWEEPS).unwrap();
    for i in 0..=s {
        let want = c * (l.level(s as isize) - l.level(i as isize)) + v.values()[s];
        assert!((v.values()[i] - want).abs() <= 10.0 * tol);
    }

    // the plain policy holds at s, so the identity is anchored one step lower
    let plain = policy_to_tabular(&run.policy, l).unwrap();
    let v = evaluate_policy_discounted(&p, &plain, alpha, tol, MAX_SWEEPS).unwrap();
    for i in 0..s {
        let want = c * (l.level(s as isize - 1) - l.level(i as isize)) + v.values()[s - 1];
        assert!((v.values()[i] - want).abs() <= 10.0 * tol);
    }
}

#[test]
fn extracted_policy_beats_every_ss_pair() {
    let raw = raw_a();
    let p = raw.params(-10.0, 15.0);
    let alpha = 0.9;
    let run = solve_discounted(&p, alpha, 1e-10, MAX_SWEEPS).unwrap();
    let mut best = (f64::INFINITY, 0, 0);
    for s in -10..=15 {
        for big_s in s..=15 {
            let v = evaluate_ss_exact(&raw, -10, 15, s, big_s, alpha);
            if v[10] < best.0 - 1e-9 {
                best = (v[10], s, big_s);
            }
        }
    }
    assert_eq!(
        (best.1 as f64, best.2 as f64),
        (run.policy.s, run.policy.order_up_to)
    );
    assert!((best.0 - run.value.eval(0.0).unwrap()).abs() < 1e-8);
}

#[test]
fn renewal_function_matches_monte_carlo() {
    let p = instance_a();
    let demand = p.discrete_demand();
    let exact = renewal_function(demand, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let paths = 1_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..paths {
        let (mut s, mut count) = (0.0, 0.0);
        loop {
            s += demand.sample(&mut rng);
            if s > 3.0 {
                break;
            }
            count += 1.0;
        }
        sum += count;
        sum_sq += count * count;
    }
    let mean = sum / paths as f64;
    let se = ((sum_sq / paths as f64 - mean * mean) / paths as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * se,
        "{mean} vs {exact} (se {se})"
    );
}

#[test]
fn stopped_sum_estimate_matches_first_passage_law() {
    let raw = raw_a();
    let p = instance_a();
    let lower = -5.0;
    let mc = MonteCarloConfig {
        paths: 100_000,
        seed: 11,
        se_inflation: 3.0,
    };
    let (est, se) = stopped_sum_holding(&p, lower, &mc).unwrap();
    let start = p.lattice().index_of(lower).unwrap();
    for (k, (e, s)) in est.iter().zip(&se).enumerate() {
        let x = p.lattice().level((start + k) as isize) as i64;
        let exact = stopped_sum_exact(&raw, x, x - lower as i64);
        assert!(
            (e - exact).abs() <= 4.0 * s + 1e-12,
            "x={x}: {e} vs {exact}"
        );
    }
}

#[test]
fn discounted_minimizers_inside_reported_box() {
    let p = instance_a();
    let sol =
        vanishing_discount(&p, &VanishingSchedule::new(vec![0.9, 0.99]).unwrap(), 1e-9).unwrap();
    let mut argmins = Vec::new();
    for r in &sol.runs {
        argmins.extend(argmin_set(&r.value, 1e-9 * r.m_alpha));
    }
    let bbox = BoundingBox::around(p.lattice(), &argmins, 2).unwrap();
    let alone = solve_discounted(&p, 0.9, 1e-9, MAX_SWEEPS).unwrap();
    let (i, _) = alone.value.min();
    assert!(bbox.contains(p.lattice().level(i as isize)));
    assert!(
        upper_bound_u(&p, bbox, &MonteCarloConfig::default())
            .unwrap()
            .max_excess(&alone.u)
            <= 0.0
    );
}

/// ũ and w from the oracle, restricted to `[-6, 8]`, with the ACOE tail below.
fn oracle_solution() -> (
    acoe_lab::model::InventoryParams,
    f64,
    ValueTable,
    ValueTable,
    SSPolicy,
) {
    let raw = raw_tiny();
    let p = raw.params(-6.0, 8.0);
    let rvi = relative_value_iteration(&raw, -40, 8, 1e-13, 1_000_000);
    let u = ValueTable::from_fn(*p.lattice(), |x| rvi.at(x as i64)).unwrap();
    // S* is the smallest minimizer of H, found on the oracle's own grid
    let hh = |y: i64| {
        raw.c * y as f64
            + raw.eh(y)
            + raw
                .demand
                .iter()
                .map(|&(d, q)| q * rvi.at(y - d))
                .sum::<f64>()
    };
    let big_s = (-30..=8).min_by(|a, b| hh(*a).total_cmp(&hh(*b))).unwrap();
    let s = (-30..=big_s).find(|&x| hh(x) <= raw.k + hh(big_s)).unwrap();
    let policy = SSPolicy::new(s as f64, big_s as f64).unwrap();
    let h = h_function(
        &p,
        &u,
        Some(AcoeAnchor {
            w: rvi.gain,
            order_up_to: big_s as f64,
        }),
    )
    .unwrap();
    (p, rvi.gain, u, h, policy)
}

#[test]
fn exact_acoe_solution_has_zero_residual() {
    let (p, w, u, h, _) = oracle_solution();
    let (r, _) = acoe_residual(&p, w, &u, &h).unwrap();
    assert!(r <= 1e-9, "{r}");

    let delta = 0.37;
    let (shifted, _) = acoe_residual(&p, w + delta, &u, &h).unwrap();
    assert!((shifted - delta).abs() <= 1e-9);
}

#[test]
fn perturbed_relative_value_is_detected() {
    let (p, w, u, _, pol) = oracle_solution();
    let mut vals = u.values().to_vec();
    let i = p.lattice().index_of(3.0).unwrap();
    vals[i] += 1.0;
    let bumped = ValueTable::new(*p.lattice(), vals, None).unwrap();
    let h = h_function(
        &p,
        &bumped,
        Some(AcoeAnchor {
            w,
            order_up_to: pol.order_up_to,
        }),
    )
    .unwrap();
    let (r, _) = acoe_residual(&p, w, &bumped, &h).unwrap();
    assert!(r >= 1.0 * (1.0 - 0.6) - 1e-9, "{r}");
}

#[test]
fn acoi_for_extracted_and_bad_policies() {
    let p = instance_a();
    let sol = vanishing_discount(
        &p,
        &VanishingSchedule::new(vec![0.9, 0.99, 0.999, 0.9999]).unwrap(),
        1e-9,
    )
    .unwrap();
    let l = p.lattice();
    let ss = verify_acoi(
        &p,
        sol.w,
        &sol.u_tilde,
        &policy_to_tabular(&sol.policy, l).unwrap(),
    )
    .unwrap();
    assert!(ss <= sol.acoe_residual + 1e-12);
    let gap = two_actions_at_s(&sol.h, &sol.policy, p.fixed_cost()).unwrap();
    let modified = verify_acoi(
        &p,
        sol.w,
        &sol.u_tilde,
        &modified_policy_at_s(&sol.policy, l).unwrap(),
    )
    .unwrap();
    assert!(modified <= sol.acoe_residual + gap + 1e-12);

    let never = TabularPolicy::new(*l, vec![0; l.len()], BelowGrid::Hold).unwrap();
    let bad = verify_acoi(&p, sol.w, &sol.u_tilde, &never).unwrap();
    assert!(bad > 10.0, "{bad}");
}

#[test]
fn h_grows_at_both_ends() {
    let p = instance_a();
    let sol = vanishing_discount(
        &p,
        &VanishingSchedule::new(vec![0.9, 0.99, 0.999]).unwrap(),
        1e-9,
    )
    .unwrap();
    let v = sol.h.values();
    let (_, m) = sol.h.min();
    assert!(v[0] > m + p.fixed_cost());
    assert!(v[v.len() - 1] > m + p.fixed_cost());
}

#[test]
fn base_stock_when_setup_is_free() {
    let p = instance_a().with_fixed_cost(0.0).unwrap();
    let sol = vanishing_discount(&p, &VanishingSchedule::geometric(5).unwrap(), 1e-9).unwrap();
    assert_eq!(sol.policy.s, sol.policy.order_up_to);
    assert!(check_k_convex(&sol.u_tilde, 0.0, 1e-9).is_k_convex);
    assert_eq!(two_actions_at_s(&sol.h, &sol.policy, 0.0).unwrap(), 0.0);
}

#[test]
fn relative_values_nonnegative_with_a_zero() {
    let p = instance_a();
    let sol =
        vanishing_discount(&p, &VanishingSchedule::new(vec![0.9, 0.99]).unwrap(), 1e-9).unwrap();
    assert!(sol.u_tilde.values().iter().all(|&u| u >= 0.0));
    assert_eq!(sol.u_tilde.min().1, 0.0);
}

#[test]
fn extract_ss_agrees_with_greedy_below_s() {
    // every ordering state of the greedy policy orders up to S
    let p = instance_a();
    for alpha in [0.5, 0.9, 0.99] {
        let run = solve_discounted(&p, alpha, 1e-9, MAX_SWEEPS).unwrap();
        let s = p.lattice().index_of(run.policy.s).unwrap();
        let big_s = p.lattice().index_of(run.policy.order_up_to).unwrap();
        for (i, &a) in run.greedy.order_steps().iter().enumerate() {
            if i < s {
                assert_eq!(i + a, big_s);
            } else if i > s {
                assert_eq!(a, 0);
            }
        }
        assert_eq!(run.greedy.below_grid(), BelowGrid::OrderUpTo(big_s));
        assert!(matches!(extract_ss(&run.g, p.fixed_cost()), Ok(pol) if pol == run.policy));
    }
}

#[test]
fn ss_value_tail_is_exact_below_lattice() {
    // the table tail continues v(x) = K + c̄(S - x) + v(S) off the lattice
    let p = instance_a();
    let vi = value_iteration(&p, 0.9, 1e-10, MAX_SWEEPS).unwrap();
    let run = solve_discounted(&p, 0.9, 1e-10, MAX_SWEEPS).unwrap();
    let tail: LinearTail = vi.value.below_grid().unwrap();
    let big_s = run.policy.order_up_to;
    let want = p.fixed_cost() + p.unit_cost() * (big_s + 35.0) + vi.value.eval(big_s).unwrap();
    assert!((tail.at(-35.0) - want).abs() < 1e-8);
}
