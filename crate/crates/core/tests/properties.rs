//! Randomized invariants.

mod common;

use proptest::prelude::*;
use rand::Rng;
use regcalc::expr::{BinOp, Expr, Func};
use regcalc::extreal::ExtReal;
use regcalc::lhospital::{lhospital_limit, monotone_certify, quotient_oracle, Oracle, RuleConfig};
use regcalc::limit::LimitEngine;
use regcalc::lsmeasure::{ftc_check, measure_interval, LSMeasure};
use regcalc::regulated::{schedule, Endpoint, PiecewiseFn, Regulated};
use regcalc::stieltjes::{d_alpha, d_alpha_with, product_rule, quotient_rule, Options};
use regcalc::tol::Tolerance;

use common::*;

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::X),
        Just(Expr::N),
        Just(Expr::Pi),
        Just(Expr::E),
        (0u32..10_000).prop_map(|v| Expr::Num(v as f64 / 16.0)),
        (0.0f64..1e6).prop_map(Expr::Num),
    ];
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (0..Func::ALL.len(), inner.clone()).prop_map(|(i, e)| Expr::call(Func::ALL[i], e)),
            (0..5usize, inner.clone(), inner).prop_map(|(i, l, r)| {
                Expr::bin([BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][i], l, r)
            }),
        ]
    })
}

/// A random base `alpha` and function `f` on `(0, l)` sharing cells, with
/// `f` jumping only at atoms of `alpha`.
struct Instance {
    l: f64,
    cuts: Vec<f64>,
    alpha: Pw,
    f: Pw,
    g: Pw,
}

fn instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let l = r.gen_range(1.0..4.0);
    let k = r.gen_range(0..5);
    let cuts = sorted_cuts(&mut r, 0.0, l, k, 0.05);
    let atoms: Vec<bool> = (0..k).map(|_| r.gen_bool(0.6)).collect();
    let alpha = increasing(&mut r, 0.0, l, cuts.clone(), &atoms);
    let f = wiggly(&mut r, 0.0, l, cuts.clone(), &atoms);
    let g = wiggly(&mut r, 0.0, l, cuts.clone(), &atoms);
    Instance { l, cuts, alpha, f, g }
}

fn probe_points(inst: &Instance, r: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..inst.l - 0.01)).collect();
    xs.extend(&inst.cuts);
    xs
}

fn rule_close(a: f64, b: f64) -> bool {
    close(a, b, Tolerance::RULE.rtol, Tolerance::RULE.atol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_expressions_reparse_identically(e in expr_strategy()) {
        let back: Expr = e.to_string().parse().unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn evaluation_is_bitwise_deterministic(e in expr_strategy(), x in -10.0f64..10.0, n in 0i64..50) {
        let a = e.eval(x, Some(n));
        let b = e.eval(x, Some(n));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn derivative_matches_central_difference(seed: u64, x in -2.0f64..2.0) {
        let e = smooth_expr(&mut rng(seed), 5);
        let d = e.diff().unwrap().eval(x, None).unwrap();
        let fd = central_diff(&e, x, 1e-5);
        let half = central_diff(&e, x, 5e-6);
        let tol = 1e-5 * (1.0 + d.abs());
        prop_assume!(fd.is_some() && half.is_some() && d.abs() < 1e4);
        let (fd, half) = (fd.unwrap(), half.unwrap());
        prop_assume!((fd - half).abs() <= tol / 2.0);
        prop_assert!((d - fd).abs() <= tol, "{} at {}: {} vs {}", e, x, d, fd);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn one_sided_limits_are_the_value_off_breakpoints(seed: u64) {
        let inst = instance(seed);
        let f = inst.f.build("f");
        let mut r = rng(seed ^ 1);
        for _ in 0..50 {
            let x = r.gen_range(0.001..inst.l - 0.001);
            prop_assume!(!inst.cuts.contains(&x));
            let p = f.one_sided(x).unwrap();
            let v = f.value(x).unwrap();
            prop_assert_eq!(p.left, ExtReal::Finite(v));
            prop_assert_eq!(p.right, ExtReal::Finite(v));
        }
    }

    #[test]
    fn derivative_matches_body_oracle(seed: u64) {
        let inst = instance(seed);
        let (f, alpha) = (inst.f.build("f"), inst.alpha.build("alpha"));
        let mut r = rng(seed ^ 2);
        for x in probe_points(&inst, &mut r, 10) {
            let want = dalpha_oracle(&inst.f, &inst.alpha, x);
            let got = d_alpha(&f, &alpha, x).unwrap().value.to_f64();
            prop_assert!(rule_close(got, want), "x = {}: {} vs {}", x, got, want);
            let numeric = d_alpha_with(&f, &alpha, x, &Options::numeric()).unwrap().value.to_f64();
            prop_assert!(rule_close(numeric, want), "numeric at {}: {} vs {}", x, numeric, want);
        }
    }

    #[test]
    fn derivative_ignores_the_breakpoint_convention(seed: u64) {
        let inst = instance(seed);
        let (f, alpha) = (inst.f.build("f"), inst.alpha.build("alpha"));
        let (lo, hi) = (f.left_view(), f.right_view());
        let mut r = rng(seed ^ 3);
        for x in probe_points(&inst, &mut r, 5) {
            let d = d_alpha(&f, &alpha, x).unwrap().value.to_f64();
            let dl = d_alpha(&lo, &alpha, x).unwrap().value.to_f64();
            let dr = d_alpha(&hi, &alpha, x).unwrap().value.to_f64();
            prop_assert!(rule_close(d, dl) && rule_close(d, dr), "x = {}: {} {} {}", x, d, dl, dr);
        }
    }

    #[test]
    fn finite_derivative_against_continuous_alpha_means_no_jump(seed: u64) {
        let mut r = rng(seed);
        let l = r.gen_range(1.0..3.0);
        let k = r.gen_range(1..4);
        let cuts = sorted_cuts(&mut r, 0.0, l, k, 0.05);
        let alpha = increasing(&mut r, 0.0, l, cuts.clone(), &vec![false; k]).build("alpha");
        let f = wiggly(&mut r, 0.0, l, cuts.clone(), &vec![true; k]).build("f");
        for &c in &cuts {
            let d = d_alpha(&f, &alpha, c).unwrap().value;
            let jump = f.one_sided(c).unwrap().jump().unwrap();
            if d.is_finite() {
                prop_assert!(jump.abs() <= 1e-9, "finite {} with jump {} at {}", d, jump, c);
            } else {
                prop_assert_eq!(d.signum() as f64, jump.signum());
            }
        }
    }

    #[test]
    fn identity_base_averages_one_sided_derivatives(seed: u64) {
        let mut r = rng(seed);
        let k = r.gen_range(1..5);
        let cuts = sorted_cuts(&mut r, 0.0, 3.0, k, 0.05);
        let pw = wiggly(&mut r, 0.0, 3.0, cuts.clone(), &vec![false; k]);
        let f = pw.build("f");
        let id = PiecewiseFn::single("id", ExtReal::Finite(0.0), ExtReal::Finite(3.0), Expr::X).unwrap();
        for &c in &cuts {
            let want = (side(&pw, c, true).1 + side(&pw, c, false).1) / 2.0;
            let got = d_alpha_with(&f, &id, c, &Options::numeric()).unwrap().value.to_f64();
            prop_assert!(rule_close(got, want), "{} vs {} at {}", got, want, c);
        }
    }

    #[test]
    fn product_and_quotient_rules(seed: u64) {
        let inst = instance(seed);
        let (f, alpha) = (inst.f.build("f"), inst.alpha.build("alpha"));
        // Keep the denominator away from zero.
        let g = &inst.g;
        let shift = 1.0 + (1..200).map(|i| side(g, inst.l * i as f64 / 200.0, true).0.abs()).fold(0.0, f64::max);
        let g = Pw { bodies: g.bodies.iter().map(|b| Expr::add(b.clone(), Expr::num(shift))).collect(), ..g.clone() };
        let g = g.build("g");
        let mut r = rng(seed ^ 4);
        for x in probe_points(&inst, &mut r, 4) {
            let p = product_rule(&f, &g, &alpha, x).unwrap();
            prop_assert!(p.agree, "product at {}: {:?}", x, p);
            let q = quotient_rule(&f, &g, &alpha, x).unwrap();
            prop_assert!(q.agree, "quotient at {}: {:?}", x, q);
        }
    }

    #[test]
    fn positive_derivative_forces_increase(seed: u64) {
        let mut r = rng(seed);
        let l = r.gen_range(1.0..3.0);
        let k = r.gen_range(0..4);
        let cuts = sorted_cuts(&mut r, 0.0, l, k, 0.05);
        let atoms: Vec<bool> = (0..k).map(|_| r.gen_bool(0.5)).collect();
        let alpha = increasing(&mut r, 0.0, l, cuts.clone(), &atoms).build("alpha");
        let f = increasing(&mut r, 0.0, l, cuts.clone(), &atoms).build("f");
        let mut xs: Vec<f64> = (1..100).map(|i| l * i as f64 / 100.0).chain(cuts.iter().copied()).collect();
        xs.sort_by(f64::total_cmp);
        for &x in &xs {
            prop_assert!(d_alpha(&f, &alpha, x).unwrap().value > ExtReal::ZERO);
        }
        for (i, &x) in xs.iter().enumerate() {
            let fr = f.right_limit(x).unwrap();
            for &y in &xs[i + 1..] {
                prop_assert!(fr < f.left_limit(y).unwrap(), "f+({}) >= f-({})", x, y);
            }
        }
    }

    #[test]
    fn measures_add_over_adjacent_intervals(seed: u64) {
        let inst = instance(seed);
        let alpha = inst.alpha.build("alpha");
        let mut r = rng(seed ^ 5);
        let (s, t) = (r.gen_range(0.001..inst.l / 3.0), r.gen_range(2.0 * inst.l / 3.0..inst.l - 0.001));
        let mut mids: Vec<f64> = inst.cuts.iter().copied().filter(|&c| s < c && c < t).collect();
        mids.push(r.gen_range(s..t));
        let m = LSMeasure::new(&alpha);
        let whole = measure_interval(&alpha, s, t).unwrap();
        for mid in mids {
            let parts = measure_interval(&alpha, s, mid).unwrap() + m.atom(mid).unwrap() + measure_interval(&alpha, mid, t).unwrap();
            prop_assert!((parts - whole).abs() <= 1e-12 * (1.0 + whole.abs()), "{} vs {}", parts, whole);
        }
    }

    #[test]
    fn increments_bounded_by_derivative_times_measure(seed: u64) {
        let inst = instance(seed);
        let (f, alpha) = (inst.f.build("f"), inst.alpha.build("alpha"));
        let mut xs: Vec<f64> = (1..400).map(|i| inst.l * i as f64 / 400.0).chain(inst.cuts.iter().copied()).collect();
        xs.sort_by(f64::total_cmp);
        // The supremum includes the one-sided values just past each cut.
        let near_cuts = inst.cuts.iter().flat_map(|&c| [c - 1e-9, c + 1e-9]);
        let m = xs.iter().copied().chain(near_cuts).map(|x| d_alpha(&f, &alpha, x).unwrap().value.to_f64().abs()).fold(0.0, f64::max);
        // The grid maximum undershoots the supremum by a small relative amount.
        let bound = m * (1.0 + 1e-2) + 1e-9;
        for (i, &x) in xs.iter().enumerate().step_by(7) {
            for &y in xs[i + 1..].iter().step_by(5) {
                let inc = (f.left_limit(y).unwrap() - f.right_limit(x).unwrap()).abs();
                let mass = alpha.left_limit(y).unwrap() - alpha.right_limit(x).unwrap();
                prop_assert!(inc <= bound * mass, "|f-({}) - f+({})| = {} > {} * {}", y, x, inc, bound, mass);
            }
        }
    }

    #[test]
    fn fundamental_theorem_on_random_pairs(seed: u64) {
        let inst = instance(seed);
        let (h, alpha) = (inst.f.build("h"), inst.alpha.build("alpha"));
        let mut r = rng(seed ^ 6);
        let (s, t) = (r.gen_range(0.001..inst.l / 2.0), r.gen_range(inst.l / 2.0..inst.l - 0.001));
        let rep = ftc_check(&h, &alpha, s, t).unwrap();
        let lhs = side(&inst.f, t, true).0 - side(&inst.f, s, false).0;
        prop_assert!(rep.ok && (rep.rhs - lhs).abs() <= 1e-6 * (1.0 + lhs.abs()), "{:?} vs {}", rep, lhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn left_and_right_quotients_share_end_behavior(seed: u64) {
        let (f, g, alpha, want) = vanishing_pair(&mut rng(seed));
        let (f, g, alpha) = (f.build("f"), g.build("g"), alpha.build("alpha"));
        let engine = LimitEngine::default();
        let xs = schedule(&alpha, Endpoint::A, &engine);
        let left = quotient_oracle(&f.left_view(), &g.left_view(), &xs, &engine);
        let right = quotient_oracle(&f.right_view(), &g.right_view(), &xs, &engine);
        let (l, r) = (left.value.unwrap().to_f64(), right.value.unwrap().to_f64());
        prop_assert!(close(l, r, 1e-6, 1e-9) && close(l, want, 1e-6, 1e-9), "{} {} {}", l, r, want);
    }

    #[test]
    fn reflected_problem_gives_the_same_limit(seed: u64) {
        let (f, g, alpha, want) = vanishing_pair(&mut rng(seed));
        let cfg = RuleConfig::default();
        let a = lhospital_limit(&f.build("f"), &g.build("g"), &alpha.build("alpha"), Endpoint::A, &cfg).unwrap();
        let b = lhospital_limit(&f.reflected().build("f"), &g.reflected().build("g"), &alpha.reflected_negated().build("alpha"), Endpoint::B, &cfg).unwrap();
        let (a, b) = (a.limit().unwrap().to_f64(), b.limit().unwrap().to_f64());
        prop_assert!(close(a, b, 1e-7, 1e-9) && close(a, want, 1e-6, 1e-9), "{} {} {}", a, b, want);
    }

    #[test]
    fn monotone_certificates_are_sound(seed: u64) {
        let mut r = rng(seed);
        // f = c x^2 + d x^3 and g = x against alpha = x + x^2 on (0, 1).
        let (c, d) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let f = PiecewiseFn::single("f", ExtReal::Finite(0.0), ExtReal::Finite(1.0), poly(&[0.0, 0.0, c, d], 0.0)).unwrap();
        let g = PiecewiseFn::single("g", ExtReal::Finite(0.0), ExtReal::Finite(1.0), Expr::X).unwrap();
        let alpha = PiecewiseFn::single("alpha", ExtReal::Finite(0.0), ExtReal::Finite(1.0), poly(&[0.0, 1.0, 1.0], 0.0)).unwrap();
        let rep = monotone_certify(&f, &g, &alpha, Endpoint::A, &RuleConfig::default()).unwrap();
        // A turning point between hypothesis grid points can slip through;
        // the finer oracle grid must then flag the report.
        if rep.certificate().is_some() {
            match &rep.oracle {
                Some(Oracle::Grid(v)) => prop_assert!(v.violations == 0 || !rep.agree, "{:?}", v),
                o => prop_assert!(false, "oracle {:?}", o),
            }
        }
        // D_alpha f / D_alpha g = 2c x + 3d x^2 is monotone on (0, 1) exactly
        // when its turning point -c/(3d) is not inside. Turning points near
        // the ends are below grid resolution.
        let turn = -c / (3.0 * d);
        prop_assume!((turn - 0.0).abs() > 0.02 && (turn - 1.0).abs() > 0.02);
        let monotone = !(0.0 < turn && turn < 1.0);
        prop_assert_eq!(rep.certificate().is_some(), monotone, "c = {}, d = {}", c, d);
    }
}
