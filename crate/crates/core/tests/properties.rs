//! Property tests over random expressions, points and gauge tensors.

use normality_core::experiments::{apply_gauge, gauge_invariance_report, GaugeKind};
use normality_core::expr::random::{random_expression, RandomSpec};
use normality_core::expr::{parse, BinOp, Expression, Func, Node, VarKind};
use normality_core::linalg::{ix2, ix3};
use normality_core::normality::{cross_check, normality_bundle, residuals};
use normality_core::system::SystemDef;
use normality_core::{PhasePoint, Rep};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_tree(seed: u64, n: usize, fiber: Option<Rep>, depth: usize) -> Expression {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_expression(&mut rng, &RandomSpec { dimension: n, fiber, max_depth: depth })
}

/// Plain recursive evaluation, written without the jet machinery.
fn reference(node: &Node, x: &[f64], fiber: &[f64]) -> f64 {
    match node {
        Node::Num(c) => *c,
        Node::Var(v) => match v.kind {
            VarKind::X => x[v.index],
            _ => fiber[v.index],
        },
        Node::Neg(a) => -reference(a, x, fiber),
        Node::Call(f, a) => {
            let a = reference(a, x, fiber);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Tanh => a.tanh(),
            }
        }
        Node::Bin(op, a, b) => {
            let (a, b) = (reference(a, x, fiber), reference(b, x, fiber));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
    }
}

fn rich() -> SystemDef {
    SystemDef::builder(3)
        .legendre_all(&[
            "v1 + 0.1*v1^3 + 0.2*x2*v2",
            "v2 + 0.05*v2^3 + 0.1*x1*v1 + 0.1*v3*v2",
            "v3 + 0.05*v2^2 + 0.1*sin(x3)*v3",
        ])
        .force_all(&["-x1 + 0.1*v2*v3", "sin(x1)*v1", "0.2*v1*v2 - x3"])
        .connection_sym(0, 0, 1, "0.1*x2 + 0.05*v1*v3")
        .connection_sym(1, 1, 2, "0.2*x1*v2")
        .connection_sym(2, 0, 0, "0.1*v2^2 + 0.1*x3")
        .build()
        .unwrap()
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (prop::collection::vec(-1.0..1.0f64, 3), prop::collection::vec(0.5..1.5f64, 3))
        .prop_map(|(x, v)| PhasePoint::velocity(x, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_then_parsing_is_identity(seed: u64, n in 1usize..4, depth in 1usize..7) {
        let e = random_tree(seed, n, Some(Rep::V), depth);
        let back = parse(&e.to_string(), n).unwrap();
        prop_assert_eq!(back.root(), e.root(), "{}", e);
    }

    #[test]
    fn evaluation_matches_reference(seed: u64, n in 1usize..4, depth in 1usize..7, x in prop::collection::vec(-2.0..2.0f64, 3), f in prop::collection::vec(0.5..1.5f64, 3)) {
        let e = random_tree(seed, n, Some(Rep::P), depth);
        let pt = PhasePoint::momentum(x[..n].to_vec(), f[..n].to_vec());
        let got = e.eval(&pt).unwrap();
        let want = reference(e.root(), &pt.x, &pt.fiber);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{e}: {got} vs {want}");
        let jet = e.eval_jet(&pt).unwrap();
        prop_assert!((jet.value - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn legendre_round_trip(y in point()) {
        let s = rich();
        let z = s.legendre_forward(&y).unwrap();
        let back = s.legendre_inverse(&z).unwrap();
        for (a, b) in back.fiber.iter().zip(&y.fiber) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let m = s.metric_pair(&y).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let gg: f64 = (0..3).map(|k| m.g[ix2(3, i, k)] * m.ginv[ix2(3, k, j)]).sum();
                prop_assert!((gg - f64::from(u8::from(i == j))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projector_laws(y in point()) {
        let s = rich();
        for pt in [y.clone(), s.legendre_forward(&y).unwrap()] {
            let b = normality_bundle(&s, &pt).unwrap();
            let p = &b.projector;
            let mut trace = 0.0;
            for i in 0..3 {
                trace += p[ix2(3, i, i)];
                let pw: f64 = (0..3).map(|r| p[ix2(3, i, r)] * b.w[r]).sum();
                prop_assert!(pw.abs() < 1e-9);
                for j in 0..3 {
                    let pp: f64 = (0..3).map(|k| p[ix2(3, i, k)] * p[ix2(3, k, j)]).sum();
                    prop_assert!((pp - p[ix2(3, i, j)]).abs() < 1e-9);
                }
            }
            prop_assert!((trace - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn representations_agree(y in point()) {
        let cc = cross_check(&rich(), &y).unwrap();
        prop_assert!(cc.max_deviation() < 1e-6, "{:?}", cc.worst());
    }

    #[test]
    fn gauge_invariants_and_rules(y in point(), coef in prop::collection::vec(-0.3..0.3f64, 4)) {
        let s = rich();
        let t = format!("{} + {}*x1*v2 + {}*v3^2", coef[0], coef[1], coef[2]);
        let u = format!("{}*v1*x3", coef[3]);
        let mut gauge = vec![Expression::zero(3); 27];
        for (k, i, j, src) in [(0, 1, 2, &t), (2, 0, 0, &u), (1, 1, 1, &t)] {
            gauge[ix3(3, k, i, j)] = parse(src, 3).unwrap();
            gauge[ix3(3, k, j, i)] = parse(src, 3).unwrap();
        }
        let rep = gauge_invariance_report(&s.with_gauge(Some(gauge)), &y).unwrap();
        prop_assert!(rep.max_deviation(GaugeKind::Invariant) < 1e-7);
        prop_assert!(rep.max_deviation(GaugeKind::Rule) < 1e-6, "{:?}", rep.rows);
    }
}

#[test]
fn opposite_gauges_cancel() {
    let s = rich();
    let t: Vec<Expression> = (0..27)
        .map(|idx| {
            let (k, i, j) = (idx / 9, (idx / 3) % 3, idx % 3);
            parse(&format!("0.1*x{}*v{} + {}", k + 1, (i + j) % 3 + 1, 0.05 * (i * j) as f64), 3).unwrap()
        })
        .collect();
    let neg: Vec<Expression> = t.iter().map(|e| parse(&format!("-({e})"), 3).unwrap()).collect();
    let back = apply_gauge(&apply_gauge(&s.with_gauge(Some(t))).unwrap().with_gauge(Some(neg))).unwrap();
    let y = PhasePoint::velocity(vec![0.3, -0.4, 0.1], vec![0.9, 1.2, 0.7]);
    for (a, b) in back.connection().iter().zip(s.connection()) {
        assert!((a.eval(&y).unwrap() - b.eval(&y).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn constant_gauge_shifts_force_vector() {
    let s = SystemDef::builder(2)
        .legendre_all(&["v1", "v2"])
        .force_all(&["-x1", "x1*v2"])
        .gauge_sym(0, 0, 1, "0.5")
        .gauge(1, 1, 1, "-0.25")
        .build()
        .unwrap();
    let y = PhasePoint::velocity(vec![0.2, 0.7], vec![1.1, 0.6]);
    let before = s.force_vector(&y).unwrap();
    let after = apply_gauge(&s).unwrap().force_vector(&y).unwrap();
    let (v1, v2) = (1.1, 0.6);
    assert!((after[0] - before[0] - 2.0 * 0.5 * v1 * v2).abs() < 1e-15);
    assert!((after[1] - before[1] + 0.25 * v2 * v2).abs() < 1e-15);
}

#[test]
fn residuals_do_not_depend_on_the_connection_of_a_geodesic_flow() {
    // The force, not the connection, defines the dynamics, so a flat
    // geodesic flow stays normal under any connection.
    let with = SystemDef::builder(3)
        .legendre_all(&["v1", "v2", "v3"])
        .connection_sym(0, 0, 1, "0.3*x2 + 0.1*v1*v3")
        .connection_sym(2, 1, 2, "0.2*x1*v2")
        .connection(1, 0, 0, "0.1*v2^2")
        .build()
        .unwrap();
    let free = normality_core::experiments::connection_free_mode(&with);
    for k in 0..20 {
        let t = k as f64;
        let y = PhasePoint::velocity(
            vec![(0.7 * t).sin(), (1.3 * t).cos(), 0.5 * (0.4 * t).sin()],
            vec![1.0 + 0.3 * t.sin(), 0.8, 1.2 - 0.2 * t.cos()],
        );
        for s in [&with, &free] {
            for r in residuals(&normality_bundle(s, &y).unwrap()) {
                assert!(r.value < 1e-10, "{}: {}", r.id, r.value);
            }
        }
    }
}
