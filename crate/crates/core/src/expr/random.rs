//! Random expression trees, used for property tests and for the random
//! test fields of the transport checks.
//!
//! Generated trees are smooth on the whole phase space: arguments of `ln`
//! and `sqrt`, bases of fractional powers and denominators are wrapped so
//! that they stay in `[1, 3]`.

use rand::Rng;

use super::{BinOp, Expression, Func, Node, Scope, Var, VarKind};
use crate::phase::Rep;

/// Shape of the generated trees.
#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub dimension: usize,
    /// Fiber variables to draw from; `None` gives position-only trees.
    pub fiber: Option<Rep>,
    /// Maximum tree depth, counting leaves as depth 1.
    pub max_depth: usize,
}

/// Draws a random expression tree with depth at most `spec.max_depth`.
pub fn random_expression<R: Rng + ?Sized>(rng: &mut R, spec: &RandomSpec) -> Expression {
    let root = node(rng, spec, spec.max_depth.max(1));
    Expression::from_node(root, Scope::Phase { dimension: spec.dimension })
        .expect("generated variables are in range")
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, spec: &RandomSpec) -> Node {
    if rng.gen_bool(0.25) {
        let c: f64 = rng.gen_range(-2.0..2.0);
        return Node::Num((c * 8.0).round() / 8.0);
    }
    let kind = match spec.fiber {
        Some(rep) if rng.gen_bool(0.5) => match rep {
            Rep::V => VarKind::V,
            Rep::P => VarKind::P,
        },
        _ => VarKind::X,
    };
    Node::Var(Var { kind, index: rng.gen_range(0..spec.dimension) })
}

/// `2 + sin(a)` or `2 + cos(a)`, which lies in `[1, 3]`.
fn positive(rng: &mut (impl Rng + ?Sized), a: Node) -> Node {
    let f = if rng.gen_bool(0.5) { Func::Sin } else { Func::Cos };
    Node::Bin(BinOp::Add, Box::new(Node::Num(2.0)), Box::new(Node::Call(f, Box::new(a))))
}

fn node<R: Rng + ?Sized>(rng: &mut R, spec: &RandomSpec, depth: usize) -> Node {
    if depth <= 1 || rng.gen_bool(0.2) {
        return leaf(rng, spec);
    }
    let sub = |rng: &mut R, d: usize| node(rng, spec, d);
    match rng.gen_range(0..10) {
        0 | 1 => Node::Bin(BinOp::Add, Box::new(sub(rng, depth - 1)), Box::new(sub(rng, depth - 1))),
        2 => Node::Bin(BinOp::Sub, Box::new(sub(rng, depth - 1)), Box::new(sub(rng, depth - 1))),
        3 | 4 => Node::Bin(BinOp::Mul, Box::new(sub(rng, depth - 1)), Box::new(sub(rng, depth - 1))),
        5 if depth >= 4 => {
            let inner = sub(rng, depth - 3);
            let den = positive(rng, inner);
            Node::Bin(BinOp::Div, Box::new(sub(rng, depth - 1)), Box::new(den))
        }
        6 => {
            let k = rng.gen_range(2..=3) as f64;
            Node::Bin(BinOp::Pow, Box::new(sub(rng, depth - 1)), Box::new(Node::Num(k)))
        }
        7 if depth >= 4 => {
            let e = [0.5, 1.5, -0.5, -1.0][rng.gen_range(0..4)];
            let inner = sub(rng, depth - 3);
            let base = positive(rng, inner);
            Node::Bin(BinOp::Pow, Box::new(base), Box::new(Node::Num(e)))
        }
        8 if depth >= 4 => {
            let f = if rng.gen_bool(0.5) { Func::Ln } else { Func::Sqrt };
            let inner = sub(rng, depth - 3);
            Node::Call(f, Box::new(positive(rng, inner)))
        }
        9 if depth >= 3 && rng.gen_bool(0.3) => {
            // exp of a bounded argument keeps values moderate
            let inner = Node::Call(Func::Sin, Box::new(sub(rng, depth - 2)));
            Node::Call(Func::Exp, Box::new(inner))
        }
        _ => {
            let f = [Func::Sin, Func::Cos, Func::Tanh][rng.gen_range(0..3)];
            Node::Call(f, Box::new(sub(rng, depth - 1)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhasePoint;
    use rand::SeedableRng;

    #[test]
    fn depth_bound_and_total_evaluation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let spec = RandomSpec { dimension: 3, fiber: Some(Rep::V), max_depth: 6 };
        for _ in 0..500 {
            let e = random_expression(&mut rng, &spec);
            assert!(e.depth() <= 6, "{e}");
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let val = e.eval(&PhasePoint::velocity(x, v)).unwrap();
            assert!(val.is_finite());
        }
    }
}
