//! Vertical and horizontal derivatives of extended tensor fields, the
//! dynamic curvature `D`, the curvature `R`, and the identities that relate
//! the velocity-side and momentum-side versions of these objects.
//!
//! Components of a rank-`r` field are stored flat with the first index
//! slowest. A derivative always appends its index as the last slot.

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::jet::{Dual, Jet2, Scalar};
use crate::linalg::{ix2, ix3, ix4};
use crate::phase::{PhasePoint, Rep};
use crate::system::SystemDef;

/// Variance of one tensor slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Up,
    Down,
}

/// A component value together with its partial derivatives over `(x, fiber)`.
pub trait Differentiable {
    type Out: Scalar;
    fn value_out(&self) -> Self::Out;
    fn partial_out(&self, c: usize) -> Self::Out;
}

impl Differentiable for Dual {
    type Out = f64;
    fn value_out(&self) -> f64 {
        self.re
    }
    fn partial_out(&self, c: usize) -> f64 {
        self.grad[c]
    }
}

impl Differentiable for Jet2 {
    type Out = Dual;
    fn value_out(&self) -> Dual {
        self.to_dual()
    }
    fn partial_out(&self, c: usize) -> Dual {
        self.partial_dual(c)
    }
}

/// Vertical derivative along every fiber direction; the new last slot is
/// lower in the velocity representation and upper in the momentum one.
pub fn vertical<X: Differentiable>(n: usize, comps: &[X]) -> Vec<X::Out> {
    let mut out = Vec::with_capacity(comps.len() * n);
    for c in comps {
        for k in 0..n {
            out.push(c.partial_out(n + k));
        }
    }
    out
}

/// Horizontal derivative `∇_m` of a field with the given slots.
///
/// `gamma` holds `Γ^k_ij` at `ix3(n, k, i, j)` and `fiber` the fiber
/// coordinates, both in the output scalar type so the result can itself
/// carry first derivatives.
pub fn horizontal<X: Differentiable>(
    n: usize,
    rep: Rep,
    slots: &[Slot],
    comps: &[X],
    gamma: &[X::Out],
    fiber: &[X::Out],
) -> Vec<X::Out> {
    let rank = slots.len();
    debug_assert_eq!(comps.len(), n.pow(rank as u32));
    let Some(first) = comps.first() else {
        return Vec::new();
    };
    let zero = first.value_out().constant_like(0.0);
    let values: Vec<X::Out> = comps.iter().map(X::value_out).collect();
    let strides: Vec<usize> = (0..rank).map(|s| n.pow((rank - 1 - s) as u32)).collect();

    // fiber term coefficients c[m][b], multiplying ∂X/∂fiber_b
    let mut fcoef = vec![zero.clone(); n * n];
    for m in 0..n {
        for b in 0..n {
            let mut acc = zero.clone();
            for a in 0..n {
                let t = match rep {
                    Rep::V => fiber[a].mul(&gamma[ix3(n, b, a, m)]).neg(),
                    Rep::P => fiber[a].mul(&gamma[ix3(n, a, m, b)]),
                };
                acc = acc.add(&t);
            }
            fcoef[ix2(n, m, b)] = acc;
        }
    }

    let mut out = Vec::with_capacity(comps.len() * n);
    for (f, comp) in comps.iter().enumerate() {
        for m in 0..n {
            let mut t = comp.partial_out(m);
            for b in 0..n {
                t = t.add(&fcoef[ix2(n, m, b)].mul(&comp.partial_out(n + b)));
            }
            for (s, slot) in slots.iter().enumerate() {
                let idx = (f / strides[s]) % n;
                let base = f - idx * strides[s];
                for a in 0..n {
                    let other = &values[base + a * strides[s]];
                    match slot {
                        Slot::Up => t = t.add(&gamma[ix3(n, idx, m, a)].mul(other)),
                        Slot::Down => t = t.sub(&gamma[ix3(n, a, m, idx)].mul(other)),
                    }
                }
            }
            out.push(t);
        }
    }
    out
}

/// Stored components of a [`FieldValue`].
#[derive(Clone, Debug, PartialEq)]
pub enum Components {
    Real(Vec<f64>),
    Jet1(Vec<Dual>),
    Jet2(Vec<Jet2>),
}

impl Components {
    pub fn len(&self) -> usize {
        match self {
            Components::Real(v) => v.len(),
            Components::Jet1(v) => v.len(),
            Components::Jet2(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Components::Real(v) => v.clone(),
            Components::Jet1(v) => v.iter().map(|d| d.re).collect(),
            Components::Jet2(v) => v.iter().map(|j| j.value).collect(),
        }
    }
}

/// An extended tensor field evaluated at one phase point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldValue {
    pub point: PhasePoint,
    pub slots: Vec<Slot>,
    pub comps: Components,
}

impl FieldValue {
    /// Evaluates component expressions as second-order jets.
    pub fn from_expressions(exprs: &[Expression], slots: &[Slot], point: &PhasePoint) -> Result<Self> {
        let n = point.dim();
        if exprs.len() != n.pow(slots.len() as u32) {
            return Err(Error::Validation(format!(
                "{} components given for a rank-{} field in dimension {n}",
                exprs.len(),
                slots.len()
            )));
        }
        let comps = exprs.iter().map(|e| e.eval_jet(point)).collect::<std::result::Result<_, _>>()?;
        Ok(FieldValue { point: point.clone(), slots: slots.to_vec(), comps: Components::Jet2(comps) })
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.values()
    }

    fn fiber_slot(&self) -> Slot {
        match self.point.rep {
            Rep::V => Slot::Down,
            Rep::P => Slot::Up,
        }
    }

    fn with(&self, comps: Components) -> FieldValue {
        let mut slots = self.slots.clone();
        slots.push(self.fiber_slot());
        FieldValue { point: self.point.clone(), slots, comps }
    }
}

/// `∇̃_k X` in the velocity representation or `∇̃^k X` in the momentum one.
pub fn vertical_derivative(x: &FieldValue) -> Result<FieldValue> {
    let n = x.point.dim();
    let comps = match &x.comps {
        Components::Real(_) => return Err(Error::MissingJets),
        Components::Jet1(c) => Components::Real(vertical(n, c)),
        Components::Jet2(c) => Components::Jet1(vertical(n, c)),
    };
    Ok(x.with(comps))
}

/// `∇_m X`, with the connection of `s` evaluated at the field's point
/// (through the inverse Legendre map on the momentum side).
pub fn horizontal_derivative(x: &FieldValue, s: &SystemDef) -> Result<FieldValue> {
    let gamma = connection_at(s, &x.point)?;
    horizontal_derivative_with(x, &gamma)
}

/// `∇_m X` with explicitly supplied connection jets.
pub fn horizontal_derivative_with(x: &FieldValue, gamma: &[Dual]) -> Result<FieldValue> {
    let n = x.point.dim();
    let rep = x.point.rep;
    let comps = match &x.comps {
        Components::Real(_) => return Err(Error::MissingJets),
        Components::Jet1(c) => {
            let g: Vec<f64> = gamma.iter().map(|d| d.re).collect();
            Components::Real(horizontal(n, rep, &x.slots, c, &g, &x.point.fiber))
        }
        Components::Jet2(c) => {
            let fiber = seeded_fiber(&x.point);
            Components::Jet1(horizontal(n, rep, &x.slots, c, gamma, &fiber))
        }
    };
    Ok(x.with(comps))
}

/// Fiber coordinates as jets over `(x, fiber)`.
pub fn seeded_fiber(pt: &PhasePoint) -> Vec<Dual> {
    let n = pt.dim();
    pt.fiber.iter().enumerate().map(|(a, v)| Dual::variable(*v, n + a, 2 * n)).collect()
}

/// `Γ^k_ij` at a point as first-order jets over its own coordinates.
pub fn connection_at(s: &SystemDef, pt: &PhasePoint) -> Result<Vec<Dual>> {
    match pt.rep {
        Rep::V => s
            .connection()
            .iter()
            .map(|e| e.eval_dual(pt).map_err(Error::from))
            .collect(),
        Rep::P => Ok(s.momentum_frame(pt)?.gamma()),
    }
}

/// `D^k_{rij} = -∂Γ^k_{ir}/∂v^j`, stored at `ix4(n, k, r, i, j)`.
pub fn dynamic_curvature_v(n: usize, gamma: &[Dual]) -> Vec<f64> {
    let mut d = vec![0.0; n.pow(4)];
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[ix4(n, k, r, i, j)] = -gamma[ix3(n, k, i, r)].grad[n + j];
                }
            }
        }
    }
    d
}

/// `D^{kr}_{ij} = -∂Γ^k_{ij}/∂p_r`, stored at `ix4(n, k, r, i, j)`.
pub fn dynamic_curvature_p(n: usize, gamma: &[Dual]) -> Vec<f64> {
    let mut d = vec![0.0; n.pow(4)];
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[ix4(n, k, r, i, j)] = -gamma[ix3(n, k, i, j)].grad[n + r];
                }
            }
        }
    }
    d
}

fn curvature_common(n: usize, gamma: &[Dual], k: usize, r: usize, i: usize, j: usize) -> f64 {
    let g = |a, b, c| &gamma[ix3(n, a, b, c)];
    let mut t = g(k, j, r).grad[i] - g(k, i, r).grad[j];
    for m in 0..n {
        t += g(k, i, m).re * g(m, j, r).re - g(k, j, m).re * g(m, i, r).re;
    }
    t
}

/// Velocity-side curvature `R^k_{rij}` at `ix4(n, k, r, i, j)`.
pub fn curvature_v(n: usize, gamma: &[Dual], v: &[f64]) -> Vec<f64> {
    let g = |a, b, c| &gamma[ix3(n, a, b, c)];
    let mut out = vec![0.0; n.pow(4)];
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut t = curvature_common(n, gamma, k, r, i, j);
                    for s in 0..n {
                        for m in 0..n {
                            t -= v[s] * g(m, i, s).re * g(k, j, r).grad[n + m];
                            t += v[s] * g(m, j, s).re * g(k, i, r).grad[n + m];
                        }
                    }
                    out[ix4(n, k, r, i, j)] = t;
                }
            }
        }
    }
    out
}

/// Momentum-side curvature `R^k_{rij}` at `ix4(n, k, r, i, j)`.
pub fn curvature_p(n: usize, gamma: &[Dual], p: &[f64]) -> Vec<f64> {
    let g = |a, b, c| &gamma[ix3(n, a, b, c)];
    let mut out = vec![0.0; n.pow(4)];
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut t = curvature_common(n, gamma, k, r, i, j);
                    for s in 0..n {
                        for m in 0..n {
                            t += p[s] * g(s, m, i).re * g(k, j, r).grad[n + m];
                            t -= p[s] * g(s, m, j).re * g(k, i, r).grad[n + m];
                        }
                    }
                    out[ix4(n, k, r, i, j)] = t;
                }
            }
        }
    }
    out
}

/// Two computations of the same quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Comparison {
    pub fn deviation(&self) -> f64 {
        crate::linalg::relative_deviation(&self.lhs, &self.rhs)
    }
}

/// Momentum-side `D` at `λ(y)` against `Σ_s g^{sr} D^k_{ijs}` at `y`.
pub fn dynamic_curvature_relation(s: &SystemDef, y: &PhasePoint) -> Result<Comparison> {
    let n = s.n();
    let vf = s.velocity_frame(y)?;
    let mf = s.momentum_frame(&s.legendre_forward(y)?)?;
    let lhs = dynamic_curvature_p(n, &mf.gamma());
    let gamma: Vec<Dual> = vf.gamma.iter().map(Jet2::to_dual).collect();
    let dv = dynamic_curvature_v(n, &gamma);
    let mut rhs = vec![0.0; n.pow(4)];
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    rhs[ix4(n, k, r, i, j)] =
                        (0..n).map(|a| vf.ginv[ix2(n, a, r)] * dv[ix4(n, k, i, j, a)]).sum();
                }
            }
        }
    }
    Ok(Comparison { lhs, rhs })
}

/// Momentum-side `R` at `λ(y)` against the velocity-side `R` corrected by
/// `Σ ∇_i L_q g^{sq} D^k_{jrs} - Σ ∇_j L_q g^{sq} D^k_{irs}`.
pub fn curvature_relation(s: &SystemDef, y: &PhasePoint) -> Result<Comparison> {
    let n = s.n();
    let vf = s.velocity_frame(y)?;
    let z = s.legendre_forward(y)?;
    let mf = s.momentum_frame(&z)?;
    let lhs = curvature_p(n, &mf.gamma(), &z.fiber);
    let gamma: Vec<Dual> = vf.gamma.iter().map(Jet2::to_dual).collect();
    let gvals: Vec<f64> = gamma.iter().map(|d| d.re).collect();
    let l: Vec<Dual> = vf.l.iter().map(Jet2::to_dual).collect();
    // ∇_i L_q at ix2(n, q, i)
    let nabla_l = horizontal(n, Rep::V, &[Slot::Down], &l, &gvals, &y.fiber);
    let dv = dynamic_curvature_v(n, &gamma);
    let mut rhs = curvature_v(n, &gamma, &y.fiber);
    // c[i][s] = Σ_q ∇_i L_q g^{sq}
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for a in 0..n {
            c[ix2(n, i, a)] = (0..n).map(|q| nabla_l[ix2(n, q, i)] * vf.ginv[ix2(n, a, q)]).sum();
        }
    }
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut t = 0.0;
                    for a in 0..n {
                        t += c[ix2(n, i, a)] * dv[ix4(n, k, j, r, a)];
                        t -= c[ix2(n, j, a)] * dv[ix4(n, k, i, r, a)];
                    }
                    rhs[ix4(n, k, r, i, j)] += t;
                }
            }
        }
    }
    Ok(Comparison { lhs, rhs })
}

/// The four ways of moving a derivative between representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transport {
    /// `∇̃_k X = Σ g_qk ∇̃^q (X ∘ λ⁻¹) ∘ λ` for a velocity-side field.
    VerticalFromMomentum,
    /// `∇̃^k X = Σ g^{qk} ∇̃_q (X ∘ λ) ∘ λ⁻¹` for a momentum-side field.
    VerticalFromVelocity,
    /// `∇_m X = ∇_m (X ∘ λ) ∘ λ⁻¹ + Σ ∇_m V^q ∇̃_q (X ∘ λ) ∘ λ⁻¹`.
    HorizontalFromVelocity,
    /// `∇_m X = ∇_m (X ∘ λ⁻¹) ∘ λ + Σ ∇_m L_q ∇̃^q (X ∘ λ⁻¹) ∘ λ`.
    HorizontalFromMomentum,
}

impl Transport {
    pub const ALL: [Transport; 4] = [
        Transport::VerticalFromMomentum,
        Transport::VerticalFromVelocity,
        Transport::HorizontalFromVelocity,
        Transport::HorizontalFromMomentum,
    ];

    /// Representation in which the test field is given.
    pub fn native(self) -> Rep {
        match self {
            Transport::VerticalFromMomentum | Transport::HorizontalFromMomentum => Rep::V,
            Transport::VerticalFromVelocity | Transport::HorizontalFromVelocity => Rep::P,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Transport::VerticalFromMomentum => "vertical-v-via-p",
            Transport::VerticalFromVelocity => "vertical-p-via-v",
            Transport::HorizontalFromVelocity => "horizontal-p-via-v",
            Transport::HorizontalFromMomentum => "horizontal-v-via-p",
        }
    }
}

/// Evaluates one transport identity for a field given by expressions in the
/// identity's native representation; `y` is a velocity point and the
/// momentum side is taken at `λ(y)`.
pub fn transport_identity(
    s: &SystemDef,
    which: Transport,
    exprs: &[Expression],
    slots: &[Slot],
    y: &PhasePoint,
) -> Result<Comparison> {
    let n = s.n();
    let vf = s.velocity_frame(y)?;
    let z = s.legendre_forward(y)?;
    let mf = s.momentum_frame(&z)?;
    let gamma_v: Vec<f64> = vf.gamma.iter().map(|j| j.value).collect();
    let gamma_p: Vec<f64> = mf.gamma().iter().map(|d| d.re).collect();
    let lam = vf.lambda_map();
    let ncomp = exprs.len();
    match which.native() {
        Rep::V => {
            let x = FieldValue::from_expressions(exprs, slots, y)?;
            let Components::Jet2(jets) = &x.comps else { unreachable!() };
            let native: Vec<Dual> = jets.iter().map(Jet2::to_dual).collect();
            // X ∘ λ⁻¹ over z, evaluated at the velocity point of the momentum frame
            let xm = FieldValue::from_expressions(exprs, slots, &mf.velocity.point)?;
            let Components::Jet2(mjets) = &xm.comps else { unreachable!() };
            let pulled: Vec<Dual> = mjets.iter().map(|j| mf.pull(j)).collect();
            let dp = vertical(n, &pulled);
            match which {
                Transport::VerticalFromMomentum => {
                    let lhs = vertical(n, &native);
                    let mut rhs = vec![0.0; ncomp * n];
                    for f in 0..ncomp {
                        for k in 0..n {
                            rhs[ix2(n, f, k)] =
                                (0..n).map(|q| vf.g[ix2(n, q, k)] * dp[ix2(n, f, q)]).sum();
                        }
                    }
                    Ok(Comparison { lhs, rhs })
                }
                _ => {
                    let lhs = horizontal(n, Rep::V, slots, &native, &gamma_v, &y.fiber);
                    let hp = horizontal(n, Rep::P, slots, &pulled, &gamma_p, &z.fiber);
                    let l: Vec<Dual> = vf.l.iter().map(Jet2::to_dual).collect();
                    let nabla_l = horizontal(n, Rep::V, &[Slot::Down], &l, &gamma_v, &y.fiber);
                    let mut rhs = hp;
                    for f in 0..ncomp {
                        for m in 0..n {
                            rhs[ix2(n, f, m)] += (0..n)
                                .map(|q| nabla_l[ix2(n, q, m)] * dp[ix2(n, f, q)])
                                .sum::<f64>();
                        }
                    }
                    Ok(Comparison { lhs, rhs })
                }
            }
        }
        Rep::P => {
            let x = FieldValue::from_expressions(exprs, slots, &z)?;
            let Components::Jet2(jets) = &x.comps else { unreachable!() };
            let native: Vec<Dual> = jets.iter().map(Jet2::to_dual).collect();
            // X ∘ λ over y
            let pushed: Vec<Dual> = jets.iter().map(|j| Dual::compose(j.value, &j.grad, &lam)).collect();
            let dv = vertical(n, &pushed);
            match which {
                Transport::VerticalFromVelocity => {
                    let lhs = vertical(n, &native);
                    let mut rhs = vec![0.0; ncomp * n];
                    for f in 0..ncomp {
                        for k in 0..n {
                            rhs[ix2(n, f, k)] =
                                (0..n).map(|q| vf.ginv[ix2(n, q, k)] * dv[ix2(n, f, q)]).sum();
                        }
                    }
                    Ok(Comparison { lhs, rhs })
                }
                _ => {
                    let lhs = horizontal(n, Rep::P, slots, &native, &gamma_p, &z.fiber);
                    let hv = horizontal(n, Rep::V, slots, &pushed, &gamma_v, &y.fiber);
                    let vd: Vec<Dual> = mf.v.iter().map(Jet2::to_dual).collect();
                    let nabla_v = horizontal(n, Rep::P, &[Slot::Up], &vd, &gamma_p, &z.fiber);
                    let mut rhs = hv;
                    for f in 0..ncomp {
                        for m in 0..n {
                            rhs[ix2(n, f, m)] += (0..n)
                                .map(|q| nabla_v[ix2(n, q, m)] * dv[ix2(n, f, q)])
                                .sum::<f64>();
                        }
                    }
                    Ok(Comparison { lhs, rhs })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn system() -> SystemDef {
        SystemDef::builder(2)
            .legendre_all(&["v1 + 0.1*v1^3 + 0.2*x2*v2", "v2 + 0.05*v2^3 + 0.1*x1*v1"])
            .force_all(&["-x1", "0.3*v1"])
            .connection_sym(0, 0, 1, "0.1*x2 + 0.05*v1*v2")
            .connection_sym(1, 1, 1, "0.2*x1*v2")
            .connection_sym(0, 0, 0, "0.1*v2^2")
            .build()
            .unwrap()
    }

    #[test]
    fn scalar_horizontal_derivative_by_hand() {
        // X = x1 * v2 with Γ^2_11 = c: ∇_1 X = v2 - v^1 Γ^2_11 x1
        let s = SystemDef::builder(2)
            .legendre_all(&["v1", "v2"])
            .connection(1, 0, 0, "0.5")
            .build()
            .unwrap();
        let pt = PhasePoint::velocity(vec![2.0, 1.0], vec![3.0, 4.0]);
        let x = FieldValue::from_expressions(&[parse("x1*v2", 2).unwrap()], &[], &pt).unwrap();
        let h = horizontal_derivative(&x, &s).unwrap();
        let vals = h.values();
        assert!((vals[0] - (4.0 - 3.0 * 0.5 * 2.0)).abs() < 1e-15);
        assert_eq!(h.slots, vec![Slot::Down]);
        let v = vertical_derivative(&x).unwrap();
        assert_eq!(v.values(), vec![0.0, 2.0]);
        let vv = vertical_derivative(&vertical_derivative(&v).unwrap());
        assert!(matches!(vv, Err(Error::MissingJets)));
    }

    #[test]
    fn vector_correction_terms() {
        // Y^i = (x1, 0): ∇_m Y^i = ∂_m Y^i + Γ^i_{m a} Y^a
        let s = SystemDef::builder(2)
            .legendre_all(&["v1", "v2"])
            .connection_sym(1, 0, 1, "x2")
            .build()
            .unwrap();
        let pt = PhasePoint::velocity(vec![2.0, 3.0], vec![1.0, 1.0]);
        let exprs = [parse("x1", 2).unwrap(), parse("0", 2).unwrap()];
        let h = horizontal_derivative(&FieldValue::from_expressions(&exprs, &[Slot::Up], &pt).unwrap(), &s)
            .unwrap()
            .values();
        // the fiber term: -v^a Γ^b_{a m} ∂_{v^b} Y = 0 here
        assert_eq!(h, vec![1.0, 0.0, 0.0, 3.0 * 2.0]);
    }

    #[test]
    fn curvature_relations_hold() {
        let s = system();
        let y = PhasePoint::velocity(vec![0.3, -0.2], vec![1.1, 0.8]);
        assert!(dynamic_curvature_relation(&s, &y).unwrap().deviation() < 1e-12);
        assert!(curvature_relation(&s, &y).unwrap().deviation() < 1e-11);
    }

    #[test]
    fn transport_identities_hold() {
        let s = system();
        let y = PhasePoint::velocity(vec![0.3, -0.2], vec![1.1, 0.8]);
        let v_field = [parse("sin(x1)*v2^2 + v1", 2).unwrap(), parse("x2*v1*v2", 2).unwrap()];
        let p_field = [parse("cos(x2)*p1^2", 2).unwrap(), parse("p1*p2 + x1", 2).unwrap()];
        for which in Transport::ALL {
            let field = if which.native() == Rep::V { &v_field } else { &p_field };
            for slots in [&[Slot::Up][..], &[Slot::Down][..]] {
                let c = transport_identity(&s, which, field, slots, &y).unwrap();
                assert!(c.deviation() < 1e-11, "{which:?} {slots:?}: {c:?}");
            }
            let c = transport_identity(&s, which, &field[..1], &[], &y).unwrap();
            assert!(c.deviation() < 1e-11, "{which:?} scalar");
        }
    }
}
