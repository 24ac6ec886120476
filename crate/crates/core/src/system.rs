//! Newtonian dynamical systems together with a generalized Legendre map,
//! a symmetric extended connection and an optional gauge tensor.

use crate::error::{Error, Result};
use crate::expr::{parse, Expression};
use crate::jet::{Dual, Jet2};
use crate::linalg::{invert, ix2, ix3, max_abs, relative_deviation};
use crate::phase::{PhasePoint, Rep};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const SYMMETRY_TOL: f64 = 1e-12;
const INVERSE_CONSISTENCY_TOL: f64 = 1e-8;

/// How the Legendre map `p = L(x, v)` is supplied.
#[derive(Clone, Debug, PartialEq)]
pub enum LegendreMap {
    /// One expression per component `L_i(x, v)`.
    Components(Vec<Expression>),
    /// A scalar Lagrangian; `L_i` is its derivative along `v^i`.
    Lagrangian(Expression),
}

/// Deliberate formula defects used to show that the cross-checks bite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Flips the sign of the `L^r ∇_k F_r` term of the velocity-side `β`.
    FlipBetaForceTerm,
}

/// A validated system definition.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDef {
    pub name: String,
    n: usize,
    legendre: LegendreMap,
    force: Vec<Expression>,
    connection: Vec<Expression>,
    inverse: Option<Vec<Expression>>,
    gauge: Option<Vec<Expression>>,
    newton_scale: f64,
    mutation: Option<Mutation>,
}

/// Collects expression sources and parses them in [`SystemBuilder::build`].
#[derive(Clone, Debug)]
pub struct SystemBuilder {
    n: usize,
    name: String,
    legendre: Vec<Option<String>>,
    lagrangian: Option<String>,
    force: Vec<Option<String>>,
    connection: Vec<Option<String>>,
    inverse: Vec<Option<String>>,
    gauge: Vec<Option<String>>,
    newton_scale: f64,
    mutation: Option<Mutation>,
}

impl SystemBuilder {
    pub fn new(n: usize) -> Self {
        SystemBuilder {
            n,
            name: String::from("system"),
            legendre: vec![None; n],
            lagrangian: None,
            force: vec![None; n],
            connection: vec![None; n * n * n],
            inverse: vec![None; n],
            gauge: vec![None; n * n * n],
            newton_scale: 1.0,
            mutation: None,
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Sets `L_i` (0-based `i`).
    pub fn legendre(mut self, i: usize, src: &str) -> Self {
        self.legendre[i] = Some(src.to_owned());
        self
    }

    pub fn legendre_all(mut self, srcs: &[&str]) -> Self {
        for (i, s) in srcs.iter().enumerate() {
            self.legendre[i] = Some((*s).to_owned());
        }
        self
    }

    pub fn lagrangian(mut self, src: &str) -> Self {
        self.lagrangian = Some(src.to_owned());
        self
    }

    /// Sets `Φ^i`.
    pub fn force(mut self, i: usize, src: &str) -> Self {
        self.force[i] = Some(src.to_owned());
        self
    }

    pub fn force_all(mut self, srcs: &[&str]) -> Self {
        for (i, s) in srcs.iter().enumerate() {
            self.force[i] = Some((*s).to_owned());
        }
        self
    }

    /// Sets the single component `Γ^k_ij`.
    pub fn connection(mut self, k: usize, i: usize, j: usize, src: &str) -> Self {
        self.connection[ix3(self.n, k, i, j)] = Some(src.to_owned());
        self
    }

    /// Sets `Γ^k_ij` and `Γ^k_ji` together.
    pub fn connection_sym(self, k: usize, i: usize, j: usize, src: &str) -> Self {
        self.connection(k, i, j, src).connection(k, j, i, src)
    }

    /// Sets `V^i(x, p)`, the explicit inverse of the Legendre map.
    pub fn inverse(mut self, i: usize, src: &str) -> Self {
        self.inverse[i] = Some(src.to_owned());
        self
    }

    pub fn inverse_all(mut self, srcs: &[&str]) -> Self {
        for (i, s) in srcs.iter().enumerate() {
            self.inverse[i] = Some((*s).to_owned());
        }
        self
    }

    /// Sets the single gauge component `T^k_ij`.
    pub fn gauge(mut self, k: usize, i: usize, j: usize, src: &str) -> Self {
        self.gauge[ix3(self.n, k, i, j)] = Some(src.to_owned());
        self
    }

    pub fn gauge_sym(self, k: usize, i: usize, j: usize, src: &str) -> Self {
        self.gauge(k, i, j, src).gauge(k, j, i, src)
    }

    /// Initial Newton guess for the inverse map is `v0 = scale * p`.
    pub fn newton_scale(mut self, scale: f64) -> Self {
        self.newton_scale = scale;
        self
    }

    pub fn mutation(mut self, m: Option<Mutation>) -> Self {
        self.mutation = m;
        self
    }

    pub fn build(self) -> Result<SystemDef> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        let parse_as = |src: &str, what: &str, allowed: Rep| -> Result<Expression> {
            let e = parse(src, n)?;
            match e.fiber() {
                Some(r) if r != allowed => Err(Error::Validation(format!(
                    "{what} must not use {}-variables",
                    r.letter()
                ))),
                _ => Ok(e),
            }
        };
        let legendre = match (&self.lagrangian, self.legendre.iter().any(Option::is_some)) {
            (Some(_), true) => {
                return Err(Error::Validation(
                    "give either a Lagrangian or Legendre components, not both".into(),
                ))
            }
            (Some(src), false) => LegendreMap::Lagrangian(parse_as(src, "Lagrangian", Rep::V)?),
            (None, _) => {
                let mut comps = Vec::with_capacity(n);
                for (i, s) in self.legendre.iter().enumerate() {
                    let src = s.as_deref().ok_or_else(|| {
                        Error::Validation(format!("missing Legendre component L{}", i + 1))
                    })?;
                    comps.push(parse_as(src, &format!("L{}", i + 1), Rep::V)?);
                }
                LegendreMap::Components(comps)
            }
        };
        let parse_or_zero = |s: &Option<String>, what: String, rep: Rep| match s {
            Some(src) => parse_as(src, &what, rep),
            None => Ok(Expression::zero(n)),
        };
        let force = (0..n)
            .map(|i| parse_or_zero(&self.force[i], format!("Phi{}", i + 1), Rep::V))
            .collect::<Result<Vec<_>>>()?;
        let tensor = |slots: &[Option<String>], letter: &str| -> Result<Vec<Expression>> {
            let mut out = Vec::with_capacity(n * n * n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let what = format!("{letter}_{}_{}{}", k + 1, i + 1, j + 1);
                        out.push(parse_or_zero(&slots[ix3(n, k, i, j)], what, Rep::V)?);
                    }
                }
            }
            Ok(out)
        };
        let connection = tensor(&self.connection, "Gamma")?;
        let gauge = if self.gauge.iter().any(Option::is_some) {
            Some(tensor(&self.gauge, "T")?)
        } else {
            None
        };
        let inverse = if self.inverse.iter().any(Option::is_some) {
            let mut comps = Vec::with_capacity(n);
            for (i, s) in self.inverse.iter().enumerate() {
                let src = s.as_deref().ok_or_else(|| {
                    Error::Validation(format!("missing inverse component V{}", i + 1))
                })?;
                comps.push(parse_as(src, &format!("V{}", i + 1), Rep::P)?);
            }
            Some(comps)
        } else {
            None
        };
        Ok(SystemDef {
            name: self.name,
            n,
            legendre,
            force,
            connection,
            inverse,
            gauge,
            newton_scale: self.newton_scale,
            mutation: self.mutation,
        })
    }
}

/// User-supplied data evaluated as second-order jets over `(x, v)`.
#[derive(Clone, Debug)]
pub struct VelocityFrame {
    pub point: PhasePoint,
    /// `L_i`.
    pub l: Vec<Jet2>,
    /// `Φ^i`.
    pub phi: Vec<Jet2>,
    /// `Γ^k_ij` at `ix3(n, k, i, j)`.
    pub gamma: Vec<Jet2>,
    pub gauge: Option<Vec<Jet2>>,
    /// `g_qk = ∂L_q/∂v^k` at `ix2(n, q, k)`.
    pub g: Vec<f64>,
    /// `g^{qk}`, the matrix inverse of `g`.
    pub ginv: Vec<f64>,
    pub condition: f64,
}

impl VelocityFrame {
    pub fn n(&self) -> usize {
        self.point.dim()
    }

    /// The Legendre map `y ↦ (x, L(y))` as first-order jets over `y`.
    pub fn lambda_map(&self) -> Vec<Dual> {
        let n = self.n();
        (0..n)
            .map(|i| Dual::variable(self.point.x[i], i, 2 * n))
            .chain(self.l.iter().map(Jet2::to_dual))
            .collect()
    }

    /// The image of the point under the Legendre map.
    pub fn momentum(&self) -> Vec<f64> {
        self.l.iter().map(|j| j.value).collect()
    }
}

/// Data at a momentum-side point `z = (x, p)`, built from the inverse map.
#[derive(Clone, Debug)]
pub struct MomentumFrame {
    pub point: PhasePoint,
    /// Data at `y = (x, V(z))`.
    pub velocity: VelocityFrame,
    /// `V^k` as second-order jets over `z`.
    pub v: Vec<Jet2>,
    /// `z ↦ (x, V(z))` as first-order jets over `z`.
    pub map: Vec<Dual>,
    pub newton_iterations: usize,
}

impl MomentumFrame {
    pub fn n(&self) -> usize {
        self.point.dim()
    }

    /// Pulls a jet given over `y` back to a first-order jet over `z`.
    pub fn pull(&self, f: &Jet2) -> Dual {
        Dual::compose(f.value, &f.grad, &self.map)
    }

    /// `Γ^k_ij ∘ λ⁻¹`.
    pub fn gamma(&self) -> Vec<Dual> {
        self.velocity.gamma.iter().map(|g| self.pull(g)).collect()
    }

    pub fn gauge(&self) -> Option<Vec<Dual>> {
        self.velocity.gauge.as_ref().map(|t| t.iter().map(|g| self.pull(g)).collect())
    }

    /// The momentum-side force `Θ_i`, as first-order jets over `z`.
    pub fn theta(&self) -> Vec<Dual> {
        let n = self.n();
        let vf = &self.velocity;
        let vel: Vec<Dual> = self.v.iter().map(Jet2::to_dual).collect();
        let phi: Vec<Dual> = vf.phi.iter().map(|f| self.pull(f)).collect();
        (0..n)
            .map(|i| {
                let mut t = Dual::constant(0.0, 2 * n);
                for s in 0..n {
                    t.add_mul(&vf.l[i].partial_dual_through(s, &self.map), &vel[s]);
                    t.add_mul(&vf.l[i].partial_dual_through(n + s, &self.map), &phi[s]);
                }
                t
            })
            .collect()
    }

    /// `∂V^q/∂p_k` at `ix2(n, q, k)`.
    pub fn dv_dp(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for q in 0..n {
            for k in 0..n {
                out[ix2(n, q, k)] = self.v[q].grad[n + k];
            }
        }
        out
    }
}

/// The pair `g_qk`, `g^{qk}` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricPair {
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub condition: f64,
}

fn eval_jets(exprs: &[Expression], pt: &PhasePoint) -> Result<Vec<Jet2>> {
    exprs.iter().map(|e| e.eval_jet(pt).map_err(Error::from)).collect()
}

impl SystemDef {
    pub fn builder(n: usize) -> SystemBuilder {
        SystemBuilder::new(n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn legendre_map(&self) -> &LegendreMap {
        &self.legendre
    }

    pub fn force(&self) -> &[Expression] {
        &self.force
    }

    pub fn connection(&self) -> &[Expression] {
        &self.connection
    }

    pub fn gauge(&self) -> Option<&[Expression]> {
        self.gauge.as_deref()
    }

    pub fn inverse(&self) -> Option<&[Expression]> {
        self.inverse.as_deref()
    }

    pub fn mutation(&self) -> Option<Mutation> {
        self.mutation
    }

    pub fn newton_scale(&self) -> f64 {
        self.newton_scale
    }

    /// A copy with the connection replaced.
    pub fn with_connection(&self, connection: Vec<Expression>) -> SystemDef {
        assert_eq!(connection.len(), self.n.pow(3));
        SystemDef { connection, ..self.clone() }
    }

    pub fn with_gauge(&self, gauge: Option<Vec<Expression>>) -> SystemDef {
        SystemDef { gauge, ..self.clone() }
    }

    pub fn with_mutation(&self, mutation: Option<Mutation>) -> SystemDef {
        SystemDef { mutation, ..self.clone() }
    }

    fn check_rep(&self, pt: &PhasePoint, rep: Rep) -> Result<()> {
        if pt.dim() != self.n {
            return Err(crate::error::EvalError::DimensionMismatch { expected: self.n, found: pt.dim() }.into());
        }
        if pt.rep != rep {
            return Err(crate::error::EvalError::RepresentationMismatch {
                expected: rep.letter(),
                found: pt.rep.letter(),
            }
            .into());
        }
        Ok(())
    }

    /// `L_i` as second-order jets over `(x, v)`.
    pub fn legendre_jets(&self, pt: &PhasePoint) -> Result<Vec<Jet2>> {
        self.check_rep(pt, Rep::V)?;
        match &self.legendre {
            LegendreMap::Components(c) => eval_jets(c, pt),
            LegendreMap::Lagrangian(lag) => lagrangian_to_legendre(lag, pt),
        }
    }

    /// All user data at a velocity point, with the metric pair.
    pub fn velocity_frame(&self, pt: &PhasePoint) -> Result<VelocityFrame> {
        let l = self.legendre_jets(pt)?;
        let n = self.n;
        let g = metric_from_jets(n, &l);
        let (ginv, condition) = invert(n, &g)?;
        Ok(VelocityFrame {
            point: pt.clone(),
            phi: eval_jets(&self.force, pt)?,
            gamma: eval_jets(&self.connection, pt)?,
            gauge: self.gauge.as_ref().map(|t| eval_jets(t, pt)).transpose()?,
            l,
            g,
            ginv,
            condition,
        })
    }

    /// `λ(x, v) = (x, L(x, v))`.
    pub fn legendre_forward(&self, pt: &PhasePoint) -> Result<PhasePoint> {
        self.check_rep(pt, Rep::V)?;
        let p = match &self.legendre {
            LegendreMap::Components(c) => {
                c.iter().map(|e| e.eval(pt).map_err(Error::from)).collect::<Result<Vec<_>>>()?
            }
            LegendreMap::Lagrangian(_) => self.legendre_jets(pt)?.iter().map(|j| j.value).collect(),
        };
        Ok(PhasePoint::momentum(pt.x.clone(), p))
    }

    /// `λ⁻¹(x, p) = (x, V(x, p))`.
    pub fn legendre_inverse(&self, pt: &PhasePoint) -> Result<PhasePoint> {
        self.check_rep(pt, Rep::P)?;
        let v = match &self.inverse {
            Some(c) => c.iter().map(|e| e.eval(pt).map_err(Error::from)).collect::<Result<Vec<_>>>()?,
            None => self.newton(pt)?.0,
        };
        Ok(PhasePoint::velocity(pt.x.clone(), v))
    }

    /// Solves `L(x, v) = p` by Newton iteration from `v0 = scale * p`.
    fn newton(&self, pt: &PhasePoint) -> Result<(Vec<f64>, usize)> {
        let n = self.n;
        let p = &pt.fiber;
        let tol = NEWTON_TOL * max_abs(p).max(1.0);
        let mut v: Vec<f64> = p.iter().map(|c| c * self.newton_scale).collect();
        let mut residual = f64::INFINITY;
        for iter in 0..=NEWTON_MAX_ITER {
            let y = PhasePoint::velocity(pt.x.clone(), v.clone());
            let l = self.legendre_jets(&y)?;
            let r: Vec<f64> = (0..n).map(|i| l[i].value - p[i]).collect();
            residual = max_abs(&r);
            if residual <= tol {
                return Ok((v, iter));
            }
            if iter == NEWTON_MAX_ITER || !residual.is_finite() {
                break;
            }
            let g = metric_from_jets(n, &l);
            let (ginv, _) = invert(n, &g)?;
            for k in 0..n {
                v[k] -= (0..n).map(|i| ginv[ix2(n, k, i)] * r[i]).sum::<f64>();
            }
        }
        Err(Error::NonConvergence { iterations: NEWTON_MAX_ITER, residual })
    }

    /// Everything needed on the momentum side at `z = (x, p)`.
    ///
    /// With an explicit inverse the jets of `V` come from its expressions;
    /// otherwise they follow from implicit differentiation of `L(x, V) = p`.
    pub fn momentum_frame(&self, pt: &PhasePoint) -> Result<MomentumFrame> {
        self.check_rep(pt, Rep::P)?;
        let n = self.n;
        let m = 2 * n;
        let (v, iterations) = match &self.inverse {
            Some(c) => (eval_jets(c, pt)?, 0),
            None => {
                let (vel, it) = self.newton(pt)?;
                let y = PhasePoint::velocity(pt.x.clone(), vel);
                let l = self.legendre_jets(&y)?;
                (implicit_inverse_jets(n, &y.fiber, &l)?, it)
            }
        };
        let y = PhasePoint::velocity(pt.x.clone(), v.iter().map(|j| j.value).collect());
        let velocity = self.velocity_frame(&y)?;
        let map = (0..n)
            .map(|i| Dual::variable(pt.x[i], i, m))
            .chain(v.iter().map(Jet2::to_dual))
            .collect();
        Ok(MomentumFrame { point: pt.clone(), velocity, v, map, newton_iterations: iterations })
    }

    /// `g_qk` and `g^{qk}` at a point of either representation.
    ///
    /// `g^{qk}` is `∂V^q/∂p_k`; with an explicit inverse it comes from the
    /// user's expressions, so `g g⁻¹ = I` is a genuine consistency check.
    pub fn metric_pair(&self, pt: &PhasePoint) -> Result<MetricPair> {
        let (zp, yp) = match pt.rep {
            Rep::V => (self.legendre_forward(pt)?, pt.clone()),
            Rep::P => (pt.clone(), self.legendre_inverse(pt)?),
        };
        let n = self.n;
        let g = metric_from_jets(n, &self.legendre_jets(&yp)?);
        let (inv, condition) = invert(n, &g)?;
        let ginv = match &self.inverse {
            Some(c) => {
                let jets = eval_jets(c, &zp)?;
                let mut out = vec![0.0; n * n];
                for q in 0..n {
                    for k in 0..n {
                        out[ix2(n, q, k)] = jets[q].grad[n + k];
                    }
                }
                out
            }
            None => inv,
        };
        Ok(MetricPair { g, ginv, condition })
    }

    /// `Θ_i` at a momentum point.
    pub fn theta_from_phi(&self, pt: &PhasePoint) -> Result<Vec<f64>> {
        Ok(self.momentum_frame(pt)?.theta().iter().map(|d| d.re).collect())
    }

    /// `F^i = Φ^i + Γ^i_jk v^j v^k`.
    pub fn force_vector(&self, pt: &PhasePoint) -> Result<Vec<f64>> {
        self.check_rep(pt, Rep::V)?;
        let n = self.n;
        let v = &pt.fiber;
        let mut f = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = self.force[i].eval(pt)?;
            for j in 0..n {
                for k in 0..n {
                    s += self.connection[ix3(n, i, j, k)].eval(pt)? * v[j] * v[k];
                }
            }
            f.push(s);
        }
        Ok(f)
    }

    /// `F_i = Σ g_ik F^k`.
    pub fn force_covector(&self, pt: &PhasePoint) -> Result<Vec<f64>> {
        let f = self.force_vector(pt)?;
        let n = self.n;
        let g = metric_from_jets(n, &self.legendre_jets(pt)?);
        Ok(lower(n, &g, &f))
    }

    /// Fixed interior points used by [`SystemDef::validate`].
    pub fn default_validation_points(n: usize) -> Vec<PhasePoint> {
        (0..6)
            .map(|k| {
                let k = k as f64;
                let x = (0..n).map(|i| 0.8 * (1.7 * k + 0.9 * i as f64 + 0.3).sin()).collect();
                let v = (0..n).map(|i| 1.0 + 0.4 * (2.3 * k + 1.1 * i as f64).cos()).collect();
                PhasePoint::velocity(x, v)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(&SystemDef::default_validation_points(self.n))
    }

    /// Load-time checks at the given velocity points: symmetry of the
    /// connection and gauge tensor, `L(x, 0) = 0`, and agreement of an
    /// explicit inverse with the Legendre map.
    pub fn validate_at(&self, points: &[PhasePoint]) -> Result<()> {
        let n = self.n;
        for pt in points {
            let dev = symmetry_defect(n, &self.connection, pt)?;
            if dev > SYMMETRY_TOL {
                return Err(Error::Validation(format!(
                    "connection is not symmetric in its lower indices (deviation {dev:.3e})"
                )));
            }
            self.check_gauge_symmetry_at(pt)?;
            let zero = PhasePoint::velocity(pt.x.clone(), vec![0.0; n]);
            let p0 = self.legendre_forward(&zero)?;
            let worst = max_abs(&p0.fiber);
            if worst > SYMMETRY_TOL {
                return Err(Error::Validation(format!(
                    "Legendre map does not send v = 0 to p = 0 (|L| = {worst:.3e})"
                )));
            }
            if self.inverse.is_some() {
                let z = self.legendre_forward(pt)?;
                let back = self.legendre_inverse(&z)?;
                let again = self.legendre_forward(&back)?;
                let dev = relative_deviation(&again.fiber, &z.fiber);
                if dev > INVERSE_CONSISTENCY_TOL {
                    return Err(Error::Validation(format!(
                        "explicit inverse is inconsistent with the Legendre map (deviation {dev:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_gauge_symmetry_at(&self, pt: &PhasePoint) -> Result<()> {
        if let Some(t) = &self.gauge {
            let dev = symmetry_defect(self.n, t, pt)?;
            if dev > SYMMETRY_TOL {
                return Err(Error::AsymmetricGauge { deviation: dev });
            }
        }
        Ok(())
    }
}

fn symmetry_defect(n: usize, t: &[Expression], pt: &PhasePoint) -> Result<f64> {
    let vals = t.iter().map(|e| e.eval(pt)).collect::<std::result::Result<Vec<_>, _>>()?;
    let scale = 1.0 + max_abs(&vals);
    let mut dev: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..i {
                dev = dev.max((vals[ix3(n, k, i, j)] - vals[ix3(n, k, j, i)]).abs());
            }
        }
    }
    Ok(dev / scale)
}

/// `g_qk = ∂L_q/∂v^k` from jets of `L` over `(x, v)`.
pub fn metric_from_jets(n: usize, l: &[Jet2]) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for q in 0..n {
        for k in 0..n {
            g[ix2(n, q, k)] = l[q].grad[n + k];
        }
    }
    g
}

/// `X_q = Σ g_qi X^i`.
pub fn lower(n: usize, g: &[f64], up: &[f64]) -> Vec<f64> {
    (0..n).map(|q| (0..n).map(|i| g[ix2(n, q, i)] * up[i]).sum()).collect()
}

/// `X^i = Σ X_q g^{qi}`.
pub fn raise(n: usize, ginv: &[f64], down: &[f64]) -> Vec<f64> {
    (0..n).map(|i| (0..n).map(|q| down[q] * ginv[ix2(n, q, i)]).sum()).collect()
}

/// `L_i = ∂Lag/∂v^i` as second-order jets, using third derivatives of the
/// Lagrangian obtained from nested jets.
pub fn lagrangian_to_legendre(lag: &Expression, pt: &PhasePoint) -> Result<Vec<Jet2>> {
    let n = pt.dim();
    let m = 2 * n;
    let coords = pt.coords();
    let zero = Jet2::constant_from(Dual::constant(0.0, m), m);
    let f = lag.eval_with(
        &|var| {
            let c = match var.kind {
                crate::expr::VarKind::X => var.index,
                _ => n + var.index,
            };
            Jet2::variable_from(Dual::variable(coords[c], c, m), c, m)
        },
        &zero,
    )?;
    Ok((0..n)
        .map(|i| {
            let a = n + i;
            let grad = (0..m).map(|c| f.grad[a].grad[c]).collect();
            Jet2::from_parts(f.grad[a].re, grad, |c, d| f.hess(a, c).grad[d])
        })
        .collect())
}

/// Jets of `V` over `z = (x, p)` from jets of `L` over `y = (x, V(z))`.
fn implicit_inverse_jets(n: usize, v: &[f64], l: &[Jet2]) -> Result<Vec<Jet2>> {
    let m = 2 * n;
    let g = metric_from_jets(n, l);
    let (ginv, _) = invert(n, &g)?;
    // y = φ(z); jac[c][a] = ∂y_c/∂z_a
    let mut jac = vec![0.0; m * m];
    for c in 0..n {
        jac[ix2(m, c, c)] = 1.0;
    }
    for k in 0..n {
        for a in 0..n {
            jac[ix2(m, n + k, a)] = -(0..n).map(|i| ginv[ix2(n, k, i)] * l[i].grad[a]).sum::<f64>();
        }
        for j in 0..n {
            jac[ix2(m, n + k, n + j)] = ginv[ix2(n, k, j)];
        }
    }
    // s[i][a][b] = Σ_cd ∂²L_i/∂y_c∂y_d jac[c][a] jac[d][b]
    let mut s = vec![0.0; n * m * m];
    for i in 0..n {
        let mut hj = vec![0.0; m * m];
        for c in 0..m {
            for b in 0..m {
                hj[ix2(m, c, b)] = (0..m).map(|d| *l[i].hess(c, d) * jac[ix2(m, d, b)]).sum();
            }
        }
        for a in 0..m {
            for b in a..m {
                let v: f64 = (0..m).map(|c| jac[ix2(m, c, a)] * hj[ix2(m, c, b)]).sum();
                s[(i * m + a) * m + b] = v;
                s[(i * m + b) * m + a] = v;
            }
        }
    }
    Ok((0..n)
        .map(|k| {
            let grad = (0..m).map(|a| jac[ix2(m, n + k, a)]).collect();
            Jet2::from_parts(v[k], grad, |a, b| {
                -(0..n).map(|i| ginv[ix2(n, k, i)] * s[(i * m + a) * m + b]).sum::<f64>()
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> SystemDef {
        SystemDef::builder(2)
            .legendre_all(&["v1 + 0.1*v1^3 + 0.2*x2*v2", "v2 + 0.05*v2^3 + 0.1*x1*v1"])
            .force_all(&["-x1 + 0.1*v2", "sin(x1)*v1"])
            .connection_sym(0, 0, 1, "0.1*x2 + 0.05*v1")
            .connection_sym(1, 1, 1, "0.2*x1*v2")
            .build()
            .unwrap()
    }

    #[test]
    fn builder_rejects_wrong_representation() {
        let e = SystemDef::builder(1).legendre(0, "p1").build();
        assert!(matches!(e, Err(Error::Validation(_))));
        let e = SystemDef::builder(1).legendre(0, "v1").inverse(0, "v1").build();
        assert!(matches!(e, Err(Error::Validation(_))));
    }

    #[test]
    fn identity_round_trip() {
        let s = SystemDef::builder(2).legendre_all(&["v1", "v2"]).build().unwrap();
        let pt = PhasePoint::velocity(vec![0.1, 0.2], vec![1.5, -0.5]);
        let z = s.legendre_forward(&pt).unwrap();
        assert_eq!(z.fiber, vec![1.5, -0.5]);
        let m = s.metric_pair(&z).unwrap();
        assert_eq!(m.g, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn newton_inverse_round_trip() {
        let s = cubic();
        s.validate().unwrap();
        let pt = PhasePoint::velocity(vec![0.3, -0.4], vec![1.2, 0.7]);
        let z = s.legendre_forward(&pt).unwrap();
        let back = s.legendre_inverse(&z).unwrap();
        assert!(relative_deviation(&back.fiber, &pt.fiber) < 1e-12);
    }

    #[test]
    fn implicit_jets_match_finite_differences() {
        let s = cubic();
        let z = PhasePoint::momentum(vec![0.3, -0.4], vec![1.1, 0.9]);
        let mf = s.momentum_frame(&z).unwrap();
        let h = 1e-5;
        let coords = z.coords();
        let v_at = |c: &[f64]| {
            s.legendre_inverse(&PhasePoint::momentum(c[..2].to_vec(), c[2..].to_vec())).unwrap().fiber
        };
        for a in 0..4 {
            let mut up = coords.clone();
            let mut dn = coords.clone();
            up[a] += h;
            dn[a] -= h;
            let (vu, vd) = (v_at(&up), v_at(&dn));
            for k in 0..2 {
                let fd = (vu[k] - vd[k]) / (2.0 * h);
                assert!((fd - mf.v[k].grad[a]).abs() < 1e-8, "dV{k}/dz{a}");
            }
            // second derivatives from differences of first derivatives
            let ju = s.momentum_frame(&PhasePoint::momentum(up[..2].to_vec(), up[2..].to_vec())).unwrap();
            let jd = s.momentum_frame(&PhasePoint::momentum(dn[..2].to_vec(), dn[2..].to_vec())).unwrap();
            for k in 0..2 {
                for b in 0..4 {
                    let fd = (ju.v[k].grad[b] - jd.v[k].grad[b]) / (2.0 * h);
                    assert!((fd - mf.v[k].hess(a, b)).abs() < 1e-7, "d2V{k}/dz{a}dz{b}");
                }
            }
        }
    }

    #[test]
    fn lagrangian_route_matches_components() {
        let lag = SystemDef::builder(2)
            .lagrangian("0.5*(v1^2 + v2^2) + 0.1*x1*v1^2*v2 + 0.02*v2^4")
            .build()
            .unwrap();
        let comp = SystemDef::builder(2)
            .legendre_all(&["v1 + 0.2*x1*v1*v2", "v2 + 0.1*x1*v1^2 + 0.08*v2^3"])
            .build()
            .unwrap();
        let pt = PhasePoint::velocity(vec![0.7, -0.2], vec![0.9, 1.3]);
        let a = lag.legendre_jets(&pt).unwrap();
        let b = comp.legendre_jets(&pt).unwrap();
        for i in 0..2 {
            assert!((a[i].value - b[i].value).abs() < 1e-14);
            for c in 0..4 {
                assert!((a[i].grad[c] - b[i].grad[c]).abs() < 1e-14);
                for d in 0..4 {
                    assert!((a[i].hess(c, d) - b[i].hess(c, d)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn theta_inverts_phi_relation() {
        // Φ = ∂V/∂x V + ∂V/∂p Θ, rearranged: Θ = g (Φ - ∂V/∂x V)
        let s = cubic();
        let z = PhasePoint::momentum(vec![0.2, 0.5], vec![0.8, 1.4]);
        let mf = s.momentum_frame(&z).unwrap();
        let theta = s.theta_from_phi(&z).unwrap();
        let n = 2;
        let v: Vec<f64> = mf.v.iter().map(|j| j.value).collect();
        let y = PhasePoint::velocity(z.x.clone(), v.clone());
        let phi: Vec<f64> = s.force().iter().map(|e| e.eval(&y).unwrap()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|k| phi[k] - (0..n).map(|s_| mf.v[k].grad[s_] * v[s_]).sum::<f64>())
            .collect();
        let want = lower(n, &mf.velocity.g, &rhs);
        assert!(relative_deviation(&theta, &want) < 1e-13);
    }

    #[test]
    fn validation_failures() {
        let s = SystemDef::builder(2)
            .legendre_all(&["v1", "v2"])
            .connection(0, 0, 1, "x1")
            .build()
            .unwrap();
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
        let s = SystemDef::builder(1).legendre(0, "v1 + 1").build().unwrap();
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
        let s = SystemDef::builder(1).legendre(0, "v1").inverse(0, "2*p1").build().unwrap();
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
        let s = SystemDef::builder(2)
            .legendre_all(&["v1", "v2"])
            .gauge(1, 0, 1, "v1")
            .build()
            .unwrap();
        assert!(matches!(s.validate(), Err(Error::AsymmetricGauge { .. })));
    }

    #[test]
    fn singular_metric_is_reported() {
        let s = SystemDef::builder(2).legendre_all(&["v1 + v2", "v1 + v2"]).build().unwrap();
        let pt = PhasePoint::velocity(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(matches!(s.velocity_frame(&pt), Err(Error::SingularMetric { .. })));
    }
}
