//! Gauge transformations of the extended connection, the connection-free
//! mode, and numerical integration of normal shifts of hypersurfaces.

use rayon::prelude::*;

use crate::calculus::{horizontal, vertical, Slot};
use crate::error::{Error, Result};
use crate::expr::{Expression, Scope};
use crate::jet::{Dual, Jet2, Scalar};
use crate::linalg::{ix2, ix3, ix4, relative_deviation, singular_values};
use crate::normality::{residuals, NormalityBundle, Residual, VelocityFields};
use crate::ode::{integrate, OdeOptions};
use crate::phase::{PhasePoint, Rep};
use crate::system::SystemDef;

/// The system with `Γ` replaced by `Γ + T`; the force `Φ` is unchanged.
pub fn apply_gauge(s: &SystemDef) -> Result<SystemDef> {
    let t = s.gauge().ok_or(Error::MissingGaugeTensor)?;
    for pt in SystemDef::default_validation_points(s.n()) {
        s.check_gauge_symmetry_at(&pt)?;
    }
    let conn = s.connection().iter().zip(t).map(|(g, t)| Expression::sum(g, t)).collect();
    Ok(s.with_connection(conn).with_gauge(None))
}

/// The system with `Γ = 0`, so that `F = Φ` and all covariant derivatives
/// reduce to partial ones.
pub fn connection_free_mode(s: &SystemDef) -> SystemDef {
    let zero = vec![Expression::zero(s.n()); s.n().pow(3)];
    s.with_connection(zero).with_gauge(None)
}

/// What a gauge comparison asserts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GaugeKind {
    /// The quantity does not change at all.
    Invariant,
    /// The change matches a transformation rule.
    Rule,
    /// A normality residual before and after; unchanged only where the
    /// lower equations hold.
    Residual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeRow {
    pub id: String,
    pub kind: GaugeKind,
    pub deviation: f64,
    /// Residuals that must vanish before the gauge change for this row to
    /// be expected to vanish. Empty for unconditional statements.
    pub requires: &'static [&'static str],
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeReport {
    pub point: PhasePoint,
    pub rows: Vec<GaugeRow>,
    pub before: Vec<Residual>,
    pub after: Vec<Residual>,
}

impl GaugeReport {
    pub fn max_deviation(&self, kind: GaugeKind) -> f64 {
        self.rows.iter().filter(|r| r.kind == kind).map(|r| r.deviation).fold(0.0, f64::max)
    }
}

fn antisym(n: usize, t: &[f64]) -> Vec<f64> {
    (0..n * n).map(|idx| t[idx] - t[ix2(n, idx % n, idx / n)]).collect()
}

/// Compares the velocity-side fields before and after the gauge
/// transformation at `y`, against the exact invariants and the
/// transformation rules. Correction terms use un-gauged fields.
pub fn gauge_invariance_report(s: &SystemDef, y: &PhasePoint) -> Result<GaugeReport> {
    let n = s.n();
    let gauged = apply_gauge(s)?;
    let vf = s.velocity_frame(y)?;
    let f0 = VelocityFields::compute(s, y)?;
    let f1 = VelocityFields::compute(&gauged, y)?;
    let b0: NormalityBundle = f0.bundle(s.mutation());
    let b1: NormalityBundle = f1.bundle(s.mutation());

    let tj = vf.gauge.as_ref().ok_or(Error::MissingGaugeTensor)?;
    let tv: Vec<f64> = tj.iter().map(|j| j.value).collect();
    let td: Vec<Dual> = tj.iter().map(Jet2::to_dual).collect();
    let t = |k, i, j| tv[ix3(n, k, i, j)];
    // ∇_m T^k_ij at ix4(k, i, j, m), with the un-gauged connection
    let nt = horizontal(n, Rep::V, &[Slot::Up, Slot::Down, Slot::Down], &td, &f0.gamma, &y.fiber);
    // ∂T^k_ij/∂v^m at ix4(k, i, j, m)
    let vt = vertical(n, &td);
    let (l, lu, v, p) = (&f0.l, &f0.l_up, &y.fiber, &b0.projector);
    let d0 = |k, r, i, j| f0.d[ix4(n, k, r, i, j)];

    let mut rows = Vec::new();
    let mut push = |id: &str, kind, a: &[f64], b: &[f64]| {
        rows.push(GaugeRow { id: id.to_owned(), kind, deviation: relative_deviation(a, b), requires: &[] });
    };

    push("invariant-g", GaugeKind::Invariant, &f0.g, &f1.g);
    push("invariant-L", GaugeKind::Invariant, &f0.l, &f1.l);
    push("invariant-L-up", GaugeKind::Invariant, &f0.l_up, &f1.l_up);
    push("invariant-W", GaugeKind::Invariant, &b0.w, &b1.w);
    push("invariant-Omega", GaugeKind::Invariant, &[b0.omega], &[b1.omega]);
    push("invariant-P", GaugeKind::Invariant, &b0.projector, &b1.projector);
    push("invariant-A", GaugeKind::Invariant, &b0.a, &b1.a);
    push("invariant-alpha", GaugeKind::Invariant, &b0.alpha, &b1.alpha);

    // U' = U + Σ L^q T^r_iq L_r
    let u_rule: Vec<f64> = (0..n)
        .map(|i| {
            let mut x = f0.u[i];
            for q in 0..n {
                for r in 0..n {
                    x += lu[q] * t(r, i, q) * l[r];
                }
            }
            x
        })
        .collect();
    push("rule-U", GaugeKind::Rule, &f1.u, &u_rule);

    // D' = D - ∂T^k_ir/∂v^j
    let mut d_rule = f0.d.clone();
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d_rule[ix4(n, k, r, i, j)] -= vt[ix4(n, k, i, r, j)];
                }
            }
        }
    }
    push("rule-D", GaugeKind::Rule, &f1.d, &d_rule);

    let mut r_rule = f0.r.clone();
    for k in 0..n {
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut x = nt[ix4(n, k, j, r, i)] - nt[ix4(n, k, i, r, j)];
                    for m in 0..n {
                        x += t(k, i, m) * t(m, j, r) - t(k, j, m) * t(m, i, r);
                        for s_ in 0..n {
                            x -= v[m] * t(s_, j, m) * d0(k, i, r, s_);
                            x += v[m] * t(s_, i, m) * d0(k, j, r, s_);
                            x += v[m] * t(s_, j, m) * vt[ix4(n, k, i, r, s_)];
                            x -= v[m] * t(s_, i, m) * vt[ix4(n, k, j, r, s_)];
                        }
                    }
                    r_rule[ix4(n, k, r, i, j)] += x;
                }
            }
        }
    }
    push("rule-R", GaugeKind::Rule, &f1.r, &r_rule);

    // tl[k][q] = Σ_e T^e_kq L_e
    let mut tl = vec![0.0; n * n];
    for k in 0..n {
        for q in 0..n {
            tl[ix2(n, k, q)] = (0..n).map(|e| t(e, k, q) * l[e]).sum();
        }
    }

    // B' = B + Σ L_m T^m_sq P^q_k (A^rk - A^kr)
    let a0 = &b0.a;
    let mut b_rule = b0.b.clone();
    for r in 0..n {
        for s_ in 0..n {
            let mut x = 0.0;
            for q in 0..n {
                for k in 0..n {
                    x += tl[ix2(n, s_, q)] * p[ix2(n, q, k)] * (a0[ix2(n, r, k)] - a0[ix2(n, k, r)]);
                }
            }
            b_rule[ix2(n, r, s_)] += x;
        }
    }
    push("rule-B", GaugeKind::Rule, &b1.b, &b_rule);

    // C' = C + Σ T L P B + Σ T L P A P T L, up to symmetric terms
    let mut c_rule = b0.c.clone();
    for r in 0..n {
        for s_ in 0..n {
            let mut x = 0.0;
            for q in 0..n {
                for m in 0..n {
                    let tp = tl[ix2(n, r, q)] * p[ix2(n, q, m)];
                    x += tp * b0.b[ix2(n, m, s_)];
                    for a in 0..n {
                        for c in 0..n {
                            x += tp * a0[ix2(n, m, a)] * p[ix2(n, c, a)] * tl[ix2(n, s_, c)];
                        }
                    }
                }
            }
            c_rule[ix2(n, r, s_)] += x;
        }
    }
    push("rule-C", GaugeKind::Rule, &antisym(n, &b1.c), &antisym(n, &c_rule));

    // β' = β + Σ T^e_kq L_e α^q
    let beta_rule: Vec<f64> =
        (0..n).map(|k| b0.beta[k] + (0..n).map(|q| tl[ix2(n, k, q)] * b0.alpha[q]).sum::<f64>()).collect();
    push("rule-beta", GaugeKind::Rule, &b1.beta, &beta_rule);

    // η' = η + Σ T^e_kq L_e P^q_s α^s
    let eta_rule: Vec<f64> = (0..n)
        .map(|k| {
            let mut x = b0.eta[k];
            for q in 0..n {
                for s_ in 0..n {
                    x += tl[ix2(n, k, q)] * p[ix2(n, q, s_)] * b0.alpha[s_];
                }
            }
            x
        })
        .collect();
    push("rule-eta", GaugeKind::Rule, &b1.eta, &eta_rule);

    let before = residuals(&b0);
    let after = residuals(&b1);
    for (a, b) in before.iter().zip(&after) {
        rows.push(GaugeRow {
            id: format!("residual-{}", a.id),
            kind: GaugeKind::Residual,
            deviation: (a.value - b.value).abs(),
            requires: residual_prerequisites(a.id),
        });
    }
    Ok(GaugeReport { point: y.clone(), rows, before, after })
}

/// Lower equations whose validity makes a residual gauge invariant: `η`
/// shifts by a multiple of `α`, `B` by terms in the antisymmetric part of
/// `A`, and `C` by terms in both.
pub fn residual_prerequisites(id: &str) -> &'static [&'static str] {
    match id {
        "weak-eta" => &["weak-alpha"],
        "addl-B" => &["addl-A"],
        "addl-C" => &["addl-A", "addl-B"],
        _ => &[],
    }
}

/// An initial hypersurface `x(u)` with momentum magnitude `ν(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    /// `x^i(u)`, one expression per coordinate, over `n - 1` parameters.
    pub x: Vec<Expression>,
    pub nu: Expression,
}

impl Surface {
    pub fn new(x: Vec<Expression>, nu: Expression) -> Result<Surface> {
        let n = x.len();
        let ok = |e: &Expression| {
            matches!(e.scope(), Scope::Surface { parameters } if parameters + 1 == n)
        };
        if n < 2 || !x.iter().all(ok) || !ok(&nu) {
            return Err(Error::Validation(format!(
                "a surface in dimension {n} needs {} parameters",
                n.saturating_sub(1)
            )));
        }
        Ok(Surface { x, nu })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Determinant by cofactor expansion along the first row.
fn det<T: Scalar>(m: &[Vec<T>]) -> T {
    let k = m.len();
    if k == 1 {
        return m[0][0].clone();
    }
    let mut acc = m[0][0].constant_like(0.0);
    for col in 0..k {
        let minor: Vec<Vec<T>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, x)| x.clone()).collect())
            .collect();
        let term = m[0][col].mul(&det(&minor));
        acc = if col % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// Tangents `τ_j = ∂x/∂u_j` as first-order jets over `u`.
fn tangents(surface: &Surface, u: &[f64]) -> Result<(Vec<f64>, Vec<Vec<Dual>>)> {
    let m = u.len();
    let uj: Vec<Jet2> = u.iter().enumerate().map(|(j, c)| Jet2::variable(*c, j, m)).collect();
    let xj: Vec<Jet2> = surface.x.iter().map(|e| e.eval_params(&uj)).collect::<std::result::Result<_, _>>()?;
    let x0 = xj.iter().map(|j| j.value).collect();
    let tau = (0..m).map(|j| xj.iter().map(|xi| xi.partial_dual(j)).collect()).collect();
    Ok((x0, tau))
}

const SURFACE_RANK_TOL: f64 = 1e-10;

/// Unit normal with the sign fixed by `det[τ_1; ...; τ_{n-1}; n] > 0`,
/// as first-order jets over `u`.
fn normal_jets(tau: &[Vec<Dual>]) -> Result<Vec<Dual>> {
    let n = tau.len() + 1;
    let m = tau.len();
    let flat: Vec<f64> = tau.iter().flat_map(|row| row.iter().map(|d| d.re)).collect();
    let sigma_min = singular_values(m, n, &flat).into_iter().fold(f64::INFINITY, f64::min);
    if sigma_min < SURFACE_RANK_TOL {
        return Err(Error::DegenerateSurface { sigma_min });
    }
    let zero = tau[0][0].constant_like(0.0);
    let one = zero.constant_like(1.0);
    let raw: Vec<Dual> = (0..n)
        .map(|i| {
            let mut rows: Vec<Vec<Dual>> = tau.to_vec();
            rows.push((0..n).map(|c| if c == i { one.clone() } else { zero.clone() }).collect());
            det(&rows)
        })
        .collect();
    let mut norm2 = zero.clone();
    for c in &raw {
        norm2.add_mul(c, c);
    }
    let norm = norm2.sqrt();
    Ok(raw.iter().map(|c| c / &norm).collect())
}

/// Unit normal of the surface at parameters `u`.
pub fn hypersurface_normal(surface: &Surface, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() + 1 != surface.dim() {
        return Err(Error::Validation("wrong number of surface parameters".into()));
    }
    let (_, tau) = tangents(surface, u)?;
    Ok(normal_jets(&tau)?.iter().map(|d| d.re).collect())
}

/// Settings for [`shift_integrate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftRun {
    pub surface: Surface,
    /// Parameter values, each of length `n - 1`.
    pub samples: Vec<Vec<f64>>,
    /// Increasing output times starting at 0.
    pub times: Vec<f64>,
    pub ode: OdeOptions,
}

/// Collinearity deviation `max_j |<p, τ_j>| / (|p| |τ_j|)` along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSample {
    pub u: Vec<f64>,
    pub deviations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftReport {
    pub times: Vec<f64>,
    pub samples: Vec<ShiftSample>,
}

impl ShiftReport {
    /// Largest deviation over all samples at each output time.
    pub fn max_per_time(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| self.samples.iter().map(|s| s.deviations[k]).fold(0.0, f64::max))
            .collect()
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_per_time().into_iter().fold(0.0, f64::max)
    }
}

fn collinearity(n: usize, state: &[f64]) -> f64 {
    let p = &state[n..2 * n];
    let pn = p.iter().map(|c| c * c).sum::<f64>().sqrt();
    let m = state.len() / (2 * n) - 1;
    (0..m)
        .map(|j| {
            let tau = &state[2 * n * (j + 1)..2 * n * (j + 1) + n];
            let tn = tau.iter().map(|c| c * c).sum::<f64>().sqrt();
            let dot: f64 = p.iter().zip(tau).map(|(a, b)| a * b).sum();
            dot.abs() / (pn * tn)
        })
        .fold(0.0, f64::max)
}

/// Integrates the momentum-side equations `ẋ = V`, `ṗ = Θ` from
/// `x = x(u)`, `p = ν(u) n(u)` together with their variational equations,
/// which carry the tangent vectors of the moving surface.
pub fn shift_integrate(s: &SystemDef, run: &ShiftRun) -> Result<ShiftReport> {
    let n = s.n();
    if run.surface.dim() != n {
        return Err(Error::Validation("surface dimension differs from the system".into()));
    }
    let samples = run
        .samples
        .par_iter()
        .map(|u| shift_one(s, run, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftReport { times: run.times.clone(), samples })
}

fn shift_one(s: &SystemDef, run: &ShiftRun, u: &[f64]) -> Result<ShiftSample> {
    let n = s.n();
    let m = n - 1;
    let (x0, tau) = tangents(&run.surface, u)?;
    let normal = normal_jets(&tau)?;
    let uj: Vec<Dual> = u.iter().enumerate().map(|(j, c)| Dual::variable(*c, j, m)).collect();
    let nu = run.surface.nu.eval_params(&uj)?;
    let p0: Vec<Dual> = normal.iter().map(|c| c * &nu).collect();

    let width = 2 * n;
    let mut y0 = vec![0.0; width * (m + 1)];
    y0[..n].copy_from_slice(&x0);
    for i in 0..n {
        y0[n + i] = p0[i].re;
    }
    for j in 0..m {
        let base = width * (j + 1);
        for i in 0..n {
            y0[base + i] = tau[j][i].re;
            y0[base + n + i] = p0[i].grad[j];
        }
    }

    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let z = PhasePoint::momentum(y[..n].to_vec(), y[n..width].to_vec());
        let mf = s.momentum_frame(&z)?;
        let theta = mf.theta();
        for i in 0..n {
            dy[i] = mf.v[i].value;
            dy[n + i] = theta[i].re;
        }
        for j in 0..m {
            let base = width * (j + 1);
            let dz = &y[base..base + width];
            for i in 0..n {
                dy[base + i] = (0..width).map(|a| mf.v[i].grad[a] * dz[a]).sum();
                dy[base + n + i] = (0..width).map(|a| theta[i].grad[a] * dz[a]).sum();
            }
        }
        Ok(())
    };
    let states = integrate(rhs, 0.0, &y0, &run.times, &run.ode)?;
    Ok(ShiftSample { u: u.to_vec(), deviations: states.iter().map(|st| collinearity(n, st)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_in;

    fn surf(xs: &[&str], nu: &str, params: usize) -> Surface {
        let sc = Scope::Surface { parameters: params };
        Surface::new(xs.iter().map(|s| parse_in(s, sc).unwrap()).collect(), parse_in(nu, sc).unwrap()).unwrap()
    }

    #[test]
    fn normals_of_line_and_circle() {
        let line = surf(&["u1", "0"], "1", 1);
        let nrm = hypersurface_normal(&line, &[0.3]).unwrap();
        assert!((nrm[0]).abs() < 1e-15 && (nrm[1] - 1.0).abs() < 1e-15);
        let circle = surf(&["cos(u1)", "sin(u1)"], "1", 1);
        let u = 0.7f64;
        let nrm = hypersurface_normal(&circle, &[u]).unwrap();
        // sign convention makes the counterclockwise circle's normal point inward
        assert!((nrm[0].abs() - u.cos()).abs() < 1e-15);
        assert!((nrm[0] * u.cos() + nrm[1] * u.sin()).abs() > 1.0 - 1e-15);
        let flat = surf(&["0", "0"], "1", 1);
        assert!(matches!(hypersurface_normal(&flat, &[0.0]), Err(Error::DegenerateSurface { .. })));
    }

    #[test]
    fn plane_in_three_dimensions() {
        let plane = surf(&["u1", "u2", "0.5*u1"], "1", 2);
        let nrm = hypersurface_normal(&plane, &[0.1, 0.2]).unwrap();
        let want = [-0.5, 0.0, 1.0].map(|c: f64| c / 1.25f64.sqrt());
        for i in 0..3 {
            assert!((nrm[i].abs() - want[i].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn free_motion_shifts_circle_normally() {
        let s = SystemDef::builder(2).legendre_all(&["v1", "v2"]).build().unwrap();
        let run = ShiftRun {
            surface: surf(&["cos(u1)", "sin(u1)"], "1", 1),
            samples: (0..8).map(|k| vec![k as f64 * 0.785]).collect(),
            times: vec![0.0, 0.3, 0.6],
            ode: OdeOptions::default(),
        };
        let rep = shift_integrate(&s, &run).unwrap();
        assert!(rep.max_deviation() < 1e-10, "{:?}", rep.max_per_time());
    }

    fn gauged() -> SystemDef {
        SystemDef::builder(3)
            .legendre_all(&[
                "v1 + 0.1*v1^3 + 0.2*x2*v2",
                "v2 + 0.05*v2^3 + 0.1*x1*v1 + 0.1*v3*v2",
                "v3 + 0.05*v2^2 + 0.1*sin(x3)*v3",
            ])
            .force_all(&["-x1 + 0.1*v2*v3", "sin(x1)*v1", "0.2*v1*v2 - x3"])
            .connection_sym(0, 0, 1, "0.1*x2 + 0.05*v1*v3")
            .connection_sym(2, 0, 0, "0.1*v2^2 + 0.1*x3")
            .gauge_sym(0, 1, 2, "0.3*x1*v2 + 0.1*v3^2")
            .gauge_sym(1, 0, 0, "0.2 + 0.1*x2*v1")
            .gauge_sym(2, 2, 1, "0.15*v1*v2 - 0.1*x3")
            .build()
            .unwrap()
    }

    #[test]
    fn gauge_invariants_and_rules() {
        let s = gauged();
        let y = PhasePoint::velocity(vec![0.3, -0.2, 0.5], vec![1.1, 0.8, 1.3]);
        let rep = gauge_invariance_report(&s, &y).unwrap();
        for row in &rep.rows {
            let tol = match row.kind {
                GaugeKind::Invariant => 1e-9,
                GaugeKind::Rule => 1e-8,
                GaugeKind::Residual => continue,
            };
            assert!(row.deviation < tol, "{}: {}", row.id, row.deviation);
        }
    }

    #[test]
    fn connection_free_mode_zeroes_connection() {
        let s = SystemDef::builder(2)
            .legendre_all(&["v1", "v2"])
            .connection_sym(0, 0, 1, "x1")
            .build()
            .unwrap();
        let cf = connection_free_mode(&s);
        assert!(cf.connection().iter().all(Expression::is_zero_literal));
        assert!(matches!(apply_gauge(&s), Err(Error::MissingGaugeTensor)));
    }
}
