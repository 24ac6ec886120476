//! The fields entering the normality equations, computed twice: once on
//! the momentum side from `V`, `Θ` and the pulled-back connection, and once
//! on the velocity side from closed forms in `L`, `g`, `Φ` and `Γ`.

use crate::calculus::{
    curvature_p, curvature_v, dynamic_curvature_p, dynamic_curvature_v, horizontal, seeded_fiber,
    vertical, Slot,
};
use crate::error::{Error, Result};
use crate::jet::{Dual, Jet2};
use crate::linalg::{ix2, ix3, ix4, max_abs, relative_deviation};
use crate::phase::{PhasePoint, Rep};
use crate::system::{Mutation, SystemDef};

/// `|Ω|` below `DEGENERACY_TOL * (1 + |fiber|²)` makes a point degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// The ten fields at one point. Rank-2 fields are stored at `ix2(n, r, s)`
/// with `r` the first index as written (`A^{rs}`, `B^r_s`, `C_rs`).
#[derive(Clone, Debug, PartialEq)]
pub struct NormalityBundle {
    pub rep: Rep,
    pub n: usize,
    pub w: Vec<f64>,
    pub omega: f64,
    /// `P^i_j` at `ix2(n, i, j)`.
    pub projector: Vec<f64>,
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Field names in report order.
pub const FIELD_NAMES: [&str; 10] = ["W", "Omega", "P", "U", "alpha", "beta", "eta", "A", "B", "C"];

impl NormalityBundle {
    /// Components of a field by name.
    pub fn field(&self, name: &str) -> Option<Vec<f64>> {
        Some(match name {
            "W" => self.w.clone(),
            "Omega" => vec![self.omega],
            "P" => self.projector.clone(),
            "U" => self.u.clone(),
            "alpha" => self.alpha.clone(),
            "beta" => self.beta.clone(),
            "eta" => self.eta.clone(),
            "A" => self.a.clone(),
            "B" => self.b.clone(),
            "C" => self.c.clone(),
            _ => return None,
        })
    }

    pub fn residuals(&self) -> Vec<Residual> {
        residuals(self)
    }
}

fn check_degenerate(omega: f64, fiber: &[f64]) -> Result<()> {
    let norm2: f64 = fiber.iter().map(|c| c * c).sum();
    if omega.abs() < DEGENERACY_TOL * (1.0 + norm2) || !omega.is_finite() {
        return Err(Error::DegeneratePoint { omega });
    }
    Ok(())
}

fn values(d: &[Dual]) -> Vec<f64> {
    d.iter().map(|x| x.re).collect()
}

fn projector(n: usize, w: &[f64], p: &[f64], omega: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[ix2(n, i, j)] = f64::from(u8::from(i == j)) - w[i] * p[j] / omega;
        }
    }
    out
}

/// Momentum-side computation at `z = (x, p)`.
pub fn momentum_bundle(s: &SystemDef, z: &PhasePoint) -> Result<NormalityBundle> {
    let n = s.n();
    let mf = s.momentum_frame(z)?;
    let p = &z.fiber;
    let pz = seeded_fiber(z);
    let gp = mf.gamma();
    let gpv = values(&gp);
    let vj = &mf.v;
    let vd: Vec<Dual> = vj.iter().map(Jet2::to_dual).collect();
    let vv = values(&vd);
    let m2 = 2 * n;

    // ∂V^s/∂p_i at ix2(s, i)
    let dvdp = vertical(n, vj);
    let w: Vec<Dual> = (0..n)
        .map(|i| {
            let mut t = Dual::constant(0.0, m2);
            for s_ in 0..n {
                t.add_mul(&pz[s_], &dvdp[ix2(n, s_, i)]);
            }
            t
        })
        .collect();
    let wv = values(&w);
    let omega: f64 = (0..n).map(|s_| p[s_] * wv[s_]).sum();
    check_degenerate(omega, p)?;
    let proj = projector(n, &wv, p, omega);

    let theta = mf.theta();
    let q: Vec<Dual> = (0..n)
        .map(|i| {
            let mut t = theta[i].clone();
            for j in 0..n {
                for k in 0..n {
                    let mut g = gp[ix3(n, k, i, j)].clone();
                    g *= &vd[j];
                    g *= &pz[k];
                    t -= g;
                }
            }
            t
        })
        .collect();
    let qv = values(&q);
    // ∇_i V^s at ix2(s, i)
    let nabla_v = horizontal(n, Rep::P, &[Slot::Up], vj, &gp, &pz);
    let u: Vec<Dual> = (0..n)
        .map(|i| {
            let mut t = q[i].clone();
            for s_ in 0..n {
                t.add_mul(&nabla_v[ix2(n, s_, i)], &pz[s_]);
            }
            t
        })
        .collect();
    let uv = values(&u);
    let nvv = values(&nabla_v);

    // derivative index last in every array below
    let dw = horizontal(n, Rep::P, &[Slot::Up], &w, &gpv, p); // ∇_r W^k at (k, r)
    let vw = vertical(n, &w); // ∇̃^r W^k at (k, r)
    let vq = vertical(n, &q); // ∇̃^k Q_r at (r, k)
    let dq = horizontal(n, Rep::P, &[Slot::Down], &q, &gpv, p); // ∇_k Q_r at (r, k)
    let du = horizontal(n, Rep::P, &[Slot::Down], &u, &gpv, p); // ∇_r U_k at (k, r)
    let vu = vertical(n, &u); // ∇̃^r U_k at (k, r)
    let dd = dynamic_curvature_p(n, &gp);
    let rr = curvature_p(n, &gp, p);
    let d = |k, r, i, j| dd[ix4(n, k, r, i, j)];
    let rc = |k, r, i, j| rr[ix4(n, k, r, i, j)];

    let alpha: Vec<f64> = (0..n)
        .map(|k| {
            let mut t = 0.0;
            for r in 0..n {
                t += dvdp[ix2(n, r, k)].re * uv[r];
                t += dw[ix2(n, k, r)] * vv[r];
                t += vw[ix2(n, k, r)] * qv[r];
                t += wv[r] * vq[ix2(n, r, k)];
                for s_ in 0..n {
                    for q_ in 0..n {
                        t -= p[s_] * d(s_, k, r, q_) * wv[r] * vv[q_];
                    }
                }
            }
            t
        })
        .collect();

    let beta: Vec<f64> = (0..n)
        .map(|k| {
            let mut t = 0.0;
            for r in 0..n {
                t += du[ix2(n, k, r)] * vv[r];
                t += vu[ix2(n, k, r)] * qv[r];
                t += nvv[ix2(n, r, k)] * uv[r];
                t += dq[ix2(n, r, k)] * wv[r];
                for s_ in 0..n {
                    for m in 0..n {
                        t -= (rc(s_, r, m, k) * vv[m] - d(s_, m, r, k) * qv[m]) * wv[r] * p[s_];
                    }
                }
            }
            t
        })
        .collect();

    let ap: f64 = (0..n).map(|s_| alpha[s_] * p[s_]).sum();
    let eta: Vec<f64> = (0..n).map(|k| beta[k] - uv[k] * ap / omega).collect();

    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n * n];
    let mut c = vec![0.0; n * n];
    for r in 0..n {
        for s_ in 0..n {
            a[ix2(n, r, s_)] = vw[ix2(n, s_, r)];

            let mut t = vu[ix2(n, s_, r)] - dw[ix2(n, r, s_)];
            for k in 0..n {
                for m in 0..n {
                    t += wv[k] * p[m] * d(m, r, k, s_);
                }
            }
            for m in 0..n {
                t += (vw[ix2(n, r, m)] - vw[ix2(n, m, r)]) / omega * uv[s_] * p[m];
            }
            b[ix2(n, r, s_)] = t;

            let mut t = du[ix2(n, s_, r)];
            for m in 0..n {
                t -= (uv[r] * vu[ix2(n, s_, m)] + uv[s_] * dw[ix2(n, m, r)]) / omega * p[m];
            }
            for k in 0..n {
                for q_ in 0..n {
                    let mut inner = rc(q_, k, r, s_) / 2.0;
                    for m in 0..n {
                        inner += d(m, q_, k, s_) * uv[r] * p[m] / omega;
                    }
                    t -= inner * wv[k] * p[q_];
                }
            }
            c[ix2(n, r, s_)] = t;
        }
    }

    Ok(NormalityBundle {
        rep: Rep::P,
        n,
        w: wv,
        omega,
        projector: proj,
        u: uv,
        alpha,
        beta,
        eta,
        a,
        b,
        c,
    })
}

/// Velocity-side ingredients shared by the closed forms and the gauge rules.
#[derive(Clone, Debug)]
pub struct VelocityFields {
    pub n: usize,
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    /// `L^i = Σ L_q g^{qi}`.
    pub l_up: Vec<f64>,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub norm2: f64,
    /// `F^i`.
    pub f_up: Vec<f64>,
    /// `F_i = Σ g_ik F^k`.
    pub f_down: Vec<f64>,
    /// `∇_q L_i` at `ix2(n, i, q)`.
    pub nabla_l: Vec<f64>,
    /// `∇_r L^k` at `ix2(n, k, r)`.
    pub nabla_l_up: Vec<f64>,
    /// `∇̃_q L^k` at `ix2(n, k, q)`.
    pub vert_l_up: Vec<f64>,
    /// `∇_m ∇_q L_i` at `ix3(n, i, q, m)`.
    pub nabla_nabla_l: Vec<f64>,
    /// `∇̃_s ∇_q L_i` at `ix3(n, i, q, s)`.
    pub vert_nabla_l: Vec<f64>,
    /// `∇_k F_r` at `ix2(n, r, k)`.
    pub nabla_f: Vec<f64>,
    /// `∇̃_q F_r` at `ix2(n, r, q)`.
    pub vert_f: Vec<f64>,
    pub u: Vec<f64>,
    /// `∇_r U_k` at `ix2(n, k, r)`.
    pub nabla_u: Vec<f64>,
    /// `∇̃_q U_k` at `ix2(n, k, q)`.
    pub vert_u: Vec<f64>,
    /// `D^k_{rij}` at `ix4(n, k, r, i, j)`.
    pub d: Vec<f64>,
    /// `R^k_{rij}` at `ix4(n, k, r, i, j)`.
    pub r: Vec<f64>,
    /// Connection values `Γ^k_ij`.
    pub gamma: Vec<f64>,
}

impl VelocityFields {
    /// Evaluates the ingredients at `y = (x, v)` for connection jets `gamma`.
    pub fn compute(s: &SystemDef, y: &PhasePoint) -> Result<VelocityFields> {
        let vf = s.velocity_frame(y)?;
        let gamma: Vec<Dual> = vf.gamma.iter().map(Jet2::to_dual).collect();
        Self::with_connection(&vf.l, &vf.phi, &gamma, y, &vf.ginv)
    }

    pub(crate) fn with_connection(
        lj: &[Jet2],
        phi: &[Jet2],
        gamma: &[Dual],
        y: &PhasePoint,
        ginv_v: &[f64],
    ) -> Result<VelocityFields> {
        let n = y.dim();
        let m2 = 2 * n;
        let v = y.fiber.clone();
        let vs = seeded_fiber(y);
        let gv = values(gamma);
        let ld: Vec<Dual> = lj.iter().map(Jet2::to_dual).collect();
        // g_qk at ix2(q, k)
        let g = vertical(n, lj);
        // g^{qk} with d(g⁻¹) = -g⁻¹ dg g⁻¹
        let ginv: Vec<Dual> = (0..n * n)
            .map(|idx| {
                let (q, k) = (idx / n, idx % n);
                let mut d = Dual::constant(ginv_v[idx], m2);
                for a in 0..m2 {
                    let mut t = 0.0;
                    for b in 0..n {
                        for c in 0..n {
                            t += ginv_v[ix2(n, q, b)] * g[ix2(n, b, c)].grad[a] * ginv_v[ix2(n, c, k)];
                        }
                    }
                    d.grad[a] = -t;
                }
                d
            })
            .collect();
        let l_up: Vec<Dual> = (0..n)
            .map(|i| {
                let mut t = Dual::constant(0.0, m2);
                for q in 0..n {
                    t.add_mul(&ld[q], &ginv[ix2(n, q, i)]);
                }
                t
            })
            .collect();
        let norm2: f64 = (0..n).map(|s_| ld[s_].re * l_up[s_].re).sum();
        check_degenerate(norm2, &v)?;

        let nabla_l = horizontal(n, Rep::V, &[Slot::Down], lj, gamma, &vs);
        let f_up: Vec<Dual> = (0..n)
            .map(|i| {
                let mut t = phi[i].to_dual();
                for j in 0..n {
                    for k in 0..n {
                        let mut gg = gamma[ix3(n, i, j, k)].clone();
                        gg *= &vs[j];
                        gg *= &vs[k];
                        t += gg;
                    }
                }
                t
            })
            .collect();
        let f_down: Vec<Dual> = (0..n)
            .map(|i| {
                let mut t = Dual::constant(0.0, m2);
                for k in 0..n {
                    t.add_mul(&g[ix2(n, i, k)], &f_up[k]);
                }
                t
            })
            .collect();
        let u: Vec<Dual> = (0..n)
            .map(|i| {
                let mut t = f_down[i].clone();
                for q in 0..n {
                    t.add_mul(&vs[q], &nabla_l[ix2(n, i, q)]);
                    let mut lq = l_up[q].clone();
                    lq *= &nabla_l[ix2(n, q, i)];
                    t -= lq;
                }
                t
            })
            .collect();

        Ok(VelocityFields {
            n,
            l: values(&ld),
            l_up: values(&l_up),
            g: values(&g),
            ginv: ginv_v.to_vec(),
            norm2,
            f_up: values(&f_up),
            f_down: values(&f_down),
            nabla_l_up: horizontal(n, Rep::V, &[Slot::Up], &l_up, &gv, &v),
            vert_l_up: vertical(n, &l_up),
            nabla_nabla_l: horizontal(n, Rep::V, &[Slot::Down, Slot::Down], &nabla_l, &gv, &v),
            vert_nabla_l: vertical(n, &nabla_l),
            nabla_l: values(&nabla_l),
            nabla_f: horizontal(n, Rep::V, &[Slot::Down], &f_down, &gv, &v),
            vert_f: vertical(n, &f_down),
            nabla_u: horizontal(n, Rep::V, &[Slot::Down], &u, &gv, &v),
            vert_u: vertical(n, &u),
            u: values(&u),
            d: dynamic_curvature_v(n, gamma),
            r: curvature_v(n, gamma, &v),
            gamma: gv,
            v,
        })
    }

    pub fn projector(&self) -> Vec<f64> {
        projector(self.n, &self.l_up, &self.l, self.norm2)
    }

    /// `A^{rs} = Σ g^{qr} ∇̃_q L^s`.
    pub fn a(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for s_ in 0..n {
                a[ix2(n, r, s_)] =
                    (0..n).map(|q| self.ginv[ix2(n, q, r)] * self.vert_l_up[ix2(n, s_, q)]).sum();
            }
        }
        a
    }

    pub fn alpha(&self) -> Vec<f64> {
        let n = self.n;
        let (gi, l, lu, v) = (&self.ginv, &self.l, &self.l_up, &self.v);
        (0..n)
            .map(|k| {
                let mut t = 0.0;
                for r in 0..n {
                    t += gi[ix2(n, r, k)] * self.u[r];
                    t += v[r] * self.nabla_l_up[ix2(n, k, r)];
                    t += self.f_up[r] * self.vert_l_up[ix2(n, k, r)];
                }
                for q in 0..n {
                    for r in 0..n {
                        let lg = lu[r] * gi[ix2(n, q, k)];
                        let mut inner = self.vert_f[ix2(n, r, q)] + self.nabla_l[ix2(n, r, q)];
                        for s_ in 0..n {
                            inner += v[s_] * self.vert_nabla_l[ix3(n, r, s_, q)];
                        }
                        t += lg * inner;
                    }
                }
                for m in 0..n {
                    for s_ in 0..n {
                        for r in 0..n {
                            for q in 0..n {
                                t -= gi[ix2(n, m, k)] * l[s_] * self.d[ix4(n, s_, r, q, m)] * lu[r] * v[q];
                            }
                        }
                    }
                }
                t
            })
            .collect()
    }

    pub fn beta(&self, mutation: Option<Mutation>) -> Vec<f64> {
        let n = self.n;
        let (gi, l, lu, v) = (&self.ginv, &self.l, &self.l_up, &self.v);
        let nl = |i, q| self.nabla_l[ix2(n, i, q)];
        let flip = if mutation == Some(Mutation::FlipBetaForceTerm) { -1.0 } else { 1.0 };
        // h[k][s] = Σ_q ∇_k L_q g^{sq}
        let mut h = vec![0.0; n * n];
        for k in 0..n {
            for s_ in 0..n {
                h[ix2(n, k, s_)] = (0..n).map(|q| nl(q, k) * gi[ix2(n, s_, q)]).sum();
            }
        }
        (0..n)
            .map(|k| {
                let mut t = 0.0;
                for r in 0..n {
                    t += v[r] * self.nabla_u[ix2(n, k, r)];
                    t += self.f_up[r] * self.vert_u[ix2(n, k, r)];
                    t += flip * lu[r] * self.nabla_f[ix2(n, r, k)];
                    let mut sv = self.f_down[r];
                    for s_ in 0..n {
                        sv += v[s_] * nl(r, s_);
                    }
                    t -= h[ix2(n, k, r)] * sv;
                    for m in 0..n {
                        t += lu[r] * v[m] * self.nabla_nabla_l[ix3(n, r, m, k)];
                    }
                    for s_ in 0..n {
                        let mut inner = self.vert_f[ix2(n, r, s_)];
                        for m in 0..n {
                            inner += v[m] * self.vert_nabla_l[ix3(n, r, m, s_)];
                        }
                        t -= lu[r] * h[ix2(n, k, s_)] * inner;
                    }
                    for s_ in 0..n {
                        let ll = lu[r] * l[s_];
                        for m in 0..n {
                            t -= self.r[ix4(n, s_, r, m, k)] * v[m] * ll;
                            for a in 0..n {
                                t += h[ix2(n, k, a)] * self.d[ix4(n, s_, m, r, a)] * v[m] * ll;
                                t += gi[ix2(n, a, m)] * self.d[ix4(n, s_, r, k, a)] * self.f_down[m] * ll;
                            }
                        }
                    }
                }
                t
            })
            .collect()
    }

    pub fn eta(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let al: f64 = alpha.iter().zip(&self.l).map(|(a, l)| a * l).sum();
        (0..self.n).map(|k| beta[k] - self.u[k] * al / self.norm2).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        let n = self.n;
        let (gi, l, lu) = (&self.ginv, &self.l, &self.l_up);
        let mut b = vec![0.0; n * n];
        for r in 0..n {
            for s_ in 0..n {
                let mut t = -self.nabla_l_up[ix2(n, r, s_)];
                for q in 0..n {
                    t += gi[ix2(n, q, r)] * self.vert_u[ix2(n, s_, q)];
                    for k in 0..n {
                        t += self.nabla_l[ix2(n, k, s_)] * gi[ix2(n, q, k)] * self.vert_l_up[ix2(n, r, q)];
                        for m in 0..n {
                            t += gi[ix2(n, q, r)] * lu[k] * l[m] * self.d[ix4(n, m, k, s_, q)];
                        }
                    }
                    for m in 0..n {
                        t += (gi[ix2(n, q, m)] * self.vert_l_up[ix2(n, r, q)]
                            - gi[ix2(n, q, r)] * self.vert_l_up[ix2(n, m, q)])
                            / self.norm2
                            * self.u[s_]
                            * l[m];
                    }
                }
                b[ix2(n, r, s_)] = t;
            }
        }
        b
    }

    /// `C_rs` in its velocity-side closed form. It agrees with the
    /// momentum-side `C` up to a symmetric tensor, so only `C_rs - C_sr`
    /// is representation independent.
    pub fn c(&self) -> Vec<f64> {
        let n = self.n;
        let (gi, l, lu, u) = (&self.ginv, &self.l, &self.l_up, &self.u);
        let nl = |i, q| self.nabla_l[ix2(n, i, q)];
        let w = self.norm2;
        let mut c = vec![0.0; n * n];
        for r in 0..n {
            for s_ in 0..n {
                let mut t = self.nabla_u[ix2(n, s_, r)];
                for m in 0..n {
                    t -= u[s_] * self.nabla_l_up[ix2(n, m, r)] * l[m] / w;
                }
                for q in 0..n {
                    for k in 0..n {
                        t -= nl(q, r) * gi[ix2(n, k, q)] * self.vert_u[ix2(n, s_, k)];
                    }
                    for m in 0..n {
                        t -= u[r] * gi[ix2(n, q, m)] * self.vert_u[ix2(n, s_, q)] * l[m] / w;
                        for k in 0..n {
                            t += u[s_] * nl(k, r) * gi[ix2(n, q, k)] * self.vert_l_up[ix2(n, m, q)] * l[m] / w;
                        }
                    }
                }
                for k in 0..n {
                    for q in 0..n {
                        let lkq = lu[k] * l[q];
                        t -= self.r[ix4(n, q, k, r, s_)] / 2.0 * lkq;
                        for m in 0..n {
                            for a in 0..n {
                                t -= gi[ix2(n, a, q)] * self.d[ix4(n, m, k, s_, a)] * u[r] * l[m] * lkq / w;
                                t -= nl(m, r) * self.d[ix4(n, q, k, s_, a)] * gi[ix2(n, a, m)] * lkq;
                            }
                        }
                    }
                }
                c[ix2(n, r, s_)] = t;
            }
        }
        c
    }

    pub fn bundle(&self, mutation: Option<Mutation>) -> NormalityBundle {
        let alpha = self.alpha();
        let beta = self.beta(mutation);
        let eta = self.eta(&alpha, &beta);
        NormalityBundle {
            rep: Rep::V,
            n: self.n,
            w: self.l_up.clone(),
            omega: self.norm2,
            projector: self.projector(),
            u: self.u.clone(),
            a: self.a(),
            b: self.b(),
            c: self.c(),
            alpha,
            beta,
            eta,
        }
    }
}

/// Velocity-side computation at `y = (x, v)`.
pub fn velocity_bundle(s: &SystemDef, y: &PhasePoint) -> Result<NormalityBundle> {
    Ok(VelocityFields::compute(s, y)?.bundle(s.mutation()))
}

/// Bundle at a point of either representation, computed natively.
pub fn normality_bundle(s: &SystemDef, pt: &PhasePoint) -> Result<NormalityBundle> {
    match pt.rep {
        Rep::V => velocity_bundle(s, pt),
        Rep::P => momentum_bundle(s, pt),
    }
}

/// One residual of the normality equations, as an ∞-norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub id: &'static str,
    pub value: f64,
    /// False for the additional equations in dimension two, where only
    /// the weak pair decides normality.
    pub decisive: bool,
}

pub const RESIDUAL_IDS: [&str; 5] = ["weak-alpha", "weak-eta", "addl-A", "addl-B", "addl-C"];

fn antisym_projected(n: usize, t: &[f64], p: &[f64], upper: bool) -> f64 {
    // upper: Σ (T^{rs} - T^{sr}) P^i_r P^j_s ; lower: Σ (T_rs - T_sr) P^r_i P^s_j
    let mut out: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for r in 0..n {
                for s_ in 0..n {
                    let anti = t[ix2(n, r, s_)] - t[ix2(n, s_, r)];
                    let pp = if upper {
                        p[ix2(n, i, r)] * p[ix2(n, j, s_)]
                    } else {
                        p[ix2(n, r, i)] * p[ix2(n, s_, j)]
                    };
                    acc += anti * pp;
                }
            }
            out = out.max(acc.abs());
        }
    }
    out
}

/// The five residuals of a bundle.
pub fn residuals(b: &NormalityBundle) -> Vec<Residual> {
    let n = b.n;
    let p = &b.projector;
    let decisive = n >= 3;
    let weak_alpha =
        max_abs(&(0..n).map(|k| (0..n).map(|r| b.alpha[r] * p[ix2(n, k, r)]).sum()).collect::<Vec<f64>>());
    let weak_eta =
        max_abs(&(0..n).map(|k| (0..n).map(|r| b.eta[r] * p[ix2(n, r, k)]).sum()).collect::<Vec<f64>>());
    let addl_a = antisym_projected(n, &b.a, p, true);
    // P B P - λ P with λ = tr(B P) / (n - 1)
    let mut trace = 0.0;
    for r in 0..n {
        for s_ in 0..n {
            trace += b.b[ix2(n, r, s_)] * p[ix2(n, s_, r)];
        }
    }
    let lambda = if n > 1 { trace / (n - 1) as f64 } else { 0.0 };
    let mut addl_b: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut t = -lambda * p[ix2(n, i, j)];
            for r in 0..n {
                for s_ in 0..n {
                    t += p[ix2(n, i, r)] * b.b[ix2(n, r, s_)] * p[ix2(n, s_, j)];
                }
            }
            addl_b = addl_b.max(t.abs());
        }
    }
    let addl_c = antisym_projected(n, &b.c, p, false);
    vec![
        Residual { id: RESIDUAL_IDS[0], value: weak_alpha, decisive: true },
        Residual { id: RESIDUAL_IDS[1], value: weak_eta, decisive: true },
        Residual { id: RESIDUAL_IDS[2], value: addl_a, decisive },
        Residual { id: RESIDUAL_IDS[3], value: addl_b, decisive },
        Residual { id: RESIDUAL_IDS[4], value: addl_c, decisive },
    ]
}

/// Relative deviation of each field between the two computations.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    pub velocity: NormalityBundle,
    pub momentum: NormalityBundle,
    pub deviations: Vec<(&'static str, f64)>,
}

impl CrossCheck {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().map(|d| d.1).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> (&'static str, f64) {
        self.deviations.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

fn antisymmetric(n: usize, t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for s_ in 0..n {
            out[ix2(n, r, s_)] = t[ix2(n, r, s_)] - t[ix2(n, s_, r)];
        }
    }
    out
}

/// Computes the bundle at `y` and at `λ(y)` and compares them field by field.
/// `C` is compared through its antisymmetric part.
pub fn cross_check(s: &SystemDef, pt: &PhasePoint) -> Result<CrossCheck> {
    let y = match pt.rep {
        Rep::V => pt.clone(),
        Rep::P => s.legendre_inverse(pt)?,
    };
    let velocity = velocity_bundle(s, &y)?;
    let momentum = momentum_bundle(s, &s.legendre_forward(&y)?)?;
    let n = s.n();
    let deviations = FIELD_NAMES
        .iter()
        .map(|name| {
            let (mut a, mut b) = (velocity.field(name).unwrap(), momentum.field(name).unwrap());
            if *name == "C" {
                a = antisymmetric(n, &a);
                b = antisymmetric(n, &b);
            }
            (*name, relative_deviation(&a, &b))
        })
        .collect();
    Ok(CrossCheck { velocity, momentum, deviations })
}

#[cfg(test)]
mod tests {
    use super::*;

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
            .connection_sym(2, 1, 2, "0.05*v1")
            .build()
            .unwrap()
    }

    #[test]
    fn representations_agree() {
        let s = rich();
        let y = PhasePoint::velocity(vec![0.3, -0.2, 0.5], vec![1.1, 0.8, 1.3]);
        let cc = cross_check(&s, &y).unwrap();
        for (name, dev) in &cc.deviations {
            assert!(*dev < 1e-9, "{name}: {dev}\n{:?}\n{:?}", cc.velocity.field(name), cc.momentum.field(name));
        }
    }
}
