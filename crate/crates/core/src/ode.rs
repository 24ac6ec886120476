//! Adaptive Dormand-Prince 5(4) integrator with exact stops at output times.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 200_000, h_min: 1e-14 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each of the
/// increasing times in `t_out` (which may start at `t0`).
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(t_out.len());
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let span = t_out.last().map_or(0.0, |e| (e - t0).abs());
    let mut h = (span * 1e-3).max(1e-6);
    let mut steps = 0;

    f(t, &y, &mut k[0])?;
    for &target in t_out {
        if target < t {
            return Err(Error::IntegrationFailure { t, reason: "output times must increase".into() });
        }
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::IntegrationFailure { t, reason: "step limit reached".into() });
            }
            let last = t + h >= target;
            let hs = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..dim {
                    tmp[i] = y[i] + hs * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                f(t + C[s] * hs, &tmp, &mut k[s])?;
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let mut hi5 = 0.0;
                let mut hi4 = 0.0;
                for s in 0..7 {
                    hi5 += B5[s] * k[s][i];
                    hi4 += B4[s] * k[s][i];
                }
                y5[i] = y[i] + hs * hi5;
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                let e = hs * (hi5 - hi4) / sc;
                err += e * e;
            }
            let err = (err / dim.max(1) as f64).sqrt();
            steps += 1;
            if !err.is_finite() {
                return Err(Error::IntegrationFailure { t, reason: "non-finite state".into() });
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y.copy_from_slice(&y5);
                // FSAL: the last stage is f at the accepted point
                k.swap(0, 6);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let proposal = hs * factor;
            if err <= 1.0 && last {
                // keep the step size that was working before the clipped step
                h = h.max(proposal);
            } else {
                h = proposal;
            }
            if h < opts.h_min {
                return Err(Error::IntegrationFailure { t, reason: "step size underflow".into() });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            &times,
            &OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - t.cos()).abs() < 1e-9, "t = {t}");
            assert!((y[1] + t.sin()).abs() < 1e-9);
        }
        assert_eq!(out[0], vec![1.0, 0.0]);
    }

    #[test]
    fn exponential_growth_meets_tolerance() {
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &[1.0, 3.0],
            &OdeOptions { rtol: 1e-11, ..OdeOptions::default() },
        )
        .unwrap();
        assert!((out[1][0] / 3f64.exp() - 1.0).abs() < 1e-9);
    }
}
