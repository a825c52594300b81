//! Load-step response of the closed-loop output impedance.
//!
//! The impedance is realised in state space and discretised exactly for a
//! piecewise-linear current input, so the only approximation is sampling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stability::POLE_STABILITY_TOL;
use crate::tf::TransferFunction;

pub const SETTLING_FRACTION: f64 = 0.05;
/// Deviation about the final value must leave a band of this fraction of the
/// peak before a sign change counts as a crossing.
pub const CROSSING_HYSTERESIS: f64 = 0.01;
pub const MIN_RINGING_CROSSINGS: usize = 3;
const MAX_SAMPLES: usize = 20_000_000;

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpaceModel {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (sI - A)^-1 B + D` at `s = j 2 pi f`.
    pub fn evaluate(&self, f_hz: f64) -> Result<num_complex::Complex64> {
        use num_complex::Complex64;
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f_hz);
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m
            .lu()
            .solve(&b)
            .ok_or(Error::PoleOnAxis { f_hz })?;
        let y: Complex64 = self.c.iter().zip(x.iter()).map(|(c, x)| *c * x).sum();
        Ok(y + self.d)
    }
}

/// Controllable canonical realisation in a rescaled time base.
///
/// With `s = w sigma` the denominator is normalised so its roots have unit
/// geometric-mean magnitude; the companion matrix of the rescaled polynomial
/// is then mapped back with `A = w A_hat`, `B = w B_hat`. Without this the
/// companion form of a plant spanning several decades is hopeless to exponentiate.
pub fn tf_to_state_space(tf: &TransferFunction) -> Result<StateSpaceModel> {
    let (num, den) = (tf.num().coeffs(), tf.den().coeffs());
    let n = den.len() - 1;
    if num.len() - 1 > n {
        return Err(Error::ImproperTransferFunction {
            num: num.len() - 1,
            den: n,
        });
    }
    let lead = den[n];
    let mut b_coeffs = vec![0.0; n + 1];
    for (i, v) in num.iter().enumerate() {
        b_coeffs[i] = v / lead;
    }
    let a_coeffs: Vec<f64> = den.iter().map(|v| v / lead).collect();
    if n == 0 {
        return Ok(StateSpaceModel {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: DVector::zeros(0),
            d: b_coeffs[0],
        });
    }

    let w = time_scale(&a_coeffs);
    // coefficient of sigma^i after substituting s = w sigma and making monic
    let a_hat: Vec<f64> = (0..=n).map(|i| a_coeffs[i] * w.powi(i as i32 - n as i32)).collect();
    let b_hat: Vec<f64> = (0..=n).map(|i| b_coeffs[i] * w.powi(i as i32 - n as i32)).collect();
    let d = b_hat[n];

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = w;
    }
    for j in 0..n {
        a[(n - 1, j)] = -a_hat[j] * w;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = w;
    let c = DVector::from_fn(n, |i, _| b_hat[i] - d * a_hat[i]);
    Ok(StateSpaceModel { a, b, c, d })
}

/// Geometric mean of the root magnitudes of a monic polynomial, ignoring roots at the origin.
fn time_scale(a: &[f64]) -> f64 {
    let n = a.len() - 1;
    let k = a.iter().position(|v| *v != 0.0).unwrap_or(0);
    if k >= n {
        return 1.0;
    }
    let w = a[k].abs().powf(1.0 / (n - k) as f64);
    if w.is_finite() && w > 0.0 {
        w
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadStep {
    #[serde(default)]
    pub i_before_amps: f64,
    pub i_after_amps: f64,
    #[serde(default)]
    pub t_step_s: f64,
    pub dt_s: f64,
    pub duration_s: f64,
    /// Linear ramp time of the current edge; zero is an ideal step.
    #[serde(default)]
    pub rise_time_s: f64,
}

impl LoadStep {
    pub fn delta_amps(&self) -> f64 {
        self.i_after_amps - self.i_before_amps
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        let v = |field: &str, msg: &str| Err(Error::validation(format!("{key}.{field}"), msg));
        if !self.i_before_amps.is_finite() || !self.i_after_amps.is_finite() {
            return v("i_after_amps", "currents must be finite");
        }
        if !(self.t_step_s >= 0.0 && self.t_step_s.is_finite()) {
            return v("t_step_s", "must be finite and >= 0");
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return v("dt_s", "must be positive");
        }
        if !(self.duration_s > self.t_step_s && self.duration_s.is_finite()) {
            return v("duration_s", "must exceed t_step_s");
        }
        if self.dt_s > self.duration_s / 100.0 {
            return v("dt_s", "must be at most duration_s / 100");
        }
        if !(self.rise_time_s >= 0.0 && self.rise_time_s.is_finite()) {
            return v("rise_time_s", "must be finite and >= 0");
        }
        if (self.duration_s / self.dt_s).round() as usize > MAX_SAMPLES {
            return v("dt_s", "too many samples");
        }
        Ok(())
    }

    /// Current deviation from `i_before` just after (`right = true`) or just before `t`.
    fn input(&self, t: f64, right: bool) -> f64 {
        let mut x = t - self.t_step_s;
        // sample times are k * dt, which can miss an on-grid step by an ulp
        if x.abs() <= 1e-9 * self.dt_s {
            x = 0.0;
        }
        let frac = if self.rise_time_s > 0.0 {
            (x / self.rise_time_s).clamp(0.0, 1.0)
        } else if x > 0.0 || (right && x == 0.0) {
            1.0
        } else {
            0.0
        };
        frac * self.delta_amps()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransientMetrics {
    /// Sample of largest magnitude after the step, signed.
    pub peak_droop_v: f64,
    /// Last sample.
    pub steady_state_droop_v: f64,
    pub ringing_freq_hz: f64,
    /// Time after the step at which the deviation last left the 5% band.
    pub settling_time_s: f64,
    /// `|peak| / |steady state|`.
    pub overshoot_ratio: f64,
    pub crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientResult {
    pub times_s: Vec<f64>,
    pub v_deviation_volts: Vec<f64>,
    pub t_step_s: f64,
    pub metrics: TransientMetrics,
}

struct Discretized {
    phi: DMatrix<f64>,
    gamma0: DVector<f64>,
    gamma1: DVector<f64>,
}

/// `exp([[A, B, 0], [0, 0, 1], [0, 0, 0]] h)`: the state transition plus the
/// responses to a held input and to a unit-slope ramp over one interval.
fn discretize(ss: &StateSpaceModel, h: f64) -> Discretized {
    let n = ss.order();
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * h));
    for i in 0..n {
        m[(i, n)] = ss.b[i] * h;
    }
    m[(n, n + 1)] = h;
    let e = m.exp();
    Discretized {
        phi: e.view((0, 0), (n, n)).into_owned(),
        gamma0: e.view((0, n), (n, 1)).column(0).into_owned(),
        // the (1,3) block is the integral of e^{A(h-t)} B t, scaled by h
        gamma1: e.view((0, n + 1), (n, 1)).column(0).into_owned() / h,
    }
}

fn advance(x: &mut DVector<f64>, dz: &Discretized, ua: f64, ub: f64, h: f64) {
    let slope = (ub - ua) / h;
    let next = &dz.phi * &*x + &dz.gamma0 * ua + &dz.gamma1 * (slope * h);
    *x = next;
}

pub fn simulate_step(z_cl: &TransferFunction, step: &LoadStep) -> Result<TransientResult> {
    step.validate("step")?;
    let ss = tf_to_state_space(z_cl)?;
    if ss.order() > 0 {
        let poles = z_cl.poles()?;
        if poles.iter().any(|p| p.re >= -POLE_STABILITY_TOL) {
            return Err(Error::UnstableSystem { poles });
        }
    }
    let dt = step.dt_s;
    let samples = (step.duration_s / dt).round() as usize;
    let times: Vec<f64> = (0..=samples).map(|k| k as f64 * dt).collect();
    let mut knots = vec![step.t_step_s];
    if step.rise_time_s > 0.0 {
        knots.push(step.t_step_s + step.rise_time_s);
    }

    let n = ss.order();
    let mut x = DVector::zeros(n);
    let mut v = Vec::with_capacity(times.len());
    let y = |x: &DVector<f64>, t: f64| ss.c.dot(x) + ss.d * step.input(t, true);
    v.push(y(&x, 0.0));
    if n > 0 {
        let full = discretize(&ss, dt);
        for k in 0..samples {
            let (ta, tb) = (times[k], times[k + 1]);
            let eps = 1e-9 * dt;
            let inner: Vec<f64> = knots
                .iter()
                .copied()
                .filter(|&t| t > ta + eps && t < tb - eps)
                .collect();
            if inner.is_empty() {
                advance(&mut x, &full, step.input(ta, true), step.input(tb, false), dt);
            } else {
                let mut a = ta;
                for b in inner.into_iter().chain([tb]) {
                    let h = b - a;
                    advance(&mut x, &discretize(&ss, h), step.input(a, true), step.input(b, false), h);
                    a = b;
                }
            }
            v.push(y(&x, tb));
        }
    } else {
        v.extend(times[1..].iter().map(|&t| ss.d * step.input(t, true)));
    }
    let metrics = compute_metrics(&times, &v, step.t_step_s);
    Ok(TransientResult {
        times_s: times,
        v_deviation_volts: v,
        t_step_s: step.t_step_s,
        metrics,
    })
}

/// Indices where the deviation about `final_v` changes side by more than the
/// hysteresis band, with the interpolated zero-crossing time of each.
fn crossings(times: &[f64], e: &[f64], band: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut state = 0i8;
    let mut last_on_side = 0usize;
    for (i, &v) in e.iter().enumerate() {
        let side = if v > band {
            1
        } else if v < -band {
            -1
        } else {
            0
        };
        if side != 0 && state != 0 && side != state {
            // sign change lies between the last sample on the old side of zero and here
            let mut j = last_on_side;
            while j + 1 < i && (e[j + 1] * state as f64) > 0.0 {
                j += 1;
            }
            let (e0, e1) = (e[j], e[j + 1]);
            let t = times[j] + (times[j + 1] - times[j]) * e0 / (e0 - e1);
            out.push((i, t));
        }
        if side != 0 {
            state = side;
        }
        if v * state as f64 > 0.0 {
            last_on_side = i;
        }
    }
    out
}

fn compute_metrics(times: &[f64], v: &[f64], t_step: f64) -> TransientMetrics {
    let start = times.iter().position(|&t| t >= t_step).unwrap_or(times.len() - 1);
    let (t, v) = (&times[start..], &v[start..]);
    let final_v = *v.last().unwrap_or(&0.0);
    let peak = v.iter().copied().fold(0.0f64, |p, x| if x.abs() > p.abs() { x } else { p });
    let e: Vec<f64> = v.iter().map(|x| x - final_v).collect();
    let cs = crossings(t, &e, CROSSING_HYSTERESIS * peak.abs());
    let ringing_freq_hz = if cs.len() >= MIN_RINGING_CROSSINGS {
        (cs.len() - 1) as f64 / (2.0 * (cs[cs.len() - 1].1 - cs[0].1))
    } else {
        0.0
    };
    let threshold = SETTLING_FRACTION * peak.abs();
    let settling_time_s = e
        .iter()
        .rposition(|x| x.abs() > threshold)
        .map_or(0.0, |i| t[(i + 1).min(t.len() - 1)] - t_step);
    let overshoot_ratio = if final_v != 0.0 {
        peak.abs() / final_v.abs()
    } else if peak == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    TransientMetrics {
        peak_droop_v: peak,
        steady_state_droop_v: final_v,
        ringing_freq_hz,
        settling_time_s,
        overshoot_ratio,
        crossings: cs.len(),
    }
}

/// Dominant ringing frequency and the per-cycle amplitude ratio, from the
/// extrema of successive half-cycles. `(0, 1)` when the response does not ring.
pub fn ringing_metrics(r: &TransientResult) -> (f64, f64) {
    let m = &r.metrics;
    if m.ringing_freq_hz == 0.0 {
        return (0.0, 1.0);
    }
    let start = r.times_s.iter().position(|&t| t >= r.t_step_s).unwrap_or(0);
    let t = &r.times_s[start..];
    let e: Vec<f64> = r.v_deviation_volts[start..]
        .iter()
        .map(|x| x - m.steady_state_droop_v)
        .collect();
    let cs = crossings(t, &e, CROSSING_HYSTERESIS * m.peak_droop_v.abs());
    // half-cycle peaks between consecutive crossings
    let peaks: Vec<f64> = cs
        .windows(2)
        .map(|w| e[w[0].0..w[1].0].iter().fold(0.0f64, |a, x| a.max(x.abs())))
        .collect();
    let ratios: Vec<f64> = peaks
        .windows(3)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[2] / w[0])
        .collect();
    if ratios.is_empty() {
        return (m.ringing_freq_hz, 1.0);
    }
    let mean_log = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    (m.ringing_freq_hz, mean_log.exp())
}
