//! Simulated series-injection loop-gain measurement.
//!
//! An ideal voltage source `v_inj` is inserted between the sense network
//! output and the feedback node. Per frequency the node equations
//!
//! ```text
//! v_out   = G v_error
//! v_error = -v_fb
//! v_fb    = H v_out + v_inj
//! ```
//!
//! are solved directly and the loop gain is read off the node phasors, the
//! way a network analyser would, without ever forming `G H` symbolically.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::loop_model::LoopModel;
use crate::tf::FrequencyResponse;

/// `|1 + G H|` below this is flagged as poorly conditioned.
pub const CONDITIONING_WARNING: f64 = 1e-6;
/// Relative to `1 + |G H|`, below this the solve is refused.
const SINGULAR_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionNodes {
    pub v_error: Complex64,
    pub v_out: Complex64,
    pub v_fb: Complex64,
    pub v_inj: Complex64,
    /// `H v_out`, the signal arriving back at the injection point.
    pub v_return: Complex64,
}

impl InjectionNodes {
    /// Ratio of the returning signal to the one launched into the loop.
    pub fn loop_gain(&self) -> Complex64 {
        -self.v_return / self.v_fb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionMeasurement {
    pub response: FrequencyResponse,
    /// Node phasors per frequency for the requested amplitude.
    pub nodes: Vec<InjectionNodes>,
    /// Frequencies where `|1 + G H| < CONDITIONING_WARNING`.
    pub ill_conditioned_hz: Vec<f64>,
}

/// Solves the loop for a unit injection at one frequency.
pub fn solve_nodes(g: Complex64, h: Complex64, f_hz: f64) -> Result<InjectionNodes> {
    // [1  -G] [v_out  ]   [ 0     ]
    // [H   1] [v_error] = [-v_inj ]
    let det = Complex64::new(1.0, 0.0) + g * h;
    if det.norm() <= SINGULAR_TOL * (1.0 + (g * h).norm()) {
        return Err(Error::SingularLoop { f_hz });
    }
    let v_inj = Complex64::new(1.0, 0.0);
    let v_out = -g * v_inj / det;
    let v_error = -v_inj / det;
    let v_return = h * v_out;
    Ok(InjectionNodes {
        v_error,
        v_out,
        v_fb: v_return + v_inj,
        v_inj,
        v_return,
    })
}

pub fn measure_loop_gain(m: &LoopModel, freqs_hz: &[f64], amplitude_v: f64) -> Result<InjectionMeasurement> {
    measure_loop_gain_with(m, freqs_hz, amplitude_v, Execution::default())
}

/// The ratio is taken on the unit-injection solution and the reported
/// phasors are then scaled, so the result does not depend on `amplitude_v`
/// even in the last bit.
pub fn measure_loop_gain_with(
    m: &LoopModel,
    freqs_hz: &[f64],
    amplitude_v: f64,
    exec: Execution,
) -> Result<InjectionMeasurement> {
    if !(amplitude_v > 0.0 && amplitude_v.is_finite()) {
        return Err(Error::invalid("injection amplitude must be positive and finite"));
    }
    let solved = exec.try_map(freqs_hz, |&f| {
        let g = m.g().evaluate(f)?;
        let h = m.h().evaluate(f)?;
        let unit = solve_nodes(g, h, f)?;
        Ok::<_, Error>((unit, (Complex64::new(1.0, 0.0) + g * h).norm()))
    })?;
    let mut values = Vec::with_capacity(solved.len());
    let mut nodes = Vec::with_capacity(solved.len());
    let mut ill_conditioned_hz = Vec::new();
    for ((unit, det), &f) in solved.into_iter().zip(freqs_hz) {
        values.push(unit.loop_gain());
        if det < CONDITIONING_WARNING {
            ill_conditioned_hz.push(f);
        }
        nodes.push(InjectionNodes {
            v_error: unit.v_error * amplitude_v,
            v_out: unit.v_out * amplitude_v,
            v_fb: unit.v_fb * amplitude_v,
            v_inj: unit.v_inj * amplitude_v,
            v_return: unit.v_return * amplitude_v,
        });
    }
    Ok(InjectionMeasurement {
        response: FrequencyResponse::new(freqs_hz.to_vec(), values)?,
        nodes,
        ill_conditioned_hz,
    })
}
