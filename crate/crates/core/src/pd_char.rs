//! Phase-detector characteristics obtained by averaging the product of the
//! reference and VCO waveforms over one period.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Waveform {
    Sine,
    Cosine,
    /// `sign(cos(theta))`
    SquareOfCosine,
    /// Piecewise-linear waveform, taken literally:
    /// `(2/pi) theta + 1` on `[0, pi]` and `1 - (2/pi) theta` on `(pi, 2 pi)`.
    ///
    /// The two branches do not join: the value ranges over `[1, 3]` on the first
    /// half period and `(-3, -1)` on the second, with jumps at `0` and `pi`.
    Triangle,
}

impl Waveform {
    pub fn name(self) -> &'static str {
        match self {
            Waveform::Sine => "sin",
            Waveform::Cosine => "cos",
            Waveform::SquareOfCosine => "sign(cos)",
            Waveform::Triangle => "triangle",
        }
    }

    pub fn eval(self, theta: f64) -> f64 {
        match self {
            Waveform::Sine => theta.sin(),
            Waveform::Cosine => theta.cos(),
            Waveform::SquareOfCosine => {
                let c = theta.cos();
                if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Waveform::Triangle => {
                let t = theta.rem_euclid(TWO_PI);
                if t <= PI {
                    FRAC_2_PI * t + 1.0
                } else {
                    1.0 - FRAC_2_PI * t
                }
            }
        }
    }
}

pub fn waveform_eval(w: Waveform, theta: f64) -> f64 {
    w.eval(theta)
}

pub const MIN_AVERAGING_SAMPLES: usize = 64;
pub const MIN_FIT_SAMPLES: usize = 16;

/// Mean of `f1(s + theta_delta) * f2(s)` over a uniform `n`-point grid on `[0, 2 pi)`.
pub fn averaged_pd(f1: Waveform, f2: Waveform, theta_delta: f64, n: usize) -> Result<f64> {
    if n < MIN_AVERAGING_SAMPLES {
        return Err(Error::param(
            "n",
            format!("need at least {MIN_AVERAGING_SAMPLES} samples, got {n}"),
        ));
    }
    let ds = TWO_PI / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let s = k as f64 * ds;
            f1.eval(s + theta_delta) * f2.eval(s)
        })
        .sum();
    Ok(sum / n as f64)
}

/// Output of a two-phase detector fed with `cos` waveforms: the quadrature mix
/// `sin(t1) cos(t2) - cos(t1) sin(t2)`, averaged like [`averaged_pd`].
pub fn two_phase_pd(theta_delta: f64, n: usize) -> Result<f64> {
    if n < MIN_AVERAGING_SAMPLES {
        return Err(Error::param(
            "n",
            format!("need at least {MIN_AVERAGING_SAMPLES} samples, got {n}"),
        ));
    }
    let ds = TWO_PI / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let t2 = k as f64 * ds;
            let t1 = t2 + theta_delta;
            t1.sin() * t2.cos() - t1.cos() * t2.sin()
        })
        .sum();
    Ok(sum / n as f64)
}

fn project_on_sine(m: usize, mut pd: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if m < MIN_FIT_SAMPLES {
        return Err(Error::param(
            "m",
            format!("need at least {MIN_FIT_SAMPLES} samples, got {m}"),
        ));
    }
    let dt = TWO_PI / m as f64;
    let mut acc = 0.0;
    for j in 0..m {
        let t = j as f64 * dt;
        acc += pd(t)? * t.sin();
    }
    Ok(2.0 * acc / m as f64)
}

/// First sine Fourier coefficient of the averaged characteristic, i.e. the gain
/// `kd` in `kd * sin(theta_delta)`.
pub fn fit_sine_gain(f1: Waveform, f2: Waveform, m: usize, n: usize) -> Result<f64> {
    project_on_sine(m, |t| averaged_pd(f1, f2, t, n))
}

pub fn fit_two_phase_gain(m: usize, n: usize) -> Result<f64> {
    project_on_sine(m, |t| two_phase_pd(t, n))
}

/// One row of the waveform / gain table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdTableRow {
    pub waveform_f1: String,
    pub waveform_f2: String,
    pub kd_recovered: f64,
    pub kd_expected: f64,
}

/// Recovers the gain of every classical and two-phase configuration.
pub fn pd_table(m: usize, n: usize) -> Result<Vec<PdTableRow>> {
    let classical = [
        (Waveform::Sine, Waveform::Cosine, 0.5),
        (Waveform::Sine, Waveform::SquareOfCosine, FRAC_2_PI),
        (Waveform::Triangle, Waveform::Sine, 4.0 / (PI * PI)),
    ];
    let mut rows = Vec::with_capacity(classical.len() + 1);
    for (f1, f2, expected) in classical {
        rows.push(PdTableRow {
            waveform_f1: f1.name().to_string(),
            waveform_f2: f2.name().to_string(),
            kd_recovered: fit_sine_gain(f1, f2, m, n)?,
            kd_expected: expected,
        });
    }
    rows.push(PdTableRow {
        waveform_f1: "cos (two-phase)".to_string(),
        waveform_f2: "cos (two-phase)".to_string(),
        kd_recovered: fit_two_phase_gain(m, n)?,
        kd_expected: 1.0,
    });
    Ok(rows)
}
