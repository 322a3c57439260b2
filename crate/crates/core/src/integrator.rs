//! Fixed-step RK4 trajectories with cycle-slip and convergence accounting, and
//! the Lyapunov function of the PI-filter loop.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{slowest_decay_rate, vector_field_x, LoopParams, XState, YState};

const TWO_PI: f64 = 2.0 * PI;

/// Anything RK4 can advance.
pub trait OdeState: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl OdeState for XState {
    fn is_finite(&self) -> bool {
        XState::is_finite(self)
    }
}

impl OdeState for YState {
    fn is_finite(&self) -> bool {
        YState::is_finite(self)
    }
}

/// One classical Runge-Kutta step of `s' = field(s)`.
pub fn rk4_step<S: OdeState>(field: impl Fn(S) -> S, state: S, h: f64) -> Result<S> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::param("h", format!("step must be positive, got {h}")));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    let k1 = field(state);
    let k2 = field(state + k1 * (h / 2.0));
    let k3 = field(state + k2 * (h / 2.0));
    let k4 = field(state + k3 * h);
    let next = state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if !next.is_finite() {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub h: f64,
    pub t_max: f64,
    /// Radius in the weighted norm `|d theta| + sqrt(k0/tau1) |d x|`.
    pub eps_conv: f64,
    pub settle_window: f64,
}

impl IntegratorConfig {
    pub fn new(h: f64, t_max: f64, eps_conv: f64, settle_window: f64) -> Result<Self> {
        let cfg = IntegratorConfig {
            h,
            t_max,
            eps_conv,
            settle_window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::param(
                "h",
                format!("must be positive, got {}", self.h),
            ));
        }
        if !(self.t_max.is_finite() && self.t_max > self.h) {
            return Err(Error::param(
                "tmax",
                format!("must exceed the step h = {}, got {}", self.h, self.t_max),
            ));
        }
        if self.eps_conv.is_nan() || self.eps_conv <= 0.0 {
            return Err(Error::param(
                "eps_conv",
                format!("must be positive, got {}", self.eps_conv),
            ));
        }
        if self.settle_window.is_nan() || self.settle_window < 0.0 {
            return Err(Error::param(
                "settle_window",
                format!("must be non-negative, got {}", self.settle_window),
            ));
        }
        Ok(())
    }

    /// Defaults scaled to the natural frequency `w = sqrt(k0/tau1)`:
    /// `h = 0.01 / w`, `settle_window = 20 / w`, `eps_conv = 1e-4`, and a horizon
    /// long enough for the slowest locked-state mode to decay by `e^-30`.
    pub fn for_params(p: &LoopParams) -> Self {
        let w = p.natural_frequency();
        let h = 0.01 / w;
        let settle_window = 20.0 / w;
        let decay = slowest_decay_rate(p);
        let t_max = if decay > 0.0 {
            (settle_window + 30.0 / decay).min(1e6 * h)
        } else {
            1000.0 / w
        };
        IntegratorConfig {
            h,
            t_max,
            eps_conv: 1e-4,
            settle_window,
        }
    }

    /// [`IntegratorConfig::for_params`] with the horizon extended for a
    /// trajectory that starts far from lock. While slipping, `V` drops by about
    /// `tau2 / 2` per unit time, so `4 V(init) / tau2` is added.
    pub fn for_trajectory(p: &LoopParams, omega: f64, init: XState) -> Self {
        let mut cfg = Self::for_params(p);
        if p.tau2() > 0.0 {
            let extra = 4.0 * lyapunov_v(p, omega, init) / p.tau2();
            cfg.t_max = (cfg.t_max + extra).min(2e6 * cfg.h);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    /// `(t, state)` pairs with unwrapped phase, one per step including `t = 0`.
    pub samples: Vec<(f64, XState)>,
    pub slipped: bool,
    pub slip_count: u32,
    pub converged: bool,
    /// Phase of the equilibrium the trajectory settled at, if it converged.
    pub limit_theta: Option<f64>,
    /// Largest `|theta(t) - theta(0)|` seen, including the limit point once converged.
    pub max_excursion: f64,
    pub v_series: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> (f64, XState) {
        *self
            .samples
            .last()
            .expect("a trajectory always holds its initial sample")
    }

    /// True when the trajectory settled at a locked state `2 pi k`.
    pub fn converged_to_stable(&self) -> bool {
        match self.limit_theta {
            Some(t) => self.converged && ((t / TWO_PI).round() * TWO_PI - t).abs() < 1e-9,
            None => false,
        }
    }
}

/// Equilibrium phases are `k pi`: even `k` locked, odd `k` saddle.
fn nearest_equilibrium_phase(theta: f64) -> f64 {
    (theta / PI).round() * PI
}

/// Integrates the filter-state system from `init` until it has stayed within
/// `eps_conv` of an equilibrium for `settle_window`, or until `t_max`.
pub fn simulate(
    p: &LoopParams,
    omega: f64,
    init: XState,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if !init.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let w = p.natural_frequency();
    let x_eq = p.x_eq(omega);
    let field = |s: XState| vector_field_x(p, omega, s);
    let distance = |s: XState| {
        let th = nearest_equilibrium_phase(s.theta_delta);
        (s.theta_delta - th).abs() + w * (s.x - x_eq).abs()
    };

    let n_steps = (cfg.t_max / cfg.h).ceil() as usize;
    let mut samples = Vec::with_capacity(n_steps.min(1 << 20) + 1);
    let mut v_series = Vec::with_capacity(n_steps.min(1 << 20) + 1);
    let theta0 = init.theta_delta;
    let mut state = init;
    let mut max_excursion: f64 = 0.0;
    let mut inside_since = if distance(state) <= cfg.eps_conv {
        Some(0.0)
    } else {
        None
    };
    let mut converged = false;

    samples.push((0.0, state));
    v_series.push(lyapunov_v(p, omega, state));

    for k in 1..=n_steps {
        let t = k as f64 * cfg.h;
        state = rk4_step(field, state, cfg.h).map_err(|_| Error::NonFinite { t })?;
        samples.push((t, state));
        v_series.push(lyapunov_v(p, omega, state));
        max_excursion = max_excursion.max((state.theta_delta - theta0).abs());

        if distance(state) <= cfg.eps_conv {
            let since = *inside_since.get_or_insert(t);
            if t - since >= cfg.settle_window {
                converged = true;
                break;
            }
        } else {
            inside_since = None;
        }
    }

    let limit_theta = converged.then(|| nearest_equilibrium_phase(state.theta_delta));
    if let Some(th) = limit_theta {
        max_excursion = max_excursion.max((th - theta0).abs());
    }
    let slip_count = (max_excursion / TWO_PI).floor() as u32;

    Ok(TrajectoryRecord {
        samples,
        slipped: slip_count >= 1,
        slip_count,
        converged,
        limit_theta,
        max_excursion,
        v_series,
    })
}

/// `V = (x - tau1 omega / k0)^2 / 2 + (2 tau1 / k0) sin^2(theta / 2)`
pub fn lyapunov_v(p: &LoopParams, omega: f64, s: XState) -> f64 {
    let dx = s.x - p.x_eq(omega);
    let half = (s.theta_delta / 2.0).sin();
    0.5 * dx * dx + 2.0 * p.tau1() / p.k0() * half * half
}

/// `dV/dt = -tau2 sin^2(theta)` along solutions, for every deviation.
pub fn lyapunov_vdot(p: &LoopParams, s: XState) -> f64 {
    let sin = s.theta_delta.sin();
    -p.tau2() * sin * sin
}

/// Lock-in test at deviation `omega`: start from the locked state of `-omega`,
/// `(0, x_eq(-omega))`, and report whether a cycle slip occurs.
pub fn lock_in_slips(p: &LoopParams, omega: f64, cfg: &IntegratorConfig) -> Result<bool> {
    let init = XState::new(0.0, p.x_eq(-omega));
    Ok(simulate(p, omega, init, cfg)?.slipped)
}

/// Frequency-step test: locked at `omega`, the deviation jumps to `omega + step`.
pub fn frequency_step_slips(
    p: &LoopParams,
    omega: f64,
    step: f64,
    cfg: &IntegratorConfig,
) -> Result<bool> {
    let init = XState::new(0.0, p.x_eq(omega));
    Ok(simulate(p, omega + step, init, cfg)?.slipped)
}

/// Bisects a monotone slip predicate: `slips(lo)` must be false and `slips(hi)` true.
/// Returns the final bracket.
pub fn bisect_slip_boundary(
    mut slips: impl FnMut(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
) -> Result<(f64, f64)> {
    if slips(lo)? || !slips(hi)? {
        return Err(Error::Domain(format!(
            "slip boundary not bracketed by [{lo}, {hi}]"
        )));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if slips(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}
