//! Stable manifold of the saddle `(pi, 0)` in the reduced phase plane, and the
//! lock-in and pull-out frequencies it determines.
//!
//! The branch entering the saddle from `theta < pi, y > 0` is traced as a graph
//! `y = S(theta)` by integrating
//!
//! ```text
//! dy/dtheta = -(a k0 cos(theta) y + b k0 sin(theta)) / y
//! ```
//!
//! from `theta = pi - eps` down to `theta = 0`. Parametrizing by `theta` rather
//! than time avoids the infinitely slow approach to the saddle, and is valid
//! because `y > 0` along the whole branch.
//!
//! Since `omega` only shifts the filter-state plane vertically, the reduced
//! curve is computed once per parameter set. The lock-in frequency is
//! `S(0) / 2` and the pull-out frequency is `S(0)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{saddle_eigenvalues, y_to_x, LoopParams, XState, YState};

/// Launch offset and step for [`trace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub eps: f64,
    pub h_theta: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            eps: 1e-8 * PI,
            h_theta: PI / 20000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatrixCurve {
    /// Descending from `pi - eps` to exactly `0`.
    pub thetas: Vec<f64>,
    pub ys: Vec<f64>,
    pub y_at_zero: f64,
    #[serde(skip)]
    slope_k: (f64, f64),
}

/// Unit stable eigendirection of the saddle, oriented into `theta < pi, y > 0`.
pub fn stable_direction(p: &LoopParams) -> (f64, f64) {
    let (_, minus) = saddle_eigenvalues(p);
    let norm = (1.0 + minus * minus).sqrt();
    (-1.0 / norm, -minus / norm)
}

fn slope(ak: f64, bk: f64, theta: f64, y: f64) -> f64 {
    let (sin, cos) = theta.sin_cos();
    -(ak * cos * y + bk * sin) / y
}

/// Traces the upper stable branch of the saddle. See the module docs.
pub fn trace(p: &LoopParams, eps: f64, h_theta: f64) -> Result<SeparatrixCurve> {
    if !(eps > 0.0 && eps <= 1e-4) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, 1e-4], got {eps}"),
        ));
    }
    if !(h_theta.is_finite() && h_theta > 0.0) {
        return Err(Error::param(
            "h_theta",
            format!("must be positive, got {h_theta}"),
        ));
    }
    let ak = p.a() * p.k0();
    let bk = p.b() * p.k0();
    let (_, minus) = saddle_eigenvalues(p);
    let f = |theta: f64, y: f64| slope(ak, bk, theta, y);

    // Near the saddle the branch is y ~ c u with u = pi - theta, and deviations
    // from it decay like u^-k. Explicit steps stay stable only while h <= u / k,
    // so the trace starts with geometrically growing steps.
    let c = -minus;
    let k = 2.0 + ak / c;
    let start = PI - eps;
    let mut thetas = Vec::with_capacity((start / h_theta).ceil() as usize + 64);
    let mut ys = Vec::with_capacity(thetas.capacity());
    let mut theta = start;
    let mut y = c * eps;
    thetas.push(theta);
    ys.push(y);

    while theta > 0.0 {
        let step = h_theta.min((PI - theta) / k);
        // never leave a sliver: the last step lands exactly on 0
        let next = if theta - step < 0.5 * h_theta {
            0.0
        } else {
            theta - step
        };
        let h = next - theta;
        let k1 = f(theta, y);
        let k2 = f(theta + h / 2.0, y + h / 2.0 * k1);
        let k3 = f(theta + h / 2.0, y + h / 2.0 * k2);
        let k4 = f(next, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        theta = next;
        if !(y.is_finite() && y > 0.0) {
            return Err(Error::Tracing { theta, y });
        }
        thetas.push(theta);
        ys.push(y);
    }

    Ok(SeparatrixCurve {
        thetas,
        y_at_zero: y,
        ys,
        slope_k: (ak, bk),
    })
}

pub fn trace_with(p: &LoopParams, cfg: &TraceConfig) -> Result<SeparatrixCurve> {
    trace(p, cfg.eps, cfg.h_theta)
}

impl SeparatrixCurve {
    /// Largest `theta` covered by the trace (`pi - eps`).
    pub fn theta_max(&self) -> f64 {
        self.thetas[0]
    }

    /// `S(theta)` by cubic Hermite interpolation with the exact ODE slopes.
    pub fn y_at(&self, theta: f64) -> Result<f64> {
        if !(0.0..=self.theta_max()).contains(&theta) {
            return Err(Error::Domain(format!(
                "theta = {theta} outside traced interval [0, {}]",
                self.theta_max()
            )));
        }
        // thetas are descending: find i with thetas[i] >= theta >= thetas[i + 1]
        let i = self
            .thetas
            .partition_point(|&t| t > theta)
            .saturating_sub(1)
            .min(self.thetas.len() - 2);
        let (t0, t1) = (self.thetas[i], self.thetas[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (ak, bk) = self.slope_k;
        let (d0, d1) = (slope(ak, bk, t0, y0), slope(ak, bk, t1, y1));
        let h = t1 - t0;
        let s = (theta - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1)
    }

    pub fn points(&self) -> impl Iterator<Item = YState> + '_ {
        self.thetas
            .iter()
            .zip(&self.ys)
            .map(|(&t, &y)| YState::new(t, y))
    }
}

pub fn lock_in_frequency_with(p: &LoopParams, cfg: &TraceConfig) -> Result<f64> {
    Ok(trace_with(p, cfg)?.y_at_zero / 2.0)
}

/// `omega_l = S(0) / 2`.
pub fn lock_in_frequency(p: &LoopParams) -> Result<f64> {
    lock_in_frequency_with(p, &TraceConfig::default())
}

pub fn pull_out_frequency_with(p: &LoopParams, cfg: &TraceConfig) -> Result<f64> {
    Ok(2.0 * lock_in_frequency_with(p, cfg)?)
}

/// `omega_po = 2 omega_l`.
pub fn pull_out_frequency(p: &LoopParams) -> Result<f64> {
    pull_out_frequency_with(p, &TraceConfig::default())
}

/// Boundary of the lock-in domain in filter-state coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainBoundary {
    /// Image of the traced branch, at `theta` from the grid.
    pub lower: Vec<XState>,
    /// Image of the mirrored branch `(theta, y) -> (-theta, -y)`, at `-theta`.
    pub upper: Vec<XState>,
}

/// Maps the traced branch and its mirror image into `(theta, x)` at deviation `omega`.
/// Every grid point must lie in `[0, pi - eps]`.
pub fn lock_in_domain_boundary_x(
    p: &LoopParams,
    curve: &SeparatrixCurve,
    omega: f64,
    theta_grid: &[f64],
) -> Result<DomainBoundary> {
    let mut lower = Vec::with_capacity(theta_grid.len());
    let mut upper = Vec::with_capacity(theta_grid.len());
    for &theta in theta_grid {
        let s = curve.y_at(theta)?;
        lower.push(y_to_x(p, omega, YState::new(theta, s)));
        upper.push(y_to_x(p, omega, YState::new(-theta, -s)));
    }
    Ok(DomainBoundary { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(k0: f64, tau1: f64, tau2: f64) -> LoopParams {
        LoopParams::new(k0, tau1, tau2).unwrap()
    }

    fn default_trace(q: &LoopParams) -> SeparatrixCurve {
        trace_with(q, &TraceConfig::default()).unwrap()
    }

    #[test]
    fn stable_direction_examples() {
        let (u, v) = stable_direction(&p(1.0, 1.0, 0.0));
        assert_relative_eq!(v / u, -1.0, max_relative = 1e-14);
        assert!(u < 0.0 && v > 0.0);

        let (u, v) = stable_direction(&p(1.0, 1.0, 1.0));
        assert_relative_eq!(-v / u, (5f64.sqrt() - 1.0) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(u * u + v * v, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn trace_argument_checks() {
        let q = p(1.0, 1.0, 0.1);
        assert!(matches!(
            trace(&q, 0.0, 0.01),
            Err(Error::InvalidParameter { name: "eps", .. })
        ));
        assert!(trace(&q, 1e-3, 0.01).is_err());
        assert!(matches!(
            trace(&q, 1e-6, -0.01),
            Err(Error::InvalidParameter {
                name: "h_theta",
                ..
            })
        ));
    }

    #[test]
    fn trace_grid_shape() {
        let c = trace(&p(1.0, 1.0, 0.3), 1e-6, 0.01).unwrap();
        assert_eq!(*c.thetas.last().unwrap(), 0.0);
        assert!(c.thetas.windows(2).all(|w| w[1] < w[0]));
        assert!(c.ys.iter().all(|&y| y > 0.0));
        assert_eq!(c.y_at_zero, *c.ys.last().unwrap());
    }

    #[test]
    fn strongly_damped_trace_is_stable() {
        // a k0 = 50 against b k0 = 100: deviations near the saddle decay like u^-28
        let q = p(100.0, 1.0, 0.5);
        let coarse = trace(&q, 1e-8 * PI, PI / 20000.0).unwrap();
        let fine = trace(&q, 1e-8 * PI, PI / 40000.0).unwrap();
        assert!(coarse.y_at_zero > 0.0);
        assert_relative_eq!(coarse.y_at_zero, fine.y_at_zero, max_relative = 1e-9);
    }

    #[test]
    fn conservative_trace_matches_closed_form() {
        let q = p(2.0, 0.5, 0.0);
        let c = default_trace(&q);
        for s in c.points().filter(|s| s.theta_delta <= 0.95 * PI) {
            let exact = 4.0 * (s.theta_delta / 2.0).cos();
            assert_relative_eq!(s.y, exact, max_relative = 1e-6);
        }
        assert_relative_eq!(c.y_at_zero, 4.0, max_relative = 1e-6);
        assert_relative_eq!(
            default_trace(&p(1.0, 1.0, 0.0)).y_at_zero,
            2.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn halving_step_is_self_consistent() {
        let q = p(10.0, 1.0, 0.1);
        let d = TraceConfig::default();
        let coarse = trace_with(&q, &d).unwrap().y_at_zero;
        let fine = trace(&q, d.eps, d.h_theta / 2.0).unwrap().y_at_zero;
        assert!(((coarse - fine) / fine).abs() < 1e-8);
    }

    #[test]
    fn hermite_interpolation_reproduces_nodes_and_closed_form() {
        let q = p(2.0, 0.5, 0.0);
        let c = trace(&q, 1e-8, PI / 2000.0).unwrap();
        assert_eq!(c.y_at(c.thetas[100]).unwrap(), c.ys[100]);
        for k in 0..50 {
            let t = 0.0123 + 0.05 * k as f64;
            assert_relative_eq!(
                c.y_at(t).unwrap(),
                4.0 * (t / 2.0).cos(),
                max_relative = 1e-9
            );
        }
        assert!(c.y_at(-0.1).is_err());
        assert!(c.y_at(PI).is_err());
    }

    #[test]
    fn lock_in_and_pull_out_conservative() {
        let q = p(1.0, 1.0, 0.0);
        assert_relative_eq!(lock_in_frequency(&q).unwrap(), 1.0, max_relative = 1e-6);
        assert_relative_eq!(pull_out_frequency(&q).unwrap(), 2.0, max_relative = 1e-6);
    }

    #[test]
    fn lock_in_reference_case() {
        let w = lock_in_frequency(&p(10.0, 1.0, 0.1)).unwrap();
        assert!((w - 3.51).abs() < 0.01, "omega_l = {w}");
    }

    #[test]
    fn lock_in_increases_with_gain() {
        let ws: Vec<f64> = [0.5, 1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|&k| lock_in_frequency(&p(k, 1.0, 0.2)).unwrap())
            .collect();
        assert!(ws.windows(2).all(|w| w[1] > w[0]), "{ws:?}");
    }

    #[test]
    fn reduced_curve_depends_only_on_ratio_and_tau2() {
        let a = default_trace(&p(4.0, 2.0, 0.3));
        let b = default_trace(&p(2.0, 1.0, 0.6 * 0.5));
        // same b k0 = 2; a k0 = 0.6 in both
        assert_relative_eq!(a.y_at_zero, b.y_at_zero, max_relative = 1e-12);
    }

    #[test]
    fn domain_boundary_shift_and_symmetry() {
        let q = p(3.0, 0.7, 0.2);
        let c = default_trace(&q);
        let grid: Vec<f64> = (0..40).map(|k| k as f64 * 0.075).collect();
        let b0 = lock_in_domain_boundary_x(&q, &c, 0.0, &grid).unwrap();
        let omega = 1.7;
        let bw = lock_in_domain_boundary_x(&q, &c, omega, &grid).unwrap();
        let shift = omega * q.tau1() / q.k0();
        for (a, b) in b0
            .lower
            .iter()
            .zip(&bw.lower)
            .chain(b0.upper.iter().zip(&bw.upper))
        {
            assert!((b.x - a.x - shift).abs() < 1e-10);
            assert_eq!(a.theta_delta, b.theta_delta);
        }
        assert_relative_eq!(
            b0.lower[0].x,
            -(q.tau1() / q.k0()) * c.y_at_zero,
            max_relative = 1e-14
        );
        for (lo, up) in b0.lower.iter().zip(&b0.upper) {
            assert_eq!(up.theta_delta, -lo.theta_delta);
            assert!((up.x + lo.x).abs() < 1e-14);
        }
    }
}
