//! Perturbation series of the separatrix in the small filter parameter
//! `a = tau2 / tau1`, and the frequency estimates derived from it.
//!
//! `S(theta, a) = S0(theta) + a S1(theta) + a^2 S2(theta) + O(a^3)` on `[0, pi)`.
//! Near `pi` the closed forms of `S1` and `S2` are `0/0`, so evaluation is
//! restricted to `theta <= pi - 1e-6`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LoopParams;

/// Largest phase at which the closed forms are evaluated.
pub const THETA_LIMIT: f64 = PI - 1e-6;

/// Order of a truncated series, 0 to 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesOrder(u8);

impl SeriesOrder {
    pub const ZERO: SeriesOrder = SeriesOrder(0);
    pub const FIRST: SeriesOrder = SeriesOrder(1);
    pub const SECOND: SeriesOrder = SeriesOrder(2);

    pub fn new(order: u8) -> Result<Self> {
        if order <= 2 {
            Ok(SeriesOrder(order))
        } else {
            Err(Error::param(
                "order",
                format!("must be 0, 1 or 2, got {order}"),
            ))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=THETA_LIMIT).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "theta = {theta} outside [0, pi - 1e-6]"
        )))
    }
}

/// `2/3 - sin(theta/2) - sin(3 theta / 2) / 3`
fn s1_numerator(theta: f64) -> f64 {
    2.0 / 3.0 - (theta / 2.0).sin() - (1.5 * theta).sin() / 3.0
}

/// `sqrt(2 b k0 (1 + cos theta)) = 2 sqrt(b k0) cos(theta / 2)`
pub fn s0(p: &LoopParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(2.0 * (p.b() * p.k0()).sqrt() * (theta / 2.0).cos())
}

/// `k0 (2/3 - sin(theta/2) - sin(3 theta/2) / 3) / cos(theta/2)`
pub fn s1(p: &LoopParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(p.k0() * s1_numerator(theta) / (theta / 2.0).cos())
}

/// First-order coefficient in its unsimplified form,
/// `k0 sqrt(2bk0) (2 sqrt2 / 3 - (2/3)(2 + cos) sqrt(1 - cos)) / sqrt(2bk0 (1 + cos))`.
pub fn s1_integral_form(p: &LoopParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let c = theta.cos();
    let r = (2.0 * p.b() * p.k0()).sqrt();
    let num = 2.0 * 2f64.sqrt() / 3.0 - 2.0 / 3.0 * (2.0 + c) * (1.0 - c).sqrt();
    Ok(p.k0() * r * num / (r * (1.0 + c).sqrt()))
}

/// Second-order coefficient:
///
/// ```text
/// k0^2 [13/2 - 4 ln2 - (8 sin(t/2) - 4 ln(1 + sin(t/2)) + cos(2t)/2 + 2 cos t)] / (6 sqrt(b k0) cos(t/2))
///   - k0^2 (2/3 - sin(t/2) - sin(3t/2)/3)^2 / (4 sqrt(b k0) cos^3(t/2))
/// ```
pub fn s2(p: &LoopParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let k2 = p.k0() * p.k0();
    let root = (p.b() * p.k0()).sqrt();
    let half_sin = (theta / 2.0).sin();
    let half_cos = (theta / 2.0).cos();
    let inner = 8.0 * half_sin - 4.0 * (half_sin + 1.0).ln()
        + 0.5 * (2.0 * theta).cos()
        + 2.0 * theta.cos();
    let first = k2 * (6.5 - 4.0 * LN_2 - inner) / (6.0 * root * half_cos);
    let n = s1_numerator(theta);
    let second = k2 * n * n / (4.0 * root * half_cos.powi(3));
    Ok(first - second)
}

/// `S0 + a S1 (+ a^2 S2)` truncated at `order`.
pub fn series_separatrix(p: &LoopParams, theta: f64, order: SeriesOrder) -> Result<f64> {
    let a = p.a();
    let mut v = s0(p, theta)?;
    if order.get() >= 1 {
        v += a * s1(p, theta)?;
    }
    if order.get() >= 2 {
        v += a * a * s2(p, theta)?;
    }
    Ok(v)
}

fn check_estimate_order(order: SeriesOrder) -> Result<()> {
    if order.get() == 0 {
        Err(Error::param(
            "order",
            "frequency estimates use order 1 or 2",
        ))
    } else {
        Ok(())
    }
}

/// Series estimate of the lock-in frequency, half the truncated series at `theta = 0`:
/// `L + tau2 L^2 / 3 (+ (5 - 6 ln2) / 18 tau2^2 L^3)` with `L = sqrt(k0 / tau1)`.
pub fn omega_l_series(p: &LoopParams, order: SeriesOrder) -> Result<f64> {
    check_estimate_order(order)?;
    let l = p.natural_frequency();
    let t2 = p.tau2();
    let mut w = l + t2 * l * l / 3.0;
    if order.get() == 2 {
        w += (5.0 - 6.0 * LN_2) / 18.0 * t2 * t2 * l * l * l;
    }
    Ok(w)
}

/// The same estimate in the alternative normalization
/// `k0 sqrt(k0/tau1) / tau1 + k0^2 tau2 / (3 tau1^2) (+ k0^2 tau2^2 (5 - 6 ln2) sqrt(k0/tau1) / (18 tau1^2))`,
/// which equals `(k0 / tau1) * omega_l_series`.
pub fn omega_l_series_as_printed(p: &LoopParams, order: SeriesOrder) -> Result<f64> {
    check_estimate_order(order)?;
    let (k0, t1, t2) = (p.k0(), p.tau1(), p.tau2());
    let l = (k0 / t1).sqrt();
    let mut w = k0 * l / t1 + k0 * k0 * t2 / (3.0 * t1 * t1);
    if order.get() == 2 {
        w += k0 * k0 * t2 * t2 * (5.0 - 6.0 * LN_2) / (18.0 * t1 * t1) * l;
    }
    Ok(w)
}

/// Empirical pull-out estimate `1.85 (1/2 + tau1 / (k0 tau2^2))`, evaluated as written.
pub fn gardner_pull_out(p: &LoopParams) -> Result<f64> {
    if p.tau2() <= 0.0 {
        return Err(Error::Domain(
            "empirical pull-out estimate needs tau2 > 0".into(),
        ));
    }
    Ok(1.85 * (0.5 + p.tau1() / (p.k0() * p.tau2() * p.tau2())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(k0: f64, tau1: f64, tau2: f64) -> LoopParams {
        LoopParams::new(k0, tau1, tau2).unwrap()
    }

    const S2_AT_ZERO_UNIT: f64 = (5.0 - 6.0 * LN_2) / 9.0;

    #[test]
    fn order_bounds() {
        assert!(SeriesOrder::new(3).is_err());
        assert_eq!(SeriesOrder::new(2).unwrap(), SeriesOrder::SECOND);
        assert!(omega_l_series(&p(1.0, 1.0, 0.1), SeriesOrder::ZERO).is_err());
    }

    #[test]
    fn s0_values() {
        assert_eq!(s0(&p(1.0, 1.0, 0.3), 0.0).unwrap(), 2.0);
        assert_eq!(s0(&p(4.0, 1.0, 0.3), 0.0).unwrap(), 4.0);
        assert!(s0(&p(1.0, 1.0, 0.3), THETA_LIMIT).unwrap() < 2e-6);
        assert_relative_eq!(
            s0(&p(3.0, 0.4, 0.1), 1.2).unwrap(),
            (2.0 * 7.5 * (1.0 + 1.2f64.cos())).sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn domain_errors() {
        let q = p(1.0, 1.0, 0.1);
        for t in [-0.1, PI, PI - 1e-7, 4.0] {
            assert!(matches!(s0(&q, t), Err(Error::Domain(_))));
            assert!(s1(&q, t).is_err());
            assert!(s2(&q, t).is_err());
        }
    }

    #[test]
    fn s1_values() {
        let q = p(1.0, 1.0, 0.0);
        assert_relative_eq!(s1(&q, 0.0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(
            s1(&p(5.0, 2.0, 0.0), 0.0).unwrap(),
            10.0 / 3.0,
            max_relative = 1e-15
        );
        let h = 2f64.sqrt() / 2.0;
        let expected = (2.0 / 3.0 - h - h / 3.0) / h;
        assert_relative_eq!(s1(&q, PI / 2.0).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn s1_forms_agree() {
        let q = p(2.5, 0.8, 0.0);
        for k in 0..=99 {
            let t = 0.99 * PI * k as f64 / 99.0;
            let a = s1(&q, t).unwrap();
            let b = s1_integral_form(&q, t).unwrap();
            assert!(
                (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                "theta {t}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn s1_solves_its_defining_integral() {
        // S0 S1 = k0 * int_theta^pi cos(s) S0(s) ds, by composite Simpson
        let q = p(1.7, 0.6, 0.0);
        let integrand = |s: f64| s.cos() * 2.0 * (q.b() * q.k0()).sqrt() * (s / 2.0).cos();
        let theta = 0.8;
        let n = 2000;
        let h = (PI - theta) / n as f64;
        let mut acc = integrand(theta) + integrand(PI);
        for i in 1..n {
            acc += integrand(theta + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = acc * h / 3.0;
        let lhs = s0(&q, theta).unwrap() * s1(&q, theta).unwrap();
        assert_relative_eq!(lhs, q.k0() * integral, max_relative = 1e-10);
    }

    #[test]
    fn s2_values() {
        assert_relative_eq!(
            s2(&p(1.0, 1.0, 0.0), 0.0).unwrap(),
            S2_AT_ZERO_UNIT,
            max_relative = 1e-13
        );
        assert_relative_eq!(S2_AT_ZERO_UNIT, 0.093457, max_relative = 1e-5);
        let q = p(3.0, 0.5, 0.0);
        let r = (q.b() * q.k0()).sqrt();
        let two_term = 2.0 * 9.0 * (1.0 - LN_2) / (3.0 * r) - 9.0 / (9.0 * r);
        assert_relative_eq!(s2(&q, 0.0).unwrap(), two_term, max_relative = 1e-13);
    }

    #[test]
    fn truncated_series() {
        let q = p(1.0, 1.0, 0.01);
        assert_eq!(
            series_separatrix(&q, 0.4, SeriesOrder::ZERO).unwrap(),
            s0(&q, 0.4).unwrap()
        );
        let v = series_separatrix(&q, 0.0, SeriesOrder::SECOND).unwrap();
        assert_relative_eq!(
            v,
            2.0 + 0.01 * 2.0 / 3.0 + 1e-4 * S2_AT_ZERO_UNIT,
            max_relative = 1e-14
        );
        assert_relative_eq!(v, 2.0066760, max_relative = 1e-7);
    }

    #[test]
    fn lock_in_series_values() {
        let q = p(1.0, 1.0, 0.0);
        assert_eq!(omega_l_series(&q, SeriesOrder::FIRST).unwrap(), 1.0);
        assert_eq!(omega_l_series(&q, SeriesOrder::SECOND).unwrap(), 1.0);
        let w = omega_l_series(&p(10.0, 1.0, 0.1), SeriesOrder::SECOND).unwrap();
        assert!((w - 3.5104).abs() < 1e-4, "{w}");
        let w = omega_l_series_as_printed(&p(10.0, 1.0, 0.1), SeriesOrder::FIRST).unwrap();
        assert!((w - 34.956).abs() < 1e-3, "{w}");
    }

    #[test]
    fn series_at_zero_is_twice_lock_in_estimate() {
        let q = p(2.0, 0.7, 0.05);
        for order in [SeriesOrder::FIRST, SeriesOrder::SECOND] {
            let s = series_separatrix(&q, 0.0, order).unwrap();
            assert_relative_eq!(
                s,
                2.0 * omega_l_series(&q, order).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn gardner_values() {
        assert_relative_eq!(gardner_pull_out(&p(1.0, 1.0, 1.0)).unwrap(), 2.775);
        assert_relative_eq!(gardner_pull_out(&p(2.0, 1.0, 1.0)).unwrap(), 1.85);
        assert!(matches!(
            gardner_pull_out(&p(2.0, 1.0, 0.0)),
            Err(Error::Domain(_))
        ));
        let g: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&k| gardner_pull_out(&p(k, 1.0, 0.3)).unwrap())
            .collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    proptest! {
        #[test]
        fn printed_normalization_ratio(k in 0.01f64..100.0, t1 in 0.01f64..10.0, t2 in 0.0f64..2.0) {
            let q = p(k, t1, t2);
            for order in [SeriesOrder::FIRST, SeriesOrder::SECOND] {
                let printed = omega_l_series_as_printed(&q, order).unwrap();
                let consistent = omega_l_series(&q, order).unwrap();
                prop_assert!((printed / consistent - k / t1).abs() <= 1e-12 * (k / t1));
            }
        }

        #[test]
        fn second_order_never_below_first(k in 0.01f64..100.0, t1 in 0.01f64..10.0, t2 in 0.0f64..2.0) {
            let q = p(k, t1, t2);
            let w1 = omega_l_series(&q, SeriesOrder::FIRST).unwrap();
            let w2 = omega_l_series(&q, SeriesOrder::SECOND).unwrap();
            prop_assert!(w2 >= w1 && w1 > 0.0);
        }
    }
}
