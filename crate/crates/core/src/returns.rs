//! Reduced-form log-return models.
//!
//! Over a holding period `[t, s]` the log return of a portfolio is
//! approximated from its yield, duration and a single proportional shock `K`
//! to all outstanding payments:
//!
//! ```text
//! first order:   Δ ln P ≈ Y_t Δt - D_t ΔY + K
//! second order:  Δ ln P ≈ Y_s Δt - D_t ΔY + K + ½ (C_t - D_t²) ΔY²
//! ```
//!
//! `K` is zero for default-free fixed coupons, the index accrual `I_s/I_t - 1`
//! for inflation-linked payments, and approximately `-S Δt` for a diversified
//! corporate portfolio with short spread `S`.

use crate::cashflow::{price_from_yield, CashflowSchedule};
use crate::error::{Error, Result};

/// Holding period of one month in years. Fixed regardless of calendar month length.
pub const MONTH: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingPeriod {
    pub t: f64,
    pub s: f64,
}

impl HoldingPeriod {
    pub fn new(t: f64, s: f64) -> Result<Self> {
        if !(s > t) || !t.is_finite() || !s.is_finite() {
            return Err(Error::domain(format!("holding period end {s} must exceed start {t}")));
        }
        Ok(HoldingPeriod { t, s })
    }

    pub fn monthly(t: f64) -> Self {
        HoldingPeriod { t, s: t + MONTH }
    }

    pub fn dt(&self) -> f64 {
        self.s - self.t
    }
}

/// Observed quantities for one holding period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnObservation {
    pub period: HoldingPeriod,
    pub y_start: f64,
    pub y_end: f64,
    pub duration_start: f64,
    pub convexity_start: Option<f64>,
    pub log_return: Option<f64>,
    pub k_factor: Option<f64>,
    /// Annualised inflation over the period.
    pub inflation_rate: Option<f64>,
    /// Short spread at the end of the period.
    pub spread: Option<f64>,
}

impl ReturnObservation {
    pub fn new(period: HoldingPeriod, y_start: f64, y_end: f64, duration_start: f64) -> Self {
        ReturnObservation {
            period,
            y_start,
            y_end,
            duration_start,
            convexity_start: None,
            log_return: None,
            k_factor: None,
            inflation_rate: None,
            spread: None,
        }
    }

    pub fn with_convexity(mut self, convexity: f64) -> Self {
        self.convexity_start = Some(convexity);
        self
    }

    pub fn with_log_return(mut self, log_return: f64) -> Self {
        self.log_return = Some(log_return);
        self
    }

    pub fn delta_y(&self) -> f64 {
        self.y_end - self.y_start
    }

    pub fn dt(&self) -> f64 {
        self.period.dt()
    }
}

/// Exact log return of a fixed schedule over a payment-free period.
pub fn exact_log_return(
    schedule: &CashflowSchedule,
    period: HoldingPeriod,
    y_start: f64,
    y_end: f64,
) -> Result<f64> {
    if let Some(p) = schedule
        .outstanding(period.t)
        .iter()
        .find(|p| p.time <= period.s)
    {
        return Err(Error::domain(format!(
            "payment at {} falls inside holding period ({}, {}]",
            p.time, period.t, period.s
        )));
    }
    let start = price_from_yield(schedule, period.t, y_start)?;
    let end = price_from_yield(schedule, period.s, y_end)?;
    Ok(end.ln() - start.ln())
}

pub fn approx_first_order(obs: &ReturnObservation, k: f64) -> f64 {
    obs.y_start * obs.dt() - obs.duration_start * obs.delta_y() + k
}

pub fn approx_second_order(obs: &ReturnObservation, k: f64) -> Result<f64> {
    let convexity = obs
        .convexity_start
        .ok_or_else(|| Error::domain("second-order approximation needs convexity"))?;
    let d = obs.duration_start;
    let dy = obs.delta_y();
    Ok(obs.y_end * obs.dt() - d * dy + k + 0.5 * (convexity - d * d) * dy * dy)
}

/// Inflation accrual of index-linked payments over a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflationAccrual {
    /// Annualised rate, `k / dt`.
    pub pi: f64,
    pub k: f64,
}

pub fn inflation_k(index_start: f64, index_end: f64, dt: f64) -> Result<InflationAccrual> {
    if !(index_start > 0.0) || !(index_end > 0.0) {
        return Err(Error::domain(format!(
            "index levels must be positive (got {index_start}, {index_end})"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::domain(format!("period length {dt} must be positive")));
    }
    let k = index_end / index_start - 1.0;
    Ok(InflationAccrual { pi: k / dt, k })
}

/// How the short spread is turned into a payment shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadForm {
    /// `exp(-S Δt) - 1`
    Exact,
    /// `-S Δt`
    Linear,
}

pub fn corporate_k(spread: f64, dt: f64, form: SpreadForm) -> f64 {
    match form {
        SpreadForm::Exact => (-spread * dt).exp_m1(),
        SpreadForm::Linear => -spread * dt,
    }
}

/// Solves the first-order model for `K` given an observed log return.
pub fn extract_k(obs: &ReturnObservation) -> Result<f64> {
    let r = obs
        .log_return
        .ok_or_else(|| Error::domain("extracting K needs an observed log return"))?;
    Ok(r - obs.y_start * obs.dt() + obs.duration_start * obs.delta_y())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::oracle;
    use crate::cashflow::analytics;
    use proptest::prelude::*;

    fn observation(s: &CashflowSchedule, period: HoldingPeriod, y0: f64, y1: f64) -> ReturnObservation {
        let a = analytics(s, period.t, y0).unwrap();
        ReturnObservation::new(period, y0, y1, a.duration).with_convexity(a.convexity)
    }

    fn ladder() -> CashflowSchedule {
        // Semiannual 4% coupons on 100 with a 6y bullet, first coupon at 0.5y.
        let mut pairs: Vec<(f64, f64)> = (1..=12).map(|k| (k as f64 * 0.5, 2.0)).collect();
        pairs.last_mut().unwrap().1 += 100.0;
        CashflowSchedule::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn holding_period_validation() {
        assert!(HoldingPeriod::new(1.0, 1.0).is_err());
        assert!(HoldingPeriod::new(1.0, 0.5).is_err());
        assert!((HoldingPeriod::monthly(2.0).dt() - MONTH).abs() < 1e-15);
    }

    #[test]
    fn exact_return_on_zero_coupon() {
        let z = CashflowSchedule::from_pairs(&[(5.0, 100.0)]).unwrap();
        let period = HoldingPeriod::monthly(0.0);
        let r = exact_log_return(&z, period, 0.03, 0.03).unwrap();
        assert!((r - 0.03 * MONTH).abs() < 1e-15);

        let (y0, y1) = (0.03, 0.045);
        let r = exact_log_return(&z, period, y0, y1).unwrap();
        let identity = y1 * MONTH - (5.0 - 0.0) * (y1 - y0);
        assert!((r - identity).abs() < 1e-14);
    }

    #[test]
    fn exact_return_rejects_payment_in_period() {
        let s = CashflowSchedule::from_pairs(&[(0.05, 1.0), (1.0, 100.0)]).unwrap();
        let err = exact_log_return(&s, HoldingPeriod::monthly(0.0), 0.02, 0.02);
        assert!(matches!(err, Err(Error::Domain(_))));
        // a payment exactly at s is inside (t, s]
        let s = CashflowSchedule::from_pairs(&[(MONTH, 1.0), (1.0, 100.0)]).unwrap();
        assert!(exact_log_return(&s, HoldingPeriod::new(0.0, MONTH).unwrap(), 0.02, 0.02).is_err());
    }

    #[test]
    fn exact_return_matches_direct_computation() {
        let s = ladder();
        let period = HoldingPeriod::new(0.1, 0.1 + MONTH).unwrap();
        for (y0, y1) in [(0.02, 0.025), (0.05, 0.041), (-0.01, 0.0)] {
            let r = exact_log_return(&s, period, y0, y1).unwrap();
            let direct = oracle::two_price_log_return(&s, period.t, y0, MONTH, y1);
            assert!((r - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn first_order_examples() {
        let p = HoldingPeriod::monthly(0.0);
        let obs = ReturnObservation::new(p, 0.04, 0.04, 6.0);
        assert!((approx_first_order(&obs, 0.0) - 0.04 * MONTH).abs() < 1e-16);
        let tiny = HoldingPeriod::new(0.0, 1e-12).unwrap();
        let obs = ReturnObservation::new(tiny, 0.04, 0.05, 6.0);
        assert!((approx_first_order(&obs, 0.0) + 6.0 * 0.01).abs() < 1e-12);
    }

    #[test]
    fn first_order_error_on_zero_coupon_is_carry_cross_term() {
        let z = CashflowSchedule::from_pairs(&[(8.0, 1.0)]).unwrap();
        let p = HoldingPeriod::monthly(0.0);
        for k in -10..=10 {
            let dy = k as f64 * 1e-3;
            let obs = observation(&z, p, 0.04, 0.04 + dy);
            let err = approx_first_order(&obs, 0.0) - exact_log_return(&z, p, 0.04, 0.04 + dy).unwrap();
            assert!(err.abs() <= (MONTH * dy).abs() + 1e-14);
        }
    }

    #[test]
    fn second_order_examples() {
        let p = HoldingPeriod::monthly(0.0);
        let obs = ReturnObservation::new(p, 0.03, 0.03, 4.0).with_convexity(20.0);
        assert!((approx_second_order(&obs, 0.001).unwrap() - (0.03 * MONTH + 0.001)).abs() < 1e-16);
        let no_convexity = ReturnObservation::new(p, 0.03, 0.03, 4.0);
        assert!(approx_second_order(&no_convexity, 0.0).is_err());

        let s = ladder();
        let obs = observation(&s, p, 0.04, 0.05);
        let exact = exact_log_return(&s, p, 0.04, 0.05).unwrap();
        let e1 = (approx_first_order(&obs, 0.0) - exact).abs();
        let e2 = (approx_second_order(&obs, 0.0).unwrap() - exact).abs();
        assert!(e2 < e1, "{e2} vs {e1}");
    }

    #[test]
    fn inflation_examples() {
        let a = inflation_k(100.0, 100.0, MONTH).unwrap();
        assert_eq!((a.pi, a.k), (0.0, 0.0));
        let a = inflation_k(100.0, 100.2, MONTH).unwrap();
        assert!((a.k - 0.002).abs() < 1e-14);
        assert!((a.pi - 0.024).abs() < 1e-12);
        assert!(inflation_k(0.0, 1.0, MONTH).is_err());
        assert!(inflation_k(1.0, -1.0, MONTH).is_err());
    }

    #[test]
    fn corporate_examples() {
        assert_eq!(corporate_k(0.0, MONTH, SpreadForm::Exact), 0.0);
        assert_eq!(corporate_k(0.0, MONTH, SpreadForm::Linear), 0.0);
        // S dt = 0.007
        let gap = corporate_k(0.084, MONTH, SpreadForm::Exact) - corporate_k(0.084, MONTH, SpreadForm::Linear);
        assert!(gap.abs() < 2.45e-5);
        // difference is ½ (S dt)^2 up to third order
        let x: f64 = 0.02 * MONTH;
        let gap = corporate_k(0.02, MONTH, SpreadForm::Exact) - corporate_k(0.02, MONTH, SpreadForm::Linear);
        assert!((gap - 0.5 * x * x).abs() < x.powi(3));
    }

    #[test]
    fn extract_k_inverts_first_order() {
        let obs = ReturnObservation::new(HoldingPeriod::monthly(0.0), 0.02, 0.027, 7.3);
        let r = approx_first_order(&obs, -0.0011);
        let k = extract_k(&obs.with_log_return(r)).unwrap();
        assert!((k + 0.0011).abs() < 1e-15);
        assert!(extract_k(&obs).is_err());
    }

    fn short_coupon_schedule() -> impl Strategy<Value = CashflowSchedule> {
        // maturities up to 5y keep C - D² below 2Δt/|ΔY|max, where first-order
        // error can otherwise vanish by cancellation of ΔY Δt against ½(C-D²)ΔY².
        (2usize..20, 0.5f64..5.0, 0.0f64..0.1).prop_map(|(n, maturity, coupon)| {
            let step = maturity / n as f64;
            let pairs: Vec<(f64, f64)> = (1..=n)
                .map(|k| {
                    let c = 100.0 * coupon * step + 0.01;
                    (0.2 + k as f64 * step, if k == n { c + 100.0 } else { c })
                })
                .collect();
            CashflowSchedule::from_pairs(&pairs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn first_order_return_bounded_below(y0 in -0.05f64..0.2, y1 in -0.05f64..0.2, d in 0.0f64..30.0, k in -0.99f64..0.5) {
            let obs = ReturnObservation::new(HoldingPeriod::monthly(0.0), y0, y1, d);
            prop_assert!(approx_first_order(&obs, k).exp() - 1.0 > -1.0);
        }

        #[test]
        fn zero_coupon_second_order_is_exact(tau in 0.2f64..30.0, y0 in -0.02f64..0.15, y1 in -0.02f64..0.15) {
            let z = CashflowSchedule::from_pairs(&[(tau, 1.0)]).unwrap();
            let p = HoldingPeriod::monthly(0.0);
            let obs = observation(&z, p, y0, y1);
            let e = approx_second_order(&obs, 0.0).unwrap() - exact_log_return(&z, p, y0, y1).unwrap();
            prop_assert!(e.abs() < 1e-12);
        }

        #[test]
        fn second_order_error_never_worse(s in short_coupon_schedule(), y0 in -0.02f64..0.15, dy in -0.02f64..0.02) {
            let p = HoldingPeriod::monthly(0.0);
            let obs = observation(&s, p, y0, y0 + dy);
            let exact = exact_log_return(&s, p, y0, y0 + dy).unwrap();
            let e1 = (approx_first_order(&obs, 0.0) - exact).abs();
            let e2 = (approx_second_order(&obs, 0.0).unwrap() - exact).abs();
            prop_assert!(e2 <= e1 + 1e-12, "e2 {} e1 {}", e2, e1);
        }

        #[test]
        fn extract_k_round_trip(y0 in -0.02f64..0.15, y1 in -0.02f64..0.15, d in 0.0f64..30.0, k in -0.1f64..0.1) {
            let obs = ReturnObservation::new(HoldingPeriod::monthly(0.0), y0, y1, d);
            let r = approx_first_order(&obs, k);
            let back = extract_k(&obs.with_log_return(r)).unwrap();
            prop_assert!((back - k).abs() < 1e-14);
        }
    }

    #[test]
    fn convergence_orders() {
        let s = ladder();
        // A vanishing horizon isolates the yield expansion from the ΔY Δt cross term.
        let p = HoldingPeriod::new(0.1, 0.1 + 1e-9).unwrap();
        let dys: Vec<f64> = (0..9).map(|i| 1e-4 * 10f64.powf(i as f64 * 0.25)).collect();
        let (mut e1, mut e2) = (Vec::new(), Vec::new());
        for &dy in &dys {
            let obs = observation(&s, p, 0.04, 0.04 + dy);
            let exact = oracle::two_price_log_return(&s, p.t, 0.04, p.dt(), 0.04 + dy);
            e1.push(approx_first_order(&obs, 0.0) - exact);
            e2.push(approx_second_order(&obs, 0.0).unwrap() - exact);
        }
        let s1 = oracle::log_log_slope(&dys, &e1);
        let s2 = oracle::log_log_slope(&dys, &e2);
        assert!((s1 - 2.0).abs() < 0.25, "first-order slope {s1}");
        assert!((s2 - 3.0).abs() < 0.25, "second-order slope {s2}");
    }
}
