//! Cashflow schedules and exact portfolio analytics.
//!
//! A portfolio is described by its outstanding aggregate coupon and principal
//! payments `C_n` due at times `t_n` (year fractions from an epoch). At an
//! observation time `t` the price, yield to maturity, Macaulay duration and
//! convexity are tied together by continuous discounting at a single yield:
//!
//! ```text
//! P = Σ exp(-Y (t_n - t)) C_n      over payments with t_n > t
//! D = (1/P) Σ (t_n - t)   exp(-Y (t_n - t)) C_n
//! C = (1/P) Σ (t_n - t)^2 exp(-Y (t_n - t)) C_n
//! ```
//!
//! Payments with `t_n <= t` are no longer outstanding and are ignored.

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Days per year used to turn calendar dates into year fractions (ACT/365.25).
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Year fraction between two calendar dates under ACT/365.25.
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payment {
    /// Years from the schedule epoch.
    pub time: f64,
    pub amount: f64,
}

/// Dated outstanding payment amounts of a portfolio.
///
/// Times are strictly increasing and finite, amounts are non-negative. A
/// schedule built through [`CashflowSchedule::new`] has at least one positive
/// amount; schedules wiped out by zero-recovery defaults may hold only zeros
/// and then fail to price.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowSchedule {
    payments: Vec<Payment>,
    epoch: Option<NaiveDate>,
}

impl CashflowSchedule {
    pub fn new(payments: Vec<Payment>) -> Result<Self> {
        if payments.is_empty() {
            return Err(Error::domain("cashflow schedule has no payments"));
        }
        for (i, p) in payments.iter().enumerate() {
            if !p.time.is_finite() {
                return Err(Error::domain(format!("payment {i}: time is not finite")));
            }
            if !p.amount.is_finite() || p.amount < 0.0 {
                return Err(Error::domain(format!(
                    "payment {i}: amount {} must be finite and non-negative",
                    p.amount
                )));
            }
        }
        if let Some(w) = payments.windows(2).position(|w| w[1].time <= w[0].time) {
            return Err(Error::domain(format!(
                "payment times must be strictly increasing (payment {} at {} follows {})",
                w + 1,
                payments[w + 1].time,
                payments[w].time
            )));
        }
        if !payments.iter().any(|p| p.amount > 0.0) {
            return Err(Error::domain("cashflow schedule has no positive payment"));
        }
        Ok(CashflowSchedule {
            payments,
            epoch: None,
        })
    }

    /// Builds a schedule from `(time, amount)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(time, amount)| Payment { time, amount })
                .collect(),
        )
    }

    /// Builds a schedule from calendar-dated payments, measuring time from `epoch`.
    pub fn from_dated(epoch: NaiveDate, dated: &[(NaiveDate, f64)]) -> Result<Self> {
        let payments = dated
            .iter()
            .map(|&(date, amount)| Payment {
                time: year_fraction(epoch, date),
                amount,
            })
            .collect();
        let mut schedule = Self::new(payments)?;
        schedule.epoch = Some(epoch);
        Ok(schedule)
    }

    /// Skips validation; callers guarantee ordering and non-negativity.
    pub(crate) fn from_parts_unchecked(payments: Vec<Payment>, epoch: Option<NaiveDate>) -> Self {
        debug_assert!(payments.windows(2).all(|w| w[0].time < w[1].time));
        debug_assert!(payments.iter().all(|p| p.amount >= 0.0));
        CashflowSchedule { payments, epoch }
    }

    pub fn payments(&self) -> &[Payment] {
        &self.payments
    }

    pub fn epoch(&self) -> Option<NaiveDate> {
        self.epoch
    }

    pub fn len(&self) -> usize {
        self.payments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payments.is_empty()
    }

    /// Payments still outstanding at `t`, i.e. with `t_n > t`.
    pub fn outstanding(&self, t: f64) -> &[Payment] {
        let start = self.payments.partition_point(|p| p.time <= t);
        &self.payments[start..]
    }

    pub fn total_amount(&self) -> f64 {
        self.payments.iter().map(|p| p.amount).sum()
    }

    /// Every amount multiplied by a non-negative factor.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite(), "scale factor {factor}");
        CashflowSchedule {
            payments: self
                .payments
                .iter()
                .map(|p| Payment {
                    time: p.time,
                    amount: p.amount * factor,
                })
                .collect(),
            epoch: self.epoch,
        }
    }

    /// The schedule restricted to payments outstanding after `t`.
    pub fn remaining_after(&self, t: f64) -> Self {
        CashflowSchedule {
            payments: self.outstanding(t).to_vec(),
            epoch: self.epoch,
        }
    }
}

/// Price, yield, duration and convexity of a schedule at one observation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioAnalytics {
    pub t: f64,
    pub price: f64,
    /// Continuously compounded, per annum.
    pub yield_rate: f64,
    /// Macaulay duration in years.
    pub duration: f64,
    /// Years squared.
    pub convexity: f64,
}

impl PortfolioAnalytics {
    /// `convexity - duration^2`, the variance of the discounted payment-time
    /// distribution. Never negative.
    pub fn dispersion(&self) -> f64 {
        (self.convexity - self.duration * self.duration).max(0.0)
    }
}

/// First and second partial derivatives of `ln P(t, Y, C)` with the payments held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPricePartials {
    pub d_dt: f64,
    pub d_dy: f64,
    pub d2_dy2: f64,
    pub d2_dt_dy: f64,
}

/// Discount-weighted moments of the time-to-payment distribution.
#[derive(Debug, Clone, Copy)]
struct Moments {
    price: f64,
    duration: f64,
    convexity: f64,
    variance: f64,
}

fn moments(schedule: &CashflowSchedule, t: f64, y: f64) -> Result<Moments> {
    let live = schedule.outstanding(t);
    if live.is_empty() {
        return Err(Error::domain(format!("no payments outstanding after t = {t}")));
    }
    if !y.is_finite() {
        return Err(Error::domain(format!("yield {y} is not finite")));
    }
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for p in live {
        let tau = p.time - t;
        let w = (-y * tau).exp() * p.amount;
        m0 += w;
        m1 += tau * w;
        m2 += tau * tau * w;
    }
    if !(m0 > 0.0) || !m0.is_finite() {
        return Err(Error::domain(format!(
            "schedule price {m0} at t = {t}, y = {y} is not a positive finite number"
        )));
    }
    if let [only] = live {
        let tau = only.time - t;
        return Ok(Moments {
            price: m0,
            duration: tau,
            convexity: tau * tau,
            variance: 0.0,
        });
    }
    let duration = m1 / m0;
    let mut var = 0.0;
    for p in live {
        let tau = p.time - t;
        let dev = tau - duration;
        var += (-y * tau).exp() * p.amount * dev * dev;
    }
    Ok(Moments {
        price: m0,
        duration,
        convexity: m2 / m0,
        variance: var / m0,
    })
}

/// Discounted value of the payments outstanding at `t`.
pub fn price_from_yield(schedule: &CashflowSchedule, t: f64, y: f64) -> Result<f64> {
    Ok(moments(schedule, t, y)?.price)
}

pub fn macaulay_duration(schedule: &CashflowSchedule, t: f64, y: f64) -> Result<f64> {
    Ok(moments(schedule, t, y)?.duration)
}

pub fn convexity(schedule: &CashflowSchedule, t: f64, y: f64) -> Result<f64> {
    Ok(moments(schedule, t, y)?.convexity)
}

/// Full analytics at a given yield.
pub fn analytics(schedule: &CashflowSchedule, t: f64, y: f64) -> Result<PortfolioAnalytics> {
    let m = moments(schedule, t, y)?;
    Ok(PortfolioAnalytics {
        t,
        price: m.price,
        yield_rate: y,
        duration: m.duration,
        convexity: m.convexity,
    })
}

/// Full analytics at a given market price (the yield is solved for first).
pub fn analytics_at_price(
    schedule: &CashflowSchedule,
    t: f64,
    price: f64,
) -> Result<PortfolioAnalytics> {
    let y = yield_from_price(schedule, t, price)?;
    let mut a = analytics(schedule, t, y)?;
    a.price = price;
    Ok(a)
}

/// `∂lnP/∂t = Y`, `∂lnP/∂Y = -D`, `∂²lnP/∂Y² = C - D²`, `∂²lnP/∂t∂Y = 1`.
pub fn log_price_partials(schedule: &CashflowSchedule, t: f64, y: f64) -> Result<LogPricePartials> {
    let m = moments(schedule, t, y)?;
    Ok(LogPricePartials {
        // Shifting t moves every discount factor by the same exp(Y dt).
        d_dt: y,
        d_dy: -m.duration,
        d2_dy2: m.variance,
        // ∂D/∂t = -1 for the same reason.
        d2_dt_dy: 1.0,
    })
}

const INITIAL_BRACKET: (f64, f64) = (-0.5, 2.0);
const MAX_ITERATIONS: usize = 200;
const MAX_WIDENINGS: usize = 64;

/// Solves `price_from_yield(schedule, t, y) = price` for `y`.
///
/// Safeguarded Newton on `ln P(y) - ln price` (slope `-D`) inside a bisection
/// bracket that starts at `[-0.5, 2.0]` and is widened geometrically when
/// the root lies outside. Negative yields are supported.
pub fn yield_from_price(schedule: &CashflowSchedule, t: f64, price: f64) -> Result<f64> {
    if !(price > 0.0) || !price.is_finite() {
        return Err(Error::domain(format!("price {price} must be positive and finite")));
    }
    let target = price.ln();
    // g is strictly decreasing in y.
    let g = |y: f64| -> Result<(f64, f64)> {
        let m = moments(schedule, t, y)?;
        Ok((m.price.ln() - target, -m.duration))
    };

    let (mut lo, mut hi) = INITIAL_BRACKET;
    let mut width = hi - lo;
    let mut widenings = 0;
    while g(lo)?.0 < 0.0 {
        hi = lo;
        lo -= width;
        width *= 2.0;
        widenings += 1;
        if widenings > MAX_WIDENINGS {
            return Err(Error::NoConvergence {
                message: format!("could not bracket yield for price {price}"),
                lo,
                hi,
            });
        }
    }
    while g(hi)?.0 > 0.0 {
        lo = hi;
        hi += width;
        width *= 2.0;
        widenings += 1;
        if widenings > MAX_WIDENINGS {
            return Err(Error::NoConvergence {
                message: format!("could not bracket yield for price {price}"),
                lo,
                hi,
            });
        }
    }

    // First-order guess from the zero-yield point.
    let (g0, d0) = g(0.0)?;
    let mut y = -g0 / d0;
    if !(y > lo && y < hi) {
        y = 0.5 * (lo + hi);
    }
    for _ in 0..MAX_ITERATIONS {
        let (gv, slope) = g(y)?;
        if gv == 0.0 {
            return Ok(y);
        }
        if gv > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - gv / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - y).abs();
        y = next;
        if step <= 4.0 * f64::EPSILON * (1.0 + y.abs()) && gv.abs() < 1e-13 {
            return Ok(y);
        }
        if hi - lo <= f64::EPSILON * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence {
        message: format!("yield solver exceeded {MAX_ITERATIONS} iterations for price {price}"),
        lo,
        hi,
    })
}
