//! Reference computations that deliberately avoid the production code paths.
//!
//! Everything here is written from the defining formulas with plain loops so
//! that agreement with the library is evidence rather than tautology.

use crate::cashflow::CashflowSchedule;

/// `ln P(t + dt, y + dy) - ln P(t, y)` for a fixed set of payments.
///
/// Evaluated as `ln(1 + Σ w_n expm1(e_n) / Σ w_n)` so the increment keeps full
/// relative precision even when it is tiny. Payments must stay outstanding at
/// both times.
pub fn log_price_increment(s: &CashflowSchedule, t: f64, y: f64, dt: f64, dy: f64) -> f64 {
    let mut base = 0.0;
    let mut delta = 0.0;
    for p in s.payments().iter().filter(|p| p.time > t) {
        let tau = p.time - t;
        let w = p.amount * (-y * tau).exp();
        // -(y+dy)(tau-dt) + y tau
        let exponent = -dy * tau + y * dt + dy * dt;
        base += w;
        delta += w * exponent.exp_m1();
    }
    (delta / base).ln_1p()
}

#[derive(Debug, Clone, Copy)]
pub struct FiniteDifferences {
    pub d_dt: f64,
    pub d_dy: f64,
    pub d2_dy2: f64,
    pub d2_dt_dy: f64,
}

/// Central finite differences of `ln P` with steps `ht` (years) and `hy` (rate).
pub fn central_differences(
    s: &CashflowSchedule,
    t: f64,
    y: f64,
    ht: f64,
    hy: f64,
) -> FiniteDifferences {
    let f = |dt: f64, dy: f64| log_price_increment(s, t, y, dt, dy);
    FiniteDifferences {
        d_dt: (f(ht, 0.0) - f(-ht, 0.0)) / (2.0 * ht),
        d_dy: (f(0.0, hy) - f(0.0, -hy)) / (2.0 * hy),
        d2_dy2: (f(0.0, hy) + f(0.0, -hy)) / (hy * hy),
        d2_dt_dy: (f(ht, hy) - f(ht, -hy) - f(-ht, hy) + f(-ht, -hy)) / (4.0 * ht * hy),
    }
}

/// Direct two-price log return over a payment-free period.
pub fn two_price_log_return(s: &CashflowSchedule, t: f64, y_t: f64, dt: f64, y_s: f64) -> f64 {
    log_price_increment(s, t, y_t, dt, y_s - y_t)
}

/// Trapezoid quadrature of a function on `[a, b]` with `n` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..n {
        acc += f(a + h * k as f64);
    }
    acc * h
}

/// Least-squares slope of `ln err` against `ln x`.
pub fn log_log_slope(xs: &[f64], errs: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Ordinary least squares for one regressor plus intercept, closed form.
///
/// Returns `(intercept, slope, slope_standard_error)`.
pub fn simple_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let sigma2 = sse / (n - 2.0);
    (intercept, slope, (sigma2 / sxx).sqrt())
}
