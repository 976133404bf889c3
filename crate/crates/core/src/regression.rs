//! OLS estimation harness for the reduced-form return models.
//!
//! Every model shares the offset `Y_s Δt - D_t ΔY_s`, which enters with a fixed
//! coefficient of one, so the regression is run on
//!
//! ```text
//! y_s = Δ ln P_s - Y_s Δt + D_t ΔY_s
//! ```
//!
//! against an intercept `c` and, depending on the model, `ΔY_s²` (γ) or
//! `S_s Δt` (reported as α = -slope). The inflation Model 2 has no extra free
//! parameter: it subtracts the lagged accrual `π_{s-δ} Δt` as a further fixed
//! offset. R² is measured against the variance of the raw log returns, so the
//! fixed offsets count as explained variation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{ObservationSeries, YearMonth};

/// Coefficients, classical standard errors and residuals of an OLS fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual degrees of freedom, `n - p`.
    pub dof: usize,
}

impl OlsFit {
    pub fn t_stats(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.std_errors)
            .map(|(b, se)| b / se)
            .collect()
    }

    pub fn ss_residual(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

/// Least squares of `response` on the given design columns (include an
/// all-ones column for an intercept).
pub fn ols(columns: &[&[f64]], response: &[f64]) -> Result<OlsFit> {
    let n = response.len();
    let p = columns.len();
    if p == 0 {
        return Err(Error::domain("design has no columns"));
    }
    if let Some(c) = columns.iter().position(|c| c.len() != n) {
        return Err(Error::domain(format!(
            "design column {c} has {} rows, response has {n}",
            columns[c].len()
        )));
    }
    if n <= p {
        return Err(Error::domain(format!(
            "{n} observations cannot identify {p} coefficients"
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let y = DVector::from_column_slice(response);
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm {
            return Err(Error::SingularDesign(format!(
                "column {j} is (numerically) a combination of the others"
            )));
        }
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let dof = n - p;
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / dof as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::SingularDesign("triangular inverse failed".into()))?;
    // (X'X)^-1 = R^-1 R^-T, so the diagonal is the squared row norms of R^-1.
    let std_errors = (0..p).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt()).collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        residuals,
        dof,
    })
}

/// `1 - SSres / SStot` with the total sum of squares taken about the mean of `target`.
pub fn r_squared(residuals: &[f64], target: &[f64]) -> f64 {
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|e| e * e).sum();
    1.0 - ss_res / ss_tot
}

/// R² of regressing Model 1 residuals on an intercept and one extra regressor.
pub fn partial_r2(model1_residuals: &[f64], extra: &[f64]) -> Result<f64> {
    if model1_residuals.len() != extra.len() {
        return Err(Error::domain(format!(
            "{} residuals vs {} regressor values",
            model1_residuals.len(),
            extra.len()
        )));
    }
    if extra.len() < 3 {
        return Err(Error::domain("partial R² needs at least 3 observations"));
    }
    if extra.iter().all(|v| *v == extra[0]) {
        return Err(Error::DegenerateRegressor(
            "extra regressor is constant".into(),
        ));
    }
    let ones = vec![1.0; extra.len()];
    let fit = ols(&[&ones, extra], model1_residuals)?;
    Ok(r_squared(&fit.residuals, model1_residuals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gov1,
    Gov2,
    Infl1,
    Infl2,
    Corp1,
    Corp2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Gov1,
        ModelKind::Gov2,
        ModelKind::Infl1,
        ModelKind::Infl2,
        ModelKind::Corp1,
        ModelKind::Corp2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Gov1 => "gov1",
            ModelKind::Gov2 => "gov2",
            ModelKind::Infl1 => "infl1",
            ModelKind::Infl2 => "infl2",
            ModelKind::Corp1 => "corp1",
            ModelKind::Corp2 => "corp2",
        }
    }

    /// Whether this is a Model 2 (extra term over the shared Model 1).
    pub fn is_extended(&self) -> bool {
        matches!(self, ModelKind::Gov2 | ModelKind::Infl2 | ModelKind::Corp2)
    }

    /// The Model 1 of the same asset class.
    pub fn baseline(&self) -> ModelKind {
        match self {
            ModelKind::Gov1 | ModelKind::Gov2 => ModelKind::Gov1,
            ModelKind::Infl1 | ModelKind::Infl2 => ModelKind::Infl1,
            ModelKind::Corp1 | ModelKind::Corp2 => ModelKind::Corp1,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown model '{s}' (expected gov1, gov2, infl1, infl2, corp1 or corp2)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Indexation lag in months; only used by `Infl2`.
    pub lag_months: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec { kind, lag_months: 0 }
    }

    pub fn inflation(lag_months: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Infl2,
            lag_months,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: &'static str,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub spec: ModelSpec,
    /// `c` first, then `gamma` (Gov2) or `alpha` (Corp2).
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    /// Model 2 kinds only.
    pub partial_r_squared: Option<f64>,
    pub n_obs: usize,
    pub residuals: Vec<f64>,
    /// Month of the first return's starting observation.
    pub data_start: YearMonth,
    pub data_end: YearMonth,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn intercept(&self) -> &Coefficient {
        &self.coefficients[0]
    }
}

/// Per-observation quantities for rows `first..n` (return from row `i-1` to `i`).
struct Design {
    log_returns: Vec<f64>,
    dependent: Vec<f64>,
    extra: Option<Vec<f64>>,
    first: usize,
}

fn missing(column: &str, kind: ModelKind) -> Error {
    Error::domain(format!("model {kind} needs a '{column}' column"))
}

fn design(series: &ObservationSeries, spec: ModelSpec, first: usize) -> Result<Design> {
    let n = series.len();
    let dt = series.dt();
    let (p, y, d) = (series.index(), series.yields(), series.durations());
    if first == 0 || first >= n {
        return Err(Error::domain(format!("no observations from row {first} of {n}")));
    }
    let rows = first..n;
    let log_returns: Vec<f64> = rows.clone().map(|i| (p[i] / p[i - 1]).ln()).collect();
    let mut dependent: Vec<f64> = rows
        .clone()
        .zip(&log_returns)
        .map(|(i, r)| r - y[i] * dt + d[i - 1] * (y[i] - y[i - 1]))
        .collect();
    let extra = match spec.kind {
        ModelKind::Gov2 => Some(rows.clone().map(|i| (y[i] - y[i - 1]).powi(2)).collect()),
        ModelKind::Corp2 => {
            let s = series.spread().ok_or_else(|| missing("spread", spec.kind))?;
            Some(rows.clone().map(|i| s[i] * dt).collect())
        }
        ModelKind::Infl2 => {
            let cpi = series.cpi().ok_or_else(|| missing("cpi", spec.kind))?;
            let lag = spec.lag_months;
            if first < lag + 1 {
                return Err(Error::domain(format!(
                    "lag {lag} needs observations to start at row {} or later",
                    lag + 1
                )));
            }
            // π_{s-δ} Δt = I_{s-δ} / I_{t-δ} - 1
            let accrual: Vec<f64> = rows
                .clone()
                .map(|i| cpi[i - lag] / cpi[i - 1 - lag] - 1.0)
                .collect();
            for (dep, k) in dependent.iter_mut().zip(&accrual) {
                *dep -= k;
            }
            Some(accrual)
        }
        _ => None,
    };
    Ok(Design {
        log_returns,
        dependent,
        extra,
        first,
    })
}

fn coefficient(name: &'static str, estimate: f64, std_error: f64) -> Coefficient {
    Coefficient {
        name,
        estimate,
        std_error,
        t_stat: estimate / std_error,
    }
}

fn fit_window(
    series: &ObservationSeries,
    spec: ModelSpec,
    first: usize,
    with_partial: bool,
) -> Result<RegressionResult> {
    let des = design(series, spec, first)?;
    let n = des.dependent.len();
    let ones = vec![1.0; n];
    let free_extra = matches!(spec.kind, ModelKind::Gov2 | ModelKind::Corp2);
    let fit = match (&des.extra, free_extra) {
        (Some(x), true) => ols(&[&ones, x], &des.dependent)?,
        _ => ols(&[&ones], &des.dependent)?,
    };
    let mut coefficients = vec![coefficient("c", fit.coefficients[0], fit.std_errors[0])];
    match spec.kind {
        ModelKind::Gov2 => {
            coefficients.push(coefficient("gamma", fit.coefficients[1], fit.std_errors[1]))
        }
        ModelKind::Corp2 => {
            coefficients.push(coefficient("alpha", -fit.coefficients[1], fit.std_errors[1]))
        }
        _ => {}
    }
    let partial_r_squared = match &des.extra {
        Some(extra) if with_partial => {
            let base = design(series, ModelSpec::new(spec.kind.baseline()), first)?;
            let base_fit = ols(&[&ones], &base.dependent)?;
            Some(partial_r2(&base_fit.residuals, extra)?)
        }
        _ => None,
    };
    let dates = series.dates();
    Ok(RegressionResult {
        spec,
        coefficients,
        r_squared: r_squared(&fit.residuals, &des.log_returns),
        partial_r_squared,
        n_obs: n,
        residuals: fit.residuals,
        data_start: dates[des.first - 1],
        data_end: dates[dates.len() - 1],
    })
}

/// Fits one model to a monthly series, using every observation the model can.
pub fn fit(series: &ObservationSeries, spec: ModelSpec) -> Result<RegressionResult> {
    let first = if spec.kind == ModelKind::Infl2 {
        spec.lag_months + 1
    } else {
        1
    };
    if series.len() < first + 3 {
        return Err(Error::domain(format!(
            "model {} needs at least {} rows, series has {}",
            spec.kind,
            first + 3,
            series.len()
        )));
    }
    fit_window(series, spec, first, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagSelection {
    pub best_lag: usize,
    /// `(lag, R²)` in grid order.
    pub r_squared: Vec<(usize, f64)>,
}

/// Fits the inflation Model 2 at each lag on a common window and returns the
/// lag with the highest R², preferring the smaller lag on ties.
pub fn select_lag(series: &ObservationSeries, lag_grid: &[usize]) -> Result<LagSelection> {
    if lag_grid.is_empty() {
        return Err(Error::domain("lag grid is empty"));
    }
    if series.cpi().is_none() {
        return Err(missing("cpi", ModelKind::Infl2));
    }
    let max_lag = *lag_grid.iter().max().expect("non-empty grid");
    let first = max_lag + 1;
    if series.len() < first + 3 {
        return Err(Error::domain(format!(
            "CPI history of {} months is too short for lag {max_lag}",
            series.len()
        )));
    }
    let fits: Vec<(usize, f64)> = lag_grid
        .par_iter()
        .map(|&lag| {
            fit_window(series, ModelSpec::inflation(lag), first, false).map(|r| (lag, r.r_squared))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<&(usize, f64)> = fits.iter().collect();
    order.sort_by_key(|(lag, _)| *lag);
    let mut best = order[0];
    for cand in &order[1..] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(LagSelection {
        best_lag: best.0,
        r_squared: fits,
    })
}
