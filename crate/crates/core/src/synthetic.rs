//! Synthetic market: simulated yield, CPI and spread paths, and the exact
//! total-return index of a bond fund that reinvests every payment at market
//! prices.
//!
//! The fund holds a rolling ladder of coupon bonds maturing on a fixed grid of
//! months. Each month its holdings are revalued at the new yield, scaled by
//! the CPI ratio at the planted indexation lag (inflation-linked class) or by
//! the surviving fraction after simulated defaults (corporate class), and then
//! rebalanced into the current ladder at the same market value. Corporate
//! default intensity is tied to the short spread through
//! `λ_s = loading · S_s / (1 - E[ρ])`, so the expected loss rate is
//! `loading · S_s`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cashflow::{analytics, price_from_yield, yield_from_price, CashflowSchedule};
use crate::defaults::{path_rng, simulate_defaults_with, DefaultEvent, IntensitySpec, RecoveryLaw};
use crate::error::{Error, Result};
use crate::returns::MONTH;
use crate::series::{AssetClass, ObservationSeries, SeriesColumns, YearMonth};

const YIELD_STREAM: u64 = 1;
const CPI_STREAM: u64 = 2;
const SPREAD_STREAM: u64 = 3;
const DEFAULT_STREAM: u64 = 4;
const NOISE_STREAM: u64 = 5;

fn time_of(month: usize) -> f64 {
    month as f64 / 12.0
}

/// Monthly AR(1): `x' = x + reversion · (mean - x) + vol · ε`, started at the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1 {
    pub mean: f64,
    /// Per-month pull towards the mean, in `[0, 1)`.
    pub reversion: f64,
    /// Innovation standard deviation per month.
    pub vol: f64,
}

impl Ar1 {
    fn validate(&self, name: &str) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::Config(format!("{name}_mean must be finite")));
        }
        if !(0.0..1.0).contains(&self.reversion) {
            return Err(Error::Config(format!(
                "{name}_reversion {} outside [0, 1)",
                self.reversion
            )));
        }
        if !(self.vol >= 0.0 && self.vol.is_finite()) {
            return Err(Error::Config(format!("{name}_vol {} must be non-negative", self.vol)));
        }
        Ok(())
    }

    fn step(&self, x: f64, eps: f64) -> f64 {
        x + self.reversion * (self.mean - x) + self.vol * eps
    }

    /// Standard deviation of the stationary distribution (infinite without reversion).
    pub fn stationary_sd(&self) -> f64 {
        let phi = 1.0 - self.reversion;
        self.vol / (1.0 - phi * phi).sqrt()
    }

    fn simulate(&self, n: usize, floor: Option<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut x = self.mean;
        for m in 0..n {
            if m > 0 {
                x = self.step(x, rng.sample(StandardNormal));
                if let Some(f) = floor {
                    x = x.max(f);
                }
            }
            out.push(x);
        }
        out
    }
}

/// Log random walk for the consumer price index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpiProcess {
    /// Level `lag_months` before the first observation.
    pub start_level: f64,
    /// Annualised log drift.
    pub drift: f64,
    /// Annualised log volatility.
    pub vol: f64,
    /// Indexation lag of the fund's payments.
    pub lag_months: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreditParams {
    /// Expected loss rate per unit of short spread.
    pub loading: f64,
    pub recovery: RecoveryLaw,
    /// Number of equally weighted issuers.
    pub issuers: usize,
}

impl CreditParams {
    /// Per-issuer default intensity implied by a spread level.
    pub fn intensity(&self, spread: f64) -> f64 {
        if self.loading == 0.0 || spread <= 0.0 {
            return 0.0;
        }
        self.loading * spread / (1.0 - self.recovery.mean())
    }
}

/// Bonds with unit face maturing every `spacing_months` on an absolute grid,
/// out to `max_maturity_months` ahead, paying `coupon_rate / coupon_frequency`
/// on a schedule counted back from maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderSpec {
    pub max_maturity_months: usize,
    pub spacing_months: usize,
    pub coupon_rate: f64,
    pub coupon_frequency: usize,
}

impl LadderSpec {
    fn validate(&self) -> Result<()> {
        if self.spacing_months == 0 || self.max_maturity_months < self.spacing_months {
            return Err(Error::Config(format!(
                "ladder needs 1 <= spacing ({}) <= max maturity ({} months)",
                self.spacing_months, self.max_maturity_months
            )));
        }
        if ![1, 2, 3, 4, 6, 12].contains(&self.coupon_frequency) {
            return Err(Error::Config(format!(
                "coupon_frequency {} must divide 12",
                self.coupon_frequency
            )));
        }
        if !(self.coupon_rate >= 0.0 && self.coupon_rate.is_finite()) {
            return Err(Error::Config(format!("coupon_rate {} must be non-negative", self.coupon_rate)));
        }
        Ok(())
    }

    /// Unit holdings outstanding just after month `m`.
    pub fn template(&self, m: usize) -> CashflowSchedule {
        let period = 12 / self.coupon_frequency;
        let coupon = self.coupon_rate / self.coupon_frequency as f64;
        let mut flows: BTreeMap<usize, f64> = BTreeMap::new();
        let first = (m / self.spacing_months + 1) * self.spacing_months;
        for maturity in (first..=m + self.max_maturity_months).step_by(self.spacing_months) {
            *flows.entry(maturity).or_default() += 1.0;
            if coupon > 0.0 {
                let mut k = maturity;
                while k > m {
                    *flows.entry(k).or_default() += coupon;
                    if k < period {
                        break;
                    }
                    k -= period;
                }
            }
        }
        let pairs: Vec<(f64, f64)> = flows.into_iter().map(|(k, a)| (time_of(k), a)).collect();
        CashflowSchedule::from_pairs(&pairs).expect("ladder has at least one rung")
    }
}

/// What the fund reinvests into each month.
#[derive(Debug, Clone, PartialEq)]
pub enum FundSpec {
    Ladder(LadderSpec),
    /// A fixed schedule (times in years from the first observation); payments
    /// are reinvested pro rata in what remains of it.
    BuyAndHold(CashflowSchedule),
}

impl FundSpec {
    fn template(&self, m: usize) -> Result<CashflowSchedule> {
        match self {
            FundSpec::Ladder(l) => Ok(l.template(m)),
            FundSpec::BuyAndHold(s) => {
                let rest = s.remaining_after(time_of(m));
                if rest.is_empty() || rest.total_amount() == 0.0 {
                    return Err(Error::domain(format!(
                        "fund schedule is exhausted at month {m}"
                    )));
                }
                Ok(rest)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub class: AssetClass,
    pub months: usize,
    pub start: YearMonth,
    pub seed: u64,
    pub index_start: f64,
    /// Government (or real, for the inflation-linked class) yield.
    pub yields: Ar1,
    pub cpi: CpiProcess,
    /// Short spread, floored at zero.
    pub spread: Ar1,
    pub credit: Option<CreditParams>,
    pub ladder: LadderSpec,
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams {
            class: AssetClass::Government,
            months: 240,
            start: YearMonth::new(2000, 1).expect("valid month"),
            seed: 1,
            index_start: 100.0,
            yields: Ar1 {
                mean: 0.04,
                reversion: 0.02,
                vol: 0.003,
            },
            cpi: CpiProcess {
                start_level: 100.0,
                drift: 0.02,
                vol: 0.01,
                lag_months: 2,
            },
            spread: Ar1 {
                mean: 0.015,
                reversion: 0.05,
                vol: 0.002,
            },
            credit: Some(CreditParams {
                loading: 0.6,
                recovery: RecoveryLaw::Fixed(0.4),
                issuers: 5000,
            }),
            ladder: LadderSpec {
                max_maturity_months: 120,
                spacing_months: 3,
                coupon_rate: 0.04,
                coupon_frequency: 2,
            },
        }
    }
}

/// Keys accepted by [`MarketParams::from_config`], in the order
/// [`MarketParams::to_config`] writes them.
pub const CONFIG_KEYS: [&str; 22] = [
    "class",
    "months",
    "start",
    "seed",
    "index_start",
    "yield_mean",
    "yield_reversion",
    "yield_vol",
    "cpi_start",
    "cpi_drift",
    "cpi_vol",
    "cpi_lag",
    "spread_mean",
    "spread_reversion",
    "spread_vol",
    "credit_loading",
    "recovery",
    "issuers",
    "ladder_max_maturity",
    "ladder_spacing_months",
    "coupon_rate",
    "coupon_frequency",
];

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if self.months < 2 {
            return Err(Error::Config(format!("months {} must be at least 2", self.months)));
        }
        if !(self.index_start > 0.0 && self.index_start.is_finite()) {
            return Err(Error::Config("index_start must be positive".into()));
        }
        self.yields.validate("yield")?;
        self.spread.validate("spread")?;
        let c = &self.cpi;
        if !(c.start_level > 0.0 && c.start_level.is_finite()) {
            return Err(Error::Config("cpi_start must be positive".into()));
        }
        if !c.drift.is_finite() || !(c.vol >= 0.0 && c.vol.is_finite()) {
            return Err(Error::Config("cpi_drift must be finite and cpi_vol non-negative".into()));
        }
        if let Some(cr) = &self.credit {
            cr.recovery.validate().map_err(|e| Error::Config(e.to_string()))?;
            if !(cr.loading >= 0.0 && cr.loading.is_finite()) {
                return Err(Error::Config("credit_loading must be non-negative".into()));
            }
            if cr.issuers == 0 {
                return Err(Error::Config("issuers must be at least 1".into()));
            }
            if cr.loading > 0.0 && cr.recovery.mean() >= 1.0 {
                return Err(Error::Config(
                    "a positive credit_loading needs mean recovery below 1".into(),
                ));
            }
        }
        self.ladder.validate()
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut p = MarketParams::default();
        let mut credit = p.credit.expect("default has credit");
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: {key} = '{value}' is not {what}", no + 1));
            let num = || value.parse::<f64>().map_err(|_| bad("a number"));
            let int = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
            match key {
                "class" => p.class = value.parse().map_err(|_| bad("gov, infl or corp"))?,
                "months" => p.months = int()?,
                "start" => p.start = value.parse().map_err(|_| bad("a YYYY-MM month"))?,
                "seed" => p.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
                "index_start" => p.index_start = num()?,
                "yield_mean" => p.yields.mean = num()?,
                "yield_reversion" => p.yields.reversion = num()?,
                "yield_vol" => p.yields.vol = num()?,
                "cpi_start" => p.cpi.start_level = num()?,
                "cpi_drift" => p.cpi.drift = num()?,
                "cpi_vol" => p.cpi.vol = num()?,
                "cpi_lag" => p.cpi.lag_months = int()?,
                "spread_mean" => p.spread.mean = num()?,
                "spread_reversion" => p.spread.reversion = num()?,
                "spread_vol" => p.spread.vol = num()?,
                "credit_loading" => credit.loading = num()?,
                "recovery" => credit.recovery = value.parse().map_err(|_| bad("a recovery (0.4 or beta:a,b)"))?,
                "issuers" => credit.issuers = int()?,
                "ladder_max_maturity" => {
                    let months = num()? * 12.0;
                    if (months - months.round()).abs() > 1e-9 || months < 1.0 {
                        return Err(bad("a whole number of months in years"));
                    }
                    p.ladder.max_maturity_months = months.round() as usize;
                }
                "ladder_spacing_months" => p.ladder.spacing_months = int()?,
                "coupon_rate" => p.ladder.coupon_rate = num()?,
                "coupon_frequency" => p.ladder.coupon_frequency = int()?,
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}' (known keys: {})",
                        no + 1,
                        CONFIG_KEYS.join(", ")
                    )))
                }
            }
        }
        p.credit = Some(credit);
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config(&text)
    }

    pub fn to_config(&self) -> String {
        let credit = self.credit.unwrap_or(CreditParams {
            loading: 0.0,
            recovery: RecoveryLaw::Fixed(1.0),
            issuers: 1,
        });
        let values = [
            self.class.to_string(),
            self.months.to_string(),
            self.start.to_string(),
            self.seed.to_string(),
            self.index_start.to_string(),
            self.yields.mean.to_string(),
            self.yields.reversion.to_string(),
            self.yields.vol.to_string(),
            self.cpi.start_level.to_string(),
            self.cpi.drift.to_string(),
            self.cpi.vol.to_string(),
            self.cpi.lag_months.to_string(),
            self.spread.mean.to_string(),
            self.spread.reversion.to_string(),
            self.spread.vol.to_string(),
            credit.loading.to_string(),
            credit.recovery.to_string(),
            credit.issuers.to_string(),
            (self.ladder.max_maturity_months as f64 / 12.0).to_string(),
            self.ladder.spacing_months.to_string(),
            self.ladder.coupon_rate.to_string(),
            self.ladder.coupon_frequency.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in CONFIG_KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// One default of the issuer with the given index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssuerDefault {
    pub issuer: usize,
    pub event: DefaultEvent,
}

/// Defaults during one month and the fraction of portfolio value that survives them.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthDefaults {
    pub events: Vec<IssuerDefault>,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPaths {
    pub start: YearMonth,
    pub yields: Vec<f64>,
    /// CPI from `lag_months` before the first observation onwards.
    pub cpi_history: Vec<f64>,
    pub lag_months: usize,
    pub spread: Vec<f64>,
    /// Entry `m` covers the month ending at observation `m`; entry 0 is empty.
    pub defaults: Vec<MonthDefaults>,
}

impl MarketPaths {
    pub fn months(&self) -> usize {
        self.yields.len()
    }

    /// CPI observed at each month.
    pub fn cpi_observed(&self) -> &[f64] {
        &self.cpi_history[self.lag_months..]
    }

    /// CPI `lag_months` before month `m`.
    pub fn cpi_lagged(&self, m: usize) -> f64 {
        self.cpi_history[m]
    }
}

fn month_defaults(
    credit: &CreditParams,
    spread: f64,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MonthDefaults> {
    let m_issuers = credit.issuers;
    // Superposing the issuers' independent processes gives one process at
    // M times the rate whose events land on uniformly chosen issuers.
    let total = IntensitySpec::constant(m_issuers as f64 * credit.intensity(spread), credit.recovery)?;
    let scenario = simulate_defaults_with(&total, time_of(m - 1), time_of(m), rng)?;
    let mut events: Vec<IssuerDefault> = scenario
        .events
        .into_iter()
        .map(|event| IssuerDefault {
            issuer: rng.random_range(0..m_issuers),
            event,
        })
        .collect();
    events.sort_by(|a, b| a.issuer.cmp(&b.issuer).then(a.event.time.total_cmp(&b.event.time)));
    let mut lost = 0.0;
    for group in events.chunk_by(|a, b| a.issuer == b.issuer) {
        let kept: f64 = group.iter().map(|d| d.event.recovery).product();
        lost += 1.0 - kept;
    }
    Ok(MonthDefaults {
        events,
        survival: 1.0 - lost / m_issuers as f64,
    })
}

/// Simulates every driver the chosen asset class needs. Defaults are drawn
/// only for the corporate class with credit parameters.
pub fn simulate_paths(params: &MarketParams) -> Result<MarketPaths> {
    params.validate()?;
    let n = params.months;
    let yields = params.yields.simulate(n, None, &mut path_rng(params.seed, YIELD_STREAM));
    let spread = params.spread.simulate(n, Some(0.0), &mut path_rng(params.seed, SPREAD_STREAM));

    let c = &params.cpi;
    let mut rng = path_rng(params.seed, CPI_STREAM);
    let mut cpi_history = Vec::with_capacity(n + c.lag_months);
    let mut level = c.start_level;
    for j in 0..n + c.lag_months {
        if j > 0 {
            let eps: f64 = rng.sample(StandardNormal);
            level *= (c.drift * MONTH + c.vol * MONTH.sqrt() * eps).exp();
        }
        cpi_history.push(level);
    }

    let mut defaults = vec![MonthDefaults {
        events: Vec::new(),
        survival: 1.0,
    }];
    match (&params.credit, params.class) {
        (Some(credit), AssetClass::Corporate) => {
            let mut rng = path_rng(params.seed, DEFAULT_STREAM);
            for (m, s) in spread.iter().enumerate().skip(1) {
                defaults.push(month_defaults(credit, *s, m, &mut rng)?);
            }
        }
        _ => defaults.resize(n, defaults[0].clone()),
    }
    Ok(MarketPaths {
        start: params.start,
        yields,
        cpi_history,
        lag_months: c.lag_months,
        spread,
        defaults,
    })
}

/// `Σ_{τ > t} amount · e^{-y (τ - s)}`: holdings bought at `t`, valued at `s`
/// with payments received in `(t, s]` carried forward at `y`.
fn carried_value(holdings: &CashflowSchedule, t: f64, s: f64, y: f64) -> f64 {
    holdings
        .outstanding(t)
        .iter()
        .map(|p| p.amount * (-y * (p.time - s)).exp())
        .sum()
}

/// The fund's month-by-month index, yield, duration and convexity, plus CPI
/// (inflation-linked) or short spread (corporate).
pub fn build_total_return_index(
    fund: &FundSpec,
    paths: &MarketPaths,
    class: AssetClass,
    index_start: f64,
) -> Result<ObservationSeries> {
    let n = paths.months();
    let market_yield = |m: usize| match class {
        AssetClass::Corporate => paths.yields[m] + paths.spread[m],
        _ => paths.yields[m],
    };
    let mut cols = SeriesColumns {
        dates: (0..n as i64).map(|k| paths.start.add_months(k)).collect(),
        convexity: Some(Vec::with_capacity(n)),
        cpi: (class == AssetClass::InflationLinked).then(|| paths.cpi_observed().to_vec()),
        spread: (class == AssetClass::Corporate).then(|| paths.spread.clone()),
        ..Default::default()
    };
    let mut holdings = CashflowSchedule::from_pairs(&[(1.0, 1.0)])?;
    let mut value = index_start;
    for m in 0..n {
        let s = time_of(m);
        let y = market_yield(m);
        if m > 0 {
            let factor = match class {
                AssetClass::Government => 1.0,
                AssetClass::InflationLinked => paths.cpi_lagged(m) / paths.cpi_lagged(m - 1),
                AssetClass::Corporate => paths.defaults[m].survival,
            };
            value = factor * carried_value(&holdings, time_of(m - 1), s, y);
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::domain(format!("fund value {value} at month {m}")));
            }
        }
        let template = fund.template(m)?;
        holdings = template.scaled(value / price_from_yield(&template, s, y)?);
        let y_rep = yield_from_price(&holdings, s, value)?;
        let a = analytics(&holdings, s, y_rep)?;
        cols.index.push(value);
        cols.yields.push(y_rep);
        cols.durations.push(a.duration);
        cols.convexity.as_mut().expect("set").push(a.convexity);
    }
    ObservationSeries::new(class, cols)
}

/// Simulates paths and builds the ladder fund's series.
pub fn generate(params: &MarketParams) -> Result<ObservationSeries> {
    let paths = simulate_paths(params)?;
    build_total_return_index(&FundSpec::Ladder(params.ladder), &paths, params.class, params.index_start)
}

/// Coefficients of a return model used to manufacture data directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedModel {
    pub intercept: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Standard deviation of the gaussian residual.
    pub noise: f64,
}

/// Series whose log returns follow
/// `c + (Y_s - α S_s) Δt - D_t ΔY_s + γ ΔY_s² + ε_s` exactly, with yields
/// and spreads from the simulated paths and durations from the ladder.
pub fn planted_series(params: &MarketParams, model: PlantedModel) -> Result<ObservationSeries> {
    let paths = simulate_paths(params)?;
    let n = paths.months();
    let corp = params.class == AssetClass::Corporate;
    let y: Vec<f64> = (0..n)
        .map(|m| paths.yields[m] + if corp { paths.spread[m] } else { 0.0 })
        .collect();
    let mut d = Vec::with_capacity(n);
    for (m, ym) in y.iter().enumerate() {
        d.push(analytics(&params.ladder.template(m), time_of(m), *ym)?.duration);
    }
    let mut rng = path_rng(params.seed, NOISE_STREAM);
    let mut index = vec![params.index_start];
    for m in 1..n {
        let dy = y[m] - y[m - 1];
        let eps: f64 = rng.sample(StandardNormal);
        let r = model.intercept + (y[m] - model.alpha * paths.spread[m]) * MONTH - d[m - 1] * dy
            + model.gamma * dy * dy
            + model.noise * eps;
        index.push(index[m - 1] * r.exp());
    }
    ObservationSeries::new(
        params.class,
        SeriesColumns {
            dates: (0..n as i64).map(|k| params.start.add_months(k)).collect(),
            index,
            yields: y,
            durations: d,
            cpi: (params.class == AssetClass::InflationLinked).then(|| paths.cpi_observed().to_vec()),
            spread: corp.then(|| paths.spread.clone()),
            ..Default::default()
        },
    )
}
