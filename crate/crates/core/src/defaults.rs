//! Multiple-defaults Cox-process simulator.
//!
//! Default events `(t_i, ρ_i)` arrive, conditionally on an intensity path
//! `λ_t`, as a Poisson process; each event multiplies every outstanding
//! payment by its recovery fraction `ρ_i`. The joint intensity factorises as
//! `λ_{t,ρ} = λ_t g(ρ)` with a time-constant recovery law, so the mean loss
//! rate is `l_t = λ_t (1 - E[ρ])` and conditionally on the path
//!
//! ```text
//! E[C_s | λ] = C_t exp(-∫_t^s l_u du)
//! ```
//!
//! Stochastic intensities are represented as a finite mixture of
//! piecewise-constant scenario paths.
//!
//! Monte Carlo routines derive each path's randomness from its own ChaCha
//! stream (`seed`, path index), so results do not depend on how rayon splits
//! the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use rayon::prelude::*;

use crate::cashflow::{CashflowSchedule, Payment};
use crate::error::{Error, Result};

/// Piecewise-constant, non-negative event rate per annum.
///
/// `rates[0]` applies before `knots[0]`, `rates[i]` on `[knots[i-1], knots[i])`
/// and the last rate from the last knot onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseRate {
    knots: Vec<f64>,
    rates: Vec<f64>,
}

impl PiecewiseRate {
    pub fn new(knots: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != knots.len() + 1 {
            return Err(Error::domain(format!(
                "{} knots need {} rates, got {}",
                knots.len(),
                knots.len() + 1,
                rates.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("intensity knots must be finite and strictly increasing"));
        }
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::domain("intensity rates must be finite and non-negative"));
        }
        Ok(PiecewiseRate { knots, rates })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![rate])
    }

    pub fn rate_at(&self, u: f64) -> f64 {
        self.rates[self.knots.partition_point(|k| *k <= u)]
    }

    /// Segments `(start, end, rate)` covering `[a, b]`.
    fn segments(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let first = self.knots.partition_point(|k| *k <= a);
        let last = self.knots.partition_point(|k| *k < b);
        (first..=last).map(move |i| {
            let lo = if i == first { a } else { self.knots[i - 1] };
            let hi = if i == last { b } else { self.knots[i] };
            (lo, hi, self.rates[i])
        })
    }

    /// `∫_a^b λ_u du`, exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.segments(a, b).map(|(lo, hi, r)| r * (hi - lo)).sum()
    }

    /// Smallest `u` in `[a, b]` with `∫_a^u λ = mass`.
    fn invert(&self, a: f64, b: f64, mass: f64) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, r) in self.segments(a, b) {
            let seg = r * (hi - lo);
            if r > 0.0 && acc + seg >= mass {
                return (lo + (mass - acc) / r).min(hi);
            }
            acc += seg;
        }
        b
    }

    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|r| *r == 0.0)
    }
}

/// Distribution of the recovery fraction of one default event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecoveryLaw {
    Fixed(f64),
    Beta { a: f64, b: f64 },
}

impl RecoveryLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RecoveryLaw::Fixed(r) if (0.0..=1.0).contains(&r) => Ok(()),
            RecoveryLaw::Fixed(r) => Err(Error::domain(format!("recovery {r} outside [0, 1]"))),
            RecoveryLaw::Beta { a, b } if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() => {
                Ok(())
            }
            RecoveryLaw::Beta { a, b } => {
                Err(Error::domain(format!("Beta({a}, {b}) needs positive parameters")))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RecoveryLaw::Fixed(r) => r,
            RecoveryLaw::Beta { a, b } => a / (a + b),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            RecoveryLaw::Fixed(r) => r * r,
            RecoveryLaw::Beta { a, b } => a * (a + 1.0) / ((a + b) * (a + b + 1.0)),
        }
    }

    fn sampler(&self) -> RecoverySampler {
        match *self {
            RecoveryLaw::Fixed(r) => RecoverySampler::Fixed(r),
            RecoveryLaw::Beta { a, b } => {
                RecoverySampler::Beta(Beta::new(a, b).expect("validated Beta parameters"))
            }
        }
    }
}

impl std::str::FromStr for RecoveryLaw {
    type Err = Error;

    /// `0.4` for a fixed recovery or `beta:a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::domain(format!("'{s}' is not a recovery (expected a number or beta:a,b)"));
        let law = match s.strip_prefix("beta:") {
            Some(ab) => {
                let (a, b) = ab.split_once(',').ok_or_else(bad)?;
                RecoveryLaw::Beta {
                    a: a.trim().parse().map_err(|_| bad())?,
                    b: b.trim().parse().map_err(|_| bad())?,
                }
            }
            None => RecoveryLaw::Fixed(s.parse().map_err(|_| bad())?),
        };
        law.validate()?;
        Ok(law)
    }
}

impl std::fmt::Display for RecoveryLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecoveryLaw::Fixed(r) => write!(f, "{r}"),
            RecoveryLaw::Beta { a, b } => write!(f, "beta:{a},{b}"),
        }
    }
}

enum RecoverySampler {
    Fixed(f64),
    Beta(Beta<f64>),
}

impl RecoverySampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RecoverySampler::Fixed(r) => *r,
            RecoverySampler::Beta(d) => d.sample(rng),
        }
    }

    /// Product of `n` independent recoveries.
    fn survival<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        match self {
            RecoverySampler::Fixed(r) => r.powi(n as i32),
            RecoverySampler::Beta(d) => (0..n).map(|_| d.sample(rng)).product(),
        }
    }
}

/// Intensity of the default process: a finite mixture of scenario paths,
/// each chosen with its probability, plus the recovery law.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySpec {
    scenarios: Vec<(f64, PiecewiseRate)>,
    recovery: RecoveryLaw,
}

impl IntensitySpec {
    pub fn deterministic(path: PiecewiseRate, recovery: RecoveryLaw) -> Result<Self> {
        Self::mixture(vec![(1.0, path)], recovery)
    }

    pub fn constant(lambda: f64, recovery: RecoveryLaw) -> Result<Self> {
        Self::deterministic(PiecewiseRate::constant(lambda)?, recovery)
    }

    pub fn mixture(scenarios: Vec<(f64, PiecewiseRate)>, recovery: RecoveryLaw) -> Result<Self> {
        recovery.validate()?;
        if scenarios.is_empty() {
            return Err(Error::domain("intensity needs at least one scenario"));
        }
        if scenarios.iter().any(|(p, _)| !(*p >= 0.0)) {
            return Err(Error::domain("scenario probabilities must be non-negative"));
        }
        let total: f64 = scenarios.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("scenario probabilities sum to {total}, not 1")));
        }
        Ok(IntensitySpec {
            scenarios,
            recovery,
        })
    }

    pub fn recovery(&self) -> RecoveryLaw {
        self.recovery
    }

    pub fn scenarios(&self) -> &[(f64, PiecewiseRate)] {
        &self.scenarios
    }

    pub fn is_deterministic(&self) -> bool {
        self.scenarios.len() == 1
    }

    /// `l_u = λ_u (1 - E[ρ])`, averaged over scenarios when the intensity is stochastic.
    pub fn mean_loss_rate(&self, u: f64) -> f64 {
        let loss = 1.0 - self.recovery.mean();
        self.scenarios
            .iter()
            .map(|(p, path)| p * path.rate_at(u) * loss)
            .sum()
    }

    /// `exp(-∫_t^s l_u du)` along scenario `k`.
    pub fn conditional_survival_factor(&self, k: usize, t: f64, s: f64) -> f64 {
        let loss = 1.0 - self.recovery.mean();
        (-loss * self.scenarios[k].1.integral(t, s)).exp()
    }

    /// `E[C_s] / C_t`: the conditional closed form for a deterministic path,
    /// the probability-weighted mixture of them otherwise.
    pub fn expected_survival_factor(&self, t: f64, s: f64) -> Result<f64> {
        if s < t {
            return Err(Error::domain(format!("horizon end {s} precedes start {t}")));
        }
        Ok((0..self.scenarios.len())
            .map(|k| self.scenarios[k].0 * self.conditional_survival_factor(k, t, s))
            .sum())
    }

    /// Expected squared gap between an `m`-issuer equal-weight portfolio's
    /// surviving unit payment and its intensity-conditional expectation,
    /// `Σ_k p_k Var(Π ρ_i | λ_k) / m`.
    pub fn expected_diversification_mse(&self, m: usize, t: f64, s: f64) -> Result<f64> {
        if s < t {
            return Err(Error::domain(format!("horizon end {s} precedes start {t}")));
        }
        if m == 0 {
            return Err(Error::domain("issuer count must be positive"));
        }
        let second = self.recovery.second_moment();
        Ok(self
            .scenarios
            .iter()
            .enumerate()
            .map(|(k, (p, path))| {
                let first = self.conditional_survival_factor(k, t, s);
                p * ((-(1.0 - second) * path.integral(t, s)).exp() - first * first)
            })
            .sum::<f64>()
            / m as f64)
    }

    fn pick_scenario<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.scenarios.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, (p, _)) in self.scenarios.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.scenarios.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultEvent {
    pub time: f64,
    pub recovery: f64,
}

/// Default events over a horizon `[t, s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultScenario {
    pub events: Vec<DefaultEvent>,
    pub start: f64,
    pub end: f64,
    /// Index of the intensity scenario the events were drawn under.
    pub intensity_scenario: usize,
}

impl DefaultScenario {
    pub fn empty(start: f64, end: f64) -> Self {
        DefaultScenario {
            events: Vec::new(),
            start,
            end,
            intensity_scenario: 0,
        }
    }

    /// `Π ρ_i`, always in `[0, 1]`.
    pub fn survival_factor(&self) -> f64 {
        self.events.iter().map(|e| e.recovery).product()
    }

    /// Number of events with `a <= t_i < b`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.events.iter().filter(|e| e.time >= a && e.time < b).count()
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Simulates default events on `[t, s]` with a caller-supplied generator.
pub fn simulate_defaults_with<R: Rng + ?Sized>(
    spec: &IntensitySpec,
    t: f64,
    s: f64,
    rng: &mut R,
) -> Result<DefaultScenario> {
    if !(s > t) {
        return Err(Error::domain(format!("horizon end {s} must exceed start {t}")));
    }
    let k = spec.pick_scenario(rng);
    let path = &spec.scenarios[k].1;
    let mass = path.integral(t, s);
    let n = poisson_count(mass, rng);
    let mut marks: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * mass).collect();
    marks.sort_by(f64::total_cmp);
    let recovery = spec.recovery.sampler();
    let events = marks
        .into_iter()
        .map(|m| DefaultEvent {
            time: path.invert(t, s, m),
            recovery: recovery.sample(rng),
        })
        .collect();
    Ok(DefaultScenario {
        events,
        start: t,
        end: s,
        intensity_scenario: k,
    })
}

/// Simulates default events on `[t, s]`, reproducibly for a given seed.
pub fn simulate_defaults(spec: &IntensitySpec, t: f64, s: f64, seed: u64) -> Result<DefaultScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_defaults_with(spec, t, s, &mut rng)
}

/// Multiplies every payment by the scenario's survival factor `Π ρ_i`.
pub fn apply_defaults(schedule: &CashflowSchedule, scenario: &DefaultScenario) -> CashflowSchedule {
    schedule.scaled(scenario.survival_factor())
}

/// A portfolio split across issuers whose schedules share payment dates.
#[derive(Debug, Clone, PartialEq)]
pub struct IssuerPortfolio {
    issuers: Vec<(f64, CashflowSchedule)>,
}

impl IssuerPortfolio {
    pub fn new(issuers: Vec<(f64, CashflowSchedule)>) -> Result<Self> {
        let Some((_, first)) = issuers.first() else {
            return Err(Error::domain("portfolio needs at least one issuer"));
        };
        if issuers.iter().any(|(w, _)| !(*w >= 0.0)) {
            return Err(Error::domain("issuer weights must be non-negative"));
        }
        let total: f64 = issuers.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("issuer weights sum to {total}, not 1")));
        }
        let dates: Vec<f64> = first.payments().iter().map(|p| p.time).collect();
        for (i, (_, s)) in issuers.iter().enumerate() {
            if s.len() != dates.len() || s.payments().iter().zip(&dates).any(|(p, d)| p.time != *d) {
                return Err(Error::domain(format!(
                    "issuer {i} does not share the portfolio's payment dates"
                )));
            }
        }
        Ok(IssuerPortfolio { issuers })
    }

    /// `m` issuers with weight `1/m`, each holding `schedule`.
    pub fn equal_weight(schedule: &CashflowSchedule, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("portfolio needs at least one issuer"));
        }
        let w = 1.0 / m as f64;
        Self::new(vec![(w, schedule.clone()); m])
    }

    pub fn issuers(&self) -> &[(f64, CashflowSchedule)] {
        &self.issuers
    }

    /// `C_n = Σ w^i C^i_n`.
    pub fn aggregate(&self) -> CashflowSchedule {
        self.combine(|_, s| s.clone())
    }

    /// Aggregate outstanding payments after each issuer's own default scenario.
    pub fn after_defaults(&self, scenarios: &[DefaultScenario]) -> Result<CashflowSchedule> {
        if scenarios.len() != self.issuers.len() {
            return Err(Error::domain(format!(
                "{} scenarios for {} issuers",
                scenarios.len(),
                self.issuers.len()
            )));
        }
        Ok(self.combine(|i, s| apply_defaults(s, &scenarios[i])))
    }

    fn combine(&self, f: impl Fn(usize, &CashflowSchedule) -> CashflowSchedule) -> CashflowSchedule {
        let first = &self.issuers[0].1;
        let mut amounts = vec![0.0; first.len()];
        for (i, (w, s)) in self.issuers.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for (acc, p) in amounts.iter_mut().zip(f(i, s).payments()) {
                *acc += w * p.amount;
            }
        }
        let payments = first
            .payments()
            .iter()
            .zip(amounts)
            .map(|(p, amount)| Payment {
                time: p.time,
                amount,
            })
            .collect();
        CashflowSchedule::from_parts_unchecked(payments, first.epoch())
    }
}

pub(crate) fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean and standard error, accumulated in a fixed order.
fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo check of the conditional-expectation formula for outstanding payments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalCheck {
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub analytic: f64,
    /// `(mc_mean - analytic) / mc_stderr`; zero when both the gap and the error vanish.
    pub z_score: f64,
}

pub const MIN_PATHS: usize = 1000;

/// Averages `Π ρ_i` over `n_paths` simulated scenarios and compares with
/// [`IntensitySpec::expected_survival_factor`].
pub fn verify_survival(
    spec: &IntensitySpec,
    t: f64,
    s: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SurvivalCheck> {
    if n_paths < MIN_PATHS {
        return Err(Error::domain(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
    }
    let analytic = spec.expected_survival_factor(t, s)?;
    let factors: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            simulate_defaults_with(spec, t, s, &mut rng).map(|sc| sc.survival_factor())
        })
        .collect::<Result<_>>()?;
    let (mc_mean, mc_stderr) = mean_and_stderr(&factors);
    let gap = mc_mean - analytic;
    let z_score = if mc_stderr > 0.0 {
        gap / mc_stderr
    } else if gap.abs() <= 1e-15 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    };
    Ok(SurvivalCheck {
        mc_mean,
        mc_stderr,
        analytic,
        z_score,
    })
}

/// Mean-square distance between an equal-weight portfolio's surviving payments
/// and their intensity-conditional expectation, for one issuer count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversificationPoint {
    pub issuers: usize,
    pub mse: f64,
    pub mse_stderr: f64,
    /// `E Σ (w^i C^i_t)^2` with unit payments, i.e. `1/M`.
    pub bound: f64,
}

/// Runs the diversification experiment on a unit payment over `[t, s]`.
///
/// Issuers default independently given a shared intensity scenario; the
/// squared error of `Σ w^i C^i_s` against `E[C_s | λ]` is averaged over
/// `n_paths` draws for each issuer count in `m_grid`.
pub fn diversification_experiment(
    spec: &IntensitySpec,
    m_grid: &[usize],
    t: f64,
    s: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<DiversificationPoint>> {
    if n_paths < MIN_PATHS {
        return Err(Error::domain(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
    }
    if !(s > t) {
        return Err(Error::domain(format!("horizon end {s} must exceed start {t}")));
    }
    if m_grid.iter().any(|&m| m == 0) {
        return Err(Error::domain("issuer counts must be positive"));
    }
    let recovery = spec.recovery.sampler();
    let masses: Vec<f64> = spec.scenarios.iter().map(|(_, p)| p.integral(t, s)).collect();
    let poissons: Vec<Option<Poisson<f64>>> = masses
        .iter()
        .map(|&m| (m > 0.0).then(|| Poisson::new(m).expect("positive mean")))
        .collect();

    m_grid
        .iter()
        .enumerate()
        .map(|(g, &m)| {
            let w = 1.0 / m as f64;
            let errors: Vec<f64> = (0..n_paths as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = path_rng(seed, (g as u64) << 40 | i);
                    let k = spec.pick_scenario(&mut rng);
                    let conditional = spec.conditional_survival_factor(k, t, s);
                    let realised = match &poissons[k] {
                        None => 1.0,
                        Some(d) => {
                            let mut acc = 0.0;
                            for _ in 0..m {
                                let n = d.sample(&mut rng) as u64;
                                acc += w * recovery.survival(n, &mut rng);
                            }
                            acc
                        }
                    };
                    (realised - conditional).powi(2)
                })
                .collect();
            let (mse, mse_stderr) = mean_and_stderr(&errors);
            Ok(DiversificationPoint {
                issuers: m,
                mse,
                mse_stderr,
                bound: w,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::oracle;

    fn fixed(lambda: f64, rho: f64) -> IntensitySpec {
        IntensitySpec::constant(lambda, RecoveryLaw::Fixed(rho)).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(PiecewiseRate::constant(-0.1).is_err());
        assert!(PiecewiseRate::new(vec![1.0, 0.5], vec![0.1, 0.2, 0.3]).is_err());
        assert!(PiecewiseRate::new(vec![1.0], vec![0.1]).is_err());
        assert!(IntensitySpec::constant(0.1, RecoveryLaw::Fixed(1.2)).is_err());
        assert!(IntensitySpec::constant(0.1, RecoveryLaw::Beta { a: 0.0, b: 1.0 }).is_err());
        let p = PiecewiseRate::constant(0.1).unwrap();
        assert!(IntensitySpec::mixture(vec![(0.3, p.clone()), (0.3, p)], RecoveryLaw::Fixed(0.5)).is_err());
    }

    #[test]
    fn diversification_mse_matches_monte_carlo() {
        for recovery in [RecoveryLaw::Fixed(0.4), RecoveryLaw::Beta { a: 2.0, b: 2.0 }] {
            let spec = IntensitySpec::constant(0.7, recovery).unwrap();
            let pts = diversification_experiment(&spec, &[1, 20], 0.0, 1.0, 40_000, 3).unwrap();
            for p in pts {
                let want = spec.expected_diversification_mse(p.issuers, 0.0, 1.0).unwrap();
                assert!((p.mse - want).abs() < 4.0 * p.mse_stderr, "{p:?} vs {want}");
            }
        }
        assert_eq!(fixed(0.0, 0.4).expected_diversification_mse(5, 0.0, 1.0).unwrap(), 0.0);
        assert!(fixed(0.3, 0.4).expected_diversification_mse(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn recovery_law_text() {
        assert_eq!("0.4".parse::<RecoveryLaw>().unwrap(), RecoveryLaw::Fixed(0.4));
        let beta: RecoveryLaw = "beta:2, 3".parse().unwrap();
        assert_eq!(beta, RecoveryLaw::Beta { a: 2.0, b: 3.0 });
        assert_eq!(beta.to_string().parse::<RecoveryLaw>().unwrap(), beta);
        for bad in ["1.5", "beta:2", "beta:0,1", "x"] {
            assert!(bad.parse::<RecoveryLaw>().is_err(), "{bad}");
        }
    }

    #[test]
    fn mean_loss_rate_examples() {
        assert!((fixed(0.5, 0.4).mean_loss_rate(0.3) - 0.3).abs() < 1e-15);
        assert_eq!(fixed(0.0, 0.4).mean_loss_rate(0.3), 0.0);
        let beta = IntensitySpec::constant(1.0, RecoveryLaw::Beta { a: 2.0, b: 2.0 }).unwrap();
        assert!((beta.mean_loss_rate(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn survival_factor_examples() {
        let spec = fixed(0.5, 0.4);
        assert_eq!(spec.expected_survival_factor(1.0, 1.0).unwrap(), 1.0);
        assert!((spec.expected_survival_factor(0.0, 1.0).unwrap() - (-0.3f64).exp()).abs() < 1e-15);
        assert!(spec.expected_survival_factor(1.0, 0.0).is_err());
    }

    #[test]
    fn piecewise_survival_matches_quadrature() {
        let path = PiecewiseRate::new(vec![0.25, 0.6, 1.1], vec![0.3, 1.2, 0.05, 0.8]).unwrap();
        let spec = IntensitySpec::deterministic(path.clone(), RecoveryLaw::Fixed(0.35)).unwrap();
        let (t, s) = (0.1, 1.7);
        // Each piece integrated on its own fine grid so the quadrature is exact up to rounding.
        let mut integral = 0.0;
        let cuts = [t, 0.25, 0.6, 1.1, s];
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let rate = path.rate_at(mid);
            integral += oracle::trapezoid(|_| rate * 0.65, w[0], w[1], 10_000);
        }
        let analytic = spec.expected_survival_factor(t, s).unwrap();
        assert!((analytic - (-integral).exp()).abs() < 1e-12);
        assert_eq!(path.rate_at(0.25), 1.2);
        assert_eq!(path.rate_at(0.0), 0.3);
        assert_eq!(path.rate_at(5.0), 0.8);
    }

    #[test]
    fn zero_intensity_never_defaults() {
        let spec = fixed(0.0, 0.4);
        for seed in 0..100 {
            assert!(simulate_defaults(&spec, 0.0, 1.0, seed).unwrap().events.is_empty());
        }
        let check = verify_survival(&spec, 0.0, 1.0, 1000, 3).unwrap();
        assert_eq!((check.mc_mean, check.analytic, check.mc_stderr, check.z_score), (1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn scenarios_are_seed_deterministic_and_well_formed() {
        let path = PiecewiseRate::new(vec![0.5], vec![0.5, 4.0]).unwrap();
        let spec = IntensitySpec::deterministic(path, RecoveryLaw::Beta { a: 2.0, b: 5.0 }).unwrap();
        for seed in 0..200 {
            let a = simulate_defaults(&spec, 0.0, 1.0, seed).unwrap();
            assert_eq!(a, simulate_defaults(&spec, 0.0, 1.0, seed).unwrap());
            assert!(a.events.windows(2).all(|w| w[0].time <= w[1].time));
            assert!(a.events.iter().all(|e| (0.0..=1.0).contains(&e.time) && (0.0..=1.0).contains(&e.recovery)));
            let f = a.survival_factor();
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn poisson_moments_and_independence() {
        let spec = fixed(2.0, 0.5);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut total, mut a_sum, mut b_sum, mut ab_sum, mut a2, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let sc = simulate_defaults_with(&spec, 0.0, 1.0, &mut rng).unwrap();
            let a = sc.count_in(0.0, 0.5) as f64;
            let b = sc.count_in(0.5, 1.0) as f64;
            total += sc.events.len() as f64;
            a_sum += a;
            b_sum += b;
            ab_sum += a * b;
            a2 += a * a;
            b2 += b * b;
        }
        let nf = n as f64;
        let mean = total / nf;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / nf).sqrt(), "mean count {mean}");
        let (ma, mb) = (a_sum / nf, b_sum / nf);
        let cov = ab_sum / nf - ma * mb;
        let corr = cov / ((a2 / nf - ma * ma) * (b2 / nf - mb * mb)).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn event_times_follow_the_intensity_shape() {
        // Four times the rate on the second half: a fifth of events land in the first half.
        let path = PiecewiseRate::new(vec![0.5], vec![1.0, 4.0]).unwrap();
        let spec = IntensitySpec::deterministic(path, RecoveryLaw::Fixed(0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut first, mut all) = (0usize, 0usize);
        for _ in 0..20_000 {
            let sc = simulate_defaults_with(&spec, 0.0, 1.0, &mut rng).unwrap();
            first += sc.count_in(0.0, 0.5);
            all += sc.events.len();
        }
        let frac = first as f64 / all as f64;
        let se = (0.2 * 0.8 / all as f64).sqrt();
        assert!((frac - 0.2).abs() < 4.0 * se, "fraction {frac}");
    }

    #[test]
    fn apply_defaults_examples() {
        let s = CashflowSchedule::from_pairs(&[(1.0, 5.0), (2.0, 105.0)]).unwrap();
        let empty = DefaultScenario::empty(0.0, 1.0);
        assert_eq!(apply_defaults(&s, &empty), s);
        let ev = |t, r| DefaultEvent { time: t, recovery: r };
        let one = DefaultScenario { events: vec![ev(0.3, 0.4)], ..empty.clone() };
        let after = apply_defaults(&s, &one);
        assert!((after.payments()[1].amount - 42.0).abs() < 1e-12);
        let two = DefaultScenario { events: vec![ev(0.3, 0.5), ev(0.6, 0.5)], ..empty.clone() };
        let swapped = DefaultScenario { events: vec![ev(0.3, 0.5), ev(0.6, 0.5)].into_iter().rev().collect(), ..empty };
        assert_eq!(apply_defaults(&s, &two), apply_defaults(&s, &swapped));
        assert!((apply_defaults(&s, &two).payments()[0].amount - 1.25).abs() < 1e-15);
    }

    #[test]
    fn issuer_portfolio_aggregation() {
        let s = CashflowSchedule::from_pairs(&[(1.0, 2.0), (2.0, 102.0)]).unwrap();
        let other = CashflowSchedule::from_pairs(&[(1.0, 4.0), (2.0, 104.0)]).unwrap();
        let port = IssuerPortfolio::new(vec![(0.25, s.clone()), (0.75, other)]).unwrap();
        let agg = port.aggregate();
        assert!((agg.payments()[0].amount - 3.5).abs() < 1e-14);

        let hit = DefaultScenario {
            events: vec![DefaultEvent { time: 0.5, recovery: 0.0 }],
            ..DefaultScenario::empty(0.0, 1.0)
        };
        let after = port.after_defaults(&[hit, DefaultScenario::empty(0.0, 1.0)]).unwrap();
        assert!((after.payments()[1].amount - 78.0).abs() < 1e-12);

        let shifted = CashflowSchedule::from_pairs(&[(1.5, 2.0), (2.0, 102.0)]).unwrap();
        assert!(IssuerPortfolio::new(vec![(0.5, s.clone()), (0.5, shifted)]).is_err());
        assert!(IssuerPortfolio::new(vec![(0.5, s)]).is_err());
    }

    #[test]
    fn survival_checks() {
        let check = verify_survival(&fixed(0.5, 0.4), 0.0, 1.0, 100_000, 2024).unwrap();
        assert!((check.analytic - 0.740818).abs() < 1e-6);
        assert!(check.z_score.abs() < 4.0, "{check:?}");

        let beta = IntensitySpec::constant(1.0, RecoveryLaw::Beta { a: 2.0, b: 2.0 }).unwrap();
        let check = verify_survival(&beta, 0.0, 1.0, 100_000, 7).unwrap();
        assert!((check.analytic - (-0.5f64).exp()).abs() < 1e-15);
        assert!(check.z_score.abs() < 3.0, "{check:?}");

        assert!(verify_survival(&beta, 0.0, 1.0, 999, 7).is_err());
    }

    #[test]
    fn survival_results_do_not_depend_on_thread_count() {
        let spec = fixed(0.8, 0.3);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| verify_survival(&spec, 0.0, 1.0, 5000, 9).unwrap());
        let many = verify_survival(&spec, 0.0, 1.0, 5000, 9).unwrap();
        assert_eq!(single, many);
    }

    #[test]
    fn stochastic_intensity_mixture() {
        let low = PiecewiseRate::constant(0.2).unwrap();
        let high = PiecewiseRate::new(vec![0.5], vec![0.5, 3.0]).unwrap();
        let spec = IntensitySpec::mixture(vec![(0.7, low), (0.3, high)], RecoveryLaw::Fixed(0.4)).unwrap();
        let analytic = 0.7 * (-0.2f64 * 0.6).exp() + 0.3 * (-(0.25 + 1.5) * 0.6f64).exp();
        let check = verify_survival(&spec, 0.0, 1.0, 100_000, 31).unwrap();
        assert!((check.analytic - analytic).abs() < 1e-15);
        assert!(check.z_score.abs() < 4.0, "{check:?}");
        // The unconditional law is not Poisson: a single-path spec with the averaged
        // rate would predict a different survival factor.
        let averaged = (-(0.7 * 0.2 + 0.3 * 1.75) * 0.6f64).exp();
        assert!((check.mc_mean - averaged).abs() > 10.0 * check.mc_stderr);
    }

    #[test]
    fn diversification_degenerate_cases() {
        let pts = diversification_experiment(&fixed(0.0, 0.4), &[1, 5, 50], 0.0, 1.0, 1000, 1).unwrap();
        assert!(pts.iter().all(|p| p.mse == 0.0));

        // M = 1 is the single-issuer variance: Var(ρ^N) = E ρ^{2N} - (E ρ^N)^2.
        let spec = fixed(0.5, 0.4);
        let pts = diversification_experiment(&spec, &[1], 0.0, 1.0, 50_000, 2).unwrap();
        let var = (-0.5f64 * (1.0 - 0.16)).exp() - (-0.5f64 * 0.6 * 2.0).exp();
        assert!((pts[0].mse - var).abs() < 4.0 * pts[0].mse_stderr, "{:?} vs {var}", pts[0]);
    }
}
