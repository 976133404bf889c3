//! Monthly observation series: total-return index, yield, duration and the
//! optional convexity, CPI and short-spread columns.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::returns::{HoldingPeriod, ReturnObservation, MONTH};

/// Calendar month, formatted `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::domain(format!("month {month} outside 1..=12")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        YearMonth {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(&self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    pub fn next(&self) -> Self {
        self.add_months(1)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("'{s}' is not a YYYY-MM month"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssetClass {
    Government,
    InflationLinked,
    Corporate,
}

impl AssetClass {
    pub fn label(&self) -> &'static str {
        match self {
            AssetClass::Government => "gov",
            AssetClass::InflationLinked => "infl",
            AssetClass::Corporate => "corp",
        }
    }
}

impl FromStr for AssetClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gov" | "government" => Ok(AssetClass::Government),
            "infl" | "inflation" => Ok(AssetClass::InflationLinked),
            "corp" | "corporate" => Ok(AssetClass::Corporate),
            other => Err(Error::domain(format!("unknown asset class '{other}'"))),
        }
    }
}

impl fmt::Display for AssetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Optional column names, in file order.
pub const OPTIONAL_COLUMNS: [&str; 3] = ["convexity", "cpi", "spread"];

/// Aligned end-of-month observations. All columns share one length and the
/// dates advance one month at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    class: AssetClass,
    dates: Vec<YearMonth>,
    index: Vec<f64>,
    yields: Vec<f64>,
    durations: Vec<f64>,
    convexity: Option<Vec<f64>>,
    cpi: Option<Vec<f64>>,
    spread: Option<Vec<f64>>,
}

/// Column-wise builder input for [`ObservationSeries::new`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesColumns {
    pub dates: Vec<YearMonth>,
    pub index: Vec<f64>,
    pub yields: Vec<f64>,
    pub durations: Vec<f64>,
    pub convexity: Option<Vec<f64>>,
    pub cpi: Option<Vec<f64>>,
    pub spread: Option<Vec<f64>>,
}

impl ObservationSeries {
    pub fn new(class: AssetClass, cols: SeriesColumns) -> Result<Self> {
        let n = cols.dates.len();
        let lens = [
            ("index", Some(cols.index.len())),
            ("yield", Some(cols.yields.len())),
            ("duration", Some(cols.durations.len())),
            ("convexity", cols.convexity.as_ref().map(Vec::len)),
            ("cpi", cols.cpi.as_ref().map(Vec::len)),
            ("spread", cols.spread.as_ref().map(Vec::len)),
        ];
        for (name, len) in lens {
            if let Some(len) = len {
                if len != n {
                    return Err(Error::domain(format!(
                        "column '{name}' has {len} rows, dates have {n}"
                    )));
                }
            }
        }
        for w in cols.dates.windows(2) {
            if w[0].next() != w[1] {
                return Err(Error::domain(format!(
                    "dates must advance monthly without gaps ({} followed by {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(i) = cols.index.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::domain(format!("index level at row {i} is not positive")));
        }
        if let Some(cpi) = &cols.cpi {
            if let Some(i) = cpi.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
                return Err(Error::domain(format!("CPI level at row {i} is not positive")));
            }
        }
        Ok(ObservationSeries {
            class,
            dates: cols.dates,
            index: cols.index,
            yields: cols.yields,
            durations: cols.durations,
            convexity: cols.convexity,
            cpi: cols.cpi,
            spread: cols.spread,
        })
    }

    pub fn class(&self) -> AssetClass {
        self.class
    }

    /// Holding-period length, one month.
    pub fn dt(&self) -> f64 {
        MONTH
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn index(&self) -> &[f64] {
        &self.index
    }

    pub fn yields(&self) -> &[f64] {
        &self.yields
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn convexity(&self) -> Option<&[f64]> {
        self.convexity.as_deref()
    }

    pub fn cpi(&self) -> Option<&[f64]> {
        self.cpi.as_deref()
    }

    pub fn spread(&self) -> Option<&[f64]> {
        self.spread.as_deref()
    }

    pub fn first_date(&self) -> Option<YearMonth> {
        self.dates.first().copied()
    }

    pub fn last_date(&self) -> Option<YearMonth> {
        self.dates.last().copied()
    }

    pub fn columns(&self) -> SeriesColumns {
        SeriesColumns {
            dates: self.dates.clone(),
            index: self.index.clone(),
            yields: self.yields.clone(),
            durations: self.durations.clone(),
            convexity: self.convexity.clone(),
            cpi: self.cpi.clone(),
            spread: self.spread.clone(),
        }
    }

    /// Names of the optional columns present, in file order.
    pub fn optional_columns(&self) -> Vec<&'static str> {
        let present = [
            self.convexity.is_some(),
            self.cpi.is_some(),
            self.spread.is_some(),
        ];
        OPTIONAL_COLUMNS
            .iter()
            .zip(present)
            .filter_map(|(name, p)| p.then_some(*name))
            .collect()
    }

    /// Rows `range`, keeping every column.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ObservationSeries {
        let cut = |v: &Vec<f64>| v[range.clone()].to_vec();
        ObservationSeries {
            class: self.class,
            dates: self.dates[range.clone()].to_vec(),
            index: cut(&self.index),
            yields: cut(&self.yields),
            durations: cut(&self.durations),
            convexity: self.convexity.as_ref().map(cut),
            cpi: self.cpi.as_ref().map(cut),
            spread: self.spread.as_ref().map(cut),
        }
    }

    /// `ln(P_s / P_t)` for consecutive rows.
    pub fn log_returns(&self) -> Vec<f64> {
        self.index.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
    }

    /// One observation per consecutive row pair, with time measured in
    /// months from the first row.
    pub fn observations(&self) -> Vec<ReturnObservation> {
        (1..self.len())
            .map(|i| {
                let period = HoldingPeriod::monthly((i - 1) as f64 * MONTH);
                let mut obs = ReturnObservation::new(
                    period,
                    self.yields[i - 1],
                    self.yields[i],
                    self.durations[i - 1],
                )
                .with_log_return((self.index[i] / self.index[i - 1]).ln());
                obs.convexity_start = self.convexity.as_ref().map(|c| c[i - 1]);
                obs.spread = self.spread.as_ref().map(|s| s[i]);
                obs
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    #[test]
    fn year_month_arithmetic() {
        assert_eq!(ym("1999-12").next(), ym("2000-01"));
        assert_eq!(ym("2000-01").add_months(-1), ym("1999-12"));
        assert_eq!(ym("1997-12").months_until(ym("2010-03")), 147);
        assert_eq!(ym("2004-07").to_string(), "2004-07");
        assert!("2004-7".parse::<YearMonth>().is_err());
        assert!("2004-13".parse::<YearMonth>().is_err());
        assert!("abcd-01".parse::<YearMonth>().is_err());
    }

    fn columns(n: usize) -> SeriesColumns {
        let start = ym("2001-01");
        SeriesColumns {
            dates: (0..n as i64).map(|k| start.add_months(k)).collect(),
            index: (0..n).map(|k| 100.0 + k as f64).collect(),
            yields: vec![0.03; n],
            durations: vec![5.0; n],
            ..Default::default()
        }
    }

    #[test]
    fn validation() {
        assert!(ObservationSeries::new(AssetClass::Government, columns(4)).is_ok());
        let mut gap = columns(4);
        gap.dates[3] = gap.dates[3].next();
        assert!(ObservationSeries::new(AssetClass::Government, gap).is_err());
        let mut short = columns(4);
        short.yields.pop();
        assert!(ObservationSeries::new(AssetClass::Government, short).is_err());
        let mut neg = columns(4);
        neg.index[2] = 0.0;
        assert!(ObservationSeries::new(AssetClass::Government, neg).is_err());
    }

    #[test]
    fn observations_pair_consecutive_rows() {
        let mut cols = columns(3);
        cols.spread = Some(vec![0.01, 0.02, 0.03]);
        let s = ObservationSeries::new(AssetClass::Corporate, cols).unwrap();
        let obs = s.observations();
        assert_eq!(obs.len(), 2);
        assert!((obs[1].log_return.unwrap() - (102.0f64 / 101.0).ln()).abs() < 1e-15);
        assert_eq!(obs[1].spread, Some(0.03));
        assert_eq!(s.optional_columns(), vec!["spread"]);
        assert_eq!(s.slice(1..3).first_date(), Some(ym("2001-02")));
    }
}
