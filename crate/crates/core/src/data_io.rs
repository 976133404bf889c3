//! CSV ingestion and emission of observation series and cashflow schedules.
//!
//! Series files carry a mandatory header with the columns
//! `date,index,yield,duration` followed by any of `convexity,cpi,spread`.
//! Dates are `YYYY-MM` (a trailing `-DD` is accepted and ignored). Yields and
//! spreads are decimals per annum, so 5% is written `0.05`.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::cashflow::{year_fraction, CashflowSchedule, Payment};
use crate::error::{Error, Location, Result};
use crate::series::{AssetClass, ObservationSeries, SeriesColumns, YearMonth, OPTIONAL_COLUMNS};

pub const REQUIRED_COLUMNS: [&str; 4] = ["date", "index", "yield", "duration"];

/// Column a class cannot be analysed without, beyond the required four.
pub fn class_column(class: AssetClass) -> Option<&'static str> {
    match class {
        AssetClass::Government => None,
        AssetClass::InflationLinked => Some("cpi"),
        AssetClass::Corporate => Some("spread"),
    }
}

struct Ctx<'a> {
    file: &'a str,
}

impl Ctx<'_> {
    fn at(&self, row: usize, column: &str) -> Location {
        Location {
            file: self.file.to_string(),
            row,
            column: column.to_string(),
        }
    }

    fn schema(&self, row: usize, column: &str, message: impl Into<String>) -> Error {
        Error::Schema {
            location: self.at(row, column),
            message: message.into(),
        }
    }

    fn value(&self, row: usize, column: &str, message: impl Into<String>) -> Error {
        Error::Value {
            location: self.at(row, column),
            message: message.into(),
        }
    }

    fn csv(&self, err: csv::Error) -> Error {
        let row = err.position().map(|p| p.line() as usize).unwrap_or(0);
        self.schema(row, "", err.to_string())
    }

    fn number(&self, raw: &str, row: usize, column: &str) -> Result<f64> {
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| self.value(row, column, format!("'{raw}' is not a decimal number")))?;
        if !v.is_finite() {
            return Err(self.value(row, column, format!("'{raw}' is not finite")));
        }
        Ok(v)
    }
}

fn parse_month(raw: &str) -> Option<YearMonth> {
    let raw = raw.trim();
    let ym = match raw.len() {
        7 => raw,
        10 => {
            NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()?;
            &raw[..7]
        }
        _ => return None,
    };
    ym.parse().ok()
}

/// Reads a series from any reader; `name` labels error locations.
pub fn read_series<R: Read>(reader: R, name: &str, class: AssetClass) -> Result<ObservationSeries> {
    let ctx = Ctx { file: name };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| ctx.csv(e))?.clone();
    let mut slots: Vec<usize> = Vec::with_capacity(headers.len());
    let known: Vec<&str> = REQUIRED_COLUMNS.iter().chain(&OPTIONAL_COLUMNS).copied().collect();
    for h in headers.iter() {
        let Some(k) = known.iter().position(|c| *c == h) else {
            return Err(ctx.schema(1, h, format!("unknown column (expected one of {})", known.join(", "))));
        };
        if slots.contains(&k) {
            return Err(ctx.schema(1, h, "column appears twice"));
        }
        slots.push(k);
    }
    for (k, col) in known.iter().enumerate() {
        if k < REQUIRED_COLUMNS.len() && !slots.contains(&k) {
            return Err(ctx.schema(1, col, "required column is missing"));
        }
    }
    if let Some(col) = class_column(class) {
        if !headers.iter().any(|h| h == col) {
            return Err(ctx.schema(
                1,
                col,
                format!("column is required for {class} series"),
            ));
        }
    }

    let mut dates = Vec::new();
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); known.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        for (field, &k) in rec.iter().zip(&slots) {
            let col = known[k];
            if k == 0 {
                let d = parse_month(field)
                    .ok_or_else(|| ctx.value(row, col, format!("'{field}' is not a YYYY-MM month")))?;
                if let Some(prev) = dates.last().copied() {
                    let prev: YearMonth = prev;
                    if d <= prev {
                        return Err(Error::Ordering {
                            location: ctx.at(row, col),
                            message: format!("{d} does not follow {prev}"),
                        });
                    }
                    if d != prev.next() {
                        return Err(Error::Ordering {
                            location: ctx.at(row, col),
                            message: format!("gap between {prev} and {d}; series must be monthly"),
                        });
                    }
                }
                dates.push(d);
                continue;
            }
            let v = ctx.number(field, row, col)?;
            if matches!(col, "index" | "cpi") && v <= 0.0 {
                return Err(ctx.value(row, col, format!("{col} level {v} must be positive")));
            }
            if matches!(col, "duration" | "convexity") && v < 0.0 {
                return Err(ctx.value(row, col, format!("{col} {v} must be non-negative")));
            }
            numeric[k].push(v);
        }
    }
    if dates.is_empty() {
        return Err(ctx.schema(2, "", "file has a header but no data rows"));
    }
    let mut take = |name: &str| {
        let k = known.iter().position(|c| *c == name).expect("known column");
        slots.contains(&k).then(|| std::mem::take(&mut numeric[k]))
    };
    let cols = SeriesColumns {
        dates,
        index: take("index").expect("required"),
        yields: take("yield").expect("required"),
        durations: take("duration").expect("required"),
        convexity: take("convexity"),
        cpi: take("cpi"),
        spread: take("spread"),
    };
    ObservationSeries::new(class, cols)
}

/// Loads and validates a series file for the given asset class.
pub fn load_series(path: impl AsRef<Path>, class: AssetClass) -> Result<ObservationSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(std::io::BufReader::new(file), &path.display().to_string(), class)
}

/// Writes the series with only the optional columns it carries. Floats use
/// the shortest representation that parses back to the same value.
pub fn write_series<W: Write>(series: &ObservationSeries, writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let optional = series.optional_columns();
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(&optional);
    w.write_record(&header)?;
    let extra: Vec<&[f64]> = optional
        .iter()
        .map(|c| match *c {
            "convexity" => series.convexity(),
            "cpi" => series.cpi(),
            _ => series.spread(),
        })
        .map(|c| c.expect("listed column is present"))
        .collect();
    for i in 0..series.len() {
        let mut rec = vec![
            series.dates()[i].to_string(),
            series.index()[i].to_string(),
            series.yields()[i].to_string(),
            series.durations()[i].to_string(),
        ];
        rec.extend(extra.iter().map(|c| c[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn series_to_csv(series: &ObservationSeries) -> String {
    let mut buf = Vec::new();
    write_series(series, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub fn emit_dataset(series: &ObservationSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, series_to_csv(series)).map_err(|e| Error::io(path, e))
}

/// Trims every series to their common months, optionally intersected with
/// `range` (inclusive).
pub fn align(
    series: &[ObservationSeries],
    range: Option<(YearMonth, YearMonth)>,
) -> Result<Vec<ObservationSeries>> {
    if series.is_empty() {
        return Err(Error::domain("nothing to align"));
    }
    let mut lo = range.map(|r| r.0);
    let mut hi = range.map(|r| r.1);
    for s in series {
        let (Some(a), Some(b)) = (s.first_date(), s.last_date()) else {
            return Err(Error::domain("cannot align an empty series"));
        };
        lo = Some(lo.map_or(a, |l| l.max(a)));
        hi = Some(hi.map_or(b, |h| h.min(b)));
    }
    let (lo, hi) = (lo.expect("set"), hi.expect("set"));
    if lo > hi {
        return Err(Error::domain(format!(
            "no common months (latest start {lo}, earliest end {hi})"
        )));
    }
    Ok(series
        .iter()
        .map(|s| {
            let first = s.first_date().expect("non-empty");
            let a = first.months_until(lo) as usize;
            let b = first.months_until(hi) as usize + 1;
            s.slice(a..b)
        })
        .collect())
}

/// Reads a schedule with header `time,amount` (years) or `date,amount`
/// (ISO dates, converted to years after `epoch` on an ACT/365.25 basis).
pub fn read_schedule<R: Read>(reader: R, name: &str, epoch: Option<NaiveDate>) -> Result<CashflowSchedule> {
    let ctx = Ctx { file: name };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| ctx.csv(e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let dated = match names.as_slice() {
        ["time", "amount"] => false,
        ["date", "amount"] => true,
        _ => {
            return Err(ctx.schema(
                1,
                names.first().copied().unwrap_or(""),
                "schedule header must be 'time,amount' or 'date,amount'",
            ))
        }
    };
    let epoch = match (dated, epoch) {
        (true, None) => return Err(ctx.schema(1, "date", "dated schedules need a valuation date")),
        (_, e) => e,
    };
    let mut payments = Vec::new();
    let mut last: Option<f64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let time = if dated {
            let d = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|_| ctx.value(row, "date", format!("'{}' is not a YYYY-MM-DD date", &rec[0])))?;
            year_fraction(epoch.expect("checked"), d)
        } else {
            ctx.number(&rec[0], row, "time")?
        };
        let amount = ctx.number(&rec[1], row, "amount")?;
        if amount < 0.0 {
            return Err(ctx.value(row, "amount", "payment amounts must be non-negative"));
        }
        if last.is_some_and(|l| time <= l) {
            return Err(Error::Ordering {
                location: ctx.at(row, names[0]),
                message: "payment times must be strictly increasing".into(),
            });
        }
        last = Some(time);
        payments.push(Payment { time, amount });
    }
    CashflowSchedule::new(payments).map_err(|e| match e {
        Error::Domain(m) => ctx.schema(0, "", m),
        other => other,
    })
}

pub fn load_schedule(path: impl AsRef<Path>, epoch: Option<NaiveDate>) -> Result<CashflowSchedule> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_schedule(std::io::BufReader::new(file), &path.display().to_string(), epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GOOD: &str = "date,index,yield,duration\n2001-01,100,0.05,4.5\n2001-02,100.4,0.049,4.49\n2001-03,100.9,0.048,4.48\n";

    fn load(text: &str, class: AssetClass) -> Result<ObservationSeries> {
        read_series(text.as_bytes(), "mem.csv", class)
    }

    #[test]
    fn three_rows_two_returns() {
        let s = load(GOOD, AssetClass::Government).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.log_returns().len(), 2);
        assert!((s.log_returns()[0] - (100.4f64 / 100.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn day_suffix_is_accepted() {
        let text = GOOD.replace("2001-01,", "2001-01-31,");
        assert_eq!(load(&text, AssetClass::Government).unwrap().len(), 3);
    }

    #[test]
    fn duplicated_month_is_an_ordering_error_at_that_row() {
        let text = GOOD.replace("2001-03", "2001-02");
        match load(&text, AssetClass::Government) {
            Err(Error::Ordering { location, .. }) => {
                assert_eq!(location.row, 4);
                assert_eq!(location.column, "date");
                assert_eq!(location.file, "mem.csv");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gap_is_rejected() {
        let text = GOOD.replace("2001-03", "2001-05");
        assert!(matches!(load(&text, AssetClass::Government), Err(Error::Ordering { .. })));
    }

    #[test]
    fn non_positive_index_reports_row() {
        let text = GOOD.replace("100.4", "-1");
        match load(&text, AssetClass::Government) {
            Err(e @ Error::Value { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("row 3") && msg.contains("'index'"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn class_columns_are_required() {
        match load(GOOD, AssetClass::InflationLinked) {
            Err(Error::Schema { location, .. }) => assert_eq!(location.column, "cpi"),
            other => panic!("{other:?}"),
        }
        let err = load(GOOD, AssetClass::Corporate).unwrap_err();
        assert!(err.to_string().contains("spread"));
    }

    #[test]
    fn malformed_inputs_carry_locations() {
        let cases = [
            "date,index,yield\n2001-01,1,0.1\n",
            "date,index,yield,duration,bogus\n2001-01,1,0.1,1,1\n",
            "date,index,yield,duration,yield\n2001-01,1,0.1,1,1\n",
            "date,index,yield,duration\n2001-01,abc,0.1,1\n",
            "date,index,yield,duration\n2001-01,1,0.1\n",
            "date,index,yield,duration\n01/2001,1,0.1,1\n",
            "date,index,yield,duration\n",
            "date,index,yield,duration\n2001-01,1,NaN,1\n",
        ];
        for text in cases {
            let err = load(text, AssetClass::Government).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains("mem.csv:row "), "{msg}");
            assert!(msg.contains(":column '"), "{msg}");
        }
    }

    #[test]
    fn optional_columns_round_trip() {
        let text = "date,index,yield,duration,cpi\n2001-01,100,0.05,4.5,98.1\n2001-02,101,0.05,4.5,98.3\n";
        let s = load(text, AssetClass::InflationLinked).unwrap();
        let out = series_to_csv(&s);
        assert_eq!(out, text);
        assert!(series_to_csv(&load(GOOD, AssetClass::Government).unwrap()).starts_with("date,index,yield,duration\n"));
    }

    fn staggered(start: &str, n: usize) -> ObservationSeries {
        let s: YearMonth = start.parse().unwrap();
        ObservationSeries::new(
            AssetClass::Government,
            SeriesColumns {
                dates: (0..n as i64).map(|k| s.add_months(k)).collect(),
                index: (0..n).map(|k| 100.0 + k as f64).collect(),
                yields: vec![0.03; n],
                durations: vec![5.0; n],
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn align_examples() {
        let a = staggered("2000-01", 10);
        let same = align(&[a.clone(), a.clone()], None).unwrap();
        assert_eq!(same[0], a);
        let b = staggered("2000-02", 10);
        let off = align(&[a.clone(), b.clone()], None).unwrap();
        assert_eq!(off[0].len(), 9);
        assert_eq!(off[0].dates(), off[1].dates());
        let c = staggered("2000-04", 4);
        let three = align(&[a.clone(), b, c], None).unwrap();
        assert_eq!(three[0].first_date(), "2000-04".parse().ok());
        assert_eq!(three[0].last_date(), "2000-07".parse().ok());
        assert!(align(&[a.clone(), staggered("2001-01", 3)], None).is_err());
        let r = ("2000-03".parse().unwrap(), "2000-05".parse().unwrap());
        assert_eq!(align(&[a], Some(r)).unwrap()[0].len(), 3);
    }

    #[test]
    fn schedules() {
        let s = read_schedule("time,amount\n0.5,2\n1.0,102\n".as_bytes(), "s.csv", None).unwrap();
        assert_eq!(s.len(), 2);
        let epoch = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let d = read_schedule("date,amount\n2025-01-01,100\n".as_bytes(), "s.csv", Some(epoch)).unwrap();
        assert!((d.payments()[0].time - 366.0 / 365.25).abs() < 1e-15);
        assert!(read_schedule("date,amount\n2025-01-01,100\n".as_bytes(), "s.csv", None).is_err());
        let err = read_schedule("time,amount\n1,2\n1,3\n".as_bytes(), "s.csv", None).unwrap_err();
        assert!(err.to_string().contains("s.csv:row 3"));
        assert!(read_schedule("t,a\n1,2\n".as_bytes(), "s.csv", None).is_err());
        assert!(read_schedule("time,amount\n1,-2\n".as_bytes(), "s.csv", None).is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_lossless(
            vals in proptest::collection::vec((1e-3f64..1e6, -0.05f64..0.2, 0.0f64..30.0, 0.0f64..900.0, 1.0f64..500.0, 0.0f64..0.1), 1..40),
            year in 1950i32..2050,
        ) {
            let start = YearMonth::new(year, 1).unwrap();
            let n = vals.len();
            let s = ObservationSeries::new(AssetClass::Corporate, SeriesColumns {
                dates: (0..n as i64).map(|k| start.add_months(k)).collect(),
                index: vals.iter().map(|v| v.0).collect(),
                yields: vals.iter().map(|v| v.1).collect(),
                durations: vals.iter().map(|v| v.2).collect(),
                convexity: Some(vals.iter().map(|v| v.3).collect()),
                cpi: Some(vals.iter().map(|v| v.4).collect()),
                spread: Some(vals.iter().map(|v| v.5).collect()),
            }).unwrap();
            let back = load(&series_to_csv(&s), AssetClass::Corporate).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
