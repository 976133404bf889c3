//! Text and CSV rendering of regression results.
//!
//! The text table puts one model per column: coefficients with t-statistics in
//! parentheses beneath them, then R², Partial-R² and the sample range. The
//! intercept is shown as `100 * c` and the R² rows as percentages; the CSV
//! keeps plain decimals.

use std::fmt::Write as _;

use crate::regression::{LagSelection, RegressionResult};

const LABEL_WIDTH: usize = 14;
const COLUMN_WIDTH: usize = 12;

fn row_w(out: &mut String, width: usize, label: &str, cells: &[String]) {
    let _ = write!(out, "{label:<LABEL_WIDTH$}");
    for c in cells {
        let _ = write!(out, "{c:>width$}");
    }
    out.push('\n');
}

fn row(out: &mut String, label: &str, cells: &[String]) {
    row_w(out, COLUMN_WIDTH, label, cells)
}

fn coefficient_rows(
    out: &mut String,
    width: usize,
    results: &[RegressionResult],
    name: &str,
    label: &str,
    scale: f64,
) {
    if results.iter().all(|r| r.coefficient(name).is_none()) {
        return;
    }
    let (mut est, mut tst) = (Vec::new(), Vec::new());
    for r in results {
        match r.coefficient(name) {
            Some(c) => {
                est.push(format!("{:.4}", scale * c.estimate));
                tst.push(format!("({:.2})", c.t_stat));
            }
            None => {
                est.push(String::new());
                tst.push(String::new());
            }
        }
    }
    row_w(out, width, label, &est);
    row_w(out, width, "", &tst);
}

fn percent(v: Option<f64>) -> String {
    v.map(|v| format!("{:.2}%", 100.0 * v)).unwrap_or_default()
}

/// Side-by-side table of one or more fitted models.
pub fn text_table(results: &[RegressionResult]) -> String {
    let mut out = String::new();
    let heads: Vec<String> = results
        .iter()
        .map(|r| match r.spec.kind {
            crate::regression::ModelKind::Infl2 => format!("{} (lag {})", r.spec.kind, r.spec.lag_months),
            k => k.to_string(),
        })
        .collect();
    let width = heads.iter().map(|h| h.chars().count() + 2).fold(COLUMN_WIDTH, usize::max);
    row_w(&mut out, width, "", &heads);
    coefficient_rows(&mut out, width, results, "c", "100 * c", 100.0);
    coefficient_rows(&mut out, width, results, "gamma", "gamma", 1.0);
    coefficient_rows(&mut out, width, results, "alpha", "alpha", 1.0);
    let cells = |f: &dyn Fn(&RegressionResult) -> String| results.iter().map(f).collect::<Vec<_>>();
    row_w(&mut out, width, "R²", &cells(&|r| percent(Some(r.r_squared))));
    row_w(&mut out, width, "Partial-R²", &cells(&|r| percent(r.partial_r_squared)));
    row_w(&mut out, width, "Observations", &cells(&|r| r.n_obs.to_string()));
    row_w(&mut out, width, "Data start", &cells(&|r| r.data_start.to_string()));
    row_w(&mut out, width, "Data end", &cells(&|r| r.data_end.to_string()));
    out.push_str("Numbers in parentheses are t-statistics.\n");
    out
}

pub const CSV_HEADER: &str = "model,lag_months,n_obs,c,c_se,c_t,gamma,gamma_se,gamma_t,alpha,alpha_se,alpha_t,r_squared,partial_r_squared,data_start,data_end";

/// One CSV line per result under [`CSV_HEADER`]; absent values are empty.
pub fn csv_table(results: &[RegressionResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let mut fields = vec![
            r.spec.kind.to_string(),
            r.spec.lag_months.to_string(),
            r.n_obs.to_string(),
        ];
        for name in ["c", "gamma", "alpha"] {
            match r.coefficient(name) {
                Some(c) => fields.extend([c.estimate, c.std_error, c.t_stat].map(|v| v.to_string())),
                None => fields.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        fields.push(r.r_squared.to_string());
        fields.push(r.partial_r_squared.map(|v| v.to_string()).unwrap_or_default());
        fields.push(r.data_start.to_string());
        fields.push(r.data_end.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// R² per candidate lag, marking the selected one.
pub fn lag_table(sel: &LagSelection) -> String {
    let mut out = String::new();
    row(&mut out, "Lag (months)", &["R²".to_string()]);
    for (lag, r2) in &sel.r_squared {
        let mark = if *lag == sel.best_lag { " *" } else { "" };
        row(&mut out, &format!("{lag}{mark}"), &[format!("{:.4}%", 100.0 * r2)]);
    }
    out
}

pub fn lag_csv(sel: &LagSelection) -> String {
    let mut out = String::from("lag_months,r_squared,selected\n");
    for (lag, r2) in &sel.r_squared {
        let _ = writeln!(out, "{lag},{r2},{}", *lag == sel.best_lag);
    }
    out
}
