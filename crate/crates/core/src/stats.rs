//! Ordinary least squares with classical diagnostics.
//!
//! The fit solves the least-squares problem through a Householder QR
//! decomposition of the design matrix. Standard errors come from
//! `sigma^2 (R^T R)^-1`, t-values are `coef / SE` with two-sided Student-t
//! p-values, and the overall F test compares the fitted model against the
//! intercept-only model.

use std::fmt::Write as _;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::beta_inc;

/// Name of the intercept term.
pub const CONSTANT: &str = "Constant";

/// Diagonal entries of R below this fraction of the largest one mark a
/// column as linearly dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("at least one predictor column is required")]
    NoPredictors,
    #[error("column `{column}` has {len} values, response has {expected}")]
    LengthMismatch {
        column: String,
        len: usize,
        expected: usize,
    },
    #[error("column `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("{n} observations; at least {required} are needed for {predictors} predictor(s)")]
    TooFewObservations {
        n: usize,
        required: usize,
        predictors: usize,
    },
    #[error("design matrix is rank deficient: column `{0}` is collinear with earlier columns")]
    Singular(String),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
    #[error("statistic must be a non-negative number, got {0}")]
    InvalidStatistic(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionInput {
    pub response: Vec<f64>,
    pub columns: Vec<Column>,
    pub intercept: bool,
}

impl RegressionInput {
    pub fn new(response: Vec<f64>, columns: Vec<Column>) -> Self {
        Self {
            response,
            columns,
            intercept: true,
        }
    }

    /// Score on a single stability column named `S`.
    pub fn simple(response: Vec<f64>, s: Vec<f64>) -> Self {
        Self::new(response, vec![Column::new("S", s)])
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    fn validate(&self) -> Result<(), StatsError> {
        if self.columns.is_empty() {
            return Err(StatsError::NoPredictors);
        }
        let n = self.response.len();
        if self.response.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite("response".into()));
        }
        let mut names: Vec<&str> = Vec::with_capacity(self.columns.len() + 1);
        if self.intercept {
            names.push(CONSTANT);
        }
        for c in &self.columns {
            if names.contains(&c.name.as_str()) {
                return Err(StatsError::DuplicateColumn(c.name.clone()));
            }
            names.push(&c.name);
            if c.values.len() != n {
                return Err(StatsError::LengthMismatch {
                    column: c.name.clone(),
                    len: c.values.len(),
                    expected: n,
                });
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite(c.name.clone()));
            }
        }
        let required = self.columns.len() + 2;
        if n < required {
            return Err(StatsError::TooFewObservations {
                n,
                required,
                predictors: self.columns.len(),
            });
        }
        Ok(())
    }

    fn term_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.columns.len() + 1);
        if self.intercept {
            names.push(CONSTANT.to_string());
        }
        names.extend(self.columns.iter().map(|c| c.name.clone()));
        names
    }

    /// Design matrix as a list of columns.
    fn design(&self) -> Vec<Vec<f64>> {
        let mut x = Vec::with_capacity(self.columns.len() + 1);
        if self.intercept {
            x.push(vec![1.0; self.response.len()]);
        }
        x.extend(self.columns.iter().map(|c| c.values.clone()));
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub coefficients: IndexMap<String, f64>,
    pub std_errors: IndexMap<String, f64>,
    pub t_values: IndexMap<String, f64>,
    pub p_values: IndexMap<String, f64>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_p")]
    pub f_p: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_obs: usize,
    pub df_resid: usize,
    pub intercept: bool,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Householder QR of a column-major matrix, applied to `y` as it goes.
/// Returns R (row-major upper triangle, p x p) and `Q^T y`.
fn householder_qr(mut cols: Vec<Vec<f64>>, mut y: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = cols.len();
    let n = y.len();
    for k in 0..p {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vv;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= scale * vi;
            }
        };
        for col in cols.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut y[k..]);
        cols[k][k] = alpha;
        for x in &mut cols[k][k + 1..n] {
            *x = 0.0;
        }
    }
    let r = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| if j >= i { cols[j][i] } else { 0.0 })
                .collect()
        })
        .collect();
    (r, y)
}

/// Inverse of an upper triangular matrix with nonzero diagonal.
fn upper_inverse(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = r.len();
    let mut inv = vec![vec![0.0; p]; p];
    for j in 0..p {
        inv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / r[i][i];
        }
    }
    inv
}

fn t_value(coef: f64, se: f64) -> f64 {
    if se > 0.0 {
        coef / se
    } else if coef == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(coef)
    }
}

/// Least-squares fit with coefficient and goodness-of-fit diagnostics.
pub fn ols_fit(input: &RegressionInput) -> Result<RegressionResult, StatsError> {
    input.validate()?;
    let names = input.term_names();
    let x = input.design();
    let y = &input.response;
    let n = y.len();
    let p = x.len();

    let (r, qty) = householder_qr(x.clone(), y.clone());
    let largest = (0..p).map(|k| r[k][k].abs()).fold(0.0, f64::max);
    if let Some(k) = (0..p).find(|&k| r[k][k].is_nan() || r[k][k].abs() <= RANK_TOLERANCE * largest)
    {
        return Err(StatsError::Singular(names[k].clone()));
    }

    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| r[i][k] * beta[k]).sum();
        beta[i] = (qty[i] - s) / r[i][i];
    }

    let fitted: Vec<f64> = (0..n)
        .map(|row| (0..p).map(|k| x[k][row] * beta[k]).sum())
        .collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;

    let rinv = upper_inverse(&r);
    let se: Vec<f64> = (0..p)
        .map(|i| (sigma2 * rinv[i].iter().map(|v| v * v).sum::<f64>()).sqrt())
        .collect();

    let tss: f64 = if input.intercept {
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - mean) * (v - mean)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let base = if input.intercept { 1 } else { 0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - base) as f64 / df_resid as f64;

    let df_model = input.columns.len() as f64;
    let f = if r_squared >= 1.0 {
        f64::INFINITY
    } else {
        (r_squared / df_model) / ((1.0 - r_squared) / df_resid as f64)
    };
    let f_p = f_distribution_sf(f, df_model, df_resid as f64)?;

    let mut result = RegressionResult {
        coefficients: IndexMap::new(),
        std_errors: IndexMap::new(),
        t_values: IndexMap::new(),
        p_values: IndexMap::new(),
        f,
        f_p,
        r_squared,
        adj_r_squared,
        n_obs: n,
        df_resid,
        intercept: input.intercept,
        fitted,
        residuals,
    };
    for (k, name) in names.into_iter().enumerate() {
        let t = t_value(beta[k], se[k]);
        let p = t_two_sided_p(t, df_resid as f64)?;
        result.coefficients.insert(name.clone(), beta[k]);
        result.std_errors.insert(name.clone(), se[k]);
        result.t_values.insert(name.clone(), t);
        result.p_values.insert(name, p);
    }
    Ok(result)
}

/// Fit on any set of named feature columns (stability plus leadership,
/// expertise, impression or others); coefficients are keyed by column name.
pub fn multivariate_fit(input: &RegressionInput) -> Result<RegressionResult, StatsError> {
    ols_fit(input)
}

fn check_df(df: f64) -> Result<(), StatsError> {
    if df > 0.0 && df.is_finite() {
        Ok(())
    } else {
        Err(StatsError::InvalidDf(df))
    }
}

/// `P(T > t)` for Student's t with `df` degrees of freedom.
pub fn t_distribution_sf(t: f64, df: f64) -> Result<f64, StatsError> {
    check_df(df)?;
    if t.is_nan() {
        return Err(StatsError::InvalidStatistic(t));
    }
    let half_tail = 0.5 * beta_inc(0.5 * df, 0.5, df / (df + t * t));
    Ok(if t >= 0.0 { half_tail } else { 1.0 - half_tail })
}

/// Two-sided p-value `P(|T| > |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64, StatsError> {
    check_df(df)?;
    if t.is_nan() {
        return Err(StatsError::InvalidStatistic(t));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_inc(0.5 * df, 0.5, df / (df + t * t)))
}

/// `P(F > f)` for the F distribution with `(df1, df2)` degrees of freedom.
pub fn f_distribution_sf(f: f64, df1: f64, df2: f64) -> Result<f64, StatsError> {
    check_df(df1)?;
    check_df(df2)?;
    if f.is_nan() || f < 0.0 {
        return Err(StatsError::InvalidStatistic(f));
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_inc(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f)))
}

fn fmt3(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.get(name).copied()
    }

    /// Parameter estimates and goodness of fit laid out as
    ///
    /// ```text
    ///            Coefficients     T-value         Sig
    /// Constant         82.114     160.756       0.000
    /// S                 0.502       2.065       0.039
    /// F                 4.265         Sig       0.039
    /// R²                0.007      Adj-R²       0.006
    /// ```
    pub fn to_table(&self) -> String {
        let label_width = self
            .coefficients
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max(8);
        let pad = |s: &str| format!("{s}{}", " ".repeat(label_width - s.chars().count()));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {:>12} {:>11} {:>11}",
            pad(""),
            "Coefficients",
            "T-value",
            "Sig"
        );
        for (name, coef) in &self.coefficients {
            let _ = writeln!(
                out,
                "{} {:>12} {:>11} {:>11}",
                pad(name),
                fmt3(*coef),
                fmt3(self.t_values[name]),
                fmt3(self.p_values[name])
            );
        }
        let _ = writeln!(
            out,
            "{} {:>12} {:>11} {:>11}",
            pad("F"),
            fmt3(self.f),
            "Sig",
            fmt3(self.f_p)
        );
        let _ = writeln!(
            out,
            "{} {:>12} {:>11} {:>11}",
            pad("R²"),
            fmt3(self.r_squared),
            "Adj-R²",
            fmt3(self.adj_r_squared)
        );
        out
    }

    /// `term,coefficient,std_error,t_value,p_value` rows at full precision.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "coefficient", "std_error", "t_value", "p_value"])?;
        for (name, coef) in &self.coefficients {
            w.write_record([
                name.as_str(),
                &coef.to_string(),
                &self.std_errors[name].to_string(),
                &self.t_values[name].to_string(),
                &self.p_values[name].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(points: &[(f64, f64)]) -> RegressionResult {
        let (s, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        ols_fit(&RegressionInput::simple(y, s)).unwrap()
    }

    #[test]
    fn exact_line() {
        let r = fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((r.coefficient("Constant").unwrap() - 1.0).abs() < 1e-12);
        assert!((r.coefficient("S").unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.r_squared, 1.0);
        assert_eq!(r.f_p, 0.0);
    }

    #[test]
    fn constant_response() {
        let r = fit(&[(0.0, 5.0), (1.0, 5.0), (2.5, 5.0), (4.0, 5.0)]);
        assert!(r.coefficient("S").unwrap().abs() < 1e-12);
        assert_eq!(r.r_squared, 0.0);
        assert!(r.adj_r_squared <= r.r_squared);
    }

    #[test]
    fn five_point_dataset_matches_hand_solution() {
        // Hand-solved normal equations: sum x = 15, sum y = 20, sum x^2 = 55,
        // sum xy = 69, n = 5 -> slope = (5*69 - 15*20)/(5*55 - 225) = 0.9,
        // intercept = (20 - 0.9*15)/5 = 1.3.
        // RSS = 1.9, TSS = 10 -> R^2 = 0.81; sigma^2 = 1.9/3;
        // SE(slope) = sqrt(sigma^2 / 10), SE(intercept) = sqrt(sigma^2 * 55/50).
        let r = fit(&[(1.0, 2.0), (2.0, 3.0), (3.0, 5.0), (4.0, 4.0), (5.0, 6.0)]);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * b.abs().max(1.0);
        assert!(close(r.coefficient("S").unwrap(), 0.9));
        assert!(close(r.coefficient("Constant").unwrap(), 1.3));
        assert!(close(r.r_squared, 0.81));
        let sigma2: f64 = 1.9 / 3.0;
        assert!(close(r.std_errors["S"], (sigma2 / 10.0).sqrt()));
        assert!(close(
            r.std_errors["Constant"],
            (sigma2 * 55.0 / 50.0).sqrt()
        ));
        assert_eq!(r.df_resid, 3);
        assert!(close(r.f, 0.81 / (0.19 / 3.0)));
        assert!(close(r.t_values["S"].powi(2), r.f));
    }

    #[test]
    fn too_few_observations() {
        let input = RegressionInput::simple(vec![1.0, 2.0], vec![0.0, 1.0]);
        assert!(matches!(
            ols_fit(&input),
            Err(StatsError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn duplicate_columns_are_singular() {
        let s = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let input =
            RegressionInput::new(y, vec![Column::new("S", s.clone()), Column::new("S2", s)]);
        match ols_fit(&input) {
            Err(StatsError::Singular(col)) => assert_eq!(col, "S2"),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn constant_predictor_collides_with_intercept() {
        let input = RegressionInput::simple(vec![1.0, 3.0, 2.0, 5.0], vec![2.0; 4]);
        assert!(matches!(ols_fit(&input), Err(StatsError::Singular(c)) if c == "S"));
    }

    #[test]
    fn duplicate_names_rejected() {
        let input = RegressionInput::new(
            vec![1.0; 5],
            vec![
                Column::new("S", vec![1.0; 5]),
                Column::new("S", vec![2.0; 5]),
            ],
        );
        assert!(matches!(
            ols_fit(&input),
            Err(StatsError::DuplicateColumn(_))
        ));
        let input = RegressionInput::new(vec![1.0; 5], vec![Column::new("Constant", vec![1.0; 5])]);
        assert!(matches!(
            ols_fit(&input),
            Err(StatsError::DuplicateColumn(_))
        ));
    }

    #[test]
    fn non_finite_and_length_checks() {
        let input =
            RegressionInput::simple(vec![1.0, f64::NAN, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(ols_fit(&input), Err(StatsError::NonFinite(_))));
        let input = RegressionInput::simple(vec![1.0, 2.0, 2.0, 3.0], vec![0.0, 1.0]);
        assert!(matches!(
            ols_fit(&input),
            Err(StatsError::LengthMismatch { .. })
        ));
        let input = RegressionInput::new(vec![1.0; 4], vec![]);
        assert!(matches!(ols_fit(&input), Err(StatsError::NoPredictors)));
    }

    #[test]
    fn no_intercept_fit() {
        let input = RegressionInput::simple(vec![2.0, 4.1, 5.9, 8.0], vec![1.0, 2.0, 3.0, 4.0])
            .without_intercept();
        let r = ols_fit(&input).unwrap();
        assert_eq!(r.coefficients.len(), 1);
        assert_eq!(r.df_resid, 3);
        // slope = sum xy / sum x^2 = 59.9 / 30
        assert!((r.coefficient("S").unwrap() - 59.9 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_tails() {
        assert_eq!(t_two_sided_p(0.0, 7.0).unwrap(), 1.0);
        assert!((t_distribution_sf(0.0, 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(t_two_sided_p(f64::INFINITY, 5.0).unwrap(), 0.0);
        assert!(t_two_sided_p(1e6, 5.0).unwrap() < 1e-20);
        // Cauchy: P(T > 1) = 1/4 at df = 1
        assert!((t_distribution_sf(1.0, 1.0).unwrap() - 0.25).abs() < 1e-14);
        assert!((t_distribution_sf(-1.0, 1.0).unwrap() - 0.75).abs() < 1e-14);
        // F(2, d2) tail = (1 + 2f/d2)^(-d2/2)
        let f: f64 = 1.7;
        let d2: f64 = 9.0;
        let exact = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
        assert!((f_distribution_sf(f, 2.0, d2).unwrap() - exact).abs() < 1e-14);
        assert_eq!(f_distribution_sf(0.0, 2.0, 5.0).unwrap(), 1.0);
        assert!(matches!(
            t_distribution_sf(1.0, 0.0),
            Err(StatsError::InvalidDf(_))
        ));
        assert!(matches!(
            f_distribution_sf(-1.0, 1.0, 1.0),
            Err(StatsError::InvalidStatistic(_))
        ));
    }

    #[test]
    fn table_layout_matches_reference_shape() {
        let mut r = RegressionResult {
            coefficients: IndexMap::new(),
            std_errors: IndexMap::new(),
            t_values: IndexMap::new(),
            p_values: IndexMap::new(),
            f: 4.265,
            f_p: 0.039,
            r_squared: 0.007,
            adj_r_squared: 0.006,
            n_obs: 600,
            df_resid: 598,
            intercept: true,
            fitted: vec![],
            residuals: vec![],
        };
        for (name, coef, t, p) in [
            ("Constant", 82.114, 160.756, 0.0),
            ("S", 0.502, 2.065, 0.039),
        ] {
            r.coefficients.insert(name.into(), coef);
            r.std_errors.insert(name.into(), coef / t);
            r.t_values.insert(name.into(), t);
            r.p_values.insert(name.into(), p);
        }
        let table = r.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        let cells = |k: usize| lines[k].split_whitespace().collect::<Vec<_>>();
        assert_eq!(cells(0), ["Coefficients", "T-value", "Sig"]);
        assert_eq!(cells(1), ["Constant", "82.114", "160.756", "0.000"]);
        assert_eq!(cells(2), ["S", "0.502", "2.065", "0.039"]);
        assert_eq!(cells(3), ["F", "4.265", "Sig", "0.039"]);
        assert_eq!(cells(4), ["R²", "0.007", "Adj-R²", "0.006"]);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["coefficients"]["S"], 0.502);
        assert_eq!(json["F"], 4.265);
    }
}
