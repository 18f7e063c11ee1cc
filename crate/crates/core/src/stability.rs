//! Time-damped centrality and the team stability factor.
//!
//! A cooperation in activity `q` of `m` is weighted by `delta^(m - q)`, so the
//! most recent activity counts fully and older ones fade geometrically. With
//! the default `delta = 1/e` this is `exp(-(m - q))`.
//!
//! - damped pair weight `W_ij = sum_q r_ij^(q) * delta^(m - q)`
//! - damped centrality `C'(i) = sum_{j != i} W_ij`
//! - stability factor `S(i) = sum_{j != i} W_ij * R_ij`, where `R_ij` is the
//!   static relation strength over all `m` activities.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Cohort, StudentId};
use crate::network::{ActivityAdjacency, CooperationCounts, Memberships, NetworkError};

pub const FINAL_RESULTS_HEADER: [&str; 3] = ["StudentNo", "S", "MeanScore"];

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("damping factor must lie in (0, 1], got {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("unexpected header: expected `StudentNo,S,MeanScore`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingConfig {
    delta: f64,
}

impl Default for DampingConfig {
    fn default() -> Self {
        Self {
            delta: (-1.0f64).exp(),
        }
    }
}

impl DampingConfig {
    pub fn new(delta: f64) -> Result<Self, StabilityError> {
        if delta > 0.0 && delta <= 1.0 {
            Ok(Self { delta })
        } else {
            Err(StabilityError::InvalidDelta(delta))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `delta^(m - q)` for q = 1..=m, indexed by q - 1.
    pub fn activity_weights(&self, m: usize) -> Vec<f64> {
        let ln = self.delta.ln();
        (1..=m).map(|q| ((m - q) as f64 * ln).exp()).collect()
    }
}

fn pair_weight_at(adj: &ActivityAdjacency, weights: &[f64], a: usize, b: usize) -> f64 {
    adj.pair_layers(a, b)
        .filter(|&(_, r)| r)
        .map(|(q, _)| weights[q])
        .sum()
}

/// Damped pair weight `W_ij`.
pub fn damped_pair_weight(
    adjacency: &ActivityAdjacency,
    config: &DampingConfig,
    i: &StudentId,
    j: &StudentId,
) -> Result<f64, StabilityError> {
    let a = adjacency.index().position(i)?;
    let b = adjacency.index().position(j)?;
    if a == b {
        return Err(NetworkError::SelfPair(i.clone()).into());
    }
    let w = config.activity_weights(adjacency.m());
    Ok(pair_weight_at(adjacency, &w, a, b))
}

/// Damped centrality `C'(i)`.
pub fn damped_centrality(
    adjacency: &ActivityAdjacency,
    config: &DampingConfig,
    i: &StudentId,
) -> Result<f64, StabilityError> {
    let a = adjacency.index().position(i)?;
    let w = config.activity_weights(adjacency.m());
    Ok((0..adjacency.index().len())
        .filter(|&b| b != a)
        .map(|b| pair_weight_at(adjacency, &w, a, b))
        .sum())
}

/// Team stability factor `S(i)`.
pub fn stability_factor(
    counts: &CooperationCounts,
    adjacency: &ActivityAdjacency,
    config: &DampingConfig,
    i: &StudentId,
) -> Result<f64, StabilityError> {
    adjacency.same_students(counts)?;
    let a = adjacency.index().position(i)?;
    let w = config.activity_weights(adjacency.m());
    Ok(stability_at(counts, adjacency, &w, a))
}

fn stability_at(
    counts: &CooperationCounts,
    adj: &ActivityAdjacency,
    weights: &[f64],
    a: usize,
) -> f64 {
    (0..adj.index().len())
        .filter(|&b| b != a && counts.pair_at(a, b) > 0)
        .map(|b| pair_weight_at(adj, weights, a, b) * counts.strength_at(a, b))
        .sum()
}

/// Per-student damped centrality and stability factor, in student order.
#[derive(Debug, Clone)]
pub struct StabilityMetrics {
    pub students: Vec<StudentId>,
    pub damped_centrality: Vec<f64>,
    pub stability: Vec<f64>,
}

impl StabilityMetrics {
    pub fn compute(
        counts: &CooperationCounts,
        adjacency: &ActivityAdjacency,
        config: &DampingConfig,
    ) -> Result<Self, StabilityError> {
        adjacency.same_students(counts)?;
        let w = config.activity_weights(adjacency.m());
        let n = adjacency.index().len();
        let mut damped = vec![0.0; n];
        let mut stability = vec![0.0; n];
        for a in 0..n {
            for b in a + 1..n {
                if counts.pair_at(a, b) == 0 {
                    continue;
                }
                let wij = pair_weight_at(adjacency, &w, a, b);
                let s = wij * counts.strength_at(a, b);
                damped[a] += wij;
                damped[b] += wij;
                stability[a] += s;
                stability[b] += s;
            }
        }
        Ok(Self {
            students: adjacency.students().to_vec(),
            damped_centrality: damped,
            stability,
        })
    }

    pub fn from_cohort(cohort: &Cohort, config: &DampingConfig) -> Self {
        let ms = Memberships::from_cohort(cohort);
        let counts = CooperationCounts::from_memberships(&ms);
        let adj = ActivityAdjacency::from_memberships(&ms);
        Self::compute(&counts, &adj, config).expect("built from one membership set")
    }
}

/// One row of the per-student results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub student: StudentId,
    #[serde(rename = "S")]
    pub s: f64,
    pub mean_score: Option<f64>,
}

/// Stability factor and mean individual score for every student, sorted by
/// student number.
pub fn final_results(cohort: &Cohort, config: &DampingConfig) -> Vec<StabilityRow> {
    let metrics = StabilityMetrics::from_cohort(cohort, config);
    let means = cohort.mean_scores();
    metrics
        .students
        .into_iter()
        .zip(metrics.stability)
        .map(|(student, s)| {
            let mean_score = means.get(&student).copied();
            StabilityRow {
                student,
                s,
                mean_score,
            }
        })
        .collect()
}

/// Number rendering for text output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Fixed number of decimals.
    Fixed(usize),
    /// Shortest representation that round-trips.
    Full,
}

impl Default for Precision {
    fn default() -> Self {
        Precision::Fixed(2)
    }
}

impl Precision {
    pub fn render(&self, x: f64) -> String {
        match *self {
            Precision::Fixed(d) => format!("{x:.d$}"),
            Precision::Full => x.to_string(),
        }
    }
}

/// Writes `StudentNo,S,MeanScore`; a missing mean score is an empty field.
pub fn write_final_results<W: Write>(
    out: W,
    rows: &[StabilityRow],
    precision: Precision,
    delimiter: u8,
) -> Result<(), StabilityError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(FINAL_RESULTS_HEADER)?;
    for r in rows {
        let mean = r
            .mean_score
            .map(|m| precision.render(m))
            .unwrap_or_default();
        w.write_record([r.student.as_str(), &precision.render(r.s), &mean])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_final_results<R: Read>(
    input: R,
    delimiter: u8,
) -> Result<Vec<StabilityRow>, StabilityError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != FINAL_RESULTS_HEADER {
        return Err(StabilityError::BadHeader(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| StabilityError::BadRow { line, message };
        let student = StudentId::new(&rec[0]).map_err(|e| bad(e.to_string()))?;
        let s: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("S is not a number: `{}`", &rec[1])))?;
        let mean_score = match &rec[2] {
            "" => None,
            raw => Some(
                raw.parse()
                    .map_err(|_| bad(format!("MeanScore is not a number: `{raw}`")))?,
            ),
        };
        rows.push(StabilityRow {
            student,
            s,
            mean_score,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairAudit {
    pub partner: StudentId,
    pub c_ij: u32,
    pub r_ij: f64,
    pub w_ij: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudentAudit {
    pub student: StudentId,
    #[serde(rename = "S")]
    pub s: f64,
    pub mean_score: Option<f64>,
    pub participation: u32,
    pub total_relation_strength: f64,
    pub degree_centrality: usize,
    pub damped_centrality: f64,
    /// Partners with `c_ij > 0`; every other pair contributes nothing.
    pub pairs: Vec<PairAudit>,
}

/// Full-precision breakdown of every metric behind `S(i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub m: usize,
    pub n: usize,
    pub students: Vec<StudentAudit>,
}

pub fn audit_report(cohort: &Cohort, config: &DampingConfig) -> StabilityReport {
    let ms = Memberships::from_cohort(cohort);
    let counts = CooperationCounts::from_memberships(&ms);
    let adj = ActivityAdjacency::from_memberships(&ms);
    let metrics = StabilityMetrics::compute(&counts, &adj, config).expect("same membership set");
    let weights = config.activity_weights(adj.m());
    let means = cohort.mean_scores();
    let ids = counts.students();
    let students = (0..ids.len())
        .map(|a| {
            let pairs = (0..ids.len())
                .filter(|&b| b != a && counts.pair_at(a, b) > 0)
                .map(|b| PairAudit {
                    partner: ids[b].clone(),
                    c_ij: counts.pair_at(a, b),
                    r_ij: counts.strength_at(a, b),
                    w_ij: pair_weight_at(&adj, &weights, a, b),
                })
                .collect();
            StudentAudit {
                student: ids[a].clone(),
                s: metrics.stability[a],
                mean_score: means.get(&ids[a]).copied(),
                participation: counts.participation_at(a),
                total_relation_strength: counts.total_strength_at(a),
                degree_centrality: adj.degree_at(a),
                damped_centrality: metrics.damped_centrality[a],
                pairs,
            }
        })
        .collect();
    StabilityReport {
        delta: config.delta(),
        m: adj.m(),
        n: ids.len(),
        students,
    }
}
