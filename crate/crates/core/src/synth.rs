//! Seeded synthetic cohorts and scores.
//!
//! Partitions are drawn by shuffle-and-chunk: the team sizes for `n` students
//! are fixed (fewest teams that fit the size range, sizes as even as possible,
//! larger teams first) and a uniform shuffle of the students fills them in
//! order. So every policy works with the same size profile:
//!
//! - `FullyStable`: one partition reused for every activity.
//! - `RandomEachActivity`: a fresh partition each activity.
//! - `Churn { rate }`: each student independently leaves their seat with
//!   probability `rate` at every activity transition; the leavers are shuffled
//!   uniformly over the vacated seats. `rate = 0` is fully stable and
//!   `rate = 1` reshuffles everyone, which is the same law as a fresh
//!   partition.
//!
//! All randomness comes from a ChaCha8 stream seeded by the policy seed (for
//! teams) or the score model seed (for scores).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Activity, Cohort, IndividualScoreRecord, IngestError, StudentId, TeamRecord};
use crate::network::{ActivityAdjacency, CooperationCounts, Memberships};
use crate::stability::{DampingConfig, StabilityMetrics};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot split {n} students into teams of {min} to {max}")]
    Infeasible { n: usize, min: usize, max: usize },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid score model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicyKind {
    FullyStable,
    RandomEachActivity,
    Churn { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamingPolicy {
    pub kind: PolicyKind,
    pub min_team_size: usize,
    pub max_team_size: usize,
    pub n_students: usize,
    pub m_activities: usize,
    pub seed: u64,
}

impl TeamingPolicy {
    /// Teams of 3 to 5, 30 students, 4 activities.
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Self {
            kind,
            min_team_size: 3,
            max_team_size: 5,
            n_students: 30,
            m_activities: 4,
            seed,
        }
    }

    pub fn with_size(mut self, n_students: usize, m_activities: usize) -> Self {
        self.n_students = n_students;
        self.m_activities = m_activities;
        self
    }

    pub fn with_team_size(mut self, min: usize, max: usize) -> Self {
        self.min_team_size = min;
        self.max_team_size = max;
        self
    }

    fn validate(&self) -> Result<(), SynthError> {
        if let PolicyKind::Churn { rate } = self.kind {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SynthError::InvalidPolicy(format!(
                    "churn rate {rate} outside [0, 1]"
                )));
            }
        }
        if self.min_team_size < 2 || self.min_team_size > self.max_team_size {
            return Err(SynthError::InvalidPolicy(format!(
                "team size range {}..={} must satisfy 2 <= min <= max",
                self.min_team_size, self.max_team_size
            )));
        }
        if self.m_activities == 0 {
            return Err(SynthError::InvalidPolicy(
                "at least one activity is required".into(),
            ));
        }
        Ok(())
    }
}

/// Team sizes for `n` students: fewest teams within `[min, max]`, spread as
/// evenly as possible with the larger teams first.
pub fn team_sizes(n: usize, min: usize, max: usize) -> Result<Vec<usize>, SynthError> {
    let infeasible = SynthError::Infeasible { n, min, max };
    if n == 0 || min == 0 || min > max {
        return Err(infeasible);
    }
    let k = n.div_ceil(max);
    if k * min > n {
        return Err(infeasible);
    }
    let base = n / k;
    let extra = n % k;
    Ok((0..k).map(|t| base + usize::from(t < extra)).collect())
}

/// Seat assignment: `seats[t]` holds the students of team t.
type Partition = Vec<Vec<usize>>;

fn shuffle_and_chunk(rng: &mut ChaCha8Rng, n: usize, sizes: &[usize]) -> Partition {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut it = order.into_iter();
    sizes
        .iter()
        .map(|&s| it.by_ref().take(s).collect())
        .collect()
}

fn churn_step(rng: &mut ChaCha8Rng, prev: &Partition, rate: f64) -> Partition {
    let mut next = prev.clone();
    let mut vacated = Vec::new();
    let mut movers = Vec::new();
    for (t, team) in next.iter().enumerate() {
        for (slot, &student) in team.iter().enumerate() {
            if rng.random_bool(rate) {
                vacated.push((t, slot));
                movers.push(student);
            }
        }
    }
    movers.shuffle(rng);
    for ((t, slot), student) in vacated.into_iter().zip(movers) {
        next[t][slot] = student;
    }
    next
}

fn student_ids(n: usize) -> Vec<StudentId> {
    let width = n.to_string().len();
    (1..=n)
        .map(|k| StudentId::new(format!("S{k:0width$}")).expect("non-empty"))
        .collect()
}

/// Generates a cohort with no score records.
pub fn generate_cohort(policy: &TeamingPolicy) -> Result<Cohort, SynthError> {
    policy.validate()?;
    let n = policy.n_students;
    let sizes = team_sizes(n, policy.min_team_size, policy.max_team_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let ids = student_ids(n);

    let mut partitions: Vec<Partition> = Vec::with_capacity(policy.m_activities);
    partitions.push(shuffle_and_chunk(&mut rng, n, &sizes));
    for _ in 1..policy.m_activities {
        let prev = partitions.last().expect("non-empty");
        let next = match policy.kind {
            PolicyKind::FullyStable => prev.clone(),
            PolicyKind::RandomEachActivity => shuffle_and_chunk(&mut rng, n, &sizes),
            PolicyKind::Churn { rate } => churn_step(&mut rng, prev, rate),
        };
        partitions.push(next);
    }

    let labels: Vec<String> = (1..=policy.m_activities)
        .map(|q| format!("Activity {q}"))
        .collect();
    let activities = Activity::sequence(&labels)?;
    let teams = partitions
        .iter()
        .enumerate()
        .flat_map(|(q, partition)| {
            let ids = &ids;
            partition
                .iter()
                .enumerate()
                .map(move |(t, seats)| TeamRecord {
                    team_id: format!("T{}-{:02}", q + 1, t + 1),
                    activity_ordinal: q as u32 + 1,
                    grade: "synthetic".to_string(),
                    class: "C1".to_string(),
                    members: seats
                        .iter()
                        .map(|&s| ids[s].clone())
                        .collect::<BTreeSet<_>>(),
                    team_score: None,
                    topic: None,
                    leader: None,
                })
        })
        .collect();
    Ok(Cohort::new(activities, teams, Vec::new())?)
}

/// Score generator shaped like `score = base + stability_coeff * S + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub base: f64,
    pub stability_coeff: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl ScoreModel {
    /// Intercept and slope of the reference fit (82.114 + 0.502 S).
    pub fn reference(noise_sd: f64, seed: u64) -> Self {
        Self {
            base: 82.114,
            stability_coeff: 0.502,
            noise_sd,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedScores {
    pub records: Vec<IndividualScoreRecord>,
    /// Draws that fell outside [0, 100] and were clamped.
    pub clamped: usize,
}

/// One score per student per team membership: `clamp(base + coeff * S(i) + N(0, sd))`.
///
/// `stability` holds S(i) in the cohort's sorted student order.
pub fn generate_scores(
    cohort: &Cohort,
    model: &ScoreModel,
    stability: &[f64],
) -> Result<GeneratedScores, SynthError> {
    if !(model.noise_sd >= 0.0 && model.noise_sd.is_finite()) {
        return Err(SynthError::InvalidModel(format!(
            "noise_sd {} must be finite and >= 0",
            model.noise_sd
        )));
    }
    if stability.len() != cohort.n() {
        return Err(SynthError::InvalidModel(format!(
            "{} stability values for {} students",
            stability.len(),
            cohort.n()
        )));
    }
    let noise =
        Normal::new(0.0, model.noise_sd).map_err(|e| SynthError::InvalidModel(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let position: std::collections::HashMap<&StudentId, usize> = cohort
        .students()
        .iter()
        .enumerate()
        .map(|(k, s)| (s, k))
        .collect();

    let mut records = Vec::new();
    let mut clamped = 0;
    for team in cohort.teams() {
        for student in &team.members {
            let raw = model.base
                + model.stability_coeff * stability[position[student]]
                + if model.noise_sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
            let score = raw.clamp(0.0, 100.0);
            if score != raw {
                clamped += 1;
            }
            records.push(IndividualScoreRecord {
                team_id: team.team_id.clone(),
                student: student.clone(),
                score,
            });
        }
    }
    Ok(GeneratedScores { records, clamped })
}

/// Noise level giving a target population R² for the regression of mean
/// score on S, when each student's mean averages `scores_per_student` draws:
/// `R² = b² Var(S) / (b² Var(S) + sd² / k)`.
pub fn noise_sd_for_r_squared(
    stability_coeff: f64,
    stability_variance: f64,
    scores_per_student: usize,
    target_r_squared: f64,
) -> f64 {
    let signal = stability_coeff * stability_coeff * stability_variance;
    (scores_per_student as f64 * signal * (1.0 - target_r_squared) / target_r_squared).sqrt()
}

/// Cohort, S values and scores from one policy and score model.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub cohort: Cohort,
    pub stability: Vec<f64>,
    pub clamped: usize,
}

pub fn simulate(
    policy: &TeamingPolicy,
    model: &ScoreModel,
    damping: &DampingConfig,
) -> Result<Simulation, SynthError> {
    let cohort = generate_cohort(policy)?;
    let ms = Memberships::from_cohort(&cohort);
    let metrics = StabilityMetrics::compute(
        &CooperationCounts::from_memberships(&ms),
        &ActivityAdjacency::from_memberships(&ms),
        damping,
    )
    .expect("one membership set");
    let scores = generate_scores(&cohort, model, &metrics.stability)?;
    Ok(Simulation {
        cohort: cohort.with_scores(scores.records)?,
        stability: metrics.stability,
        clamped: scores.clamped,
    })
}
