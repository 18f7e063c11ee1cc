//! Roster and score ingestion.
//!
//! Input mirrors two relational tables: a team list (one row per team and
//! activity, `ID,Grade,Class,Course,Score,LeaderNo,Topic`) and an individual
//! score table (`TeamID,StudentNo,Score`). The team list carries no member
//! column, so membership is reconstructed from the score rows that point at
//! each team, plus the team leader.
//!
//! [`build_cohort`] joins the two into a [`Cohort`], which is immutable and
//! always satisfies its invariants. The canonical interchange form of a
//! cohort is JSON (see [`Cohort::to_json`]); deserialization re-runs every
//! check.

mod parse;
mod write;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_scores, parse_team_list, ParseOptions, TeamList};
pub use write::{write_course_order, write_scores, write_team_list};

/// Exact header of the team list table.
pub const TEAM_LIST_HEADER: [&str; 7] = [
    "ID", "Grade", "Class", "Course", "Score", "LeaderNo", "Topic",
];
/// Exact header of the individual score table.
pub const SCORES_HEADER: [&str; 3] = ["TeamID", "StudentNo", "Score"];

/// Team sizes inside this range raise no diagnostic.
pub const USUAL_TEAM_SIZE: std::ops::RangeInclusive<usize> = 3..=5;
/// Smallest team the cohort accepts.
pub const MIN_TEAM_SIZE: usize = 2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input has no header row")]
    MissingHeader,
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: column {column} is not a number: `{value}`")]
    InvalidNumber {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: column {column} value {value} is outside [0, 100]")]
    ScoreOutOfRange {
        line: u64,
        column: &'static str,
        value: f64,
    },
    #[error("line {line}: column {column} must not be empty")]
    EmptyField { line: u64, column: &'static str },
    #[error("line {line}: course `{course}` is not in the configured course order")]
    UnknownCourse { line: u64, course: String },
    #[error("student id must not be empty")]
    EmptyStudentId,
    #[error("course order is empty")]
    NoActivities,
    #[error("course `{0}` appears twice in the course order")]
    DuplicateCourse(String),
    #[error("activity ordinals must be exactly 1..={m}, found {found:?}")]
    ActivityOrdinals { m: usize, found: Vec<u32> },
    #[error("team `{0}` is listed more than once")]
    DuplicateTeam(String),
    #[error("team `{team_id}` refers to activity {ordinal}, but only {m} activities exist")]
    TeamActivityOutOfRange {
        team_id: String,
        ordinal: u32,
        m: usize,
    },
    #[error("team `{team_id}` has {size} member(s); at least {MIN_TEAM_SIZE} are required")]
    TeamTooSmall { team_id: String, size: usize },
    #[error("team `{team_id}`: leader {leader} is not a member")]
    LeaderNotMember { team_id: String, leader: StudentId },
    #[error("student {student} belongs to more than one team in activity {ordinal} ({label})")]
    DoubleMembership {
        student: StudentId,
        ordinal: u32,
        label: String,
    },
    #[error("score for student {student} refers to unknown team `{team_id}`")]
    DanglingTeam { team_id: String, student: StudentId },
    #[error("score for student {student} refers to team `{team_id}`, which does not list them")]
    NotAMember { team_id: String, student: StudentId },
    #[error("duplicate score for student {student} in team `{team_id}`")]
    DuplicateScore { team_id: String, student: StudentId },
    #[error("score {0} is outside [0, 100]")]
    InvalidScore(f64),
    #[error("student set does not match the union of team members")]
    StudentsMismatch,
    #[error("a cohort needs at least 2 students, found {0}")]
    TooFewStudents(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input text or configuration.
    Parse,
    /// Well-formed input that violates a cohort invariant.
    Consistency,
}

impl IngestError {
    pub fn class(&self) -> ErrorClass {
        use IngestError::*;
        match self {
            MissingHeader
            | BadHeader { .. }
            | ColumnCount { .. }
            | InvalidNumber { .. }
            | ScoreOutOfRange { .. }
            | EmptyField { .. }
            | UnknownCourse { .. }
            | EmptyStudentId
            | NoActivities
            | DuplicateCourse(_)
            | InvalidScore(_)
            | Csv(_)
            | Json(_) => ErrorClass::Parse,
            _ => ErrorClass::Consistency,
        }
    }
}

/// Student number, kept verbatim (leading zeros are significant).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StudentId(String);

impl StudentId {
    pub fn new(value: impl Into<String>) -> Result<Self, IngestError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(IngestError::EmptyStudentId);
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StudentId {
    type Error = IngestError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<StudentId> for String {
    fn from(id: StudentId) -> Self {
        id.0
    }
}

impl fmt::Display for StudentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One cooperative activity; `ordinal` is its 1-based position in the sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub ordinal: u32,
    pub label: String,
}

impl Activity {
    /// Activities numbered 1..=m in the order given.
    pub fn sequence<S: AsRef<str>>(courses: &[S]) -> Result<Vec<Activity>, IngestError> {
        if courses.is_empty() {
            return Err(IngestError::NoActivities);
        }
        let mut seen = HashSet::new();
        courses
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let label = c.as_ref().trim().to_string();
                if !seen.insert(label.clone()) {
                    return Err(IngestError::DuplicateCourse(label));
                }
                Ok(Activity {
                    ordinal: k as u32 + 1,
                    label,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRecord {
    pub team_id: String,
    pub activity_ordinal: u32,
    #[serde(default)]
    pub grade: String,
    #[serde(default)]
    pub class: String,
    pub members: BTreeSet<StudentId>,
    #[serde(default)]
    pub team_score: Option<f64>,
    #[serde(default)]
    pub topic: Option<String>,
    #[serde(default)]
    pub leader: Option<StudentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualScoreRecord {
    pub team_id: String,
    pub student: StudentId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
}

/// A soft finding that does not stop ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: Option<u64>,
    pub team_id: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn warning(line: Option<u64>, team_id: Option<&str>, message: String) -> Self {
        Self {
            severity: Severity::Warning,
            line,
            team_id: team_id.map(str::to_string),
            message,
        }
    }

    fn info(line: Option<u64>, team_id: Option<&str>, message: String) -> Self {
        Self {
            severity: Severity::Info,
            ..Self::warning(line, team_id, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Info => f.write_str("info")?,
            Severity::Warning => f.write_str("warning")?,
        }
        if let Some(line) = self.line {
            write!(f, ": line {line}")?;
        }
        if let Some(team) = &self.team_id {
            write!(f, ": team {team}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Validated students, activities, team memberships and individual scores.
///
/// Invariants:
/// - at least two students and one activity; activity ordinals are 1..=m;
/// - every team has at least two members, a known activity, and its leader
///   (if any) among its members;
/// - a student belongs to at most one team per activity;
/// - every score names an existing team and one of its members, at most once;
/// - the student set is exactly the union of team members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CohortParts")]
pub struct Cohort {
    students: BTreeSet<StudentId>,
    activities: Vec<Activity>,
    teams: Vec<TeamRecord>,
    scores: Vec<IndividualScoreRecord>,
}

#[derive(Deserialize)]
struct CohortParts {
    students: BTreeSet<StudentId>,
    activities: Vec<Activity>,
    teams: Vec<TeamRecord>,
    #[serde(default)]
    scores: Vec<IndividualScoreRecord>,
}

impl TryFrom<CohortParts> for Cohort {
    type Error = IngestError;
    fn try_from(p: CohortParts) -> Result<Self, Self::Error> {
        let cohort = Cohort::new(p.activities, p.teams, p.scores)?;
        if cohort.students != p.students {
            return Err(IngestError::StudentsMismatch);
        }
        Ok(cohort)
    }
}

impl Cohort {
    /// Validates the parts and derives the student set from team members.
    pub fn new(
        activities: Vec<Activity>,
        teams: Vec<TeamRecord>,
        scores: Vec<IndividualScoreRecord>,
    ) -> Result<Self, IngestError> {
        check_activities(&activities)?;
        let m = activities.len();

        let mut by_id: HashMap<&str, &TeamRecord> = HashMap::with_capacity(teams.len());
        let mut seat: HashSet<(u32, &StudentId)> = HashSet::new();
        for team in &teams {
            if by_id.insert(team.team_id.as_str(), team).is_some() {
                return Err(IngestError::DuplicateTeam(team.team_id.clone()));
            }
            if team.activity_ordinal == 0 || team.activity_ordinal as usize > m {
                return Err(IngestError::TeamActivityOutOfRange {
                    team_id: team.team_id.clone(),
                    ordinal: team.activity_ordinal,
                    m,
                });
            }
            if team.members.len() < MIN_TEAM_SIZE {
                return Err(IngestError::TeamTooSmall {
                    team_id: team.team_id.clone(),
                    size: team.members.len(),
                });
            }
            if let Some(leader) = &team.leader {
                if !team.members.contains(leader) {
                    return Err(IngestError::LeaderNotMember {
                        team_id: team.team_id.clone(),
                        leader: leader.clone(),
                    });
                }
            }
            if let Some(s) = team.team_score {
                check_score(s)?;
            }
            for student in &team.members {
                if !seat.insert((team.activity_ordinal, student)) {
                    let a = &activities[team.activity_ordinal as usize - 1];
                    return Err(IngestError::DoubleMembership {
                        student: student.clone(),
                        ordinal: a.ordinal,
                        label: a.label.clone(),
                    });
                }
            }
        }

        let mut scored: HashSet<(&str, &StudentId)> = HashSet::with_capacity(scores.len());
        for rec in &scores {
            check_score(rec.score)?;
            let team =
                by_id
                    .get(rec.team_id.as_str())
                    .ok_or_else(|| IngestError::DanglingTeam {
                        team_id: rec.team_id.clone(),
                        student: rec.student.clone(),
                    })?;
            if !team.members.contains(&rec.student) {
                return Err(IngestError::NotAMember {
                    team_id: rec.team_id.clone(),
                    student: rec.student.clone(),
                });
            }
            if !scored.insert((rec.team_id.as_str(), &rec.student)) {
                return Err(IngestError::DuplicateScore {
                    team_id: rec.team_id.clone(),
                    student: rec.student.clone(),
                });
            }
        }

        let students: BTreeSet<StudentId> = teams
            .iter()
            .flat_map(|t| t.members.iter().cloned())
            .collect();
        if students.len() < 2 {
            return Err(IngestError::TooFewStudents(students.len()));
        }
        Ok(Self {
            students,
            activities,
            teams,
            scores,
        })
    }

    pub fn students(&self) -> &BTreeSet<StudentId> {
        &self.students
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn teams(&self) -> &[TeamRecord] {
        &self.teams
    }

    pub fn scores(&self) -> &[IndividualScoreRecord] {
        &self.scores
    }

    /// Number of students.
    pub fn n(&self) -> usize {
        self.students.len()
    }

    /// Number of activities.
    pub fn m(&self) -> usize {
        self.activities.len()
    }

    pub fn team(&self, team_id: &str) -> Option<&TeamRecord> {
        self.teams.iter().find(|t| t.team_id == team_id)
    }

    /// Teams of one activity, in input order.
    pub fn teams_in(&self, ordinal: u32) -> impl Iterator<Item = &TeamRecord> {
        self.teams
            .iter()
            .filter(move |t| t.activity_ordinal == ordinal)
    }

    /// Replaces the score table, re-validating against the teams.
    pub fn with_scores(self, scores: Vec<IndividualScoreRecord>) -> Result<Self, IngestError> {
        Self::new(self.activities, self.teams, scores)
    }

    /// Mean individual score per student; students without scores are absent.
    pub fn mean_scores(&self) -> BTreeMap<&StudentId, f64> {
        let mut acc: BTreeMap<&StudentId, (f64, usize)> = BTreeMap::new();
        for rec in &self.scores {
            let e = acc.entry(&rec.student).or_insert((0.0, 0));
            e.0 += rec.score;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(s, (sum, k))| (s, sum / k as f64))
            .collect()
    }

    /// Team-size diagnostics for sizes outside the usual range.
    pub fn size_diagnostics(&self) -> Vec<Diagnostic> {
        self.teams
            .iter()
            .filter(|t| !USUAL_TEAM_SIZE.contains(&t.members.len()))
            .map(|t| {
                Diagnostic::warning(
                    None,
                    Some(&t.team_id),
                    format!(
                        "{} members, outside the usual {}..={}",
                        t.members.len(),
                        USUAL_TEAM_SIZE.start(),
                        USUAL_TEAM_SIZE.end()
                    ),
                )
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String, IngestError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_activities(activities: &[Activity]) -> Result<(), IngestError> {
    if activities.is_empty() {
        return Err(IngestError::NoActivities);
    }
    let ok = activities
        .iter()
        .enumerate()
        .all(|(k, a)| a.ordinal as usize == k + 1);
    if !ok {
        return Err(IngestError::ActivityOrdinals {
            m: activities.len(),
            found: activities.iter().map(|a| a.ordinal).collect(),
        });
    }
    Ok(())
}

fn check_score(score: f64) -> Result<(), IngestError> {
    if (0.0..=100.0).contains(&score) {
        Ok(())
    } else {
        Err(IngestError::InvalidScore(score))
    }
}

/// A cohort together with the soft findings collected while assembling it.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub cohort: Cohort,
    pub diagnostics: Vec<Diagnostic>,
}

/// Joins team and score records into a cohort.
///
/// Each team's members are the students its score rows name, plus its leader.
/// Teams without any score row have no member evidence and are left out with
/// a warning; all other invariant violations are errors.
pub fn build_cohort(
    teams: Vec<TeamRecord>,
    scores: Vec<IndividualScoreRecord>,
    activities: Vec<Activity>,
) -> Result<Ingested, IngestError> {
    check_activities(&activities)?;
    let mut diagnostics = Vec::new();

    let mut index: HashMap<String, usize> = HashMap::with_capacity(teams.len());
    for (k, t) in teams.iter().enumerate() {
        if index.insert(t.team_id.clone(), k).is_some() {
            return Err(IngestError::DuplicateTeam(t.team_id.clone()));
        }
    }

    let mut teams = teams;
    let mut has_scores = vec![false; teams.len()];
    for rec in &scores {
        let k = *index
            .get(&rec.team_id)
            .ok_or_else(|| IngestError::DanglingTeam {
                team_id: rec.team_id.clone(),
                student: rec.student.clone(),
            })?;
        has_scores[k] = true;
        teams[k].members.insert(rec.student.clone());
    }

    let mut kept = Vec::with_capacity(teams.len());
    for (team, scored) in teams.into_iter().zip(has_scores) {
        if !scored && team.members.len() < MIN_TEAM_SIZE {
            diagnostics.push(Diagnostic::warning(
                None,
                Some(&team.team_id),
                "no individual score rows; team left out of the cohort".to_string(),
            ));
            continue;
        }
        let mut team = team;
        if let Some(leader) = team.leader.clone() {
            if team.members.insert(leader.clone()) {
                diagnostics.push(Diagnostic::info(
                    None,
                    Some(&team.team_id),
                    format!("leader {leader} has no score row; added as member"),
                ));
            }
        }
        kept.push(team);
    }

    let cohort = Cohort::new(activities, kept, scores)?;
    diagnostics.extend(cohort.size_diagnostics());
    Ok(Ingested {
        cohort,
        diagnostics,
    })
}
