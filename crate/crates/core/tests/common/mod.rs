//! Test-only helpers: a brute-force metric enumerator that works directly on
//! team lists, and a random cohort generator that exercises absences and
//! uneven team sizes.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use teamstab_core::ingest::{Activity, Cohort, StudentId, TeamRecord};

/// Team lists per activity, by student name.
#[derive(Debug, Clone)]
pub struct Roster {
    pub students: Vec<String>,
    /// `activities[q - 1]` = teams of activity q.
    pub activities: Vec<Vec<Vec<String>>>,
}

impl Roster {
    pub fn m(&self) -> usize {
        self.activities.len()
    }

    fn together(&self, q: usize, i: &str, j: &str) -> bool {
        self.activities[q]
            .iter()
            .any(|team| team.iter().any(|s| s == i) && team.iter().any(|s| s == j))
    }

    fn present(&self, q: usize, i: &str) -> bool {
        self.activities[q]
            .iter()
            .any(|team| team.iter().any(|s| s == i))
    }

    pub fn to_cohort(&self) -> Cohort {
        let labels: Vec<String> = (1..=self.m()).map(|q| format!("A{q}")).collect();
        let activities = Activity::sequence(&labels).unwrap();
        let mut teams = Vec::new();
        for (q, act) in self.activities.iter().enumerate() {
            for (t, team) in act.iter().enumerate() {
                teams.push(TeamRecord {
                    team_id: format!("{}-{}", q + 1, t + 1),
                    activity_ordinal: q as u32 + 1,
                    grade: String::new(),
                    class: String::new(),
                    members: team
                        .iter()
                        .map(|s| StudentId::new(s.clone()).unwrap())
                        .collect(),
                    team_score: None,
                    topic: None,
                    leader: None,
                });
            }
        }
        Cohort::new(activities, teams, vec![]).unwrap()
    }
}

/// Every metric, recomputed by enumerating all (pair, activity) combinations.
#[derive(Debug, Clone)]
pub struct OracleMetrics {
    pub pair_count: BTreeMap<(String, String), u32>,
    pub participation: BTreeMap<String, u32>,
    pub strength: BTreeMap<(String, String), f64>,
    pub pair_weight: BTreeMap<(String, String), f64>,
    pub total_strength: BTreeMap<String, f64>,
    pub degree: BTreeMap<String, usize>,
    pub damped: BTreeMap<String, f64>,
    pub stability: BTreeMap<String, f64>,
}

pub fn oracle(roster: &Roster, delta: f64) -> OracleMetrics {
    let m = roster.m();
    let mut out = OracleMetrics {
        pair_count: BTreeMap::new(),
        participation: BTreeMap::new(),
        strength: BTreeMap::new(),
        pair_weight: BTreeMap::new(),
        total_strength: BTreeMap::new(),
        degree: BTreeMap::new(),
        damped: BTreeMap::new(),
        stability: BTreeMap::new(),
    };
    for i in &roster.students {
        let c = (0..m).filter(|&q| roster.present(q, i)).count() as u32;
        out.participation.insert(i.clone(), c);
    }
    for i in &roster.students {
        for j in &roster.students {
            if i == j {
                continue;
            }
            let mut c = 0u32;
            let mut w = 0.0;
            for q in 0..m {
                if roster.together(q, i, j) {
                    c += 1;
                    let mut decay = 1.0;
                    for _ in 0..(m - 1 - q) {
                        decay *= delta;
                    }
                    w += decay;
                }
            }
            let ci = out.participation[i] as f64;
            let cj = out.participation[j] as f64;
            let r = if ci * cj > 0.0 {
                c as f64 / (ci * cj).sqrt()
            } else {
                0.0
            };
            let key = (i.clone(), j.clone());
            out.pair_count.insert(key.clone(), c);
            out.strength.insert(key.clone(), r);
            out.pair_weight.insert(key, w);
        }
    }
    for i in &roster.students {
        let others = roster.students.iter().filter(|j| *j != i);
        let key = |j: &String| (i.clone(), j.clone());
        out.total_strength.insert(
            i.clone(),
            others.clone().map(|j| out.strength[&key(j)]).sum(),
        );
        out.degree.insert(
            i.clone(),
            others
                .clone()
                .filter(|j| out.pair_count[&key(j)] > 0)
                .count(),
        );
        out.damped.insert(
            i.clone(),
            others.clone().map(|j| out.pair_weight[&key(j)]).sum(),
        );
        out.stability.insert(
            i.clone(),
            others
                .map(|j| out.pair_weight[&key(j)] * out.strength[&key(j)])
                .sum(),
        );
    }
    out
}

/// Random cohort with n in 2..=max_n, m in 1..=max_m. Each activity draws a
/// random participating subset, chunked into teams of 2 to 5; a leftover
/// single student sits the activity out.
pub fn random_roster<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Roster {
    loop {
        let n = rng.random_range(2..=max_n);
        let m = rng.random_range(1..=max_m);
        let names: Vec<String> = (0..n)
            .map(|k| format!("{:03}", rng.random_range(0..1000) * 100 + k))
            .collect();
        let mut activities = Vec::with_capacity(m);
        for _ in 0..m {
            let mut pool = names.clone();
            pool.shuffle(rng);
            let take = rng.random_range(0..=n);
            pool.truncate(take);
            let mut teams = Vec::new();
            let mut rest = &pool[..];
            while rest.len() >= 2 {
                let size = rng.random_range(2..=5usize).min(rest.len());
                if size < 2 {
                    break;
                }
                teams.push(rest[..size].to_vec());
                rest = &rest[size..];
            }
            activities.push(teams);
        }
        let used: BTreeSet<String> = activities.iter().flatten().flatten().cloned().collect();
        if used.len() < 2 {
            continue;
        }
        return Roster {
            students: used.into_iter().collect(),
            activities,
        };
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn sid(s: &str) -> StudentId {
    StudentId::new(s).unwrap()
}

/// Six students A..F over two activities:
/// q=1 {A,B,C},{D,E,F}; q=2 {A,B,D},{C,E,F}.
pub fn f6_roster() -> Roster {
    let t = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    Roster {
        students: t(&["A", "B", "C", "D", "E", "F"]),
        activities: vec![
            vec![t(&["A", "B", "C"]), t(&["D", "E", "F"])],
            vec![t(&["A", "B", "D"]), t(&["C", "E", "F"])],
        ],
    }
}
