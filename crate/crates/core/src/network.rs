//! Co-membership network over the activity sequence.
//!
//! Two views are built from the same memberships:
//!
//! - [`CooperationCounts`]: how often each pair shared a team (`c_ij`) and in
//!   how many activities each student took part (`c_i`). Relation strength is
//!   the Salton cosine `c_ij / sqrt(c_i * c_j)`.
//! - [`ActivityAdjacency`]: one 0/1 co-membership layer per activity, used by
//!   degree centrality (collapsed over time) and by the damped measures in
//!   [`crate::stability`].
//!
//! Pairs are unordered and stored once, in a packed upper triangle.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::ingest::{Cohort, StudentId};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown student {0}")]
    UnknownStudent(StudentId),
    #[error("relation of student {0} with itself is undefined")]
    SelfPair(StudentId),
    #[error("activity ordinal {ordinal} outside 1..={m}")]
    ActivityOutOfRange { ordinal: u32, m: usize },
    #[error("student {student} appears twice in activity {ordinal}")]
    DoubleMembership { student: StudentId, ordinal: u32 },
    #[error("at least one activity is required")]
    NoActivities,
    #[error("counts and adjacency were built over different student sets")]
    MismatchedStudents,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Sorted student ids and their dense positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentIndex {
    ids: Vec<StudentId>,
    pos: HashMap<StudentId, usize>,
}

impl StudentIndex {
    fn new(ids: impl IntoIterator<Item = StudentId>) -> Self {
        let mut ids: Vec<StudentId> = ids.into_iter().collect();
        ids.sort();
        ids.dedup();
        let pos = ids
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, s)| (s, k))
            .collect();
        Self { ids, pos }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[StudentId] {
        &self.ids
    }

    pub fn position(&self, id: &StudentId) -> Result<usize, NetworkError> {
        self.pos
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::UnknownStudent(id.clone()))
    }

    fn pair(&self, i: &StudentId, j: &StudentId) -> Result<(usize, usize), NetworkError> {
        let a = self.position(i)?;
        let b = self.position(j)?;
        if a == b {
            return Err(NetworkError::SelfPair(i.clone()));
        }
        Ok((a, b))
    }
}

/// Slot of the unordered pair {a, b} (a != b) in a packed upper triangle.
#[inline]
pub(crate) fn pair_slot(n: usize, a: usize, b: usize) -> usize {
    let (i, j) = if a < b { (a, b) } else { (b, a) };
    debug_assert!(i != j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

#[inline]
pub(crate) fn triangle_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Team memberships per activity, by dense student position.
///
/// A [`Cohort`] always yields valid memberships; [`Memberships::new`] also
/// accepts rosters with absent students or single-person teams.
#[derive(Debug, Clone)]
pub struct Memberships {
    index: Arc<StudentIndex>,
    /// `teams[q - 1]` lists the teams of activity q.
    teams: Vec<Vec<Vec<usize>>>,
}

impl Memberships {
    pub fn from_cohort(cohort: &Cohort) -> Self {
        let index = Arc::new(StudentIndex::new(cohort.students().iter().cloned()));
        let mut teams = vec![Vec::new(); cohort.m()];
        for t in cohort.teams() {
            let members = t.members.iter().map(|s| index.pos[s]).collect::<Vec<_>>();
            teams[t.activity_ordinal as usize - 1].push(members);
        }
        Self { index, teams }
    }

    /// Builds memberships from a roster, `m` activities, and (ordinal, members)
    /// teams. Students may be absent from any activity.
    pub fn new<I, T>(
        roster: impl IntoIterator<Item = StudentId>,
        m: usize,
        teams: I,
    ) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (u32, T)>,
        T: IntoIterator<Item = StudentId>,
    {
        if m == 0 {
            return Err(NetworkError::NoActivities);
        }
        let index = Arc::new(StudentIndex::new(roster));
        let mut seen = vec![vec![false; index.len()]; m];
        let mut layers = vec![Vec::new(); m];
        for (ordinal, members) in teams {
            if ordinal == 0 || ordinal as usize > m {
                return Err(NetworkError::ActivityOutOfRange { ordinal, m });
            }
            let q = ordinal as usize - 1;
            let mut team = Vec::new();
            for s in members {
                let k = index.position(&s)?;
                if std::mem::replace(&mut seen[q][k], true) {
                    return Err(NetworkError::DoubleMembership {
                        student: s,
                        ordinal,
                    });
                }
                team.push(k);
            }
            layers[q].push(team);
        }
        Ok(Self {
            index,
            teams: layers,
        })
    }

    pub fn students(&self) -> &[StudentId] {
        self.index.ids()
    }

    pub fn m(&self) -> usize {
        self.teams.len()
    }

    pub fn n(&self) -> usize {
        self.index.len()
    }

    /// Every unordered member pair of every team in activity `q` (0-based).
    fn co_member_pairs(&self, q: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.teams[q].iter().flat_map(|team| {
            team.iter()
                .enumerate()
                .flat_map(move |(x, &a)| team[x + 1..].iter().map(move |&b| (a, b)))
        })
    }
}

/// Pairwise cooperation frequencies and per-student participation counts.
#[derive(Debug, Clone)]
pub struct CooperationCounts {
    index: Arc<StudentIndex>,
    m: usize,
    pair: Vec<u32>,
    participation: Vec<u32>,
}

impl CooperationCounts {
    pub fn from_memberships(ms: &Memberships) -> Self {
        let n = ms.n();
        let mut pair = vec![0u32; triangle_len(n)];
        let mut participation = vec![0u32; n];
        for q in 0..ms.m() {
            for team in &ms.teams[q] {
                for &k in team {
                    participation[k] += 1;
                }
            }
            for (a, b) in ms.co_member_pairs(q) {
                pair[pair_slot(n, a, b)] += 1;
            }
        }
        Self {
            index: Arc::clone(&ms.index),
            m: ms.m(),
            pair,
            participation,
        }
    }

    pub fn students(&self) -> &[StudentId] {
        self.index.ids()
    }

    pub fn index(&self) -> &StudentIndex {
        &self.index
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `c_ij`: activities in which i and j shared a team.
    pub fn pair_count(&self, i: &StudentId, j: &StudentId) -> Result<u32, NetworkError> {
        let (a, b) = self.index.pair(i, j)?;
        Ok(self.pair_at(a, b))
    }

    /// `c_i`: activities in which i was on any team.
    pub fn participation(&self, i: &StudentId) -> Result<u32, NetworkError> {
        Ok(self.participation[self.index.position(i)?])
    }

    pub(crate) fn pair_at(&self, a: usize, b: usize) -> u32 {
        self.pair[pair_slot(self.index.len(), a, b)]
    }

    pub(crate) fn participation_at(&self, a: usize) -> u32 {
        self.participation[a]
    }

    /// Salton cosine for dense positions; 0 when either participation is 0.
    pub(crate) fn strength_at(&self, a: usize, b: usize) -> f64 {
        let denom = self.participation[a] as f64 * self.participation[b] as f64;
        if denom == 0.0 {
            return 0.0;
        }
        self.pair_at(a, b) as f64 / denom.sqrt()
    }

    pub(crate) fn total_strength_at(&self, a: usize) -> f64 {
        (0..self.index.len())
            .filter(|&b| b != a)
            .map(|b| self.strength_at(a, b))
            .sum()
    }
}

/// Per-activity co-membership indicators `r_ij^(q)`.
#[derive(Debug, Clone)]
pub struct ActivityAdjacency {
    index: Arc<StudentIndex>,
    /// `layers[q - 1][pair_slot]`
    layers: Vec<Vec<bool>>,
}

impl ActivityAdjacency {
    pub fn from_memberships(ms: &Memberships) -> Self {
        let n = ms.n();
        let layers = (0..ms.m())
            .map(|q| {
                let mut layer = vec![false; triangle_len(n)];
                for (a, b) in ms.co_member_pairs(q) {
                    layer[pair_slot(n, a, b)] = true;
                }
                layer
            })
            .collect();
        Self {
            index: Arc::clone(&ms.index),
            layers,
        }
    }

    pub fn students(&self) -> &[StudentId] {
        self.index.ids()
    }

    pub fn index(&self) -> &StudentIndex {
        &self.index
    }

    pub fn m(&self) -> usize {
        self.layers.len()
    }

    /// `r_ij^(q)` for a 1-based activity ordinal.
    pub fn co_member(
        &self,
        ordinal: u32,
        i: &StudentId,
        j: &StudentId,
    ) -> Result<bool, NetworkError> {
        let (a, b) = self.index.pair(i, j)?;
        let m = self.m();
        if ordinal == 0 || ordinal as usize > m {
            return Err(NetworkError::ActivityOutOfRange { ordinal, m });
        }
        Ok(self.layers[ordinal as usize - 1][pair_slot(self.index.len(), a, b)])
    }

    /// Layers as (0-based activity position, indicator) for one pair.
    pub(crate) fn pair_layers(
        &self,
        a: usize,
        b: usize,
    ) -> impl Iterator<Item = (usize, bool)> + '_ {
        let slot = pair_slot(self.index.len(), a, b);
        self.layers
            .iter()
            .enumerate()
            .map(move |(q, l)| (q, l[slot]))
    }

    pub(crate) fn degree_at(&self, a: usize) -> usize {
        (0..self.index.len())
            .filter(|&b| b != a)
            .filter(|&b| self.pair_layers(a, b).any(|(_, r)| r))
            .count()
    }

    pub(crate) fn same_students(&self, counts: &CooperationCounts) -> Result<(), NetworkError> {
        if Arc::ptr_eq(&self.index, &counts.index) || *self.index == *counts.index {
            Ok(())
        } else {
            Err(NetworkError::MismatchedStudents)
        }
    }
}

pub fn cooperation_counts(cohort: &Cohort) -> CooperationCounts {
    CooperationCounts::from_memberships(&Memberships::from_cohort(cohort))
}

pub fn activity_adjacency(cohort: &Cohort) -> ActivityAdjacency {
    ActivityAdjacency::from_memberships(&Memberships::from_cohort(cohort))
}

/// Relation strength `R_ij = c_ij / sqrt(c_i * c_j)`, in [0, 1].
pub fn relation_strength(
    counts: &CooperationCounts,
    i: &StudentId,
    j: &StudentId,
) -> Result<f64, NetworkError> {
    let (a, b) = counts.index.pair(i, j)?;
    Ok(counts.strength_at(a, b))
}

/// Total relation strength `R(i)`: sum of `R_ij` over every other student.
pub fn total_relation_strength(
    counts: &CooperationCounts,
    i: &StudentId,
) -> Result<f64, NetworkError> {
    Ok(counts.total_strength_at(counts.index.position(i)?))
}

/// Degree centrality `C(i)`: distinct students ever on a team with i.
pub fn degree_centrality(
    adjacency: &ActivityAdjacency,
    i: &StudentId,
) -> Result<usize, NetworkError> {
    Ok(adjacency.degree_at(adjacency.index.position(i)?))
}

/// `R(i)` for every student, in index order.
pub fn total_relation_strengths(counts: &CooperationCounts) -> Vec<f64> {
    (0..counts.index.len())
        .map(|a| counts.total_strength_at(a))
        .collect()
}

/// `C(i)` for every student, in index order.
pub fn degree_centralities(adjacency: &ActivityAdjacency) -> Vec<usize> {
    (0..adjacency.index.len())
        .map(|a| adjacency.degree_at(a))
        .collect()
}

/// Writes `i,j,c_ij,R_ij` for every pair that shared a team at least once.
pub fn write_edge_list<W: Write>(
    out: W,
    counts: &CooperationCounts,
    delimiter: u8,
) -> Result<(), NetworkError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(["i", "j", "c_ij", "R_ij"])?;
    let ids = counts.students();
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            let c = counts.pair_at(a, b);
            if c == 0 {
                continue;
            }
            w.write_record([
                ids[a].as_str(),
                ids[b].as_str(),
                &c.to_string(),
                &counts.strength_at(a, b).to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
