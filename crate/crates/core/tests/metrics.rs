mod common;

use common::{f6_roster, oracle, random_roster, rel_close, sid, Roster};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teamstab_core::ingest::{Activity, Cohort, IndividualScoreRecord, TeamRecord};
use teamstab_core::network::{
    activity_adjacency, cooperation_counts, degree_centrality, relation_strength,
    total_relation_strength,
};
use teamstab_core::stability::{
    damped_centrality, damped_pair_weight, final_results, stability_factor, DampingConfig,
    StabilityMetrics,
};

const TOL: f64 = 1e-12;

fn e_inv() -> f64 {
    (-1.0f64).exp()
}

#[test]
fn f6_golden_values() {
    let cohort = f6_roster().to_cohort();
    let counts = cooperation_counts(&cohort);
    let adj = activity_adjacency(&cohort);
    let cfg = DampingConfig::default();
    let (a, b, c, d, e) = (sid("A"), sid("B"), sid("C"), sid("D"), sid("E"));

    assert_eq!(counts.pair_count(&a, &b).unwrap(), 2);
    assert_eq!(counts.pair_count(&a, &c).unwrap(), 1);
    assert_eq!(counts.pair_count(&a, &d).unwrap(), 1);
    assert_eq!(counts.pair_count(&a, &e).unwrap(), 0);
    assert_eq!(relation_strength(&counts, &a, &b).unwrap(), 1.0);
    assert_eq!(relation_strength(&counts, &a, &c).unwrap(), 0.5);
    assert_eq!(total_relation_strength(&counts, &a).unwrap(), 2.0);
    assert_eq!(degree_centrality(&adj, &a).unwrap(), 3);

    assert!(rel_close(
        damped_pair_weight(&adj, &cfg, &a, &b).unwrap(),
        1.0 + e_inv(),
        TOL
    ));
    assert!(rel_close(
        damped_pair_weight(&adj, &cfg, &a, &c).unwrap(),
        e_inv(),
        TOL
    ));
    assert!(rel_close(
        damped_pair_weight(&adj, &cfg, &a, &d).unwrap(),
        1.0,
        TOL
    ));
    let cp = damped_centrality(&adj, &cfg, &a).unwrap();
    assert!(rel_close(cp, 2.0 + 2.0 * e_inv(), TOL));
    assert!(rel_close(cp, 2.7357588823428847, TOL));
    let s = stability_factor(&counts, &adj, &cfg, &a).unwrap();
    assert!(rel_close(s, 1.5 + 1.5 * e_inv(), TOL));
    assert!(rel_close(s, 2.0518191617571633, TOL));
}

#[test]
fn f6_delta_one_collapses_to_counts() {
    let cohort = f6_roster().to_cohort();
    let adj = activity_adjacency(&cohort);
    let counts = cooperation_counts(&cohort);
    let one = DampingConfig::new(1.0).unwrap();
    let a = sid("A");
    // C'(A) = sum_j c_Aj = 2 + 1 + 1
    assert_eq!(damped_centrality(&adj, &one, &a).unwrap(), 4.0);
    // S(A) = sum_j c_Aj R_Aj = 2*1 + 1*0.5 + 1*0.5
    assert_eq!(stability_factor(&counts, &adj, &one, &a).unwrap(), 3.0);
}

#[test]
fn f6_final_results_with_scores() {
    let roster = f6_roster();
    let base = roster.to_cohort();
    let scores: Vec<IndividualScoreRecord> = base
        .teams()
        .iter()
        .flat_map(|t| {
            let v = if t.activity_ordinal == 1 { 80.0 } else { 90.0 };
            t.members.iter().map(move |s| IndividualScoreRecord {
                team_id: t.team_id.clone(),
                student: s.clone(),
                score: v,
            })
        })
        .collect();
    let cohort = base.with_scores(scores).unwrap();
    let rows = final_results(&cohort, &DampingConfig::default());
    assert_eq!(rows.len(), 6);
    assert_eq!(
        rows.iter().map(|r| r.student.as_str()).collect::<Vec<_>>(),
        ["A", "B", "C", "D", "E", "F"]
    );
    for r in &rows {
        assert_eq!(r.mean_score, Some(85.0));
    }
    assert!(rel_close(rows[0].s, 2.0518191617571633, TOL));
}

#[test]
fn absent_mean_score_when_unscored() {
    let cohort = f6_roster().to_cohort();
    let rows = final_results(&cohort, &DampingConfig::default());
    assert!(rows.iter().all(|r| r.mean_score.is_none()));
}

fn check_against_oracle(roster: &Roster, delta: f64) {
    let cohort = roster.to_cohort();
    let counts = cooperation_counts(&cohort);
    let adj = activity_adjacency(&cohort);
    let cfg = DampingConfig::new(delta).unwrap();
    let want = oracle(roster, delta);
    let metrics = StabilityMetrics::from_cohort(&cohort, &cfg);
    for (k, i) in roster.students.iter().enumerate() {
        let si = sid(i);
        assert_eq!(counts.participation(&si).unwrap(), want.participation[i]);
        assert!(rel_close(
            total_relation_strength(&counts, &si).unwrap(),
            want.total_strength[i],
            TOL
        ));
        assert_eq!(degree_centrality(&adj, &si).unwrap(), want.degree[i]);
        let cp = damped_centrality(&adj, &cfg, &si).unwrap();
        assert!(
            rel_close(cp, want.damped[i], TOL),
            "C'({i}) {cp} vs {}",
            want.damped[i]
        );
        let s = stability_factor(&counts, &adj, &cfg, &si).unwrap();
        assert!(
            rel_close(s, want.stability[i], TOL),
            "S({i}) {s} vs {}",
            want.stability[i]
        );
        assert_eq!(metrics.students[k], si);
        assert!(rel_close(metrics.stability[k], want.stability[i], TOL));
        assert!(rel_close(metrics.damped_centrality[k], want.damped[i], TOL));
        for j in &roster.students {
            if i == j {
                continue;
            }
            let key = (i.clone(), j.clone());
            let sj = sid(j);
            assert_eq!(counts.pair_count(&si, &sj).unwrap(), want.pair_count[&key]);
            assert!(rel_close(
                relation_strength(&counts, &si, &sj).unwrap(),
                want.strength[&key],
                TOL
            ));
            assert!(rel_close(
                damped_pair_weight(&adj, &cfg, &si, &sj).unwrap(),
                want.pair_weight[&key],
                TOL
            ));
        }
    }
}

#[test]
fn oracle_equivalence_random_cohorts() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for k in 0..300 {
        let roster = random_roster(&mut rng, 12, 4);
        let delta = if k % 3 == 0 {
            e_inv()
        } else if k % 3 == 1 {
            1.0
        } else {
            0.7
        };
        check_against_oracle(&roster, delta);
    }
}

#[test]
fn oracle_matches_f6() {
    check_against_oracle(&f6_roster(), e_inv());
}

#[test]
fn network_invariants_random_cohorts() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let roster = random_roster(&mut rng, 12, 4);
        let cohort = roster.to_cohort();
        let counts = cooperation_counts(&cohort);
        let adj = activity_adjacency(&cohort);
        let n = cohort.n();
        for i in cohort.students() {
            let ci = counts.participation(i).unwrap();
            assert!(ci as usize <= cohort.m());
            assert!(degree_centrality(&adj, i).unwrap() < n);
            for j in cohort.students() {
                if i == j {
                    continue;
                }
                let cij = counts.pair_count(i, j).unwrap();
                let cj = counts.participation(j).unwrap();
                assert!(cij <= ci.min(cj));
                let r = relation_strength(&counts, i, j).unwrap();
                assert_eq!(r, relation_strength(&counts, j, i).unwrap());
                assert!((0.0..=1.0).contains(&r));
                let full = cij == ci && cij == cj && cij > 0;
                assert_eq!(r == 1.0, full, "R=1 iff c_ij = c_i = c_j");
            }
        }
    }
}

#[test]
fn relabeling_preserves_metric_multisets() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let roster = random_roster(&mut rng, 10, 4);
        let rename = |s: &String| format!("z{}", s.chars().rev().collect::<String>());
        let relabeled = Roster {
            students: roster.students.iter().map(rename).collect(),
            activities: roster
                .activities
                .iter()
                .map(|a| a.iter().map(|t| t.iter().map(rename).collect()).collect())
                .collect(),
        };
        let sorted = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v
        };
        let cfg = DampingConfig::default();
        let a = StabilityMetrics::from_cohort(&roster.to_cohort(), &cfg);
        let b = StabilityMetrics::from_cohort(&relabeled.to_cohort(), &cfg);
        let (sa, sb) = (sorted(a.stability), sorted(b.stability));
        for (x, y) in sa.iter().zip(&sb) {
            assert!(rel_close(*x, *y, TOL));
        }
        let ra = sorted(teamstab_core::network::total_relation_strengths(
            &cooperation_counts(&roster.to_cohort()),
        ));
        let rb = sorted(teamstab_core::network::total_relation_strengths(
            &cooperation_counts(&relabeled.to_cohort()),
        ));
        for (x, y) in ra.iter().zip(&rb) {
            assert!(rel_close(*x, *y, TOL));
        }
    }
}

#[test]
fn stability_bounds_and_zero_iff_isolated() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let roster = random_roster(&mut rng, 12, 4);
        let cohort = roster.to_cohort();
        let cfg = DampingConfig::new(0.5).unwrap();
        let metrics = StabilityMetrics::from_cohort(&cohort, &cfg);
        let m = cohort.m() as i32;
        let w_max = (1.0 - 0.5f64.powi(m)) / 0.5;
        let counts = cooperation_counts(&cohort);
        for (k, s) in metrics.stability.iter().enumerate() {
            assert!(*s >= 0.0);
            assert!(*s <= (cohort.n() - 1) as f64 * w_max + 1e-12);
            let id = &metrics.students[k];
            let teamed = cohort
                .students()
                .iter()
                .any(|j| j != id && counts.pair_count(id, j).unwrap() > 0);
            assert_eq!(*s > 0.0, teamed);
        }
    }
}

/// Adds two fresh students X and Y whose only activity is a joint team at `at`.
fn with_single_cooperation(roster: &Roster, at: usize) -> Roster {
    let mut next = roster.clone();
    next.students.extend(["~X".to_string(), "~Y".to_string()]);
    next.activities[at - 1].push(vec!["~X".to_string(), "~Y".to_string()]);
    next
}

#[test]
fn recency_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut compared = 0;
    for k in 0..200 {
        let roster = random_roster(&mut rng, 12, 4);
        let m = roster.m();
        if m < 2 {
            continue;
        }
        let delta = [0.1, e_inv(), 0.9][k % 3];
        let cfg = DampingConfig::new(delta).unwrap();
        for a in 1..m {
            for b in a + 1..=m {
                let s_of = |at| {
                    let cohort = with_single_cooperation(&roster, at).to_cohort();
                    stability_factor(
                        &cooperation_counts(&cohort),
                        &activity_adjacency(&cohort),
                        &cfg,
                        &sid("~X"),
                    )
                    .unwrap()
                };
                assert!(s_of(b) > s_of(a), "delta {delta}, a {a}, b {b}");
                compared += 1;
            }
        }
    }
    assert!(compared > 100);
}

#[test]
fn appended_absence_scales_pair_weights_by_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let cfg = DampingConfig::default();
    let mut checked = 0;
    for _ in 0..100 {
        let roster = random_roster(&mut rng, 10, 3);
        let victim = roster.students[0].clone();
        let others: Vec<String> = roster.students[1..].to_vec();
        if others.len() < 2 {
            continue;
        }
        let mut next = roster.clone();
        next.activities.push(vec![others.clone()]);
        let before = activity_adjacency(&roster.to_cohort());
        let after = activity_adjacency(&next.to_cohort());
        for j in &others {
            let w0 = damped_pair_weight(&before, &cfg, &sid(&victim), &sid(j)).unwrap();
            let w1 = damped_pair_weight(&after, &cfg, &sid(&victim), &sid(j)).unwrap();
            assert!(rel_close(w1, cfg.delta() * w0, TOL));
        }
        checked += 1;
    }
    assert!(checked > 50);
}

/// With the new activity populated only by newcomers, every partner's
/// participation is unchanged, so each existing S(i) scales by exactly delta.
#[test]
fn appended_activity_of_newcomers_scales_stability_by_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for k in 0..100 {
        let roster = random_roster(&mut rng, 10, 3);
        let cfg = DampingConfig::new([0.2, e_inv(), 1.0][k % 3]).unwrap();
        let mut next = roster.clone();
        next.students.extend(["~P".to_string(), "~Q".to_string()]);
        next.activities
            .push(vec![vec!["~P".to_string(), "~Q".to_string()]]);
        let before = StabilityMetrics::from_cohort(&roster.to_cohort(), &cfg);
        let after = StabilityMetrics::from_cohort(&next.to_cohort(), &cfg);
        let argmax = |m: &StabilityMetrics, keep: usize| {
            (0..keep)
                .max_by(|&a, &b| m.stability[a].total_cmp(&m.stability[b]))
                .unwrap()
        };
        for (x, id) in before.students.iter().enumerate() {
            let y = after.students.iter().position(|s| s == id).unwrap();
            assert!(rel_close(
                after.stability[y],
                cfg.delta() * before.stability[x],
                TOL
            ));
        }
        // newcomers sort after the original ids ("~" > digits), so positions
        // 0..n are shared; ties may break differently after rounding
        let n = before.students.len();
        let best = after.stability[argmax(&after, n)];
        assert!(rel_close(after.stability[argmax(&before, n)], best, TOL));
    }
}

#[test]
fn final_results_sorted_and_complete() {
    let acts = Activity::sequence(&["x", "y"]).unwrap();
    let mk = |id: &str, q: u32, m: &[&str]| TeamRecord {
        team_id: id.into(),
        activity_ordinal: q,
        grade: String::new(),
        class: String::new(),
        members: m.iter().map(|s| sid(s)).collect(),
        team_score: None,
        topic: None,
        leader: None,
    };
    let cohort = Cohort::new(
        acts,
        vec![mk("1", 1, &["z9", "a1", "m5"]), mk("2", 2, &["z9", "a1"])],
        vec![
            IndividualScoreRecord {
                team_id: "1".into(),
                student: sid("a1"),
                score: 86.0,
            },
            IndividualScoreRecord {
                team_id: "2".into(),
                student: sid("a1"),
                score: 89.0,
            },
        ],
    )
    .unwrap();
    let rows = final_results(&cohort, &DampingConfig::default());
    assert_eq!(
        rows.iter().map(|r| r.student.as_str()).collect::<Vec<_>>(),
        ["a1", "m5", "z9"]
    );
    assert_eq!(rows[0].mean_score, Some(87.5));
    assert_eq!(rows[1].mean_score, None);
}
