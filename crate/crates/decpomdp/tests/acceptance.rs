//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Published benchmark values carry a 1e-5 tolerance; cross-implementation
//! oracle checks use 1e-9.

use decpomdp::cbg::CollabBayesGame;
use decpomdp::cbg_solver::create_solver;
use decpomdp::heuristics::{compute, HeuristicConfig, HeuristicKind, QHeuristic, QRepr};
use decpomdp::joint::JointIndexer;
use decpomdp::model::{random_model, DecPomdpModel, JointBelief};
use decpomdp::parser::builtin;
use decpomdp::policy::{past_policy_value, PastJointPolicy};
use decpomdp::search::{
    brute_force_search, gmaa_search, SearchConfig, SearchOutcome, SearchVariant,
};
use std::sync::Arc;
use std::time::{Duration, Instant};

const VALUE_TOL: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-9;

fn solve(
    model: &DecPomdpModel,
    kind: HeuristicKind,
    variant: SearchVariant,
    trace: bool,
) -> SearchOutcome {
    let q = compute(model, kind, QRepr::Tree, &HeuristicConfig::default())
        .expect("heuristic computes within caps");
    let config = SearchConfig {
        variant,
        collect_trace: trace,
        time_limit: Duration::from_secs(600),
        node_cap: 20_000_000,
        ..Default::default()
    };
    gmaa_search(model, &q, &config).expect("search completes within caps")
}

/// Criterion 1: DEC-TIGER optimal values for h = 2, 3, 4 with Q_BG,
/// each solved within 60 s.
#[test]
fn criterion_01_dectiger_values() {
    for (h, want) in [(2usize, -4.0), (3, 5.190812), (4, 4.802755)] {
        let started = Instant::now();
        let m = builtin::dectiger(h);
        let out = solve(&m, HeuristicKind::QBg, SearchVariant::Ice, false);
        let elapsed = started.elapsed();
        assert!(
            (out.value - want).abs() < VALUE_TOL,
            "criterion 1 FAIL: dectiger h={h} gave {}, want {want}",
            out.value
        );
        assert!(elapsed < Duration::from_secs(60), "criterion 1 FAIL: h={h} took {elapsed:?}");
    }
    println!("criterion 1 PASS: dectiger h=2..4 values match within 1e-5");
}

/// Stretch goal: DEC-TIGER h=5 with tree Q_BG within 10 minutes.
/// Run with `cargo test --release -- --ignored`.
#[test]
#[ignore = "stretch goal; run explicitly"]
fn criterion_01_stretch_dectiger_h5() {
    let started = Instant::now();
    let m = builtin::dectiger(5);
    let out = solve(&m, HeuristicKind::QBg, SearchVariant::Ice, false);
    assert!((out.value - 7.026451).abs() < VALUE_TOL, "got {}", out.value);
    assert!(started.elapsed() < Duration::from_secs(600));
    println!("criterion 1 (stretch) PASS: dectiger h=5 = {:.6}", out.value);
}

/// Criterion 2: BROADCASTCHANNEL optimal values h = 2..5 and h = 10 within
/// 60 s total, and every clustered CBG has exactly one type per agent.
#[test]
fn criterion_02_broadcastchannel_values_and_clustering() {
    let started = Instant::now();
    for (h, want) in [(2usize, 2.0), (3, 2.99), (4, 3.89), (5, 4.79), (10, 9.29)] {
        let m = builtin::broadcastchannel(h);
        let out = solve(&m, HeuristicKind::QBg, SearchVariant::Ic, false);
        assert!(
            (out.value - want).abs() < VALUE_TOL,
            "criterion 2 FAIL: broadcastchannel h={h} gave {}, want {want}",
            out.value
        );
        for (t, s) in out.stats.cbg_sizes_per_stage.iter().enumerate() {
            if s.mean_clustered > 0.0 {
                assert!(
                    (s.mean_clustered - 1.0).abs() < 1e-12,
                    "criterion 2 FAIL: h={h} stage {t} mean clustered size {}",
                    s.mean_clustered
                );
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "criterion 2 FAIL: took {elapsed:?}");
    println!(
        "criterion 2 PASS: broadcastchannel h=2..5,10 values match; every stage clusters to 1 type per agent ({elapsed:?} total)"
    );
}

/// Criterion 3: RECYCLING ROBOTS optimal values h = 2..6 within 120 s total.
#[test]
fn criterion_03_recycling_values() {
    let started = Instant::now();
    for (h, want) in [
        (2usize, 7.0),
        (3, 10.660125),
        (4, 13.38),
        (5, 16.486),
        (6, 19.5542),
    ] {
        let m = builtin::recycling(h);
        let out = solve(&m, HeuristicKind::QBg, SearchVariant::Ice, false);
        assert!(
            (out.value - want).abs() < VALUE_TOL,
            "criterion 3 FAIL: recycling h={h} gave {}, want {want}",
            out.value
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "criterion 3 FAIL: took {elapsed:?}");
    println!("criterion 3 PASS: recycling h=2..6 values match within 1e-5 ({elapsed:?} total)");
}

/// Criterion 4: clustered CBG sizes under IC on DEC-TIGER: stage means
/// exactly (1, 4, 9) at h=3; (1, 4, 9, x) with 9 <= x <= 64 at h=4.
#[test]
fn criterion_04_dectiger_clustered_sizes() {
    let m3 = builtin::dectiger(3);
    let out3 = solve(&m3, HeuristicKind::QBg, SearchVariant::Ic, false);
    let sizes3: Vec<f64> =
        out3.stats.cbg_sizes_per_stage.iter().map(|s| s.mean_clustered).collect();
    for (t, want) in [1.0, 4.0, 9.0].iter().enumerate() {
        assert!(
            (sizes3[t] - want).abs() < 1e-12,
            "criterion 4 FAIL: h=3 stage {t} mean {} want {want}",
            sizes3[t]
        );
    }

    let m4 = builtin::dectiger(4);
    let out4 = solve(&m4, HeuristicKind::QBg, SearchVariant::Ic, false);
    let sizes4: Vec<f64> =
        out4.stats.cbg_sizes_per_stage.iter().map(|s| s.mean_clustered).collect();
    for (t, want) in [1.0, 4.0, 9.0].iter().enumerate() {
        assert!(
            (sizes4[t] - want).abs() < 1e-12,
            "criterion 4 FAIL: h=4 stage {t} mean {} want {want}",
            sizes4[t]
        );
    }
    let x = sizes4[3];
    assert!(
        (9.0..=64.0).contains(&x),
        "criterion 4 FAIL: h=4 stage 3 mean {x} outside [9, 64]"
    );
    println!(
        "criterion 4 PASS: dectiger IC stage means h=3 = (1, 4, 9); h=4 = (1, 4, 9, {x:.2}) [paper reports 23.14]"
    );
}

/// Criterion 5: the CBG built for DEC-TIGER under the listen-listen past
/// policy reproduces the published joint-type probabilities and induced
/// beliefs (16 entries each) within 5e-4.
#[test]
fn criterion_05_listen_listen_cbg_tables() {
    let m = builtin::dectiger(3);
    let q = compute(&m, HeuristicKind::QMdp, QRepr::Tree, &HeuristicConfig::default()).unwrap();
    // listen-listen for two stages; listen is action 0
    let mut phi = PastJointPolicy::empty();
    for t in 0..2 {
        phi.push(
            (0..2)
                .map(|agent| decpomdp::policy::DecisionRule {
                    agent,
                    stage: t,
                    actions: vec![0; 2usize.pow(t as u32)],
                })
                .collect(),
        );
    }
    let game = CollabBayesGame::from_scratch(&m, &phi, &q);
    assert_eq!(game.type_counts(), vec![4, 4]);

    // published tables, types ordered (HL,HL), (HL,HR), (HR,HL), (HR,HR)
    let probs = [
        [0.261, 0.047, 0.047, 0.016],
        [0.047, 0.016, 0.016, 0.047],
        [0.047, 0.016, 0.016, 0.047],
        [0.016, 0.047, 0.047, 0.261],
    ];
    let beliefs = [
        [0.999, 0.970, 0.970, 0.5],
        [0.970, 0.5, 0.5, 0.030],
        [0.970, 0.5, 0.5, 0.030],
        [0.5, 0.030, 0.030, 0.001],
    ];
    let tix = game.type_ix();
    for t1 in 0..4 {
        for t2 in 0..4 {
            let theta = tix.encode(&[t1, t2]);
            assert!(
                (game.probs[theta] - probs[t1][t2]).abs() < 5e-4,
                "criterion 5 FAIL: Pr(({t1},{t2})) = {} want {}",
                game.probs[theta],
                probs[t1][t2]
            );
            assert!(
                (game.beliefs[theta][0] - beliefs[t1][t2]).abs() < 5e-4,
                "criterion 5 FAIL: belief(({t1},{t2})) = {} want {}",
                game.beliefs[theta][0],
                beliefs[t1][t2]
            );
        }
    }
    println!("criterion 5 PASS: all 16 joint-type probabilities and 16 beliefs within 5e-4");
}

fn oracle_model(seed: u64) -> DecPomdpModel {
    let states = 2 + (seed as usize / 2) % 2; // |S| in {2, 3}
    let h = 2 + (seed as usize) % 2; // h in {2, 3}
    random_model(seed, 2, states, 2, 2, h)
}

/// Criterion 6: on 100 seeded random models, brute force, GMAA*, GMAA*-IC
/// and GMAA*-ICE agree on the optimal value within 1e-9.
#[test]
fn criterion_06_oracle_equivalence() {
    let started = Instant::now();
    for seed in 0..100 {
        let m = oracle_model(seed);
        let (_, bf) = brute_force_search(&m, 1 << 40).unwrap();
        for variant in [SearchVariant::Full, SearchVariant::Ic, SearchVariant::Ice] {
            let out = solve(&m, HeuristicKind::QMdp, variant, false);
            assert!(
                (out.value - bf).abs() < ORACLE_TOL,
                "criterion 6 FAIL: seed {seed} {variant:?} gave {} vs brute force {bf}",
                out.value
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(600), "criterion 6 FAIL: took {elapsed:?}");
    println!("criterion 6 PASS: 100/100 random models agree across bf/gmaa/ic/ice ({elapsed:?})");
}

/// Criterion 7: the selected non-placeholder node traces of IC and ICE are
/// identical on DEC-TIGER h=3 and on 50 random instances.
#[test]
fn criterion_07_search_equivalence_traces() {
    let m = builtin::dectiger(3);
    let ic = solve(&m, HeuristicKind::QBg, SearchVariant::Ic, true);
    let ice = solve(&m, HeuristicKind::QBg, SearchVariant::Ice, true);
    assert_eq!(ic.stats.trace, ice.stats.trace, "criterion 7 FAIL: dectiger traces differ");

    for seed in 0..50 {
        let m = oracle_model(seed);
        let ic = solve(&m, HeuristicKind::QMdp, SearchVariant::Ic, true);
        let ice = solve(&m, HeuristicKind::QMdp, SearchVariant::Ice, true);
        assert_eq!(
            ic.stats.trace, ice.stats.trace,
            "criterion 7 FAIL: seed {seed} traces differ"
        );
    }
    println!("criterion 7 PASS: IC and ICE select identical node sequences (dectiger + 50 random)");
}

fn reachable_paths(model: &DecPomdpModel, depth: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<(JointBelief, Vec<(usize, usize)>)> =
        vec![(model.initial_belief.clone(), Vec::new())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (b, path) in frontier {
            for ja in 0..model.num_joint_actions() {
                for jo in 0..model.num_joint_obs() {
                    if let Some((post, _)) = model.belief_update(&b, ja, jo) {
                        let mut p = path.clone();
                        p.push((ja, jo));
                        out.push(p.clone());
                        next.push((post, p));
                    }
                }
            }
        }
        frontier = next;
    }
    out
}

fn root_max(model: &DecPomdpModel, q: &QHeuristic) -> f64 {
    (0..model.num_joint_actions())
        .map(|a| q.q_value(model, &[], a).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Criterion 8: Q_BG <= Q_POMDP <= Q_MDP at every reachable joint AOH of
/// DEC-TIGER up to h=4 (slack 1e-9), and all three upper-bound the optimal
/// value at the root (brute force for h=2, published optima for h=3 and 4).
#[test]
fn criterion_08_admissibility_chain() {
    let cfg = HeuristicConfig::default();
    for h in 2..=4usize {
        let m = builtin::dectiger(h);
        let qm = compute(&m, HeuristicKind::QMdp, QRepr::Tree, &cfg).unwrap();
        let qp = compute(&m, HeuristicKind::QPomdp, QRepr::Tree, &cfg).unwrap();
        let qb = compute(&m, HeuristicKind::QBg, QRepr::Tree, &cfg).unwrap();
        for path in reachable_paths(&m, h - 1) {
            for a in 0..m.num_joint_actions() {
                let vm = qm.q_value(&m, &path, a).unwrap();
                let vp = qp.q_value(&m, &path, a).unwrap();
                let vb = qb.q_value(&m, &path, a).unwrap();
                assert!(
                    vb <= vp + ORACLE_TOL,
                    "criterion 8 FAIL: h={h} QBG {vb} > QPOMDP {vp} at {path:?}, a={a}"
                );
                assert!(
                    vp <= vm + ORACLE_TOL,
                    "criterion 8 FAIL: h={h} QPOMDP {vp} > QMDP {vm} at {path:?}, a={a}"
                );
            }
        }
        let v_star = match h {
            2 => brute_force_search(&m, 1 << 40).unwrap().1,
            3 => 5.190812,
            _ => 4.802755,
        };
        for (name, q) in [("qmdp", &qm), ("qpomdp", &qp), ("qbg", &qb)] {
            let top = root_max(&m, q);
            assert!(
                top >= v_star - VALUE_TOL,
                "criterion 8 FAIL: h={h} {name} root {top} underestimates V* {v_star}"
            );
        }
    }
    println!("criterion 8 PASS: QBG <= QPOMDP <= QMDP on dectiger h=2..4; roots dominate V*");
}

/// Criterion 9: hybrid Q_POMDP queries equal pure-tree queries within 1e-9
/// on DEC-TIGER h=4 and BROADCASTCHANNEL h=6, and the hybrid stores no more
/// parameters than either pure representation.
#[test]
fn criterion_09_hybrid_representation() {
    let cfg = HeuristicConfig::default();
    for (name, m) in
        [("dectiger", builtin::dectiger(4)), ("broadcastchannel", builtin::broadcastchannel(6))]
    {
        let qt = compute(&m, HeuristicKind::QPomdp, QRepr::Tree, &cfg).unwrap();
        let qv = compute(&m, HeuristicKind::QPomdp, QRepr::Vector, &cfg).unwrap();
        let qh = compute(&m, HeuristicKind::QPomdp, QRepr::Hybrid, &cfg).unwrap();
        for path in reachable_paths(&m, m.horizon - 1) {
            for a in 0..m.num_joint_actions() {
                let t = qt.q_value(&m, &path, a).unwrap();
                let h = qh.q_value(&m, &path, a).unwrap();
                assert!(
                    (t - h).abs() < ORACLE_TOL,
                    "criterion 9 FAIL: {name} path {path:?} a={a}: tree {t} vs hybrid {h}"
                );
            }
        }
        let (pt, pv, ph) = (qt.stored_params(), qv.stored_params(), qh.stored_params());
        assert!(
            ph <= pt.min(pv),
            "criterion 9 FAIL: {name} hybrid stores {ph} params, tree {pt}, vector {pv}"
        );
        println!(
            "criterion 9 data: {name} stored params tree={pt} vector={pv} hybrid={ph} (switch at stage {})",
            qh.vector_from
        );
    }
    println!("criterion 9 PASS: hybrid matches tree queries and is the smallest representation");
}

/// Criterion 10: on DEC-TIGER h=4, ICE materializes strictly fewer
/// intermediate-stage children than IC generates.
#[test]
fn criterion_10_incremental_expansion_economy() {
    let m = builtin::dectiger(4);
    let ic = solve(&m, HeuristicKind::QBg, SearchVariant::Ic, false);
    let ice = solve(&m, HeuristicKind::QBg, SearchVariant::Ice, false);
    let ic_children: usize =
        ic.stats.children_materialized_per_stage[..m.horizon - 1].iter().sum();
    let ice_children: usize =
        ice.stats.children_materialized_per_stage[..m.horizon - 1].iter().sum();
    assert!(
        ice_children < ic_children,
        "criterion 10 FAIL: ICE materialized {ice_children}, IC generated {ic_children}"
    );
    println!(
        "criterion 10 PASS: dectiger h=4 intermediate children: ICE {ice_children} < IC {ic_children}"
    );
}

/// Criterion 11: on 200 seeded random CBGs the k-best solver's concatenated
/// output equals the brute-force enumeration sorted by (value desc,
/// canonical order).
#[test]
fn criterion_11_kbest_solver_oracle() {
    for seed in 0..200u64 {
        let type_counts = [1 + (seed as usize % 3), 1 + ((seed as usize / 3) % 3)];
        let actions = 2 + (seed as usize % 2);
        let game = CollabBayesGame::random(seed, &type_counts, actions * actions);
        let sizes = vec![actions, actions];

        // brute-force enumeration, sorted by the documented tie-break
        let action_ix = JointIndexer::new(&sizes);
        let type_ix = game.type_ix();
        let mut expected: Vec<(Vec<Vec<usize>>, f64)> = Vec::new();
        let fake_model_actions = sizes.clone();
        enumerate_assignments(&game, &fake_model_actions, &mut |assignments| {
            let mut v = 0.0;
            for theta in 0..game.probs.len() {
                let p = game.probs[theta];
                if p <= 0.0 {
                    continue;
                }
                let parts: Vec<usize> =
                    (0..2).map(|i| assignments[i][type_ix.component(theta, i)]).collect();
                v += p * game.payoffs[theta * game.num_joint_actions + action_ix.encode(&parts)];
            }
            expected.push((assignments.to_vec(), v));
        });
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut solver = create_solver(Arc::new(game), &sizes);
        let mut got = Vec::new();
        while let Some((beta, v)) = solver.next_solution(f64::NEG_INFINITY, f64::INFINITY) {
            got.push((beta.assignments, v));
        }
        assert_eq!(got.len(), expected.len(), "criterion 11 FAIL: seed {seed} count");
        for (g, e) in got.iter().zip(&expected) {
            assert!(
                (g.1 - e.1).abs() < ORACLE_TOL && g.0 == e.0,
                "criterion 11 FAIL: seed {seed}: got {:?}={}, want {:?}={}",
                g.0,
                g.1,
                e.0,
                e.1
            );
        }
    }
    println!("criterion 11 PASS: 200/200 random CBGs drain in brute-force order");
}

fn enumerate_assignments(
    game: &CollabBayesGame,
    action_counts: &[usize],
    f: &mut impl FnMut(&[Vec<usize>]),
) {
    let mut digits: Vec<Vec<usize>> = game.types.iter().map(|t| vec![0; t.len()]).collect();
    loop {
        f(&digits);
        let mut agent = digits.len();
        'outer: loop {
            if agent == 0 {
                return;
            }
            agent -= 1;
            let mut ty = digits[agent].len();
            while ty > 0 {
                ty -= 1;
                digits[agent][ty] += 1;
                if digits[agent][ty] < action_counts[agent] {
                    break 'outer;
                }
                digits[agent][ty] = 0;
            }
        }
    }
}
