//! The GMAA* planner family: best-first search over past joint policies with
//! three expand strategies — full enumeration, incremental clustering (IC),
//! and incremental clustering plus incremental expansion (ICE) — plus a
//! brute-force whole-policy baseline.

use crate::cbg::{CollabBayesGame, JointCbgPolicy, MergePayoff};
use crate::cbg_solver::{create_solver, IncrementalCbgSolver};
use crate::heuristics::QHeuristic;
use crate::model::DecPomdpModel;
use crate::policy::{
    past_policy_value, propagate_distribution, stage_reward, DecisionRule, JointDecisionRule,
    PastJointPolicy, PolicyEnumerator, StateHistoryDistribution,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchVariant {
    Full,
    Ic,
    Ice,
}

impl std::fmt::Display for SearchVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchVariant::Full => "gmaa",
            SearchVariant::Ic => "ic",
            SearchVariant::Ice => "ice",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub variant: SearchVariant,
    /// probabilistic-equivalence comparison tolerance; strict losslessness is
    /// only guaranteed at 0.0
    pub pe_tolerance: f64,
    pub merge_payoff: MergePayoff,
    /// cap on total search nodes created
    pub node_cap: usize,
    pub time_limit: Duration,
    /// prune open-list entries below the incumbent (saves memory, costs time)
    pub prune_open_list: bool,
    /// record the sequence of selected non-placeholder nodes
    pub collect_trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            variant: SearchVariant::Ice,
            pe_tolerance: 1e-9,
            merge_payoff: MergePayoff::LowestUpperBound,
            node_cap: 1_000_000,
            time_limit: Duration::from_secs(600),
            prune_open_list: true,
            collect_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CbgSizeStat {
    pub mean_raw: f64,
    pub mean_clustered: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub variant: String,
    pub heuristic: String,
    pub horizon: usize,
    pub v_star: f64,
    pub wallclock_s: f64,
    pub nodes_expanded_per_stage: Vec<usize>,
    pub cbg_sizes_per_stage: Vec<CbgSizeStat>,
    pub solver_nodes: usize,
    pub peak_open_list: usize,
    pub pruned_nodes: usize,
    /// child nodes materialized per parent depth
    pub children_materialized_per_stage: Vec<usize>,
    pub peak_live_solvers: usize,
    pub cluster_fixpoint_iterations: usize,
    /// canonical φ encodings of the selected non-placeholder nodes, when
    /// trace collection was requested
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Vec<u16>>>,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("node cap of {cap} exceeded")]
    NodeCapExceeded { cap: usize },
    #[error("time limit of {limit:?} exceeded")]
    TimeLimitExceeded { limit: Duration },
    #[error("joint policy count {count} exceeds the brute-force cap {cap}")]
    BruteForceCap { count: String, cap: u64 },
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub policy: PastJointPolicy,
    pub value: f64,
    pub stats: SearchStats,
}

struct Node {
    parent: Option<usize>,
    depth: usize,
    /// the joint decision rule this node appends to its parent, in dense
    /// observation-history form (None for the root)
    rule: Option<JointDecisionRule>,
    /// canonical φ encoding: parent's encoding followed by the flattened β
    /// action indices in cluster-representative order
    enc: Vec<u16>,
    vhat: f64,
    /// exact V^{0..depth-1}(φ)
    past_value: f64,
    placeholder: bool,
    /// this node's stage CBG, kept while children may still need it
    cbg: Option<Arc<CollabBayesGame>>,
    solver: Option<IncrementalCbgSolver>,
    /// the parent's CBG this node's rule extends (IC/ICE bootstrap)
    parent_cbg: Option<Arc<CollabBayesGame>>,
}

/// Total order on open-list entries: higher heuristic value first, then
/// greater depth, then the lexicographically *smaller* canonical φ encoding
/// (a fixed convention shared by IC and ICE so both resolve ties the same
/// way).
#[derive(Debug, Clone, PartialEq)]
struct OpenKey {
    vhat: f64,
    depth: usize,
    enc: Vec<u16>,
    node: usize,
}

impl Eq for OpenKey {}
impl PartialOrd for OpenKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.vhat
            .total_cmp(&other.vhat)
            .then_with(|| self.depth.cmp(&other.depth))
            .then_with(|| other.enc.cmp(&self.enc))
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Node comparison per the open-list order; exposed for property tests.
pub fn node_compare(a: (f64, usize, &[u16]), b: (f64, usize, &[u16])) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)).then_with(|| b.2.cmp(a.2))
}

struct Engine<'a> {
    model: &'a DecPomdpModel,
    heuristic: &'a QHeuristic,
    config: &'a SearchConfig,
    arena: Vec<Node>,
    open: BTreeSet<OpenKey>,
    lb: f64,
    incumbent: Option<(PastJointPolicy, f64)>,
    stats: SearchStats,
    live_solvers: usize,
    started: Instant,
    raw_sizes: Vec<(f64, usize)>,
    clustered_sizes: Vec<(f64, usize)>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a DecPomdpModel, heuristic: &'a QHeuristic, config: &'a SearchConfig) -> Self {
        let h = model.horizon;
        Engine {
            model,
            heuristic,
            config,
            arena: Vec::new(),
            open: BTreeSet::new(),
            lb: f64::NEG_INFINITY,
            incumbent: None,
            stats: SearchStats {
                variant: config.variant.to_string(),
                heuristic: heuristic.kind.to_string(),
                horizon: h,
                nodes_expanded_per_stage: vec![0; h],
                cbg_sizes_per_stage: vec![CbgSizeStat::default(); h],
                children_materialized_per_stage: vec![0; h],
                trace: if config.collect_trace { Some(Vec::new()) } else { None },
                ..Default::default()
            },
            live_solvers: 0,
            started: Instant::now(),
            raw_sizes: vec![(0.0, 0); h],
            clustered_sizes: vec![(0.0, 0); h],
        }
    }

    fn check_limits(&self) -> Result<(), SearchError> {
        if self.arena.len() > self.config.node_cap {
            return Err(SearchError::NodeCapExceeded { cap: self.config.node_cap });
        }
        if self.started.elapsed() > self.config.time_limit {
            return Err(SearchError::TimeLimitExceeded { limit: self.config.time_limit });
        }
        Ok(())
    }

    fn insert_open(&mut self, node: usize) {
        let n = &self.arena[node];
        self.open.insert(OpenKey { vhat: n.vhat, depth: n.depth, enc: n.enc.clone(), node });
        self.stats.peak_open_list = self.stats.peak_open_list.max(self.open.len());
    }

    /// Removes open-list entries with v̂ strictly below the incumbent bound
    /// and releases their attached CBGs and solvers.
    fn prune_open(&mut self) {
        if !self.config.prune_open_list {
            return;
        }
        loop {
            let doomed = match self.open.first() {
                Some(k) if k.vhat < self.lb => k.clone(),
                _ => break,
            };
            self.open.remove(&doomed);
            self.release(doomed.node);
            self.stats.pruned_nodes += 1;
        }
    }

    fn release(&mut self, node: usize) {
        let n = &mut self.arena[node];
        if let Some(solver) = n.solver.take() {
            let s = solver.stats();
            self.stats.solver_nodes += s.nodes_expanded;
            self.live_solvers -= 1;
        }
        n.cbg = None;
        n.parent_cbg = None;
    }

    /// Past joint policy of a node, rebuilt from the stored rule chain.
    fn materialize(&self, node: usize) -> PastJointPolicy {
        let mut rules = Vec::new();
        let mut cur = Some(node);
        while let Some(id) = cur {
            if let Some(rule) = &self.arena[id].rule {
                rules.push(rule.clone());
            }
            cur = self.arena[id].parent;
        }
        rules.reverse();
        PastJointPolicy { stages: rules }
    }

    /// Exact state-history distribution at the node's stage.
    fn distribution_at(&self, node: usize) -> StateHistoryDistribution {
        let phi = self.materialize(node);
        let mut dist = StateHistoryDistribution::initial(self.model);
        for rule in &phi.stages {
            dist = propagate_distribution(self.model, &dist, rule);
        }
        dist
    }

    /// Converts a CBG policy to a dense joint decision rule for the game's
    /// stage: every member history of a type maps to the type's action;
    /// histories unreachable under φ keep the filler action 0.
    fn beta_to_rule(&self, game: &CollabBayesGame, beta: &JointCbgPolicy) -> JointDecisionRule {
        (0..self.model.num_agents)
            .map(|agent| {
                let no = self.model.observations[agent].len();
                let mut actions = vec![0usize; no.pow(game.stage as u32)];
                for (ti, ty) in game.types[agent].iter().enumerate() {
                    for member in &ty.members {
                        let mut oh = 0usize;
                        for &(_, o) in member {
                            oh = oh * no + o as usize;
                        }
                        actions[oh] = beta.assignments[agent][ti];
                    }
                }
                DecisionRule { agent, stage: game.stage, actions }
            })
            .collect()
    }

    fn beta_enc(&self, parent_enc: &[u16], beta: &JointCbgPolicy) -> Vec<u16> {
        let mut enc = parent_enc.to_vec();
        for per_agent in &beta.assignments {
            enc.extend(per_agent.iter().map(|&a| a as u16));
        }
        enc
    }

    fn record_cbg_sizes(&mut self, stage: usize, raw: usize, clustered: usize) {
        self.raw_sizes[stage].0 += raw as f64;
        self.raw_sizes[stage].1 += 1;
        self.clustered_sizes[stage].0 += clustered as f64;
        self.clustered_sizes[stage].1 += 1;
    }

    /// Builds (or retrieves) the stage CBG for a node under the configured
    /// variant.
    fn stage_cbg(&mut self, node: usize) -> Arc<CollabBayesGame> {
        if let Some(cbg) = &self.arena[node].cbg {
            return Arc::clone(cbg);
        }
        let depth = self.arena[node].depth;
        let game = match self.config.variant {
            SearchVariant::Full => {
                let phi = self.materialize(node);
                let game = CollabBayesGame::from_scratch(self.model, &phi, self.heuristic);
                self.record_cbg_sizes(depth, game.num_joint_types(), game.num_joint_types());
                game
            }
            SearchVariant::Ic | SearchVariant::Ice => {
                let extended = match self.arena[node].parent_cbg.clone() {
                    None => CollabBayesGame::initial(self.model, self.heuristic),
                    Some(parent_cbg) => {
                        let beta = self.rule_beta(node, &parent_cbg);
                        parent_cbg.extend(self.model, &beta, self.heuristic)
                    }
                };
                let raw = extended.num_joint_types();
                let (clustered, cstats) =
                    extended.cluster(self.config.pe_tolerance, self.config.merge_payoff);
                self.stats.cluster_fixpoint_iterations += cstats.fixpoint_iterations;
                self.record_cbg_sizes(depth, raw, clustered.num_joint_types());
                clustered
            }
        };
        let arc = Arc::new(game);
        self.arena[node].cbg = Some(Arc::clone(&arc));
        arc
    }

    /// Recovers the β (type -> action over the parent game's types) that this
    /// node's stored dense rule represents.
    fn rule_beta(&self, node: usize, parent_cbg: &CollabBayesGame) -> JointCbgPolicy {
        let rule = self.arena[node].rule.as_ref().expect("non-root node has a rule");
        let assignments = (0..self.model.num_agents)
            .map(|agent| {
                let no = self.model.observations[agent].len();
                parent_cbg.types[agent]
                    .iter()
                    .map(|ty| {
                        let mut oh = 0usize;
                        for &(_, o) in &ty.representative {
                            oh = oh * no + o as usize;
                        }
                        rule[agent].actions[oh]
                    })
                    .collect()
            })
            .collect();
        JointCbgPolicy { assignments }
    }

    fn run(mut self) -> Result<SearchOutcome, SearchError> {
        let h = self.model.horizon;
        self.arena.push(Node {
            parent: None,
            depth: 0,
            rule: None,
            enc: Vec::new(),
            vhat: f64::INFINITY,
            past_value: 0.0,
            placeholder: false,
            cbg: None,
            solver: None,
            parent_cbg: None,
        });
        self.insert_open(0);

        while let Some(key) = self.open.last().cloned() {
            self.check_limits()?;
            self.open.remove(&key);
            let q = key.node;
            let depth = self.arena[q].depth;
            if !self.arena[q].placeholder {
                if let Some(trace) = &mut self.stats.trace {
                    trace.push(self.arena[q].enc.clone());
                }
            }
            self.stats.nodes_expanded_per_stage[depth] += 1;

            match self.config.variant {
                SearchVariant::Full | SearchVariant::Ic => self.expand_all(q, depth, h)?,
                SearchVariant::Ice => self.expand_incremental(q, depth, h)?,
            }
        }

        let (policy, value) = self.incumbent.take().expect("search explored the root");
        let mut stats = self.stats;
        stats.v_star = value;
        stats.wallclock_s = self.started.elapsed().as_secs_f64();
        for t in 0..h {
            stats.cbg_sizes_per_stage[t] = CbgSizeStat {
                mean_raw: if self.raw_sizes[t].1 > 0 {
                    self.raw_sizes[t].0 / self.raw_sizes[t].1 as f64
                } else {
                    0.0
                },
                mean_clustered: if self.clustered_sizes[t].1 > 0 {
                    self.clustered_sizes[t].0 / self.clustered_sizes[t].1 as f64
                } else {
                    0.0
                },
            };
        }
        Ok(SearchOutcome { policy, value, stats })
    }

    /// Full and IC expansion: enumerate every joint CBG policy of the stage
    /// game and emit one child per policy (or, at the last stage, keep only
    /// the best full policy).
    fn expand_all(&mut self, q: usize, depth: usize, h: usize) -> Result<(), SearchError> {
        let game = self.stage_cbg(q);
        let past = self.arena[q].past_value;
        let parent_enc = self.arena[q].enc.clone();

        if depth == h - 1 {
            // only the best fully specified joint policy matters
            let mut best: Option<(JointCbgPolicy, f64)> = None;
            for beta in game.enumerate_policies(self.model) {
                let v = past + game.policy_value(self.model, &beta);
                match &best {
                    Some((_, bv)) if v <= *bv => {}
                    _ => best = Some((beta, v)),
                }
            }
            let (beta, v) = best.expect("stage game has at least one policy");
            if v > self.lb {
                let rule = self.beta_to_rule(&game, &beta);
                let mut policy = self.materialize(q);
                policy.push(rule);
                self.lb = v;
                self.incumbent = Some((policy, v));
                self.prune_open();
            }
            self.release(q);
            return Ok(());
        }

        let dist = self.distribution_at(q);
        for beta in game.enumerate_policies(self.model) {
            let vhat = past + game.policy_value(self.model, &beta);
            if vhat < self.lb {
                continue; // equal-value children are retained
            }
            let rule = self.beta_to_rule(&game, &beta);
            let child_past = past + stage_reward(self.model, &dist, &rule);
            let enc = self.beta_enc(&parent_enc, &beta);
            let id = self.arena.len();
            self.arena.push(Node {
                parent: Some(q),
                depth: depth + 1,
                rule: Some(rule),
                enc,
                vhat,
                past_value: child_past,
                placeholder: false,
                cbg: None,
                solver: None,
                parent_cbg: Some(Arc::clone(&game)),
            });
            if self.arena.len() > self.config.node_cap {
                return Err(SearchError::NodeCapExceeded { cap: self.config.node_cap });
            }
            self.stats.children_materialized_per_stage[depth] += 1;
            self.insert_open(id);
        }
        self.release(q);
        Ok(())
    }

    /// ICE expansion: ask the node's incremental solver for exactly one more
    /// CBG solution, emit at most one child, and reinsert the node as a
    /// placeholder carrying the child's heuristic value.
    fn expand_incremental(&mut self, q: usize, depth: usize, h: usize) -> Result<(), SearchError> {
        if self.arena[q].solver.is_none() {
            let game = self.stage_cbg(q);
            let sizes: Vec<usize> = self.model.actions.iter().map(Vec::len).collect();
            self.arena[q].solver = Some(create_solver(game, &sizes));
            self.live_solvers += 1;
            self.stats.peak_live_solvers = self.stats.peak_live_solvers.max(self.live_solvers);
        }
        let past = self.arena[q].past_value;
        let lb_cbg = self.lb - past;
        let ub_cbg = if depth == h - 1 { self.arena[q].vhat - past } else { f64::INFINITY };

        let next =
            self.arena[q].solver.as_mut().expect("solver installed").next_solution(lb_cbg, ub_cbg);
        match next {
            None => {
                // fully expanded, or nothing at or above the bound remains
                self.release(q);
                Ok(())
            }
            Some((beta, v_beta)) => {
                let vhat = past + v_beta;
                let game = self.arena[q].cbg.clone().expect("expanded node has its CBG");
                if depth == h - 1 {
                    if vhat > self.lb {
                        let rule = self.beta_to_rule(&game, &beta);
                        let mut policy = self.materialize(q);
                        policy.push(rule);
                        self.lb = vhat;
                        self.incumbent = Some((policy, vhat));
                        self.prune_open();
                    }
                    self.release(q);
                    return Ok(());
                }
                let dist = self.distribution_at(q);
                let rule = self.beta_to_rule(&game, &beta);
                let child_past = past + stage_reward(self.model, &dist, &rule);
                let enc = self.beta_enc(&self.arena[q].enc.clone(), &beta);
                let id = self.arena.len();
                self.arena.push(Node {
                    parent: Some(q),
                    depth: depth + 1,
                    rule: Some(rule),
                    enc,
                    vhat,
                    past_value: child_past,
                    placeholder: false,
                    cbg: None,
                    solver: None,
                    parent_cbg: Some(game),
                });
                if self.arena.len() > self.config.node_cap {
                    return Err(SearchError::NodeCapExceeded { cap: self.config.node_cap });
                }
                self.stats.children_materialized_per_stage[depth] += 1;
                self.insert_open(id);
                // the parent becomes a placeholder valued at its last child
                self.arena[q].vhat = vhat;
                self.arena[q].placeholder = true;
                self.insert_open(q);
                Ok(())
            }
        }
    }
}

/// Runs the configured GMAA* variant and returns an optimal joint policy,
/// its exact value, and run statistics.
pub fn gmaa_search(
    model: &DecPomdpModel,
    heuristic: &QHeuristic,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    assert_eq!(heuristic.horizon, model.horizon, "heuristic horizon matches the model");
    Engine::new(model, heuristic, config).run()
}

/// Enumerates and evaluates every joint policy; the exact optimum with a
/// deterministic tie-break (first in canonical enumeration order).
pub fn brute_force_search(
    model: &DecPomdpModel,
    cap: u64,
) -> Result<(PastJointPolicy, f64), SearchError> {
    let count = crate::policy::count_joint_policies(model, model.horizon);
    if count > num_bigint::BigUint::from(cap) {
        return Err(SearchError::BruteForceCap { count: count.to_string(), cap });
    }
    let mut best: Option<(PastJointPolicy, f64)> = None;
    for policy in PolicyEnumerator::new(model, model.horizon) {
        let v = past_policy_value(model, &policy);
        match &best {
            Some((_, bv)) if v <= *bv => {}
            _ => best = Some((policy, v)),
        }
    }
    Ok(best.expect("at least one joint policy exists"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{compute, HeuristicConfig, HeuristicKind, QRepr};
    use crate::model::random_model;
    use crate::parser::builtin;
    use proptest::prelude::*;

    fn solve(model: &DecPomdpModel, kind: HeuristicKind, variant: SearchVariant) -> SearchOutcome {
        let q = compute(model, kind, QRepr::Tree, &HeuristicConfig::default()).unwrap();
        let config = SearchConfig { variant, ..Default::default() };
        gmaa_search(model, &q, &config).unwrap()
    }

    #[test]
    fn dectiger_h2_all_variants() {
        let m = builtin::dectiger(2);
        for variant in [SearchVariant::Full, SearchVariant::Ic, SearchVariant::Ice] {
            let out = solve(&m, HeuristicKind::QBg, variant);
            assert!((out.value - (-4.0)).abs() < 1e-6, "{variant:?}: {}", out.value);
            let recomputed = past_policy_value(&m, &out.policy);
            assert!((recomputed - out.value).abs() < 1e-9);
        }
    }

    #[test]
    fn dectiger_h3_matches_published_value() {
        let m = builtin::dectiger(3);
        for variant in [SearchVariant::Full, SearchVariant::Ic, SearchVariant::Ice] {
            let out = solve(&m, HeuristicKind::QBg, variant);
            assert!((out.value - 5.190812).abs() < 1e-5, "{variant:?}: got {}", out.value);
        }
    }

    #[test]
    fn brute_force_h1_is_best_open_loop_joint_action() {
        let m = builtin::dectiger(1);
        let (pi, v) = brute_force_search(&m, 1 << 20).unwrap();
        let want = (0..m.num_joint_actions())
            .map(|ja| m.expected_reward(&m.initial_belief, ja))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((v - want).abs() < 1e-12);
        assert_eq!(pi.depth(), 1);
    }

    #[test]
    fn variants_agree_with_brute_force_on_random_models() {
        for seed in 0..25 {
            let m = random_model(seed, 2, 2, 2, 2, 2);
            let (_, bf) = brute_force_search(&m, 1 << 30).unwrap();
            for variant in [SearchVariant::Full, SearchVariant::Ic, SearchVariant::Ice] {
                let out = solve(&m, HeuristicKind::QMdp, variant);
                assert!(
                    (out.value - bf).abs() < 1e-9,
                    "seed {seed} {variant:?}: {} vs {bf}",
                    out.value
                );
            }
        }
    }

    #[test]
    fn ic_and_ice_traces_are_identical_on_dectiger_h3() {
        let m = builtin::dectiger(3);
        let q = compute(&m, HeuristicKind::QBg, QRepr::Tree, &HeuristicConfig::default()).unwrap();
        let base = SearchConfig { collect_trace: true, ..Default::default() };
        let ic =
            gmaa_search(&m, &q, &SearchConfig { variant: SearchVariant::Ic, ..base.clone() })
                .unwrap();
        let ice =
            gmaa_search(&m, &q, &SearchConfig { variant: SearchVariant::Ice, ..base }).unwrap();
        assert_eq!(ic.stats.trace, ice.stats.trace);
        assert!((ic.value - ice.value).abs() < 1e-12);
    }

    #[test]
    fn ice_expands_fewer_intermediate_children_than_ic_generates() {
        let m = builtin::dectiger(3);
        let q = compute(&m, HeuristicKind::QBg, QRepr::Tree, &HeuristicConfig::default()).unwrap();
        let ic =
            gmaa_search(&m, &q, &SearchConfig { variant: SearchVariant::Ic, ..Default::default() })
                .unwrap();
        let ice = gmaa_search(
            &m,
            &q,
            &SearchConfig { variant: SearchVariant::Ice, ..Default::default() },
        )
        .unwrap();
        let ic_children: usize =
            ic.stats.children_materialized_per_stage[..m.horizon - 1].iter().sum();
        let ice_children: usize =
            ice.stats.children_materialized_per_stage[..m.horizon - 1].iter().sum();
        assert!(ice_children < ic_children, "ICE {ice_children} vs IC {ic_children}");
    }

    #[test]
    fn broadcastchannel_clusters_to_single_type() {
        let m = builtin::broadcastchannel(4);
        let out = solve(&m, HeuristicKind::QBg, SearchVariant::Ic);
        assert!((out.value - 3.89).abs() < 1e-5, "got {}", out.value);
        for t in 0..m.horizon {
            let s = &out.stats.cbg_sizes_per_stage[t];
            if s.mean_clustered > 0.0 {
                assert!((s.mean_clustered - 1.0).abs() < 1e-12, "stage {t}: {s:?}");
            }
        }
    }

    #[test]
    fn node_cap_reports_incomplete_run() {
        let m = builtin::dectiger(3);
        let q = compute(&m, HeuristicKind::QMdp, QRepr::Tree, &HeuristicConfig::default()).unwrap();
        let config =
            SearchConfig { variant: SearchVariant::Full, node_cap: 5, ..Default::default() };
        assert!(matches!(gmaa_search(&m, &q, &config), Err(SearchError::NodeCapExceeded { .. })));
    }

    #[test]
    fn h1_expansion_handles_full_policies_at_root() {
        let m = builtin::dectiger(1);
        for variant in [SearchVariant::Full, SearchVariant::Ic, SearchVariant::Ice] {
            let out = solve(&m, HeuristicKind::QMdp, variant);
            assert!((out.value - (-2.0)).abs() < 1e-9, "{variant:?}: {}", out.value);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn open_list_order_is_total(
            vals in proptest::collection::vec(
                (0.0f64..10.0, 0usize..4, proptest::collection::vec(0u16..3, 0..4)),
                3,
            )
        ) {
            let a = (vals[0].0, vals[0].1, vals[0].2.as_slice());
            let b = (vals[1].0, vals[1].1, vals[1].2.as_slice());
            let c = (vals[2].0, vals[2].1, vals[2].2.as_slice());
            prop_assert_eq!(node_compare(a, b), node_compare(b, a).reverse());
            let mut v = [a, b, c];
            v.sort_by(|x, y| node_compare(*x, *y));
            prop_assert!(node_compare(v[0], v[1]) != std::cmp::Ordering::Greater);
            prop_assert!(node_compare(v[1], v[2]) != std::cmp::Ordering::Greater);
            prop_assert!(node_compare(v[0], v[2]) != std::cmp::Ordering::Greater);
        }
    }
}
