//! Deterministic decision rules, past joint policies, sub-tree policies and
//! exact policy evaluation.
//!
//! Observation histories are stored as dense integers per stage: a length-t
//! history of agent i is a base-|O_i| number with the earliest observation in
//! the most significant digit, so extending a history is `oh * |O_i| + o`.

use crate::joint::JointIndexer;
use crate::model::DecPomdpModel;
use num_bigint::BigUint;
use std::collections::BTreeMap;

/// One stage of one agent's policy: a total map from length-`stage`
/// observation histories to actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRule {
    pub agent: usize,
    pub stage: usize,
    /// actions[oh] for oh in 0..|O_i|^stage
    pub actions: Vec<usize>,
}

impl DecisionRule {
    pub fn action(&self, oh: usize) -> usize {
        self.actions[oh]
    }
}

/// A joint decision rule: one [`DecisionRule`] per agent, same stage.
pub type JointDecisionRule = Vec<DecisionRule>;

/// Joint decision rules for stages `0..depth`. A past policy of depth h is a
/// full joint policy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PastJointPolicy {
    pub stages: Vec<JointDecisionRule>,
}

impl PastJointPolicy {
    pub fn empty() -> Self {
        PastJointPolicy { stages: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn action(&self, stage: usize, agent: usize, oh: usize) -> usize {
        self.stages[stage][agent].action(oh)
    }

    pub fn push(&mut self, rule: JointDecisionRule) {
        debug_assert!(rule.iter().all(|r| r.stage == self.stages.len()));
        self.stages.push(rule);
    }
}

/// Sparse joint distribution over (state, joint observation history) pairs.
///
/// Under a deterministic past joint policy each observation history carries a
/// unique action-observation history, so histories are identified by their
/// per-agent observation-history indices. Zero-probability entries are
/// dropped immediately; entries are kept sorted for deterministic summation.
#[derive(Debug, Clone)]
pub struct StateHistoryDistribution {
    pub stage: usize,
    /// sorted by (ohs, state)
    pub entries: Vec<HistEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistEntry {
    /// per-agent observation-history indices at `stage`
    pub ohs: Vec<u32>,
    pub state: usize,
    pub prob: f64,
}

impl StateHistoryDistribution {
    /// Stage-0 seed: initial belief times the empty joint history.
    pub fn initial(model: &DecPomdpModel) -> Self {
        let entries = model
            .initial_belief
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| HistEntry { ohs: vec![0; model.num_agents], state: s, prob: p })
            .collect();
        StateHistoryDistribution { stage: 0, entries }
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    /// Marginal probability of each joint history (summing out the state).
    pub fn history_marginals(&self) -> Vec<(Vec<u32>, f64)> {
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for e in &self.entries {
            *acc.entry(e.ohs.clone()).or_insert(0.0) += e.prob;
        }
        acc.into_iter().collect()
    }
}

/// Expected immediate reward of applying `rule` at the distribution's stage.
pub fn stage_reward(model: &DecPomdpModel, dist: &StateHistoryDistribution, rule: &JointDecisionRule) -> f64 {
    let action_ix = model.action_ix();
    let mut total = 0.0;
    for e in &dist.entries {
        let ja = joint_action_for(action_ix, rule, &e.ohs);
        total += e.prob * model.reward(e.state, ja);
    }
    total
}

fn joint_action_for(action_ix: &JointIndexer, rule: &JointDecisionRule, ohs: &[u32]) -> usize {
    let parts: Vec<usize> = rule.iter().zip(ohs).map(|(r, &oh)| r.action(oh as usize)).collect();
    action_ix.encode(&parts)
}

/// One step of the joint (state, history) recursion: applies `rule` at the
/// current stage and extends every history by each positive-likelihood joint
/// observation. Total mass is preserved.
pub fn propagate_distribution(
    model: &DecPomdpModel,
    dist: &StateHistoryDistribution,
    rule: &JointDecisionRule,
) -> StateHistoryDistribution {
    let action_ix = model.action_ix();
    let obs_ix = model.obs_ix();
    let ns = model.num_states();
    let no = model.num_joint_obs();
    let mut acc: BTreeMap<(Vec<u32>, usize), f64> = BTreeMap::new();
    for e in &dist.entries {
        let ja = joint_action_for(action_ix, rule, &e.ohs);
        for s2 in 0..ns {
            let pt = e.prob * model.trans(e.state, ja, s2);
            if pt == 0.0 {
                continue;
            }
            for jo in 0..no {
                let p = pt * model.obs(ja, s2, jo);
                if p == 0.0 {
                    continue;
                }
                let parts = obs_ix.decode(jo);
                let mut ohs = e.ohs.clone();
                for (agent, oh) in ohs.iter_mut().enumerate() {
                    *oh = *oh * model.observations[agent].len() as u32 + parts[agent] as u32;
                }
                *acc.entry((ohs, s2)).or_insert(0.0) += p;
            }
        }
    }
    let entries = acc
        .into_iter()
        .filter(|&(_, p)| p > 0.0)
        .map(|((ohs, state), prob)| HistEntry { ohs, state, prob })
        .collect();
    StateHistoryDistribution { stage: dist.stage + 1, entries }
}

/// Exact expected cumulative reward of the first `depth` stages of a past
/// joint policy, folding `propagate_distribution` with stage rewards.
pub fn past_policy_value(model: &DecPomdpModel, policy: &PastJointPolicy) -> f64 {
    let mut dist = StateHistoryDistribution::initial(model);
    let mut value = 0.0;
    for rule in &policy.stages {
        value += stage_reward(model, &dist, rule);
        if dist.stage + 1 < policy.depth() {
            dist = propagate_distribution(model, &dist, rule);
        }
    }
    value
}

/// A depth-τ action tree for one agent: a root action plus one child subtree
/// per individual observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTreePolicy {
    pub action: usize,
    pub children: Vec<SubTreePolicy>,
}

impl SubTreePolicy {
    pub fn leaf(action: usize) -> Self {
        SubTreePolicy { action, children: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.first().map_or(0, SubTreePolicy::depth)
    }

    /// Policy consumption: the subtree at observation path `path`.
    pub fn consume(&self, path: &[usize]) -> &SubTreePolicy {
        match path.split_first() {
            None => self,
            Some((&o, rest)) => self.children[o].consume(rest),
        }
    }
}

/// Value of a joint sub-tree policy started in state `s` (one tree per
/// agent, uniform depth). At depth 1 this is the immediate reward of the
/// root joint action.
pub fn evaluate_subtree(model: &DecPomdpModel, s: usize, trees: &[&SubTreePolicy]) -> f64 {
    let parts: Vec<usize> = trees.iter().map(|t| t.action).collect();
    let ja = model.action_ix().encode(&parts);
    let mut v = model.reward(s, ja);
    if trees[0].children.is_empty() {
        return v;
    }
    let obs_ix = model.obs_ix();
    for s2 in 0..model.num_states() {
        let pt = model.trans(s, ja, s2);
        if pt == 0.0 {
            continue;
        }
        for jo in 0..model.num_joint_obs() {
            let po = model.obs(ja, s2, jo);
            if po == 0.0 {
                continue;
            }
            let parts = obs_ix.decode(jo);
            let next: Vec<&SubTreePolicy> =
                trees.iter().zip(&parts).map(|(t, &o)| &t.children[o]).collect();
            v += pt * po * evaluate_subtree(model, s2, &next);
        }
    }
    v
}

/// Converts one agent's side of a full policy into a depth-h subtree.
pub fn policy_to_subtree(model: &DecPomdpModel, policy: &PastJointPolicy, agent: usize) -> SubTreePolicy {
    fn build(policy: &PastJointPolicy, agent: usize, num_obs: usize, stage: usize, oh: usize) -> SubTreePolicy {
        let action = policy.action(stage, agent, oh);
        if stage + 1 == policy.depth() {
            return SubTreePolicy::leaf(action);
        }
        let children = (0..num_obs)
            .map(|o| build(policy, agent, num_obs, stage + 1, oh * num_obs + o))
            .collect();
        SubTreePolicy { action, children }
    }
    build(policy, agent, model.observations[agent].len(), 0, 0)
}

/// Exact number of deterministic joint policies for horizon `h`:
/// per agent |A_i| ^ ((|O_i|^h - 1) / (|O_i| - 1)), with |O_i| = 1 handled
/// as exponent h, multiplied over agents.
pub fn count_joint_policies(model: &DecPomdpModel, h: usize) -> BigUint {
    let mut total = BigUint::from(1u32);
    for agent in 0..model.num_agents {
        let na = BigUint::from(model.actions[agent].len());
        let no = model.observations[agent].len();
        let nodes: BigUint = if no == 1 {
            BigUint::from(h)
        } else {
            let no = BigUint::from(no);
            (no.pow(h as u32) - 1u32) / (no - 1u32)
        };
        // nodes is small in practice; exponentiate by repeated squaring
        let mut exp = nodes;
        let mut base = na;
        let mut acc = BigUint::from(1u32);
        while exp > BigUint::from(0u32) {
            if &exp % 2u32 == BigUint::from(1u32) {
                acc *= &base;
            }
            base = &base * &base;
            exp >>= 1;
        }
        total *= acc;
    }
    total
}

/// Number of observation-history nodes per agent for horizon `h` (the size
/// of one agent's dense policy table).
pub fn policy_nodes_per_agent(model: &DecPomdpModel, h: usize) -> Vec<usize> {
    (0..model.num_agents)
        .map(|i| {
            let no = model.observations[i].len();
            (0..h).map(|t| no.pow(t as u32)).sum()
        })
        .collect()
}

/// Deterministic enumeration of all full joint policies in canonical order:
/// digits ordered agent-major, then stage-major, then observation history
/// ascending; the last digit varies fastest.
pub struct PolicyEnumerator {
    model_sizes: Vec<(usize, usize)>, // (num actions, num obs) per agent
    horizon: usize,
    digits: Vec<usize>,
    radixes: Vec<usize>,
    done: bool,
}

impl PolicyEnumerator {
    pub fn new(model: &DecPomdpModel, h: usize) -> Self {
        let mut radixes = Vec::new();
        for agent in 0..model.num_agents {
            let na = model.actions[agent].len();
            let no = model.observations[agent].len();
            for t in 0..h {
                for _ in 0..no.pow(t as u32) {
                    radixes.push(na);
                }
            }
        }
        PolicyEnumerator {
            model_sizes: (0..model.num_agents)
                .map(|i| (model.actions[i].len(), model.observations[i].len()))
                .collect(),
            horizon: h,
            digits: vec![0; radixes.len()],
            radixes,
            done: false,
        }
    }

    fn materialize(&self) -> PastJointPolicy {
        let mut stages: Vec<JointDecisionRule> = (0..self.horizon)
            .map(|t| {
                self.model_sizes
                    .iter()
                    .enumerate()
                    .map(|(agent, &(_, no))| DecisionRule {
                        agent,
                        stage: t,
                        actions: vec![0; no.pow(t as u32)],
                    })
                    .collect()
            })
            .collect();
        let mut k = 0;
        for (agent, &(_, no)) in self.model_sizes.iter().enumerate() {
            for (t, stage) in stages.iter_mut().enumerate() {
                for oh in 0..no.pow(t as u32) {
                    stage[agent].actions[oh] = self.digits[k];
                    k += 1;
                }
            }
        }
        PastJointPolicy { stages }
    }
}

impl Iterator for PolicyEnumerator {
    type Item = PastJointPolicy;

    fn next(&mut self) -> Option<PastJointPolicy> {
        if self.done {
            return None;
        }
        let out = self.materialize();
        // odometer increment, last digit fastest
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.radixes[i] {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

/// Depth-first textual tree for one agent: `action ( o1: subtree , ... )`.
pub fn policy_tree_string(model: &DecPomdpModel, policy: &PastJointPolicy, agent: usize) -> String {
    fn write(
        model: &DecPomdpModel,
        policy: &PastJointPolicy,
        agent: usize,
        stage: usize,
        oh: usize,
        out: &mut String,
    ) {
        let a = policy.action(stage, agent, oh);
        out.push_str(&model.actions[agent][a]);
        if stage + 1 == policy.depth() {
            return;
        }
        let no = model.observations[agent].len();
        out.push_str(" ( ");
        for o in 0..no {
            if o > 0 {
                out.push_str(" , ");
            }
            out.push_str(&model.observations[agent][o]);
            out.push_str(": ");
            write(model, policy, agent, stage + 1, oh * no + o, out);
        }
        out.push_str(" )");
    }
    let mut out = String::new();
    write(model, policy, agent, 0, 0, &mut out);
    out
}

/// Flat CSV serialization: `agent,stage,obs_history,action` with the history
/// written as observation names joined by `|` (empty at stage 0).
pub fn policy_csv(model: &DecPomdpModel, policy: &PastJointPolicy) -> String {
    let mut out = String::from("agent,stage,obs_history,action\n");
    for agent in 0..model.num_agents {
        let no = model.observations[agent].len();
        for (t, stage) in policy.stages.iter().enumerate() {
            for oh in 0..stage[agent].actions.len() {
                let mut names = Vec::with_capacity(t);
                let mut rest = oh;
                for k in (0..t).rev() {
                    let o = (rest / no.pow(k as u32)) % no;
                    rest %= no.pow(k as u32);
                    names.push(model.observations[agent][o].as_str());
                }
                let a = stage[agent].actions[oh];
                out.push_str(&format!(
                    "{agent},{t},{},{}\n",
                    names.join("|"),
                    model.actions[agent][a]
                ));
            }
        }
    }
    out
}
