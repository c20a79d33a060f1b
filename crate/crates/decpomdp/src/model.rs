//! The Dec-POMDP problem definition: core tensors and belief arithmetic.

use crate::joint::JointIndexer;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability rows summing to one.
pub const PROB_SUM_TOL: f64 = 1e-9;
/// Rows whose sum deviates by at most this much are renormalized by the
/// constructors; larger deviations are rejected (benchmark files carry
/// rounded decimals).
pub const PROB_NORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what} must be at least 1 (got {got})")]
    EmptySet { what: &'static str, got: usize },
    #[error("transition probabilities for (state {state}, joint action {ja}) sum to {sum}, not 1")]
    TransitionRowSum { state: usize, ja: usize, sum: f64 },
    #[error("observation probabilities for (joint action {ja}, next state {state}) sum to {sum}, not 1")]
    ObservationRowSum { ja: usize, state: usize, sum: f64 },
    #[error("initial belief sums to {sum}, not 1")]
    InitialBeliefSum { sum: f64 },
    #[error("negative probability {p} in {what}")]
    NegativeProbability { what: &'static str, p: f64 },
}

/// A probability distribution over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointBelief(pub Vec<f64>);

impl JointBelief {
    /// Validates non-negativity and unit mass (within [`PROB_SUM_TOL`]).
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.iter().any(|&p| p < 0.0) {
            return Err(ModelError::NegativeProbability {
                what: "belief",
                p: probs.iter().cloned().fold(f64::INFINITY, f64::min),
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::InitialBeliefSum { sum });
        }
        Ok(JointBelief(probs))
    }

    pub fn uniform(num_states: usize) -> Self {
        JointBelief(vec![1.0 / num_states as f64; num_states])
    }

    pub fn delta(num_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; num_states];
        p[state] = 1.0;
        JointBelief(p)
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A finite-horizon Dec-POMDP.
///
/// Immutable after construction; all operations are pure functions of their
/// inputs, so a model can be shared freely across concurrent readers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecPomdpModel {
    pub name: String,
    pub num_agents: usize,
    pub states: Vec<String>,
    /// Per-agent action names.
    pub actions: Vec<Vec<String>>,
    /// Per-agent observation names.
    pub observations: Vec<Vec<String>>,
    /// `transition[s * |A| * |S| + ja * |S| + s2]` = Pr(s2 | s, ja).
    transition: Vec<f64>,
    /// `observation_fn[ja * |S| * |O| + s2 * |O| + jo]` = Pr(jo | ja, s2).
    observation_fn: Vec<f64>,
    /// `reward[s * |A| + ja]` = R(s, ja).
    reward: Vec<f64>,
    pub initial_belief: JointBelief,
    pub horizon: usize,
    #[serde(skip)]
    action_ix: Option<JointIndexer>,
    #[serde(skip)]
    obs_ix: Option<JointIndexer>,
}

impl DecPomdpModel {
    /// Builds and validates a model. Rows within [`PROB_NORMALIZE_TOL`] of
    /// unit mass are renormalized; anything further off is an error.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        states: Vec<String>,
        actions: Vec<Vec<String>>,
        observations: Vec<Vec<String>>,
        mut transition: Vec<f64>,
        mut observation_fn: Vec<f64>,
        reward: Vec<f64>,
        initial_belief: Vec<f64>,
        horizon: usize,
    ) -> Result<Self, ModelError> {
        let num_agents = actions.len();
        if num_agents == 0 {
            return Err(ModelError::EmptySet { what: "agent set", got: 0 });
        }
        if states.is_empty() {
            return Err(ModelError::EmptySet { what: "state set", got: 0 });
        }
        if horizon == 0 {
            return Err(ModelError::EmptySet { what: "horizon", got: 0 });
        }
        for a in &actions {
            if a.is_empty() {
                return Err(ModelError::EmptySet { what: "action set", got: 0 });
            }
        }
        for o in &observations {
            if o.is_empty() {
                return Err(ModelError::EmptySet { what: "observation set", got: 0 });
            }
        }
        let action_ix = JointIndexer::new(&actions.iter().map(Vec::len).collect::<Vec<_>>());
        let obs_ix = JointIndexer::new(&observations.iter().map(Vec::len).collect::<Vec<_>>());
        let ns = states.len();
        let na = action_ix.len();
        let no = obs_ix.len();
        assert_eq!(transition.len(), ns * na * ns, "transition tensor size");
        assert_eq!(observation_fn.len(), na * ns * no, "observation tensor size");
        assert_eq!(reward.len(), ns * na, "reward tensor size");
        assert_eq!(initial_belief.len(), ns, "initial belief size");

        for s in 0..ns {
            for ja in 0..na {
                let row = &mut transition[(s * na + ja) * ns..(s * na + ja + 1) * ns];
                normalize_row(row, "transition")
                    .map_err(|sum| ModelError::TransitionRowSum { state: s, ja, sum })?;
            }
        }
        for ja in 0..na {
            for s2 in 0..ns {
                let row = &mut observation_fn[(ja * ns + s2) * no..(ja * ns + s2 + 1) * no];
                normalize_row(row, "observation")
                    .map_err(|sum| ModelError::ObservationRowSum { ja, state: s2, sum })?;
            }
        }
        let mut b0 = initial_belief;
        normalize_row(&mut b0, "initial belief")
            .map_err(|sum| ModelError::InitialBeliefSum { sum })?;
        let initial_belief = JointBelief::new(b0)?;

        Ok(DecPomdpModel {
            name,
            num_agents,
            states,
            actions,
            observations,
            transition,
            observation_fn,
            reward,
            initial_belief,
            horizon,
            action_ix: Some(action_ix),
            obs_ix: Some(obs_ix),
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn action_ix(&self) -> &JointIndexer {
        self.action_ix.as_ref().expect("model constructed via new()")
    }

    pub fn obs_ix(&self) -> &JointIndexer {
        self.obs_ix.as_ref().expect("model constructed via new()")
    }

    /// Rebuilds the joint indexers after deserialization.
    pub fn rebuild_indexers(&mut self) {
        self.action_ix =
            Some(JointIndexer::new(&self.actions.iter().map(Vec::len).collect::<Vec<_>>()));
        self.obs_ix =
            Some(JointIndexer::new(&self.observations.iter().map(Vec::len).collect::<Vec<_>>()));
    }

    pub fn num_joint_actions(&self) -> usize {
        self.action_ix().len()
    }

    pub fn num_joint_obs(&self) -> usize {
        self.obs_ix().len()
    }

    #[inline]
    pub fn trans(&self, s: usize, ja: usize, s2: usize) -> f64 {
        self.transition[(s * self.num_joint_actions() + ja) * self.num_states() + s2]
    }

    #[inline]
    pub fn obs(&self, ja: usize, s2: usize, jo: usize) -> f64 {
        self.observation_fn[(ja * self.num_states() + s2) * self.num_joint_obs() + jo]
    }

    #[inline]
    pub fn reward(&self, s: usize, ja: usize) -> f64 {
        self.reward[s * self.num_joint_actions() + ja]
    }

    /// Immediate reward under a belief: sum_s b(s) R(s, ja).
    pub fn expected_reward(&self, b: &JointBelief, ja: usize) -> f64 {
        b.0.iter().enumerate().map(|(s, &p)| p * self.reward(s, ja)).sum()
    }

    /// One step of Bayes' rule. Returns the normalized posterior together
    /// with the pre-normalization likelihood Pr(jo | b, ja), or `None` when
    /// the observation is impossible (zero likelihood) so the caller can
    /// prune that branch.
    pub fn belief_update(&self, b: &JointBelief, ja: usize, jo: usize) -> Option<(JointBelief, f64)> {
        let ns = self.num_states();
        let mut post = vec![0.0; ns];
        for s in 0..ns {
            let p = b.0[s];
            if p == 0.0 {
                continue;
            }
            for s2 in 0..ns {
                post[s2] += p * self.trans(s, ja, s2);
            }
        }
        let mut likelihood = 0.0;
        for s2 in 0..ns {
            post[s2] *= self.obs(ja, s2, jo);
            likelihood += post[s2];
        }
        if likelihood <= 0.0 {
            return None;
        }
        for p in &mut post {
            *p /= likelihood;
        }
        Some((JointBelief(post), likelihood))
    }

    /// Belief propagated through the transition only (no observation).
    pub fn belief_predict(&self, b: &JointBelief, ja: usize) -> JointBelief {
        let ns = self.num_states();
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let p = b.0[s];
            if p == 0.0 {
                continue;
            }
            for s2 in 0..ns {
                next[s2] += p * self.trans(s, ja, s2);
            }
        }
        JointBelief(next)
    }

    /// A short digest of the model tensors, used to key heuristic cache files.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.num_agents.to_le_bytes());
        h.update(self.states.len().to_le_bytes());
        for a in &self.actions {
            h.update(a.len().to_le_bytes());
        }
        for o in &self.observations {
            h.update(o.len().to_le_bytes());
        }
        for v in self.transition.iter().chain(&self.observation_fn).chain(&self.reward) {
            h.update(v.to_le_bytes());
        }
        for v in &self.initial_belief.0 {
            h.update(v.to_le_bytes());
        }
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Same model with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let mut m = self.clone();
        m.horizon = horizon.max(1);
        m
    }
}

fn normalize_row(row: &mut [f64], _what: &str) -> Result<(), f64> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() <= PROB_SUM_TOL {
        return Ok(());
    }
    if (sum - 1.0).abs() <= PROB_NORMALIZE_TOL {
        for p in row.iter_mut() {
            *p /= sum;
        }
        return Ok(());
    }
    Err(sum)
}

/// Deterministic random model generator for oracle testing. Rows are drawn
/// uniformly and normalized; rewards are uniform in [-10, 10].
pub fn random_model(seed: u64, num_agents: usize, num_states: usize, num_actions: usize, num_obs: usize, horizon: usize) -> DecPomdpModel {
    assert!(num_agents >= 1 && num_states >= 1 && num_actions >= 1 && num_obs >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..num_states).map(|i| format!("s{i}")).collect::<Vec<_>>();
    let actions =
        (0..num_agents).map(|_| (0..num_actions).map(|i| format!("a{i}")).collect()).collect::<Vec<Vec<_>>>();
    let observations =
        (0..num_agents).map(|_| (0..num_obs).map(|i| format!("o{i}")).collect()).collect::<Vec<Vec<_>>>();
    let na = num_actions.pow(num_agents as u32);
    let no = num_obs.pow(num_agents as u32);

    let mut transition = vec![0.0; num_states * na * num_states];
    for row in transition.chunks_mut(num_states) {
        fill_random_dist(&mut rng, row);
    }
    let mut observation_fn = vec![0.0; na * num_states * no];
    for row in observation_fn.chunks_mut(no) {
        fill_random_dist(&mut rng, row);
    }
    let reward: Vec<f64> = (0..num_states * na).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let mut b0 = vec![0.0; num_states];
    fill_random_dist(&mut rng, &mut b0);

    DecPomdpModel::new(
        format!("random-{seed}"),
        states,
        actions,
        observations,
        transition,
        observation_fn,
        reward,
        b0,
        horizon,
    )
    .expect("random model is valid by construction")
}

fn fill_random_dist<R: Rng>(rng: &mut R, row: &mut [f64]) {
    let mut sum = 0.0;
    for p in row.iter_mut() {
        *p = rng.gen_range(0.01..1.0);
        sum += *p;
    }
    for p in row.iter_mut() {
        *p /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::builtin;
    use proptest::prelude::*;

    #[test]
    fn degenerate_singleton_model() {
        let m = DecPomdpModel::new(
            "single".into(),
            vec!["s".into()],
            vec![vec!["a".into()]],
            vec![vec!["o".into()]],
            vec![1.0],
            vec![1.0],
            vec![0.0],
            vec![1.0],
            1,
        )
        .unwrap();
        assert_eq!(m.num_joint_actions(), 1);
        let (b, lik) = m.belief_update(&m.initial_belief, 0, 0).unwrap();
        assert_eq!(b.prob(0), 1.0);
        assert_eq!(lik, 1.0);
    }

    #[test]
    fn expected_reward_point_mass_and_mean() {
        let m = random_model(7, 2, 2, 2, 2, 2);
        let b = JointBelief::delta(2, 1);
        assert!((m.expected_reward(&b, 3) - m.reward(1, 3)).abs() < 1e-12);

        // uniform mean of two rewards
        let b = JointBelief::uniform(2);
        let want = 0.5 * (m.reward(0, 0) + m.reward(1, 0));
        assert!((m.expected_reward(&b, 0) - want).abs() < 1e-12);
    }

    #[test]
    fn random_model_deterministic_in_seed() {
        let a = random_model(42, 2, 3, 2, 2, 3);
        let b = random_model(42, 2, 3, 2, 2, 3);
        assert_eq!(a.transition, b.transition);
        assert_eq!(a.observation_fn, b.observation_fn);
        assert_eq!(a.reward, b.reward);
    }

    #[test]
    fn random_models_normalized_sweep() {
        for seed in 0..100 {
            let m = random_model(seed, 2, 2, 2, 2, 2);
            for s in 0..m.num_states() {
                for ja in 0..m.num_joint_actions() {
                    let sum: f64 = (0..m.num_states()).map(|s2| m.trans(s, ja, s2)).sum();
                    assert!((sum - 1.0).abs() < PROB_SUM_TOL, "seed {seed}");
                }
            }
            for ja in 0..m.num_joint_actions() {
                for s2 in 0..m.num_states() {
                    let sum: f64 = (0..m.num_joint_obs()).map(|jo| m.obs(ja, s2, jo)).sum();
                    assert!((sum - 1.0).abs() < PROB_SUM_TOL, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn dectiger_double_listen_beliefs_match_published_values() {
        let m = builtin::dectiger(3);
        let listen = m.action_ix().encode(&[0, 0]);
        let hl_hl = m.obs_ix().encode(&[0, 0]);
        let hl_hr = m.obs_ix().encode(&[0, 1]);

        let (b1, _) = m.belief_update(&m.initial_belief, listen, hl_hl).unwrap();
        let (b2, _) = m.belief_update(&b1, listen, hl_hl).unwrap();
        assert!((b2.prob(0) - 0.999).abs() < 5e-4, "got {}", b2.prob(0));

        let (b2b, _) = m.belief_update(&b1, listen, hl_hr).unwrap();
        assert!((b2b.prob(0) - 0.970).abs() < 5e-4, "got {}", b2b.prob(0));
    }

    #[test]
    fn uniform_observations_leave_predicted_belief() {
        // observation function uniform over joint observations: posterior
        // equals the transition-propagated prior for every observation.
        let mut m = random_model(5, 2, 3, 2, 2, 2);
        let no = m.num_joint_obs();
        for v in m.observation_fn.iter_mut() {
            *v = 1.0 / no as f64;
        }
        let b = m.initial_belief.clone();
        let predicted = m.belief_predict(&b, 1);
        for jo in 0..no {
            let (post, lik) = m.belief_update(&b, 1, jo).unwrap();
            assert!((lik - 1.0 / no as f64).abs() < 1e-12);
            for s in 0..m.num_states() {
                assert!((post.prob(s) - predicted.prob(s)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        // Belief-update consistency: likelihoods over observations sum to 1.
        #[test]
        fn likelihoods_sum_to_one(seed in 0u64..500, ja in 0usize..4) {
            let m = random_model(seed, 2, 3, 2, 2, 2);
            let b = m.initial_belief.clone();
            let total: f64 = (0..m.num_joint_obs())
                .filter_map(|jo| m.belief_update(&b, ja, jo).map(|(_, l)| l))
                .sum();
            prop_assert!((total - 1.0).abs() < PROB_SUM_TOL);
        }
    }
}
