//! Mixed-radix bijections between per-agent index tuples and joint indices.
//!
//! Joint actions and joint observations are addressed by a single dense index
//! throughout the crate; agent 0 is the most significant digit, so ascending
//! joint indices enumerate tuples in lexicographic agent order.

/// Bijective encoding between tuples of per-agent indices and one joint index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointIndexer {
    sizes: Vec<usize>,
    /// strides[i] = product of sizes[i+1..]
    strides: Vec<usize>,
    len: usize,
}

impl JointIndexer {
    pub fn new(sizes: &[usize]) -> Self {
        assert!(!sizes.is_empty() && sizes.iter().all(|&k| k >= 1));
        let mut strides = vec![1usize; sizes.len()];
        for i in (0..sizes.len() - 1).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let len = strides[0] * sizes[0];
        JointIndexer { sizes: sizes.to_vec(), strides, len }
    }

    /// Number of joint indices.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn size_of(&self, agent: usize) -> usize {
        self.sizes[agent]
    }

    pub fn encode(&self, parts: &[usize]) -> usize {
        debug_assert_eq!(parts.len(), self.sizes.len());
        let mut joint = 0;
        for (i, &p) in parts.iter().enumerate() {
            debug_assert!(p < self.sizes[i]);
            joint += p * self.strides[i];
        }
        joint
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        debug_assert!(joint < self.len);
        self.sizes
            .iter()
            .zip(&self.strides)
            .map(|(&size, &stride)| (joint / stride) % size)
            .collect()
    }

    /// Component of `joint` belonging to `agent`.
    pub fn component(&self, joint: usize, agent: usize) -> usize {
        (joint / self.strides[agent]) % self.sizes[agent]
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        0..self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_decode_roundtrip_small() {
        let ix = JointIndexer::new(&[3, 2, 4]);
        assert_eq!(ix.len(), 24);
        for j in 0..ix.len() {
            let parts = ix.decode(j);
            assert_eq!(ix.encode(&parts), j);
        }
    }

    #[test]
    fn agent_zero_is_most_significant() {
        let ix = JointIndexer::new(&[3, 3]);
        assert_eq!(ix.encode(&[1, 2]), 5);
        assert_eq!(ix.component(5, 0), 1);
        assert_eq!(ix.component(5, 1), 2);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(sizes in proptest::collection::vec(1usize..5, 1..4)) {
            let ix = JointIndexer::new(&sizes);
            for j in ix.iter() {
                let parts = ix.decode(j);
                prop_assert_eq!(ix.encode(&parts), j);
                for (agent, &p) in parts.iter().enumerate() {
                    prop_assert_eq!(ix.component(j, agent), p);
                }
            }
        }
    }
}
