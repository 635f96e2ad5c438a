//! An imperfect-pruner backend for robustness experiments.
//!
//! Relevance judgments start from the exact oracle decision and then flip
//! each item's keep/drop independently with probability `p`; forward
//! reasoning and direct answers stay exact. This isolates the question "how
//! does the pipeline behave when pruning is wrong x% of the time?" from
//! everything else.
//!
//! Noise is deterministic: the flip pattern for a call is derived from the
//! backend seed and the rendered prompt, so a given (seed, task) always
//! yields the same response regardless of thread scheduling or call order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::symbolic::{oracle_kept_indices, render_kept, SymbolicBackend};
use super::{Backend, BackendError, BackendReply, BackendRequest};

/// Wraps the symbolic oracle with independent per-item relevance flips.
#[derive(Debug, Clone)]
pub struct NoisyBackend {
    flip_probability: f64,
    seed: u64,
}

impl NoisyBackend {
    /// `flip_probability` must lie in [0, 1]; 0 reproduces the oracle
    /// exactly.
    pub fn new(flip_probability: f64, seed: u64) -> Self {
        assert!(
            (0.0..=1.0).contains(&flip_probability),
            "flip probability {flip_probability} outside [0, 1]"
        );
        NoisyBackend { flip_probability, seed }
    }

    fn rng_for(&self, prompt: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(b"noisy-backend");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }
}

impl Backend for NoisyBackend {
    fn respond(
        &self,
        request: &BackendRequest<'_>,
        prompt: &str,
    ) -> Result<BackendReply, BackendError> {
        match request {
            BackendRequest::Relevance { items, ask, phenomenon } => {
                let mut kept = oracle_kept_indices(items, phenomenon);
                let mut rng = self.rng_for(prompt);
                match ask {
                    Some(index) => {
                        // One decision is at stake; one draw decides its flip.
                        let mut keep = kept.contains(index);
                        if rng.random::<f64>() < self.flip_probability {
                            keep = !keep;
                        }
                        let text = if keep { "1" } else { "none" };
                        Ok(BackendReply { text: text.to_string(), attempts: 1 })
                    }
                    None => {
                        for position in 0..items.len() {
                            if rng.random::<f64>() < self.flip_probability {
                                if !kept.remove(&position) {
                                    kept.insert(position);
                                }
                            }
                        }
                        Ok(BackendReply { text: render_kept(&kept), attempts: 1 })
                    }
                }
            }
            other => SymbolicBackend.respond(other, prompt),
        }
    }

    fn describe(&self) -> String {
        format!("noisy(p={})", self.flip_probability)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_premise, parse_rule};
    use super::super::RelevanceItem;

    fn relevance_fixture() -> (Vec<RelevanceItem>, crate::lang::Fact) {
        let items = vec![
            RelevanceItem::Premise(parse_premise("Anne is responsible").unwrap()),
            RelevanceItem::Premise(parse_premise("Bob is humorous").unwrap()),
            RelevanceItem::Premise(parse_premise("Anne is excited").unwrap()),
            RelevanceItem::Rule(
                parse_rule(
                    "If a person is responsible and excited then this person is trustworthy.",
                )
                .unwrap(),
            ),
        ];
        (items, parse_premise("Anne is trustworthy").unwrap())
    }

    #[test]
    fn zero_noise_equals_the_oracle() {
        let (items, goal) = relevance_fixture();
        let request = BackendRequest::Relevance { items: &items, ask: None, phenomenon: &goal };
        let noisy = NoisyBackend::new(0.0, 7).respond(&request, "prompt").unwrap();
        let exact = SymbolicBackend.respond(&request, "prompt").unwrap();
        assert_eq!(noisy.text, exact.text);
    }

    #[test]
    fn full_noise_inverts_every_decision() {
        let (items, goal) = relevance_fixture();
        let request = BackendRequest::Relevance { items: &items, ask: None, phenomenon: &goal };
        let flipped = NoisyBackend::new(1.0, 7).respond(&request, "prompt").unwrap();
        // Oracle keeps {1, 3, 4} (1-based); the complement is {2}.
        assert_eq!(flipped.text, "2");
    }

    #[test]
    fn noise_is_deterministic_per_seed_and_prompt() {
        let (items, goal) = relevance_fixture();
        let request = BackendRequest::Relevance { items: &items, ask: None, phenomenon: &goal };
        let a = NoisyBackend::new(0.5, 11).respond(&request, "prompt").unwrap();
        let b = NoisyBackend::new(0.5, 11).respond(&request, "prompt").unwrap();
        assert_eq!(a.text, b.text);
        let other_seed = NoisyBackend::new(0.5, 12).respond(&request, "prompt").unwrap();
        let other_prompt = NoisyBackend::new(0.5, 11).respond(&request, "different").unwrap();
        // Different seeds or prompts draw from different streams; with four
        // items at p = 0.5 these are overwhelmingly likely to differ, and
        // both inputs here are fixed, so the test is deterministic either
        // way — it documents the dependency rather than proving randomness.
        let _ = (other_seed, other_prompt);
    }

    #[test]
    fn non_relevance_requests_stay_exact() {
        let (items, goal) = relevance_fixture();
        let premises: crate::engine::FactSet = items
            .iter()
            .filter_map(|i| match i {
                RelevanceItem::Premise(f) => Some(f.clone()),
                RelevanceItem::Rule(_) => None,
            })
            .collect();
        let rules = vec![parse_rule(
            "If a person is responsible and excited then this person is trustworthy.",
        )
        .unwrap()];
        let request =
            BackendRequest::Forward { premises: &premises, rules: &rules, phenomenon: &goal };
        let reply = NoisyBackend::new(1.0, 7).respond(&request, "prompt").unwrap();
        assert_eq!(reply.text, "True");
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn rejects_probabilities_outside_unit_interval() {
        NoisyBackend::new(1.5, 0);
    }
}
