use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AugmentError, AugmentedPair};
use crate::pairing::{MentionPair, PairDataset};

pub const DEFAULT_PER_ORIGINAL: usize = 2;
pub const DEFAULT_TOP_N: usize = 5;

/// How many generated pairs to keep per source, and which sources qualify.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    per_original: usize,
    top_n: usize,
    seed: u64,
}

impl AugmentationPlan {
    pub fn new(per_original: usize, top_n: usize, seed: u64) -> Result<Self, AugmentError> {
        if per_original == 0 {
            return Err(AugmentError::ZeroPerOriginal);
        }
        if top_n == 0 {
            return Err(AugmentError::ZeroTopN);
        }
        Ok(AugmentationPlan {
            per_original,
            top_n,
            seed,
        })
    }

    pub fn with_seed(seed: u64) -> Self {
        Self::new(DEFAULT_PER_ORIGINAL, DEFAULT_TOP_N, seed).expect("defaults are valid")
    }

    pub fn per_original(&self) -> usize {
        self.per_original
    }

    pub fn top_n(&self) -> usize {
        self.top_n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sources among the `top_n` nearest neighbours of their anchor qualify.
    pub fn is_eligible(&self, pair: &MentionPair) -> bool {
        pair.rank < self.top_n
    }
}

/// Picks up to `per_original` augmentations per eligible source, uniformly at
/// random under the plan's seed. Output follows source order, and within a
/// source keeps the order in which the candidates were supplied.
pub fn select_augmentations<'a>(
    ori: &PairDataset,
    augs: &'a [AugmentedPair],
    plan: &AugmentationPlan,
) -> Vec<&'a AugmentedPair> {
    let mut by_source: HashMap<&str, Vec<&AugmentedPair>> = HashMap::new();
    for a in augs {
        by_source.entry(a.source_pair_id.as_str()).or_default().push(a);
    }
    let known: std::collections::HashSet<&str> = ori.pairs.iter().map(|p| p.pair_id.as_str()).collect();
    let orphans = augs.iter().filter(|a| !known.contains(a.source_pair_id.as_str())).count();
    if orphans > 0 {
        log::warn!("{orphans} augmented pair(s) reference sources outside the dataset; ignored");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::new();
    for source in &ori.pairs {
        if !plan.is_eligible(source) {
            continue;
        }
        let Some(cands) = by_source.get(source.pair_id.as_str()) else {
            continue;
        };
        if cands.len() <= plan.per_original {
            out.extend(cands.iter().copied());
            continue;
        }
        let mut picked = sample(&mut rng, cands.len(), plan.per_original).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| cands[i]));
    }
    out
}

/// Original pairs in order, followed by the selected augmentations.
pub fn mix_dataset(ori: &PairDataset, augs: &[AugmentedPair], plan: &AugmentationPlan) -> PairDataset {
    let mut pairs = ori.pairs.clone();
    pairs.extend(select_augmentations(ori, augs, plan).into_iter().map(|a| a.pair.clone()));
    PairDataset {
        pairs,
        k_train: ori.k_train,
        k_infer: ori.k_infer,
    }
}
