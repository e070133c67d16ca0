//! Per-stratum sampling caps for Stage 2.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::ArticleType;
use crate::mentions::Mention;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stratum {
    pub party: String,
    pub article_type: ArticleType,
}

impl Stratum {
    pub fn new(party: &str, article_type: ArticleType) -> Self {
        Self {
            party: party.to_string(),
            article_type,
        }
    }

    pub fn of(m: &Mention) -> Self {
        Self {
            party: m.party.clone(),
            article_type: m.article_type,
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.party, self.article_type)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    #[serde(default = "SamplingPlan::default_cap")]
    pub cap_per_stratum: usize,
    #[serde(default)]
    pub seed: u64,
    /// Strata classified in full regardless of the cap.
    #[serde(default)]
    pub exempt: Vec<Stratum>,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            cap_per_stratum: Self::default_cap(),
            seed: 0,
            exempt: Vec::new(),
        }
    }
}

impl SamplingPlan {
    fn default_cap() -> usize {
        250
    }

    pub fn with_cap(cap: usize, seed: u64) -> Self {
        Self {
            cap_per_stratum: cap,
            seed,
            exempt: Vec::new(),
        }
    }

    fn stratum_seed(&self, s: &Stratum) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(s.party.as_bytes());
        h.update([0x1f]);
        h.update(s.article_type.as_str().as_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}

/// Groups mentions by (party, article type) and caps each group.
///
/// Each group is sorted by `mention_id` first, so the draw depends only on
/// the seed and the group's membership, not on input order. Groups at or
/// under the cap pass through whole; larger ones get a uniform sample without
/// replacement, returned in `mention_id` order.
pub fn sample_strata(mentions: &[Mention], plan: &SamplingPlan) -> BTreeMap<Stratum, Vec<Mention>> {
    let mut groups: BTreeMap<Stratum, Vec<Mention>> = BTreeMap::new();
    for m in mentions {
        groups.entry(Stratum::of(m)).or_default().push(m.clone());
    }
    for (stratum, group) in groups.iter_mut() {
        group.sort_by(|a, b| a.mention_id.cmp(&b.mention_id));
        group.dedup_by(|a, b| a.mention_id == b.mention_id);
        let cap = plan.cap_per_stratum.max(1);
        if group.len() <= cap || plan.exempt.contains(stratum) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(plan.stratum_seed(stratum));
        let mut picked = rand::seq::index::sample(&mut rng, group.len(), cap).into_vec();
        picked.sort_unstable();
        *group = picked.into_iter().map(|i| group[i].clone()).collect();
    }
    groups
}
