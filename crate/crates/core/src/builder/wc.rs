use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::lexicon::{pair_aoa, Lexicon};
use super::{BuildWarning, BuilderConfig, BuilderError, Built};
use crate::model::{sub_rng, AssociationRecord, UnorderedPair, WcQuestion};

/// Sorted distinct association words (cues are not included).
pub fn distractor_pool(records: &[AssociationRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| r.association.to_lowercase())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// One question per record: the gold (cue, association) pair plus
/// `n_distractors` association words, shuffled. Record `i` draws from
/// sub-stream `i` of the seed, so output does not depend on scheduling.
pub fn build_wc_large(
    records: &[AssociationRecord],
    lexicon: &Lexicon,
    config: &BuilderConfig,
) -> Result<Built<WcQuestion>, BuilderError> {
    config.validate()?;
    let pool = distractor_pool(records);
    if pool.len() < config.n_distractors + 2 {
        return Err(BuilderError::TooFewWords { needed: config.n_distractors + 2, found: pool.len() });
    }
    let gold: HashSet<UnorderedPair> =
        records.iter().map(|r| UnorderedPair::folded(&r.cue, &r.association)).collect();

    let mut items = Vec::new();
    let mut warnings = Vec::new();
    'records: for (index, rec) in records.iter().enumerate() {
        if let Err(e) = rec.validate() {
            warnings.push(BuildWarning::InvalidRecord { index, reason: e.to_string() });
            continue;
        }
        let cue = rec.cue.to_lowercase();
        let assoc = rec.association.to_lowercase();
        let aoa = match pair_aoa(&cue, &assoc, lexicon) {
            Ok(a) => Some(a),
            Err(BuilderError::UnknownAoa(word)) if config.aoa_required => {
                warnings.push(BuildWarning::UnknownAoa { index, word });
                continue;
            }
            Err(BuilderError::UnknownAoa(_)) => None,
            Err(e) => return Err(e),
        };

        let mut rng = sub_rng(config.seed, index as u64);
        let mut distractors: Vec<String> = Vec::with_capacity(config.n_distractors);
        for _ in 0..config.n_distractors {
            let mut found = None;
            for _ in 0..config.max_attempts {
                let cand = &pool[rng.random_range(0..pool.len())];
                let rejected = *cand == cue
                    || *cand == assoc
                    || distractors.contains(cand)
                    || (config.overlap_filter
                        && (gold.contains(&UnorderedPair::new(cand.as_str(), cue.as_str()))
                            || gold.contains(&UnorderedPair::new(cand.as_str(), assoc.as_str()))));
                if !rejected {
                    found = Some(cand.clone());
                    break;
                }
            }
            match found {
                Some(d) => distractors.push(d),
                None => {
                    warnings.push(BuildWarning::PoolExhausted { index });
                    continue 'records;
                }
            }
        }

        let id = format!("wc-{index:06}");
        for (i, a) in distractors.iter().enumerate() {
            for b in &distractors[i + 1..] {
                if gold.contains(&UnorderedPair::new(a.as_str(), b.as_str())) {
                    warnings.push(BuildWarning::DistractorOverlap {
                        id: id.clone(),
                        pair: [a.clone(), b.clone()],
                    });
                }
            }
        }

        let mut words = vec![cue.clone(), assoc.clone()];
        words.extend(distractors);
        words.shuffle(&mut rng);
        items.push(WcQuestion {
            id,
            words_presented: words,
            gold_pair: [cue, assoc],
            pair_aoa: aoa,
            relation: rec.relation,
            explanation: rec.explanation.clone(),
            feature_annotations: None,
        });
    }
    Ok(Built::new(items, warnings))
}
