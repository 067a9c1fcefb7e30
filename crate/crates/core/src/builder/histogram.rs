use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use crate::model::WcQuestion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramKey {
    /// Each gold word's own AoA (two counts per question).
    Word,
    /// The question's pair AoA.
    Pair,
}

/// Counts by integer-truncated AoA. Words or pairs with unknown AoA are
/// left out.
pub fn aoa_histogram(questions: &[WcQuestion], key: HistogramKey, lexicon: &Lexicon) -> BTreeMap<u32, u64> {
    let mut hist = BTreeMap::new();
    let mut add = |aoa: f64| *hist.entry(aoa.trunc() as u32).or_insert(0) += 1;
    for q in questions {
        match key {
            HistogramKey::Pair => {
                if let Some(a) = q.pair_aoa {
                    add(a);
                }
            }
            HistogramKey::Word => {
                for w in &q.gold_pair {
                    if let Some(a) = lexicon.aoa(w) {
                        add(a);
                    }
                }
            }
        }
    }
    hist
}
