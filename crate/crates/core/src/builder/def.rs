use rand::seq::SliceRandom;
use rand::Rng;

use super::lexicon::Lexicon;
use super::{BuilderConfig, BuilderError, Built};
use crate::model::{sub_rng, DefQuestion};

/// One multiple-choice question per defined lexicon word. Distractors are
/// drawn uniformly from the whole lexicon, with no AoA matching.
pub fn build_def_test(lexicon: &Lexicon, config: &BuilderConfig) -> Result<Built<DefQuestion>, BuilderError> {
    config.validate()?;
    let words: Vec<&str> = lexicon.entries().map(|e| e.lemma.as_str()).collect();
    let defined: Vec<_> = lexicon.entries().filter(|e| e.definition.is_some()).collect();
    let needed = config.n_distractors + 1;
    if defined.len() < needed {
        return Err(BuilderError::TooFewWords { needed, found: defined.len() });
    }

    let mut items = Vec::with_capacity(defined.len());
    for (index, entry) in defined.iter().enumerate() {
        let mut rng = sub_rng(config.seed, index as u64);
        let target = entry.lemma.as_str();
        let mut choices: Vec<String> = vec![target.to_string()];
        let mut attempts = 0;
        while choices.len() < needed && attempts < config.max_attempts * config.n_distractors {
            attempts += 1;
            let cand = words[rng.random_range(0..words.len())];
            if !choices.iter().any(|c| c == cand) {
                choices.push(cand.to_string());
            }
        }
        // Unlucky streak: fill from lexicon order so the build stays total.
        for cand in &words {
            if choices.len() >= needed {
                break;
            }
            if !choices.iter().any(|c| c == cand) {
                choices.push(cand.to_string());
            }
        }
        choices.shuffle(&mut rng);
        items.push(DefQuestion {
            id: format!("def-{index:06}"),
            target: target.to_string(),
            definition: entry.definition.clone().expect("filtered to defined words"),
            choices,
            aoa: entry.aoa_years,
        });
    }
    Ok(Built::new(items, Vec::new()))
}
