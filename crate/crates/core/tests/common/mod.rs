#![allow(dead_code)]

use std::collections::HashMap;

use agealign_core::builder::{build_wc_large, BuilderConfig, Lexicon};
use agealign_core::gateway::{canned_answer, StubCompleter};
use agealign_core::model::{sub_rng, AssociationRecord, ExamItem, Relation, WcQuestion, WordEntry};
use rand::Rng;

/// `n` words `w00000..` with AoA uniform in [2, 17).
pub fn synthetic_lexicon(n: usize, seed: u64) -> Lexicon {
    let mut rng = sub_rng(seed, u64::MAX);
    Lexicon::from_entries((0..n).map(|i| {
        let aoa = (rng.random_range(2.0..17.0f64) * 100.0).round() / 100.0;
        WordEntry::new(&format!("w{i:05}"), aoa).unwrap()
    }))
}

/// `n` association records between distinct random lexicon words.
pub fn synthetic_records(n: usize, lexicon: &Lexicon, seed: u64) -> Vec<AssociationRecord> {
    let words: Vec<&str> = lexicon.entries().map(|e| e.lemma.as_str()).collect();
    let mut rng = sub_rng(seed, u64::MAX - 1);
    (0..n)
        .map(|i| {
            let a = rng.random_range(0..words.len());
            let mut b = rng.random_range(0..words.len() - 1);
            if b >= a {
                b += 1;
            }
            AssociationRecord {
                cue: words[a].to_string(),
                association: words[b].to_string(),
                relation: Relation::ALL[i % Relation::ALL.len()],
                explanation: format!("{} goes with {}", words[a], words[b]),
            }
        })
        .collect()
}

pub fn synthetic_wc(n: usize, seed: u64) -> Vec<WcQuestion> {
    let lex = synthetic_lexicon(n.max(200) / 2, seed);
    let recs = synthetic_records(n, &lex, seed);
    build_wc_large(&recs, &lex, &BuilderConfig::wc(seed)).unwrap().items
}

/// Answers correctly iff `correct(item)`, with each answer flipped with
/// probability `noise` (seeded per question position).
pub fn planted_stub<F: Fn(&ExamItem) -> bool>(items: &[ExamItem], noise: f64, seed: u64, correct: F) -> StubCompleter {
    let map: HashMap<String, String> = items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let flip = sub_rng(seed, i as u64).random_bool(noise);
            (it.id().to_string(), canned_answer(it, correct(it) != flip))
        })
        .collect();
    StubCompleter::from_map(map)
}
