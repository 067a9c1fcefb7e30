/// Lowercased runs of alphanumeric characters (apostrophes kept inside words).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        let inner_apostrophe = (c == '\'' || c == '\u{2019}')
            && !current.is_empty()
            && chars.peek().is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_apostrophe {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Indices of the first `k` distinct candidates mentioned in `text`, in the
/// order they are first uttered. Candidates match as whole tokens or
/// contiguous token runs; the longest match wins at each position.
pub fn first_mentions(text: &str, candidates: &[String], k: usize) -> Vec<usize> {
    let tokens = tokenize(text);
    let cand_tokens: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
    let mut found: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < tokens.len() && found.len() < k {
        let mut best: Option<(usize, usize)> = None;
        for (ci, ct) in cand_tokens.iter().enumerate() {
            if ct.is_empty() || i + ct.len() > tokens.len() || tokens[i..i + ct.len()] != ct[..] {
                continue;
            }
            let better = match best {
                None => true,
                // Ties between equal-length candidates go to the lexically
                // smaller one, independent of candidate order.
                Some((bi, len)) => ct.len() > len || (ct.len() == len && candidates[ci] < candidates[bi]),
            };
            if better {
                best = Some((ci, ct.len()));
            }
        }
        match best {
            Some((ci, len)) => {
                let dup = found.iter().any(|&f| cand_tokens[f] == cand_tokens[ci]);
                if !dup {
                    found.push(ci);
                }
                i += len;
            }
            None => i += 1,
        }
    }
    found
}

/// First two distinct candidates uttered, in utterance order.
pub fn extract_answer_wc(raw_text: &str, candidates: &[String]) -> Option<[String; 2]> {
    match first_mentions(raw_text, candidates, 2)[..] {
        [a, b] => Some([candidates[a].clone(), candidates[b].clone()]),
        _ => None,
    }
}

/// First choice uttered.
pub fn extract_answer_def(raw_text: &str, choices: &[String]) -> Option<String> {
    first_mentions(raw_text, choices, 1).first().map(|&i| choices[i].clone())
}
