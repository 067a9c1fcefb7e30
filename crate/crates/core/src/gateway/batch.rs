use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::client::{Completer, Completion, CompletionRequest};
use super::GatewayError;
use crate::model::SamplingConfig;

/// Complete `(question_id, prompt)` pairs with at most `max_in_flight`
/// requests outstanding. Results come back sorted by question id.
pub fn complete_batch<C: Completer + ?Sized>(
    completer: &C,
    requests: &[(String, String)],
    sampling: &SamplingConfig,
    max_in_flight: usize,
) -> Vec<(String, Result<Completion, GatewayError>)> {
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(requests.len()));
    let workers = max_in_flight.max(1).min(requests.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((id, prompt)) = requests.get(i) else { break };
                let req = CompletionRequest { question_id: id, prompt, sampling };
                let res = completer.complete(&req);
                results.lock().expect("results lock").push((id.clone(), res));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by(|a, b| a.0.cmp(&b.0));
    results
}
