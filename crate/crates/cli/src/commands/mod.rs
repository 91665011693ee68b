//! One module per subcommand.

pub mod bench;
pub mod eval;
pub mod pipeline;
pub mod report;
pub mod scenes;
pub mod simulate;
pub mod train;

use crate::Outcome;

/// Print per-item failures and count them.
pub(crate) fn collect<T>(results: Vec<(String, anyhow::Result<T>)>) -> (Vec<(String, T)>, Outcome) {
    let mut ok = Vec::with_capacity(results.len());
    let mut outcome = Outcome::default();
    for (id, r) in results {
        match r {
            Ok(v) => {
                outcome.processed += 1;
                ok.push((id, v));
            }
            Err(e) => {
                outcome.failed += 1;
                eprintln!("error: {id}: {e:#}");
            }
        }
    }
    (ok, outcome)
}
