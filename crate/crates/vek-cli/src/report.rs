use std::time::Instant;

use serde_json::{json, Value};

use crate::CliError;

/// Wraps results in the standard report envelope and writes them.
///
/// Wall time is reported in whole seconds so that repeated runs of the same
/// fast configuration stay byte-identical.
pub fn write(
    path: &str,
    seed: u64,
    config: Value,
    results: Value,
    started: Instant,
) -> Result<(), CliError> {
    let report = json!({
        "tool_version": vek_core::TOOL_VERSION,
        "seed": seed,
        "config": config,
        "wall_time_s": started.elapsed().as_secs(),
        "results": results,
    });
    vek_core::dataio::write_report(&report, path)?;
    Ok(())
}
