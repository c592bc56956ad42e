//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns plain strings (JSON or JSONL) so the same
//! functions can be exercised by native tests.

use serde_json::json;
use wasm_bindgen::prelude::*;

use vplb_core::algorithms::AlgorithmSpec;
use vplb_core::exactnum::format_ratio;
use vplb_core::harness::bounds::bounds;
use vplb_core::harness::trace::{read_records, write_records};
use vplb_core::harness::verify::verify_records;
use vplb_core::harness::run;
use vplb_core::strategies::StrategyConfig;

const MAX_ROWS: usize = 5000;

/// Lower-bound table for `d_min..=d_max` as a JSON array.
#[wasm_bindgen]
pub fn bounds_table(d_min: usize, d_max: usize) -> Result<String, String> {
    if d_min < 2 || d_min > d_max {
        return Err("need 2 <= d_min <= d_max".into());
    }
    if d_max - d_min >= MAX_ROWS {
        return Err(format!("at most {MAX_ROWS} dimensions per request"));
    }
    serde_json::to_string(&bounds(d_min, d_max)).map_err(|e| e.to_string())
}

/// Plays one construction against one built-in algorithm.
///
/// `config` is a strategy object such as `{"strategy":"d3","n":8,"k":8}`.
/// Returns `{"report": ..., "trace": "<jsonl>"}`.
#[wasm_bindgen]
pub fn run_adversary(config: &str, algorithm: &str) -> Result<String, String> {
    let cfg: StrategyConfig = serde_json::from_str(config).map_err(|e| format!("bad strategy: {e}"))?;
    let alg: AlgorithmSpec = algorithm.parse().map_err(|e| format!("bad algorithm: {e}"))?;
    if matches!(alg, AlgorithmSpec::External(_)) {
        return Err("external algorithms need the command-line tool".into());
    }
    let outcome = run(&cfg, &alg, false).map_err(|e| e.to_string())?;
    let mut trace = Vec::new();
    write_records(&mut trace, &outcome.records).map_err(|e| e.to_string())?;
    let trace = String::from_utf8(trace).map_err(|e| e.to_string())?;
    serde_json::to_string(&json!({ "report": outcome.report(), "trace": trace })).map_err(|e| e.to_string())
}

/// Re-checks a JSONL trace. On success returns a short JSON summary; on
/// failure the error lists the violations, one per line.
#[wasm_bindgen]
pub fn verify_trace(jsonl: &str) -> Result<String, String> {
    let records = read_records(jsonl.as_bytes()).map_err(|e| e.to_string())?;
    match verify_records(&records) {
        Ok(cert) => serde_json::to_string(&json!({
            "strategy": cert.strategy,
            "algorithm": cert.algorithm,
            "checks": cert.checks.len(),
            "certified_ratio": format_ratio(&cert.certified_ratio),
            "guaranteed_bound": format_ratio(&cert.guaranteed_bound),
        }))
        .map_err(|e| e.to_string()),
        Err(vs) => Err(vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")),
    }
}
