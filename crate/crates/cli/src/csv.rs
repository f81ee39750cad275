//! Sweep tables as CSV with a `#` metadata header.
//!
//! Numbers use Rust's shortest round-trip formatting, so parsing a field
//! back gives the identical `f64`. Wall time is left out to keep the file
//! a pure function of the configuration.

use becbell::sweep::{Output, SweepResult};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

const CONFIG_BEGIN: &str = "# config:";
const CONFIG_END: &str = "# end config";

pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

pub fn render(cfg: &RunConfig, result: &SweepResult) -> String {
    let mut s = String::new();
    s.push_str(&format!("# becbell {} sweep\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# config_sha256: {}\n", config_hash(cfg)));
    s.push_str(&format!("# points: {}\n", result.metadata.points));
    s.push_str(&format!(
        "# distinct_nodes: {}\n",
        result.metadata.distinct_nodes
    ));
    s.push_str(CONFIG_BEGIN);
    s.push('\n');
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            s.push_str("#\n");
        } else {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str(CONFIG_END);
    s.push('\n');

    let outputs = &result.spec.outputs;
    let mut header: Vec<&str> = result.spec.axes.iter().map(|a| a.knob.name()).collect();
    header.extend(outputs.iter().map(|o| o.name()));
    header.extend(["stable", "error_code"]);
    s.push_str(&header.join(","));
    s.push('\n');

    for row in &result.rows {
        let mut fields: Vec<String> = row.coords.iter().map(|v| format!("{v:?}")).collect();
        for o in outputs {
            fields.push(match (&row.outcome, o) {
                (Ok(p), Output::Discord) => format!("{:?}", p.discord),
                (Ok(p), Output::LogNegativity) => format!("{:?}", p.log_negativity),
                (Err(_), _) => String::new(),
            });
        }
        fields.push(row.stable.to_string());
        fields.push(
            row.outcome
                .as_ref()
                .err()
                .map_or(String::new(), |f| f.code.clone()),
        );
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// The config echoed in a CSV's metadata block.
pub fn extract_config(csv: &str) -> Option<String> {
    let mut lines = csv.lines().skip_while(|l| *l != CONFIG_BEGIN);
    lines.next()?;
    let mut out = String::new();
    for line in lines {
        if line == CONFIG_END {
            return Some(out);
        }
        out.push_str(line.strip_prefix("# ").or_else(|| line.strip_prefix('#'))?);
        out.push('\n');
    }
    None
}
