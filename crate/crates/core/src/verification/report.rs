//! Suite selection and report rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::VerifyConfig;
use super::correctness::{run_correctness, CorrectnessReport};
use super::features::{compare_protocols, Bound, ComparisonReport, Feature, FeatureEntry};
use super::sweep::Executor;
use super::transport_check::{verify_transport, NetworkCheck, TransportReport};
use super::VerifyError;
use crate::transport::ProtocolKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Correctness,
    Features,
    Transport,
    All,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Correctness => "correctness",
            Suite::Features => "features",
            Suite::Transport => "transport",
            Suite::All => "all",
        }
    }

    fn includes(self, part: Suite) -> bool {
        self == Suite::All || self == part
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown suite {0:?}; expected correctness, features, transport or all")]
pub struct UnknownSuite(pub String);

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correctness" => Ok(Suite::Correctness),
            "features" => Ok(Suite::Features),
            "transport" => Ok(Suite::Transport),
            "all" => Ok(Suite::All),
            other => Err(UnknownSuite(other.to_string())),
        }
    }
}

/// Everything a `verify` run found. Contains no timings, ports or thread
/// counts, so the same seed and config always serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub config: VerifyConfig,
    pub correctness: Option<CorrectnessReport>,
    pub features: Option<ComparisonReport>,
    pub transport: Option<TransportReport>,
    pub pass: bool,
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<VerificationReport, VerifyError> {
    let exec = Executor::new(cfg.jobs)?;
    let correctness = suite
        .includes(Suite::Correctness)
        .then(|| run_correctness(&exec, cfg))
        .transpose()?;
    let features = suite
        .includes(Suite::Features)
        .then(|| compare_protocols(&exec, cfg))
        .transpose()?;
    let transport = suite.includes(Suite::Transport).then(|| verify_transport(cfg)).transpose()?;
    let pass = correctness.as_ref().is_none_or(|r| r.pass)
        && features.as_ref().is_none_or(|r| r.pass)
        && transport.as_ref().is_none_or(|r| r.pass);
    Ok(VerificationReport {
        suite,
        config: cfg.clone(),
        correctness,
        features,
        transport,
        pass,
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn escape_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 || v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else if v.abs() >= 1e-3 && v.abs() < 1e6 {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

fn fmt_bound(b: &Bound) -> String {
    match *b {
        Bound::AtMost { limit } => format!("<= {}", fmt_value(limit)),
        Bound::Above { limit } => format!("> {}", fmt_value(limit)),
        Bound::Equals { value } => format!("= {}", fmt_value(value)),
        Bound::Within { low, high } => format!("[{}, {}]", fmt_value(low), fmt_value(high)),
        Bound::Reported => "(reported)".into(),
    }
}

fn protocol_name(p: ProtocolKind) -> &'static str {
    match p {
        ProtocolKind::Classical => "classical",
        ProtocolKind::Quantum => "quantum",
    }
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is plain data");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "# Verification report\n");
        let _ = writeln!(w, "- suite: `{}`", self.suite.as_str());
        let _ = writeln!(w, "- seed: `{}`", self.config.seed);
        let _ = writeln!(w, "- trials per grid point: {}", self.config.trials_per_point);
        let _ = writeln!(w, "- overall: **{}**\n", verdict(self.pass));
        if let Some(c) = &self.correctness {
            render_correctness(w, c);
        }
        if let Some(f) = &self.features {
            render_features(w, f);
        }
        if let Some(t) = &self.transport {
            render_transport(w, t);
        }
        out
    }
}

fn render_correctness(w: &mut String, c: &CorrectnessReport) {
    let _ = writeln!(w, "## Correctness ({})\n", verdict(c.pass));
    let _ = writeln!(w, "### Classical: Bob's Heads frequency\n");
    let _ = writeln!(w, "| x | trials | estimate | CI (z = {}) | pass band | result |", c.classical.results.first().map_or(0.0, |r| r.z));
    let _ = writeln!(w, "|---|---|---|---|---|---|");
    for r in &c.classical.results {
        let _ = writeln!(
            w,
            "| {} | {} | {:.6} | [{:.6}, {:.6}] | {} +/- {:.6} | {} |",
            r.target, r.trials, r.point_estimate, r.ci_low, r.ci_high, r.target, r.tolerance, verdict(r.pass)
        );
    }
    let _ = writeln!(
        w,
        "\nTeleportation invariant (Bob's final face = Charlie's face): {} violations in {} trials. \
         Enumerated branches agree: {}.\n",
        c.classical.invariant_violations,
        c.classical.trials_total,
        verdict(c.oracle.iter().all(|o| o.invariant_holds))
    );
    let q = &c.quantum;
    let _ = writeln!(w, "### Quantum: forced outcomes\n");
    let _ = writeln!(w, "| states | branches | max 1 - F | max abs(p - 1/4) | tolerance | result |");
    let _ = writeln!(w, "|---|---|---|---|---|---|");
    let _ = writeln!(
        w,
        "| {} | {} | {} | {} | {} | {} |\n",
        q.states,
        q.branches_checked,
        fmt_value(q.max_fidelity_deficit),
        fmt_value(q.max_probability_deviation),
        fmt_value(q.tolerance),
        verdict(q.pass)
    );
    let t = &c.tomography;
    let _ = writeln!(w, "### Ensemble tomography\n");
    let _ = writeln!(
        w,
        "RMS error at M = {}: {:.6} (binomial {:.6}); at M = {}: {:.6}. Ratio {:.4}, expected {:.4} within [{:.4}, {:.4}] over {} repetitions: {}.\n",
        t.small_ensemble,
        t.rms_small,
        t.expected_rms_small,
        t.large_ensemble,
        t.rms_large,
        t.ratio,
        t.expected_ratio,
        t.ratio_low,
        t.ratio_high,
        t.repetitions,
        verdict(t.pass)
    );
    let o = &c.observable;
    let classical: Vec<String> = o.classical.iter().map(|(x, e)| format!("x = {x}: {e}")).collect();
    let _ = writeln!(w, "### Deterministic observable\n");
    let _ = writeln!(
        w,
        "Pure states with a certain-outcome measurement: {}/{}. Classical states: {}. {}.\n",
        o.pure_with_observable,
        o.pure_states,
        classical.join(", "),
        verdict(o.pass)
    );
}

fn render_features(w: &mut String, f: &ComparisonReport) {
    let _ = writeln!(w, "## Features ({})\n", verdict(f.pass));
    let _ = writeln!(w, "| feature | classical | quantum |");
    let _ = writeln!(w, "|---|---|---|");
    let cell = |e: Option<&FeatureEntry>| {
        e.map_or_else(
            || "-".to_string(),
            |e| {
                let evidence = format!("{:?}", e.evidence).to_lowercase();
                escape_cell(&format!("{} ({evidence}): {}", verdict(e.pass), e.headline))
            },
        )
    };
    for feature in Feature::ALL {
        let _ = writeln!(
            w,
            "| ({}) {} | {} | {} |",
            feature.letter(),
            feature.title(),
            cell(f.entry(feature, ProtocolKind::Classical)),
            cell(f.entry(feature, ProtocolKind::Quantum))
        );
    }
    let _ = writeln!(w, "\n| where the protocols differ | classical | quantum |");
    let _ = writeln!(w, "|---|---|---|");
    for row in &f.correspondence {
        let _ = writeln!(
            w,
            "| {} | {} | {} |",
            escape_cell(&row.aspect),
            escape_cell(&row.classical),
            escape_cell(&row.quantum)
        );
    }
    let _ = writeln!(w);
    for e in &f.entries {
        let _ = writeln!(
            w,
            "### ({}) {}, {}: {}\n",
            e.feature.letter(),
            e.feature.title(),
            protocol_name(e.protocol),
            verdict(e.pass)
        );
        let _ = writeln!(w, "Threshold: {}\n", e.threshold);
        let _ = writeln!(w, "| metric | value | bound | result |");
        let _ = writeln!(w, "|---|---|---|---|");
        for m in &e.metrics {
            let _ = writeln!(w, "| {} | {} | {} | {} |", m.name, fmt_value(m.value), fmt_bound(&m.bound), verdict(m.pass));
        }
        let _ = writeln!(w);
    }
}

fn render_network(w: &mut String, n: &NetworkCheck) {
    let _ = writeln!(
        w,
        "| {} | {} | {} | {} | {} | {} | {} |",
        protocol_name(n.protocol),
        n.trials,
        n.identical_records,
        n.alice_to_bob.frames,
        n.alice_to_bob.information_bits,
        n.alice_to_bob.wire_bytes,
        verdict(n.pass)
    );
}

fn render_transport(w: &mut String, t: &TransportReport) {
    let _ = writeln!(w, "## Transport ({})\n", verdict(t.pass));
    let _ = writeln!(
        w,
        "- frame round trip: {} generated messages, {} mismatches: {}",
        t.roundtrip.messages,
        t.roundtrip.mismatches,
        verdict(t.roundtrip.pass)
    );
    let _ = writeln!(
        w,
        "- golden frames: {}/{} exact; corrupt frames rejected as expected: {}/{}: {}",
        t.golden.matched,
        t.golden.fixtures,
        t.golden.corrupt_rejected_as_expected,
        t.golden.corrupt_fixtures,
        verdict(t.golden.pass)
    );
    let _ = writeln!(
        w,
        "- version 0x{:02x} handshake answered with reject code {}: {}\n",
        t.handshake.offered_version,
        t.handshake.reject_code.map_or("none".to_string(), |c| format!("0x{c:02x}")),
        verdict(t.handshake.pass)
    );
    let _ = writeln!(w, "| networked protocol | trials | identical to in-process | Alice->Bob frames | information bits | wire bytes | result |");
    let _ = writeln!(w, "|---|---|---|---|---|---|---|");
    render_network(w, &t.classical_network);
    render_network(w, &t.quantum_network);
    let _ = writeln!(w);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        for s in [Suite::Correctness, Suite::Features, Suite::Transport, Suite::All] {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn value_formatting_is_stable() {
        assert_eq!(fmt_value(1.0), "1");
        assert_eq!(fmt_value(0.25), "0.250000");
        assert_eq!(fmt_value(1.5e-13), "1.500e-13");
        assert_eq!(escape_cell("p(a | b)"), "p(a \\| b)");
    }
}
