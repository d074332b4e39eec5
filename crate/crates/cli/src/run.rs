//! The `run` subcommand.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::Context;
use ctel_core::classical_protocol::{run_trial, TrialRecord};
use ctel_core::epistemic_state::PreparationMode;
use ctel_core::quantum_protocol::{run_quantum_trial, BellOutcome, PureState, QuantumInput, QuantumTrialRecord};
use ctel_core::rng::SeedSchedule;
use ctel_core::transport::{Coordinator, LinkStats, ProtocolKind, TrialLink};
use ctel_core::verification::MonteCarloResult;
use ctel_core::{Party, ProtocolError};

use crate::{RunArgs, RunProtocol, Transport, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

enum Driver {
    InProcess(TrialLink),
    Tcp(Coordinator),
}

impl Driver {
    fn open(args: &RunArgs, protocol: ProtocolKind) -> anyhow::Result<Self> {
        Ok(match args.transport {
            Transport::Inprocess => Driver::InProcess(TrialLink::new(args.seed)),
            Transport::Tcp => Driver::Tcp(
                Coordinator::connect(&args.endpoints.to_endpoints(), args.seed, protocol)
                    .context("connecting to the party servers")?,
            ),
        })
    }

    fn classical(
        &mut self,
        x: f64,
        mode: PreparationMode,
        schedule: &SeedSchedule,
        t: u64,
    ) -> Result<TrialRecord, ProtocolError> {
        match self {
            Driver::InProcess(link) => run_trial(x, mode, link, schedule, t),
            Driver::Tcp(c) => c.run_classical_trial(x, mode, schedule, t),
        }
    }

    fn quantum(&mut self, input: &QuantumInput, schedule: &SeedSchedule, t: u64) -> Result<QuantumTrialRecord, ProtocolError> {
        match self {
            Driver::InProcess(link) => run_quantum_trial(input, link, schedule, t),
            Driver::Tcp(c) => c.run_quantum_trial(input, schedule, t),
        }
    }

    fn alice_to_bob(&self) -> LinkStats {
        match self {
            Driver::InProcess(link) => link.bus().stats(Party::Alice, Party::Bob),
            Driver::Tcp(c) => c.alice_to_bob(),
        }
    }

    fn close(self) -> anyhow::Result<()> {
        if let Driver::Tcp(c) = self {
            c.teardown().context("tearing down the session")?;
        }
        Ok(())
    }
}

/// Where per-trial records go, and where the summary goes as a result.
struct Output {
    log: Option<Box<dyn Write>>,
    summary: Box<dyn Write>,
}

impl Output {
    fn open(args: &RunArgs) -> anyhow::Result<Self> {
        Ok(match (&args.log, args.no_log) {
            (_, true) => Output {
                log: None,
                summary: Box::new(io::stdout()),
            },
            (Some(path), _) => Output {
                log: Some(Box::new(BufWriter::new(
                    File::create(path).with_context(|| format!("creating {}", path.display()))?,
                ))),
                summary: Box::new(io::stdout()),
            },
            (None, _) => Output {
                log: Some(Box::new(BufWriter::new(io::stdout()))),
                summary: Box::new(io::stderr()),
            },
        })
    }

    fn record<T: serde::Serialize>(&mut self, rec: &T) -> anyhow::Result<()> {
        if let Some(log) = &mut self.log {
            serde_json::to_writer(&mut *log, rec)?;
            log.write_all(b"\n")?;
        }
        Ok(())
    }

    fn finish_log(&mut self) -> anyhow::Result<()> {
        if let Some(log) = &mut self.log {
            log.flush()?;
        }
        Ok(())
    }
}

pub fn run(protocol: RunProtocol) -> anyhow::Result<u8> {
    match protocol {
        RunProtocol::Classical { x, mode, common } => run_classical(x, mode.into(), &common),
        RunProtocol::Quantum { state, common } => {
            let input = match parse_state(&state) {
                Ok(input) => input,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return Ok(EXIT_USAGE);
                }
            };
            run_quantum(&input, &common)
        }
    }
}

fn report_violation<T: serde::Serialize>(out: &mut Output, err: &ProtocolError, rec: &T) -> anyhow::Result<u8> {
    out.record(rec)?;
    out.finish_log()?;
    eprintln!("invariant violated: {err}");
    eprintln!("{}", serde_json::to_string(rec)?);
    Ok(EXIT_FAILURE)
}

fn run_classical(x: f64, mode: PreparationMode, args: &RunArgs) -> anyhow::Result<u8> {
    let schedule = SeedSchedule::new(args.seed);
    let mut out = Output::open(args)?;
    let mut driver = Driver::open(args, ProtocolKind::Classical)?;
    let mut heads = 0u64;
    let mut bits = 0u64;
    for t in 0..args.trials {
        let rec = match driver.classical(x, mode, &schedule, t) {
            Ok(rec) => rec,
            Err(e @ ProtocolError::InvariantViolated(_)) => {
                let ProtocolError::InvariantViolated(rec) = &e else { unreachable!() };
                return report_violation(&mut out, &e, rec.as_ref());
            }
            Err(e) => return Err(e).with_context(|| format!("trial {t}")),
        };
        heads += u64::from(rec.bob_final_face.is_heads());
        bits += u64::from(rec.bits_sent);
        out.record(&rec)?;
    }
    out.finish_log()?;
    let wire = driver.alice_to_bob();
    driver.close()?;

    let mc = MonteCarloResult::binomial(heads, args.trials, x, args.z);
    let s = &mut out.summary;
    writeln!(s, "protocol: classical ({} preparation, {} transport)", mode_name(mode), args.transport_name())?;
    writeln!(s, "trials: {}  seed: {}", args.trials, args.seed)?;
    writeln!(s, "bob heads frequency: {:.6} (target x = {x})", mc.point_estimate)?;
    writeln!(s, "confidence interval (z = {}): [{:.6}, {:.6}]", args.z, mc.ci_low, mc.ci_high)?;
    writeln!(
        s,
        "target band x +/- z*sigma: [{:.6}, {:.6}] {}",
        x - mc.tolerance,
        x + mc.tolerance,
        if mc.pass { "contains the estimate" } else { "MISSES the estimate" }
    )?;
    writeln!(s, "invariant violations: 0")?;
    writeln!(s, "bits/trial: {}", bits as f64 / args.trials as f64)?;
    writeln!(s, "alice->bob frames: {}  wire bytes: {}", wire.frames, wire.wire_bytes)?;
    Ok(EXIT_OK)
}

fn run_quantum(input: &QuantumInput, args: &RunArgs) -> anyhow::Result<u8> {
    let schedule = SeedSchedule::new(args.seed);
    let mut out = Output::open(args)?;
    let mut driver = Driver::open(args, ProtocolKind::Quantum)?;
    let mut outcomes = [0u64; 4];
    let mut bits = 0u64;
    let mut min_fidelity = f64::INFINITY;
    let mut min_pre = f64::INFINITY;
    for t in 0..args.trials {
        let rec = match driver.quantum(input, &schedule, t) {
            Ok(rec) => rec,
            Err(e @ ProtocolError::FidelityDeficit(_)) => {
                let ProtocolError::FidelityDeficit(rec) = &e else { unreachable!() };
                return report_violation(&mut out, &e, rec.as_ref());
            }
            Err(e) => return Err(e).with_context(|| format!("trial {t}")),
        };
        outcomes[usize::from(rec.outcome.bits())] += 1;
        bits += u64::from(rec.bits_sent);
        min_fidelity = min_fidelity.min(rec.fidelity);
        min_pre = min_pre.min(rec.pre_correction_fidelity);
        out.record(&rec)?;
    }
    out.finish_log()?;
    let wire = driver.alice_to_bob();
    driver.close()?;

    let n = args.trials as f64;
    let s = &mut out.summary;
    let state = match input {
        QuantumInput::Random => "Haar-random per trial".to_string(),
        QuantumInput::Given(psi) => format!("{:?}", psi.to_reals()),
    };
    writeln!(s, "protocol: quantum ({} transport)", args.transport_name())?;
    writeln!(s, "state: {state}")?;
    writeln!(s, "trials: {}  seed: {}", args.trials, args.seed)?;
    writeln!(s, "min fidelity: {min_fidelity:.15}")?;
    writeln!(s, "min fidelity of Bob's state to U_outcome psi before correction: {min_pre:.15}")?;
    for o in BellOutcome::ALL {
        let k = outcomes[usize::from(o.bits())];
        let p = k as f64 / n;
        let half = args.z * (p * (1.0 - p) / n).sqrt();
        writeln!(s, "outcome {o:?}: {:.6} [{:.6}, {:.6}]", p, (p - half).max(0.0), (p + half).min(1.0))?;
    }
    writeln!(s, "invariant violations: 0")?;
    writeln!(s, "bits/trial: {}", bits as f64 / n)?;
    writeln!(s, "alice->bob frames: {}  wire bytes: {}", wire.frames, wire.wire_bytes)?;
    Ok(EXIT_OK)
}

impl RunArgs {
    fn transport_name(&self) -> &'static str {
        match self.transport {
            Transport::Inprocess => "in-process",
            Transport::Tcp => "tcp",
        }
    }
}

fn mode_name(mode: PreparationMode) -> &'static str {
    match mode {
        PreparationMode::Direct => "direct",
        PreparationMode::Ensemble => "ensemble",
    }
}

/// `random`, or four reals separated by commas or whitespace.
fn parse_state(s: &str) -> Result<QuantumInput, String> {
    if s.trim().eq_ignore_ascii_case("random") {
        return Ok(QuantumInput::Random);
    }
    let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    let reals: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| format!("bad amplitude {p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let reals: [f64; 4] = reals
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 reals re(a),im(a),re(b),im(b); got {}", v.len()))?;
    let (psi, adjusted) = PureState::from_reals(reals).map_err(|e| e.to_string())?;
    if adjusted {
        eprintln!("warning: state norm was not exactly 1; normalized to {:?}", psi.to_reals());
    }
    Ok(QuantumInput::Given(psi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_spec_parsing() {
        assert_eq!(parse_state("random"), Ok(QuantumInput::Random));
        assert!(matches!(parse_state("0.6,0,0.8,0"), Ok(QuantumInput::Given(_))));
        assert!(matches!(parse_state("0.6 0 0.8 0"), Ok(QuantumInput::Given(_))));
        assert!(matches!(parse_state("1,0,0,1e-8"), Ok(QuantumInput::Given(_))));
        assert!(parse_state("1,0,0,0.1").is_err());
        assert!(parse_state("1,0,0").is_err());
        assert!(parse_state("a,b,c,d").is_err());
    }
}
