//! Acceptance suite. Each criterion prints one PASS/FAIL line to stderr
//! (uncaptured) and the test fails if any criterion fails.
//!
//! Expected values come from oracles written here: binomial bands, a small
//! state-vector calculation of the teleportation branches, and the in-process
//! run as the reference for the networked one.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use ctel_core::classical_protocol::{run_trial, ClassicalOutcome, TrialRecord};
use ctel_core::epistemic_state::{estimate_state, prepare_state, ClassicalState, PreparationMode};
use ctel_core::events::EventKind;
use ctel_core::quantum_protocol::{
    apply_correction, compose, deterministic_observable_exists, outcome_probabilities, prepare_epr, project_onto,
    reduced_density, reduced_density_of, run_quantum_trial, BellOutcome, DensityMatrix, PureState, QuantumInput,
};
use ctel_core::rng::{SeedSchedule, StreamLabel};
use ctel_core::transport::golden::golden_frames;
use ctel_core::transport::message::decode;
use ctel_core::transport::TrialLink;
use ctel_core::verification::{
    chi_square_uniform, classical_state_at_precision, haar_states, mutual_information, quantum_state_at_precision,
    random_message,
};
use ctel_core::Party;
use num_complex::Complex64;

const CTEL: &str = env!("CARGO_BIN_EXE_ctel");
const TOL: f64 = 1e-12;
const Z: f64 = 3.0;
const SEED: u64 = 42;
const TRIALS: u64 = 100_000;
const GRID: [f64; 6] = [0.0, 0.25, 0.3, 0.5, 0.75, 1.0];
const MI_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

struct Outcome {
    results: Vec<(u8, bool)>,
}

impl Outcome {
    fn record(&mut self, criterion: u8, pass: bool, detail: impl AsRef<str>) {
        let line = format!(
            "criterion {criterion:>2}: {}  {}\n",
            if pass { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
        // Written straight to the stream so it shows without --nocapture.
        let _ = std::io::stderr().write_all(line.as_bytes());
        self.results.push((criterion, pass));
    }
}

// ---------------------------------------------------------------- classical

#[derive(Default)]
struct PointCounts {
    trials: u64,
    bob_heads: u64,
    teleported: u64,
    same: u64,
    heads_at_measure_given_same: u64,
    heads_at_measure_given_diff: u64,
    opened_pair_heads: u64,
    opened_charlie_heads: u64,
    ordered: u64,
    /// Trials by outcome bit, and by the bit Bob decoded.
    outcome_bit: [u64; 2],
    message_bit: [u64; 2],
}

fn position(order: &[EventKind], kind: EventKind) -> Option<usize> {
    order.iter().position(|&e| e == kind)
}

/// measure < send < correct, located directly in the event list.
fn ordered(order: &[EventKind]) -> bool {
    match (
        position(order, EventKind::Measure),
        position(order, EventKind::Send),
        position(order, EventKind::Correct),
    ) {
        (Some(m), Some(s), Some(c)) => m < s && s < c,
        _ => false,
    }
}

fn sweep_point(x: f64, seed: u64) -> PointCounts {
    let schedule = SeedSchedule::new(seed);
    let link = TrialLink::new(seed);
    let mut c = PointCounts::default();
    for t in 0..TRIALS {
        let r = run_trial(x, PreparationMode::Direct, &link, &schedule, t).expect("trial runs");
        c.trials += 1;
        c.bob_heads += u64::from(r.bob_final_face.is_heads());
        c.teleported += u64::from(r.bob_final_face == r.charlie_face_at_selection);
        let same = r.alice_outcome == ClassicalOutcome::Same;
        c.same += u64::from(same);
        let h = u64::from(r.bob_face_at_measure.is_heads());
        if same {
            c.heads_at_measure_given_same += h;
        } else {
            c.heads_at_measure_given_diff += h;
        }
        c.opened_pair_heads += u64::from(r.alice_post_measurement_faces.pair.is_heads());
        c.opened_charlie_heads += u64::from(r.alice_post_measurement_faces.charlie.is_heads());
        c.ordered += u64::from(ordered(&r.event_order));
        c.outcome_bit[usize::from(!same)] += 1;
        c.message_bit[usize::from(r.message_bit)] += 1;
    }
    c
}

fn band(p: f64, n: u64) -> f64 {
    Z * (p * (1.0 - p) / n as f64).sqrt()
}

fn within(k: u64, n: u64, target: f64) -> bool {
    let f = k as f64 / n as f64;
    (f - target).abs() <= band(target, n) + 1e-12
}

/// Plug-in MI in bits from a table of counts `table[label][outcome]`.
fn plugin_mi(table: &[[u64; 2]]) -> f64 {
    let n: f64 = table.iter().flatten().sum::<u64>() as f64;
    let col: Vec<f64> = (0..2).map(|o| table.iter().map(|r| r[o]).sum::<u64>() as f64 / n).collect();
    let mut mi = 0.0;
    for row in table {
        let pr = row.iter().sum::<u64>() as f64 / n;
        for (o, &k) in row.iter().enumerate() {
            if k > 0 {
                let p = k as f64 / n;
                mi += p * (p / (pr * col[o])).log2();
            }
        }
    }
    mi
}

fn expand(table: &[[u64; 2]]) -> impl Iterator<Item = (usize, usize)> + '_ {
    table
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().enumerate().flat_map(move |(o, &k)| std::iter::repeat_n((o, l), k as usize)))
}

// ------------------------------------------------------------------ quantum

type C = Complex64;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// Bell vector over (first, second) qubits, index `2·first + second`.
fn bell_vector(o: BellOutcome) -> [C; 4] {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    let z = c(0.0);
    match o {
        BellOutcome::PhiPlus => [s, z, z, s],
        BellOutcome::PhiMinus => [s, z, z, -s],
        BellOutcome::PsiPlus => [z, s, s, z],
        BellOutcome::PsiMinus => [z, s, -s, z],
    }
}

/// Pauli that maps ψ to Bob's pre-correction state for each outcome,
/// derived by hand from |ψ⟩|Φ+⟩ rewritten in the Bell basis of the first two
/// qubits.
fn expected_transform(o: BellOutcome, psi: [C; 2]) -> [C; 2] {
    let [a, b] = psi;
    match o {
        BellOutcome::PhiPlus => [a, b],
        BellOutcome::PhiMinus => [a, -b],
        BellOutcome::PsiPlus => [b, a],
        BellOutcome::PsiMinus => [-b, a],
    }
}

/// `ψ_charlie ⊗ Φ+_{alice,bob}` projected on a Bell outcome of
/// (charlie, alice): returns the probability and Bob's unnormalized vector.
fn oracle_branch(psi: [C; 2], o: BellOutcome) -> (f64, [C; 2]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amp = |ch: usize, al: usize, bo: usize| if al == bo { psi[ch] * s } else { c(0.0) };
    let bell = bell_vector(o);
    let mut bob = [c(0.0); 2];
    for (bo, slot) in bob.iter_mut().enumerate() {
        for ch in 0..2 {
            for al in 0..2 {
                *slot += bell[2 * ch + al].conj() * amp(ch, al, bo);
            }
        }
    }
    (bob[0].norm_sqr() + bob[1].norm_sqr(), bob)
}

fn overlap2(u: [C; 2], v: [C; 2]) -> f64 {
    let nu = u[0].norm_sqr() + u[1].norm_sqr();
    let nv = v[0].norm_sqr() + v[1].norm_sqr();
    (u[0].conj() * v[0] + u[1].conj() * v[1]).norm_sqr() / (nu * nv)
}

fn amplitudes(p: &PureState) -> [C; 2] {
    [p.alpha(), p.beta()]
}

// ------------------------------------------------------------------ process

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_server(role: &str) -> (Server, String) {
    let mut child = Command::new(CTEL)
        .args(["serve", "--role", role, "--listen", "127.0.0.1:0"])
        .env_remove("CTEL_LISTEN")
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .expect("spawn ctel serve");
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().expect("piped stdout"))
        .read_line(&mut line)
        .expect("listening line");
    let addr = line.split_whitespace().last().expect("address").to_string();
    (Server(child), addr)
}

fn wait_with_timeout(server: &mut Server, limit: Duration) -> Option<std::process::ExitStatus> {
    let start = Instant::now();
    while start.elapsed() < limit {
        if let Ok(Some(status)) = server.0.try_wait() {
            return Some(status);
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    None
}

fn ctel(args: &[&str]) -> std::process::Output {
    Command::new(CTEL)
        .args(args)
        .env_remove("CTEL_SEED")
        .env_remove("CTEL_JOBS")
        .output()
        .expect("run ctel")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

// -------------------------------------------------------------------- suite

#[test]
fn acceptance() {
    let mut out = Outcome { results: Vec::new() };

    // 1 and 2: classical correctness and the per-trial invariant.
    let start = Instant::now();
    let points: BTreeMap<u64, (f64, PointCounts)> = GRID
        .iter()
        .enumerate()
        .map(|(i, &x)| (x.to_bits(), (x, sweep_point(x, SEED + i as u64))))
        .collect();
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(10);
    let mut detail = Vec::new();
    for (x, p) in points.values() {
        let pass = within(p.bob_heads, p.trials, *x);
        ok &= pass;
        detail.push(format!("x={x}: {:.5}", p.bob_heads as f64 / p.trials as f64));
    }
    out.record(1, ok, format!("{} in {:.2?}", detail.join(", "), elapsed));

    let total: u64 = points.values().map(|(_, p)| p.trials).sum();
    let teleported: u64 = points.values().map(|(_, p)| p.teleported).sum();
    // The networked run under criterion 9 adds its own records to this count.
    let mut invariant_trials = (total, teleported);

    // 3: quantum exactness over forced outcomes.
    let start = Instant::now();
    let states = haar_states(SEED, 100);
    let mut max_deficit = 0.0f64;
    let mut max_prob_dev = 0.0f64;
    let mut max_pre_deficit = 0.0f64;
    let mut max_single = 0.0f64;
    let mut max_bell = 0.0f64;
    let mut branches = 0;
    for psi in &states {
        let register = compose(psi, &prepare_epr()).expect("compose");
        let probs = outcome_probabilities(&register).expect("probabilities");
        for (k, o) in BellOutcome::ALL.into_iter().enumerate() {
            let (p_oracle, bob_oracle) = oracle_branch(amplitudes(psi), o);
            let branch = project_onto(&register, o).expect("projection");
            let corrected = apply_correction(&branch.bob_state, o);
            let target = amplitudes(psi);
            max_deficit = max_deficit.max(1.0 - overlap2(amplitudes(&corrected), target));
            max_prob_dev = max_prob_dev
                .max((probs[k] - 0.25).abs())
                .max((branch.probability - 0.25).abs())
                .max((p_oracle - 0.25).abs());
            // Pre-correction state against the hand-derived transform and the
            // oracle's own projection.
            let expected = expected_transform(o, target);
            max_pre_deficit = max_pre_deficit
                .max(1.0 - overlap2(amplitudes(&branch.bob_state), expected))
                .max(1.0 - overlap2(bob_oracle, expected));
            let alice = reduced_density(&branch.post_state, Party::Alice).expect("reduce");
            let charlie = reduced_density(&branch.post_state, Party::Charlie).expect("reduce");
            let half = DensityMatrix::maximally_mixed(2);
            max_single = max_single.max(alice.distance(&half)).max(charlie.distance(&half));
            let pair = reduced_density_of(&branch.post_state, &[Party::Charlie, Party::Alice]).expect("reduce");
            max_bell = max_bell.max(pair.distance(&DensityMatrix::projector(&bell_vector(o))));
            branches += 1;
        }
    }
    let elapsed = start.elapsed();
    out.record(
        3,
        branches == 400 && max_deficit <= TOL && max_prob_dev <= TOL && elapsed < Duration::from_secs(1),
        format!("{branches} branches, max 1-F {max_deficit:.1e}, max |p-1/4| {max_prob_dev:.1e}, {elapsed:.2?}"),
    );

    // 4: information gap.
    let mut ok = true;
    let mut detail = Vec::new();
    for digits in [1u32, 3, 6, 12] {
        let x = classical_state_at_precision(SEED, digits);
        let link = TrialLink::new(SEED);
        let schedule = SeedSchedule::new(SEED);
        let n = 1000;
        let mut all_one = true;
        for t in 0..n {
            all_one &= run_trial(x, PreparationMode::Direct, &link, &schedule, t).unwrap().bits_sent == 1;
        }
        let classical = link.bus().stats(Party::Alice, Party::Bob);

        let psi = quantum_state_at_precision(SEED, digits);
        let qlink = TrialLink::new(SEED);
        let mut all_two = true;
        for t in 0..n {
            all_two &= run_quantum_trial(&QuantumInput::Given(psi), &qlink, &schedule, t).unwrap().bits_sent == 2;
        }
        let quantum = qlink.bus().stats(Party::Alice, Party::Bob);
        let pass = all_one
            && all_two
            && classical.information_bits == n
            && classical.frames == n
            && quantum.information_bits == 2 * n
            && quantum.frames == n;
        ok &= pass;
        detail.push(format!(
            "{digits} digits: {}/{} bits",
            classical.information_bits as f64 / n as f64,
            quantum.information_bits as f64 / n as f64
        ));
    }
    let link = TrialLink::new(7);
    let schedule = SeedSchedule::new(7);
    run_trial(0.3, PreparationMode::Direct, &link, &schedule, 0).unwrap();
    run_trial(0.3, PreparationMode::Direct, &link, &schedule, 1).unwrap();
    let composed = link.bus().stats(Party::Alice, Party::Bob).information_bits;
    ok &= composed == 2;
    out.record(4, ok, format!("{}; two composed classical trials: {composed} bits", detail.join(", ")));

    // 5: ignorance.
    let grid_points: Vec<&PointCounts> = MI_GRID.iter().map(|x| &points[&x.to_bits()].1).collect();
    let outcome_table: Vec<[u64; 2]> = grid_points.iter().map(|p| p.outcome_bit).collect();
    let bit_table: Vec<[u64; 2]> = grid_points.iter().map(|p| p.message_bit).collect();
    let mi_outcome = plugin_mi(&outcome_table);
    let mi_bit = plugin_mi(&bit_table);
    let lib_mi = mutual_information(expand(&outcome_table)).unwrap();
    let mut q_dev = 0.0f64;
    for psi in &states {
        let probs = outcome_probabilities(&compose(psi, &prepare_epr()).unwrap()).unwrap();
        q_dev = q_dev.max(probs.iter().map(|p| (p - 0.25).abs()).fold(0.0, f64::max));
    }
    out.record(
        5,
        mi_outcome <= 0.01 && mi_bit <= 0.01 && (lib_mi - mi_outcome).abs() <= 1e-12 && q_dev <= TOL,
        format!("MI(outcome;x) {mi_outcome:.2e}, MI(bit;x) {mi_bit:.2e} bits; quantum max deviation {q_dev:.1e}"),
    );

    // 6: instantaneity.
    let mut ok = max_pre_deficit <= TOL;
    let mut out_of_order = 0;
    for (x, p) in points.values() {
        let diff = p.trials - p.same;
        ok &= within(p.heads_at_measure_given_same, p.same, *x);
        ok &= within(p.heads_at_measure_given_diff, diff, 1.0 - x);
        out_of_order += p.trials - p.ordered;
    }
    let schedule = SeedSchedule::new(SEED);
    let qlink = TrialLink::new(SEED);
    let mut sampled_pre = 0.0f64;
    for t in 0..1000 {
        let r = run_quantum_trial(&QuantumInput::Random, &qlink, &schedule, t).unwrap();
        sampled_pre = sampled_pre.max(1.0 - r.pre_correction_fidelity);
        let expected = expected_transform(r.outcome, amplitudes(&r.psi));
        let (_, bob) = oracle_branch(amplitudes(&r.psi), r.outcome);
        sampled_pre = sampled_pre.max(1.0 - overlap2(bob, expected));
        out_of_order += u64::from(!ordered(&r.event_order));
    }
    ok &= sampled_pre <= TOL && out_of_order == 0;
    out.record(
        6,
        ok,
        format!(
            "conditionals within 3 sigma on {} points; pre-correction deficit forced {max_pre_deficit:.1e}, sampled {sampled_pre:.1e}; {out_of_order} trials out of order",
            points.len()
        ),
    );

    // 7: erasure.
    let mut min_p = 1.0f64;
    for (_, p) in points.values() {
        for heads in [p.opened_pair_heads, p.opened_charlie_heads] {
            let counts = [heads, p.trials - heads];
            let test = chi_square_uniform(&counts);
            let half = p.trials as f64 / 2.0;
            let statistic: f64 = counts.iter().map(|&k| (k as f64 - half).powi(2) / half).sum();
            assert!((statistic - test.statistic).abs() <= 1e-9 * statistic.max(1.0));
            min_p = min_p.min(test.p_value);
        }
    }
    out.record(
        7,
        min_p > 0.001 && max_single <= TOL && max_bell <= TOL,
        format!("min chi-square p {min_p:.3}; max ||rho-I/2|| {max_single:.1e}; max Bell distance {max_bell:.1e}"),
    );

    // 8: tomography scaling and deterministic observables.
    let x = 0.3;
    let reps = 1000u64;
    let rms = |m: u64, tag: u64| {
        let schedule = SeedSchedule::new(SEED ^ tag);
        let mut sum = 0.0;
        for r in 0..reps {
            let mut rng = schedule.substream(r, StreamLabel::Harness);
            let mut boxes: Vec<_> = (0..m)
                .map(|_| prepare_state(x, PreparationMode::Direct, Party::Charlie, &mut rng).unwrap().0)
                .collect();
            let est = estimate_state(&mut boxes).unwrap();
            sum += (est - x).powi(2);
        }
        (sum / reps as f64).sqrt()
    };
    let (small, large) = (rms(1000, 1), rms(4000, 2));
    let ratio = small / large;
    let pure = states.iter().filter(|p| deterministic_observable_exists(*p)).count();
    let mixed_any = [0.1, 0.5, 0.9]
        .iter()
        .any(|&x| deterministic_observable_exists(&ClassicalState::new(x, Party::Charlie).unwrap()));
    out.record(
        8,
        (1.6..=2.4).contains(&ratio) && pure == 100 && !mixed_any,
        format!("RMS {small:.5} -> {large:.5} (ratio {ratio:.3}); observable for {pure}/100 pure, none for x in {{.1,.5,.9}}: {}", !mixed_any),
    );

    // 9: transport equivalence.
    let dir = tempfile::tempdir().unwrap();
    let (mut alice, a_addr) = spawn_server("alice");
    let (mut bob, b_addr) = spawn_server("bob");
    let (mut charlie, c_addr) = spawn_server("charlie");
    let net_log = dir.path().join("net.ndjson");
    let run = Command::new(CTEL)
        .args(["run", "classical", "--x", "0.3", "--trials", "1000", "--seed", "42", "--transport", "tcp"])
        .args(["--alice", &a_addr, "--bob", &b_addr, "--charlie", &c_addr])
        .arg("--log")
        .arg(&net_log)
        .output()
        .expect("run driver");
    let servers_ok = [&mut alice, &mut bob, &mut charlie]
        .into_iter()
        .all(|s| wait_with_timeout(s, Duration::from_secs(10)).is_some_and(|st| st.success()));
    let net_lines: Vec<String> = String::from_utf8(read(&net_log)).unwrap().lines().map(str::to_string).collect();
    let schedule = SeedSchedule::new(SEED);
    let link = TrialLink::new(SEED);
    let reference: Vec<TrialRecord> =
        (0..1000).map(|t| run_trial(0.3, PreparationMode::Direct, &link, &schedule, t).unwrap()).collect();
    let identical = net_lines.len() == reference.len()
        && net_lines.iter().zip(&reference).all(|(line, rec)| {
            serde_json::from_str::<TrialRecord>(line).ok().as_ref() == Some(rec)
                && *line == serde_json::to_string(rec).unwrap()
        });
    let net_records: Vec<TrialRecord> = net_lines.iter().filter_map(|l| serde_json::from_str(l).ok()).collect();
    invariant_trials.0 += net_records.len() as u64;
    invariant_trials.1 += net_records.iter().filter(|r| r.teleported()).count() as u64;

    let roundtrip_schedule = SeedSchedule::new(SEED);
    let roundtrips = (0..10_000u64)
        .filter(|&i| {
            let m = random_message(&mut roundtrip_schedule.substream(i, StreamLabel::Harness));
            let bytes = m.encode();
            matches!(decode(&bytes), Ok((back, used)) if back == m && used == bytes.len())
        })
        .count();
    let golden = golden_frames();
    let golden_ok = golden.iter().all(|g| g.message.encode() == g.bytes);
    out.record(
        9,
        run.status.success() && servers_ok && identical && roundtrips == 10_000 && golden_ok,
        format!(
            "3-process run exit {:?}, servers clean: {servers_ok}, {} records identical: {identical}; {roundtrips}/10000 round trips; {} golden frames match: {golden_ok}",
            run.status.code(),
            net_lines.len(),
            golden.len()
        ),
    );

    // 2 is reported once every classical record in this suite is in.
    out.record(
        2,
        invariant_trials.0 > 0 && invariant_trials.0 == invariant_trials.1,
        format!("{}/{} trials ended with Bob's face equal to Charlie's", invariant_trials.1, invariant_trials.0),
    );

    // 10: reproducibility of the full verification report.
    let reports: Vec<(std::process::Output, Vec<u8>, Vec<u8>)> = [("a", "1"), ("b", "1"), ("c", "4")]
        .iter()
        .map(|(name, jobs)| {
            let d = dir.path().join(name);
            let o = ctel(&["verify", "--suite", "all", "--seed", "42", "--jobs", jobs, "--out", d.to_str().unwrap()]);
            (o, read(&d.join("report.json")), read(&d.join("report.md")))
        })
        .collect();
    let all_exit_zero = reports.iter().all(|(o, _, _)| o.status.success());
    let same = reports.windows(2).all(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2) && !reports[0].1.is_empty();
    let json: serde_json::Value = serde_json::from_slice(&reports[0].1).unwrap_or_default();
    let entries = json["features"]["entries"].as_array().cloned().unwrap_or_default();
    let entries_pass = entries.len() == 8 && entries.iter().all(|e| e["pass"] == true);
    out.record(
        10,
        all_exit_zero && same && entries_pass,
        format!(
            "reports byte-identical across runs and --jobs 1/4: {same}; exit 0: {all_exit_zero}; {}/8 feature entries pass",
            entries.iter().filter(|e| e["pass"] == true).count()
        ),
    );

    let passed = out.results.iter().filter(|(_, p)| *p).count();
    let _ = writeln!(std::io::stderr(), "acceptance: {passed}/{} criteria pass", out.results.len());
    let failed: Vec<u8> = out.results.iter().filter(|(_, p)| !p).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
