//! Acceptance gate. Runs every primary criterion, prints one PASS/FAIL line
//! each, and exits non-zero if any fails.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::io::Write;
use std::net::TcpStream;
use std::thread;
use std::time::{Duration, Instant};

use ppe_cli::commands::simulate::run_bench;
use ppe_cli::sinks::build_sinks;
use ppe_cli::{cmd_check, AppConfig, MonitorService, Overrides, Settings, SinkConfig};
use ppe_core::ingest::{parse_event_line, read_event_lines, render_event_line, write_event_lines, Strictness};
use ppe_core::sim::{self, ClassNoise, NoiseModel, Scenario};
use ppe_core::{
    default_sequence, Accumulator, AlertKind, BBox, ClassThresholds, FrameBatch, Mode, Outcome, PpeClass,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CriterionResult = Result<String, String>;

fn check(cond: bool, detail: String) -> CriterionResult {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn sequence_exactness() -> CriterionResult {
    let t0 = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for mode in [Mode::Donning, Mode::Doffing] {
        let spec = default_sequence(mode);
        let eye = spec.step_of(PpeClass::Goggles).unwrap();
        let (mut compliant, mut non_compliant, mut wrong) = (0, 0, 0);
        for perm in permutations(4) {
            for alt in [PpeClass::Goggles, PpeClass::FaceShield] {
                let order: Vec<(usize, PpeClass)> = perm
                    .iter()
                    .map(|&s| (s, if s == eye { alt } else { spec.steps()[s].alternatives[0] }))
                    .collect();
                let scenario = Scenario::ordered(spec.clone(), &order, 60, 30.0);
                let run = sim::simulate(&scenario, &NoiseModel::noise_free(), 0, ClassThresholds::default())
                    .map_err(|e| e.to_string())?;
                let conforming = perm == [0, 1, 2, 3];
                match (&run.verdict.outcome, conforming) {
                    (Outcome::Compliant, true) => compliant += 1,
                    (Outcome::NonCompliant { .. }, false) => non_compliant += 1,
                    _ => wrong += 1,
                }
            }
        }
        ok &= compliant == 2 && non_compliant == 46 && wrong == 0;
        details.push(format!("{mode}: {compliant} compliant, {non_compliant} non-compliant, {wrong} wrong"));
    }
    let elapsed = t0.elapsed();
    check(
        ok && elapsed < Duration::from_secs(5),
        format!("{}; {:.2}s (limit 5s)", details.join("; "), elapsed.as_secs_f64()),
    )
}

fn accumulator_oracle() -> CriterionResult {
    let t0 = Instant::now();
    let mut frames_checked = 0u64;
    let mut mismatches = 0u64;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let th = oracle::random_thresholds(&mut rng, 60);
        let frames = rng.random_range(1..=10_000);
        let stream = oracle::random_stream(&mut rng, frames);
        let expected = oracle::satisfied_donning(&stream, &th);
        let mut acc = Accumulator::new(th, Mode::Donning);
        for (b, want) in stream.iter().zip(&expected) {
            acc.observe(b).map_err(|e| e.to_string())?;
            frames_checked += 1;
            if PpeClass::ALL.iter().any(|&c| acc.is_satisfied(c) != want[c.index()]) {
                mismatches += 1;
            }
        }
    }
    let elapsed = t0.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!(
            "1000 streams, {frames_checked} frames, {mismatches} mismatching frames; {:.1}s (limit 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn noise_free_round_trip() -> CriterionResult {
    let mut compliant = 0;
    let mut missed = 0;
    let mut total = 0;
    for mode in [Mode::Donning, Mode::Doffing] {
        let scenario = Scenario::compliant(default_sequence(mode), 60, 30.0);
        for seed in 0..100 {
            let batches = sim::generate(&scenario, &NoiseModel::noise_free(), seed).map_err(|e| e.to_string())?;
            // Through the native file format and back.
            let mut bytes = Vec::new();
            write_event_lines(&batches, &mut bytes).map_err(|e| e.to_string())?;
            let parsed = read_event_lines(bytes.as_slice(), Strictness::Strict).map_err(|e| e.to_string())?;
            let (alerts, verdict) = sim::run_monitor(&scenario.spec, ClassThresholds::default(), &parsed.batches)
                .map_err(|e| e.to_string())?;
            total += 1;
            compliant += verdict.is_compliant() as usize;
            missed += alerts.iter().filter(|a| a.is_missed_step()).count();
        }
    }
    check(
        compliant == 200 && missed == 0,
        format!("{compliant}/{total} compliant, {missed} missed-step alerts"),
    )
}

fn mild_noise() -> NoiseModel {
    NoiseModel::uniform(ClassNoise {
        hit_rate: 0.9,
        false_positive_rate: 0.05,
        conf_mean_worn: 0.8,
        conf_mean_absent: 0.2,
        conf_stddev: 0.1,
    })
    .unwrap()
}

fn violation_detection() -> CriterionResult {
    let noise = mild_noise();
    let mut non_compliant = 0;
    let mut bad_labels = 0;
    let mut missed_total = 0;
    for seed in 0..100u64 {
        let mode = if seed % 2 == 0 { Mode::Donning } else { Mode::Doffing };
        let swap = (seed / 2 % 3) as usize;
        let spec = default_sequence(mode);
        let skipped = spec.label(swap).to_string();
        let scenario = Scenario::compliant(spec, 60, 30.0).with_swap(swap);
        let run = sim::simulate(&scenario, &noise, seed, ClassThresholds::default()).map_err(|e| e.to_string())?;
        if matches!(run.verdict.outcome, Outcome::NonCompliant { .. }) {
            non_compliant += 1;
        }
        let labels: Vec<&str> = run
            .alerts
            .iter()
            .filter_map(|a| match &a.kind {
                AlertKind::MissedStep { missed_label, .. } => Some(missed_label.as_str()),
                _ => None,
            })
            .collect();
        missed_total += labels.len();
        if labels.is_empty() || labels.iter().any(|l| *l != skipped) {
            bad_labels += 1;
        }
    }
    check(
        non_compliant == 100 && bad_labels == 0,
        format!("{non_compliant}/100 non-compliant, {missed_total} missed-step alerts, {bad_labels} sessions naming the wrong step"),
    )
}

fn settings_with_log(mode: Mode, log: &std::path::Path) -> Settings {
    let o = Overrides {
        mode: Some(mode),
        extra_sinks: vec![SinkConfig::JsonLog { path: log.to_path_buf() }],
        ..Default::default()
    };
    Settings::resolve(&AppConfig::default(), &o).unwrap()
}

fn file_live_equivalence() -> CriterionResult {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let noise = mild_noise();
    let mut details = Vec::new();
    let mut ok = true;
    for (mode, swap, seed) in [(Mode::Donning, Some(1), 5u64), (Mode::Doffing, None, 6), (Mode::Doffing, Some(0), 7)] {
        let mut scenario = Scenario::compliant(default_sequence(mode), 60, 30.0);
        if let Some(i) = swap {
            scenario = scenario.with_swap(i);
        }
        let batches = sim::generate(&scenario, &noise, seed).map_err(|e| e.to_string())?;
        let record = dir.path().join(format!("run{seed}.jsonl"));
        let mut f = std::fs::File::create(&record).map_err(|e| e.to_string())?;
        write_event_lines(&batches, &mut f).map_err(|e| e.to_string())?;
        drop(f);

        let file_log = dir.path().join(format!("file{seed}.jsonl"));
        let s = settings_with_log(mode, &file_log);
        cmd_check(&s, &record, None, &mut std::io::sink()).map_err(|e| e.to_string())?;

        let live_log = dir.path().join(format!("live{seed}.jsonl"));
        let s = settings_with_log(mode, &live_log);
        let service = MonitorService::bind(&s, "127.0.0.1:0", build_sinks(&s.sinks).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let addr = service.local_addr().map_err(|e| e.to_string())?;
        let handle = service.shutdown_handle().map_err(|e| e.to_string())?;
        let (tx, rx) = std::sync::mpsc::channel();
        let join = thread::spawn(move || {
            struct Notify(std::sync::mpsc::Sender<()>);
            impl Write for Notify {
                fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                    if buf.windows(8).any(|w| w == b"verdict:") {
                        let _ = self.0.send(());
                    }
                    Ok(buf.len())
                }
                fn flush(&mut self) -> std::io::Result<()> {
                    Ok(())
                }
            }
            service.run(&mut Notify(tx))
        });
        let mut client = TcpStream::connect(addr).map_err(|e| e.to_string())?;
        client.write_all(&std::fs::read(&record).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        drop(client);
        rx.recv_timeout(Duration::from_secs(30)).map_err(|e| e.to_string())?;
        handle.shutdown();
        join.join().map_err(|_| "monitor panicked".to_string())?.map_err(|e| e.to_string())?;

        let a = std::fs::read(&file_log).map_err(|e| e.to_string())?;
        let b = std::fs::read(&live_log).map_err(|e| e.to_string())?;
        let lines = a.iter().filter(|&&c| c == b'\n').count();
        ok &= a == b && lines > 0;
        details.push(format!("{mode} seed {seed}: {lines} lines {}", if a == b { "identical" } else { "DIFFER" }));
    }
    check(ok, details.join("; "))
}

fn config_sanity() -> CriterionResult {
    let mut results = Vec::new();
    for (classes, want) in [("5", "filters=30"), ("1", "filters=18")] {
        let mut out = Vec::new();
        let code = ppe_cli::run(["ppewatch", "gen-config", "--classes", classes], &mut out, &mut std::io::sink());
        let text = String::from_utf8(out).unwrap_or_default();
        results.push((code == 0 && text.contains(want), format!("classes={classes} -> {want}")));
    }
    check(
        results.iter().all(|r| r.0),
        results.iter().map(|r| r.1.clone()).collect::<Vec<_>>().join(", "),
    )
}

fn throughput_latency() -> CriterionResult {
    let r = run_bench(&default_sequence(Mode::Donning), ClassThresholds::default(), 400, 1)
        .map_err(|e| e.to_string())?;
    let rate = r.detections_per_sec();
    check(
        rate >= 50_000.0 && r.p99 < Duration::from_millis(1),
        format!(
            "{} detections in {} batches: {:.0} detections/s (min 50000), p50 {:.1}us, p99 {:.1}us (max 1000us)",
            r.detections,
            r.batches,
            rate,
            r.p50.as_secs_f64() * 1e6,
            r.p99.as_secs_f64() * 1e6
        ),
    )
}

fn random_batch(rng: &mut ChaCha8Rng) -> FrameBatch {
    let frame = rng.random_range(0..u64::MAX / 2);
    let mut b = FrameBatch::empty(frame, rng.random());
    for _ in 0..rng.random_range(0..8) {
        let class = PpeClass::ALL[rng.random_range(0..PpeClass::COUNT)];
        let conf = match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..=1.0),
        };
        let bbox = BBox::new(
            rng.random_range(0.0..=1.0),
            rng.random_range(0.0..=1.0),
            rng.random_range(f64::MIN_POSITIVE..=1.0),
            rng.random_range(f64::MIN_POSITIVE..=1.0),
        );
        b.push(class, conf, bbox).expect("valid detection");
    }
    b
}

fn bits(b: &FrameBatch) -> Vec<(PpeClass, [u64; 5])> {
    b.detections()
        .iter()
        .map(|d| {
            (
                d.class,
                [
                    d.confidence.to_bits(),
                    d.bbox.cx.to_bits(),
                    d.bbox.cy.to_bits(),
                    d.bbox.w.to_bits(),
                    d.bbox.h.to_bits(),
                ],
            )
        })
        .collect()
}

fn format_round_trip() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut exact = 0;
    for _ in 0..1000 {
        let b = random_batch(&mut rng);
        let line = render_event_line(&b);
        let back = parse_event_line(&line, Strictness::Strict).map_err(|e| e.to_string())?.batch;
        if back.frame_index == b.frame_index && back.timestamp_ms == b.timestamp_ms && bits(&back) == bits(&b) {
            exact += 1;
        }
    }
    check(exact == 1000, format!("{exact}/1000 batches bit-exact"))
}

fn main() {
    let criteria: [(&str, fn() -> CriterionResult); 8] = [
        ("sequence exactness", sequence_exactness),
        ("accumulator oracle equivalence", accumulator_oracle),
        ("noise-free round trip", noise_free_round_trip),
        ("violation detection", violation_detection),
        ("file/live equivalence", file_live_equivalence),
        ("config sanity", config_sanity),
        ("throughput/latency budget", throughput_latency),
        ("format round-trip", format_round_trip),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
