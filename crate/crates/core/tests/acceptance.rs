//! Acceptance criteria A1-A8. Each test prints one PASS/FAIL line with the
//! measured figures and the tolerance it was held to.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use lmad::bench::sinc_configs;
use lmad::network::{finite_diff_jacobian, jacobian, Batch, Network, NetworkSpec};
use lmad::optim::{lm_step, train_grad, train_lm, LmConfig, TrainReport};
use lmad::pipeline::{run, ModelFile, Recipe, RunOutcome};
use lmad::timeseries::{
    gen_engine_like, gen_sinc, read_series_csv, write_series_csv, EventSeries, GenConfig, NormParams,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const QUORUM_OF_FIVE: usize = 4;
const ANOMALIES: [usize; 2] = [30, 31];

/// Writes the verdict line past the test harness's output capture, then
/// fails the test if the criterion was not met.
fn verdict(id: &str, pass: bool, detail: String) {
    let line = format!("{id:<4} {} {detail}", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
    assert!(pass, "{line}");
}

fn engine_data(seed: u64, clean: bool) -> EventSeries<f64> {
    let mut cfg = GenConfig { seed, ..GenConfig::default() };
    if clean {
        cfg = cfg.clean();
    }
    gen_engine_like(&cfg).unwrap()
}

struct Timed<T> {
    value: T,
    seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> Timed<T> {
    let t = Instant::now();
    let value = f();
    Timed { value, seconds: t.elapsed().as_secs_f64() }
}

fn recipe_runs(clean: bool, recipe: fn() -> Recipe) -> Vec<Timed<RunOutcome<f64>>> {
    SEEDS
        .iter()
        .map(|&s| timed(|| run(&engine_data(s, clean), &recipe().with_seed(s)).unwrap()))
        .collect()
}

fn lm_runs() -> &'static [Timed<RunOutcome<f64>>] {
    static CELL: OnceLock<Vec<Timed<RunOutcome<f64>>>> = OnceLock::new();
    CELL.get_or_init(|| recipe_runs(false, Recipe::lm_dense40))
}

fn clean_runs() -> &'static [Timed<RunOutcome<f64>>] {
    static CELL: OnceLock<Vec<Timed<RunOutcome<f64>>>> = OnceLock::new();
    CELL.get_or_init(|| recipe_runs(true, Recipe::lm_dense40))
}

fn rprop_runs() -> &'static [Timed<RunOutcome<f64>>] {
    static CELL: OnceLock<Vec<Timed<RunOutcome<f64>>>> = OnceLock::new();
    CELL.get_or_init(|| recipe_runs(false, Recipe::rprop_deep))
}

fn ae_lm_runs() -> &'static [Timed<RunOutcome<f64>>] {
    static CELL: OnceLock<Vec<Timed<RunOutcome<f64>>>> = OnceLock::new();
    CELL.get_or_init(|| recipe_runs(false, || Recipe::autoencoder_lm(10, 50)))
}

fn ae_adam_runs() -> &'static [Timed<RunOutcome<f64>>] {
    static CELL: OnceLock<Vec<Timed<RunOutcome<f64>>>> = OnceLock::new();
    CELL.get_or_init(|| recipe_runs(false, || Recipe::autoencoder_adam(10, 50)))
}

struct SincRun {
    lm: TrainReport<f64>,
    adam: TrainReport<f64>,
}

fn sinc_runs() -> &'static Timed<Vec<SincRun>> {
    static CELL: OnceLock<Timed<Vec<SincRun>>> = OnceLock::new();
    CELL.get_or_init(|| {
        timed(|| {
            let batch = gen_sinc::<f64>(100, 4.0).unwrap();
            let spec = NetworkSpec::regressor(1, &[20], 1);
            SEEDS
                .iter()
                .map(|&s| {
                    let (lm_cfg, adam_cfg) = sinc_configs(s);
                    let mut net = Network::build(spec.clone(), s).unwrap();
                    let lm = train_lm(&mut net, &batch, &lm_cfg).unwrap();
                    let mut net = Network::build(spec.clone(), s).unwrap();
                    let adam = train_grad(&mut net, &batch, &adam_cfg).unwrap();
                    SincRun { lm, adam }
                })
                .collect()
        })
    })
}

/// A noise-free affine problem `y = W x + b` with its normal-equation
/// solution computed by nalgebra.
struct LinearCase {
    spec: NetworkSpec,
    batch: Batch<f64>,
    /// Weights row-major then biases, the network's parameter layout.
    oracle: Vec<f64>,
}

fn linear_case(seed: u64) -> LinearCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d_in, d_out) = (60, 3, 2);
    let x = Array2::from_shape_fn((n, d_in), |_| rng.random_range(-1.0..1.0));
    let w = Array2::from_shape_fn((d_out, d_in), |_| rng.random_range(-2.0..2.0));
    let b = Array1::from_shape_fn(d_out, |_| rng.random_range(-1.0..1.0));
    let y = x.dot(&w.t()) + &b;

    let design = nalgebra::DMatrix::from_fn(n, d_in + 1, |i, j| if j < d_in { x[[i, j]] } else { 1.0 });
    let gram = design.transpose() * &design;
    let chol = gram.cholesky().expect("design has full column rank");
    let mut weights = vec![0.0; d_out * d_in];
    let mut biases = vec![0.0; d_out];
    for k in 0..d_out {
        let yk = nalgebra::DVector::from_fn(n, |i, _| y[[i, k]]);
        let c = chol.solve(&(design.transpose() * yk));
        weights[k * d_in..(k + 1) * d_in].copy_from_slice(&c.as_slice()[..d_in]);
        biases[k] = c[d_in];
    }
    weights.extend(biases);
    LinearCase {
        spec: NetworkSpec::linear(d_in, d_out),
        batch: Batch::new(x, y).unwrap(),
        oracle: weights,
    }
}

fn linear_runs() -> &'static [(LinearCase, TrainReport<f64>)] {
    static CELL: OnceLock<Vec<(LinearCase, TrainReport<f64>)>> = OnceLock::new();
    CELL.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&s| {
                let case = linear_case(s);
                let mut net = Network::build(case.spec.clone(), s).unwrap();
                let cfg = LmConfig { max_epochs: 5, patience: 0, seed: s, ..LmConfig::default() };
                let report = train_lm(&mut net, &case.batch, &cfg).unwrap();
                (case, report)
            })
            .collect()
    })
}

#[test]
fn a1_jacobian_matches_finite_differences() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut params = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    while params.len() < 10 {
        let input_dim = rng.random_range(1..=3);
        let output_dim = rng.random_range(1..=2);
        let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(2..=8)).collect();
        let spec = NetworkSpec::regressor(input_dim, &hidden, output_dim);
        if spec.param_count() > 200 {
            continue;
        }
        let net = Network::<f64>::build(spec, rng.random()).unwrap();
        // biases start at zero; move them so every path is exercised
        let mut p = net.params().to_vec();
        for v in p.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let net = Network::from_params(net.spec().clone(), p).unwrap();
        let inputs = Array2::from_shape_fn((20, input_dim), |_| rng.random_range(-2.0..2.0));
        let ad = jacobian(&net, inputs.view()).unwrap();
        let fd = finite_diff_jacobian(&net, inputs.view(), 1e-6).unwrap();
        assert_eq!(ad.dim(), (20 * output_dim, net.param_count()));
        for (a, f) in ad.iter().zip(fd.iter()) {
            worst = worst.max((a - f).abs() / (1.0 + f.abs()));
        }
        params.push(net.param_count());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "A1",
        worst <= 1e-6 && secs < 5.0,
        format!(
            "10 nets (P = {params:?}, N = 20): max |J - J_fd| / (1 + |J_fd|) = {worst:.2e} (tol 1e-6); {secs:.2} s (limit 5 s)"
        ),
    );
}

#[test]
fn a2_sinc_lm_beats_adam() {
    let runs = sinc_runs();
    let mut good = 0;
    let mut detail = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&runs.value) {
        let (lm, adam) = (r.lm.final_train_loss, r.adam.final_train_loss);
        let ok = lm <= 1e-4 && lm <= adam / 10.0 && r.lm.epochs_run() == 100 && r.adam.epochs_run() == 100;
        good += ok as usize;
        detail.push(format!("seed {seed}: lm {lm:.2e} adam {adam:.2e}"));
    }
    verdict(
        "A2",
        good >= QUORUM_OF_FIVE && runs.seconds < 30.0,
        format!(
            "LM train MSE <= 1e-4 and <= ADAM/10 in {good}/5 seeds (need >= 4); {:.1} s (limit 30 s) [{}]",
            runs.seconds,
            detail.join(", ")
        ),
    );
}

#[test]
fn a3_anomalies_flagged() {
    let expected: BTreeSet<usize> = ANOMALIES.into_iter().collect();
    let runs = lm_runs();
    let good = runs.iter().filter(|r| r.value.anomaly.flagged_events == expected).count();
    let slowest = runs.iter().map(|r| r.seconds).fold(0.0, f64::max);
    let flags: Vec<_> = runs.iter().map(|r| &r.value.anomaly.flagged_events).collect();
    verdict(
        "A3",
        good >= QUORUM_OF_FIVE && slowest < 120.0,
        format!(
            "flags == {{30, 31}} at ratio 2.0 in {good}/5 seeds (need >= 4); slowest seed {slowest:.1} s (limit 120 s); flags {flags:?}"
        ),
    );
}

#[test]
fn a3b_clean_data_flags_nothing() {
    let runs = clean_runs();
    let good = runs.iter().filter(|r| r.value.anomaly.flagged_events.is_empty()).count();
    let maxima: Vec<String> = runs.iter().map(|r| format!("{:.2}", r.value.anomaly.max_test_ratio())).collect();
    verdict(
        "A3b",
        good >= QUORUM_OF_FIVE,
        format!("no flags on clean data in {good}/5 seeds (need >= 4); max test ratios [{}]", maxima.join(", ")),
    );
}

fn max_anomaly_ratio(out: &RunOutcome<f64>) -> f64 {
    ANOMALIES
        .iter()
        .filter_map(|&e| out.anomaly.ratio_of(e))
        .fold(0.0, f64::max)
}

#[test]
fn a4_lm_ratio_at_least_rprop() {
    let mut good = 0;
    let mut detail = Vec::new();
    for ((seed, lm), rp) in SEEDS.iter().zip(lm_runs()).zip(rprop_runs()) {
        let (a, b) = (max_anomaly_ratio(&lm.value), max_anomaly_ratio(&rp.value));
        good += (a >= b) as usize;
        detail.push(format!("seed {seed}: lm {a:.2} rprop {b:.2}"));
    }
    verdict(
        "A4",
        good >= QUORUM_OF_FIVE,
        format!("LM max anomaly ratio >= Rprop in {good}/5 seeds (need >= 4) [{}]", detail.join(", ")),
    );
}

#[test]
fn a5_autoencoder_lm_vs_adam() {
    let mut good = 0;
    let mut detail = Vec::new();
    for ((seed, lm), adam) in SEEDS.iter().zip(ae_lm_runs()).zip(ae_adam_runs()) {
        let (a, b) = (lm.value.train.best_val_loss, adam.value.train.best_val_loss);
        good += (a <= 0.5 * b) as usize;
        detail.push(format!("seed {seed}: lm {a:.3e} adam {b:.3e}"));
    }
    verdict(
        "A5",
        good >= QUORUM_OF_FIVE,
        format!(
            "LM val MAE <= 0.5 x ADAM val MAE (10 hidden, 50 epochs) in {good}/5 seeds (need >= 4) [{}]",
            detail.join(", ")
        ),
    );
}

#[test]
fn a6_lm_invariants() {
    let mut reports: Vec<&TrainReport<f64>> = Vec::new();
    reports.extend(sinc_runs().value.iter().map(|r| &r.lm));
    reports.extend(lm_runs().iter().map(|r| &r.value.train));
    reports.extend(clean_runs().iter().map(|r| &r.value.train));
    reports.extend(ae_lm_runs().iter().map(|r| &r.value.train));
    reports.extend(linear_runs().iter().map(|r| &r.1));

    let mut accepted = 0;
    let mut violations = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        for e in &rep.epoch_history {
            if !(e.step_size > 0.0 && e.step_size <= 1e10) {
                violations.push(format!("run {i} epoch {}: lambda {}", e.epoch, e.step_size));
            }
            if e.accepted {
                accepted += 1;
                match (e.sse_before, e.sse_after) {
                    (Some(b), Some(a)) if a < b => {}
                    other => violations.push(format!("run {i} epoch {}: sse {other:?}", e.epoch)),
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut monotone = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let m = n + rng.random_range(0..=8);
        let j: Array2<f64> = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0));
        let r = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
        let l1 = 10f64.powf(rng.random_range(-6.0..2.0));
        let l2 = l1 * 10f64.powf(rng.random_range(0.0..3.0));
        let norm = |l: f64| {
            let d = lm_step(j.view(), r.view(), l).unwrap().step().expect("damped system is positive definite");
            d.dot(&d).sqrt()
        };
        monotone += (norm(l1) >= norm(l2)) as usize;
    }
    verdict(
        "A6",
        violations.is_empty() && monotone == 20,
        format!(
            "{} LM runs, {accepted} accepted steps: {} violations of SSE decrease / lambda in (0, 1e10]; damping monotone on {monotone}/20 instances {violations:?}",
            reports.len(),
            violations.len()
        ),
    );
}

#[test]
fn a7_linear_least_squares() {
    let mut worst: f64 = 0.0;
    let mut epochs = Vec::new();
    for (case, report) in linear_runs() {
        for (p, o) in report.best_params.iter().zip(&case.oracle) {
            worst = worst.max((p - o).abs());
        }
        epochs.push(report.epochs_run());
    }
    let max_epochs = *epochs.iter().max().unwrap();
    verdict(
        "A7",
        worst <= 1e-8 && max_epochs <= 5,
        format!("5 affine problems: max |theta - theta_normal_eq| = {worst:.2e} (tol 1e-8) after {epochs:?} epochs (limit 5)"),
    );
}

#[test]
fn a8_determinism_and_round_trips() {
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let raw = engine_data(0, false);
    let recipe = Recipe::lm_dense40().with_seed(9);
    let a = run(&raw, &recipe).unwrap();
    let b = run(&raw, &recipe).unwrap();
    checks.push(("lm report replay", a.train.same_run(&b.train) && a.net.params() == b.net.params()));
    let adam = Recipe::adam_dense40().with_seed(9);
    let (c, d) = (run(&raw, &adam).unwrap(), run(&raw, &adam).unwrap());
    checks.push(("adam report replay", c.train.same_run(&d.train)));

    let csv = |s: &EventSeries<f64>| {
        let mut buf = Vec::new();
        write_series_csv(s, &mut buf).unwrap();
        buf
    };
    let bytes = csv(&raw);
    checks.push(("generator csv bytes", bytes == csv(&engine_data(0, false))));
    checks.push(("seeds differ", bytes != csv(&engine_data(1, false))));
    let back: EventSeries<f64> = read_series_csv(bytes.as_slice(), "engine").unwrap();
    checks.push((
        "csv round trip",
        back.input() == raw.input() && back.output() == raw.output() && back.event_ends() == raw.event_ends(),
    ));

    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("net.json");
    a.net.save(&net_path).unwrap();
    checks.push(("network round trip", Network::<f64>::load(&net_path).unwrap() == a.net));
    let model_path = dir.path().join("model.json");
    let model = ModelFile::new(&recipe, &a.prepared, &a.net);
    model.save(&model_path).unwrap();
    checks.push(("model file round trip", ModelFile::load(&model_path).unwrap() == model));
    let report_back = TrainReport::<f64>::from_json(&a.train.to_json().unwrap()).unwrap();
    checks.push(("train report round trip", report_back == a.train));

    let norm = NormParams::fit_on_events(&raw, 15).unwrap();
    let restored = norm.invert(&norm.apply(&raw));
    let err = restored
        .input()
        .iter()
        .zip(raw.input())
        .chain(restored.output().iter().zip(raw.output()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    checks.push(("normalizer invert(apply)", err <= 1e-12));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        "A8",
        failed.is_empty(),
        format!(
            "{}/{} determinism and round-trip checks exact; normalizer max error {err:.1e} (tol 1e-12); failed {failed:?}",
            checks.len() - failed.len(),
            checks.len()
        ),
    );
}
