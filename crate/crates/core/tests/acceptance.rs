//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use backflow::cavity::{
    assemble_density, concurrence_cavity, integrate_cavity, single_atom_analytic, CavityParams, CavityState,
};
use backflow::nm::{blp_measure, cavity_distance_trajectory, StatePair, MARKOVIAN_THRESHOLD};
use backflow::pulse::{expand_addressing, AddressingMode, PulseSequence};
use backflow::quantum::{concurrence, DensityMatrix, PureState};
use backflow::spinstar::{build_operators, embed_initial, propagate_spinstar, SpinStarParams};
use backflow::sweep::{run_points, SweepConfig, SweepRecord};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

/// Joins sub-checks into one verdict.
fn all(parts: Vec<(bool, String)>) -> Verdict {
    let passed = parts.iter().all(|(ok, _)| *ok);
    let detail = parts
        .into_iter()
        .map(|(ok, s)| if ok { s } else { format!("{s} [miss]") })
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(passed, detail)
}

fn min_eigenvalue(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()[0]
}

fn analytic_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for alpha1 in [0.1, 0.5, 0.7] {
        let params = CavityParams::new(1.0, 0.05, 1.0, alpha1, 0.0).unwrap();
        let init = CavityState::initial(C64::from(1.0), C64::from(0.0)).unwrap();
        let zero = PulseSequence::zeros(4.0, 2, 1).unwrap();
        let (e1, e2) = expand_addressing(&zero, AddressingMode::Double).unwrap();
        let traj = integrate_cavity(&params, &init, &e1, &e2, 4.0, 4000).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = single_atom_analytic(&params, *t).unwrap().norm();
            worst = worst.max((s.c1.norm() - exact).abs());
        }
    }
    Verdict::new(worst < 1e-6, format!("max ||C1| - exact| = {worst:.2e} (< 1e-6)"))
}

/// Random cavity runs shared by the Wootters and conservation checks.
fn random_cavity_runs() -> Vec<CavityState> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut states = Vec::new();
    for run in 0..8 {
        let params = CavityParams::default().with_alphas(rng.gen_range(0.0..0.7), rng.gen_range(0.0..0.2));
        let mode = AddressingMode::ALL[run % 3];
        let n = mode.channels() * 16;
        let amps: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let pulse = PulseSequence::new(1.0, mode.channels(), 16, amps).unwrap();
        let (e1, e2) = expand_addressing(&pulse, mode).unwrap();
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
        let init = CavityState::initial(C64::from(theta.cos()), C64::from_polar(theta.sin(), rng.gen_range(0.0..6.0)))
            .unwrap();
        let traj = integrate_cavity(&params, &init, &e1, &e2, 1.0, 2000).unwrap();
        states.extend(traj.states);
    }
    states
}

fn wootters_consistency(states: &[CavityState]) -> Verdict {
    let worst = states
        .iter()
        .map(|s| {
            let rho = assemble_density(s).unwrap();
            (concurrence(&rho).unwrap() - concurrence_cavity(s)).abs()
        })
        .fold(0.0, f64::max);
    Verdict::new(
        states.len() >= 1000 && worst < 1e-8,
        format!("{} points, max deviation {worst:.2e} (< 1e-8)", states.len()),
    )
}

fn regime_boundary() -> Verdict {
    let (gamma0, alpha1) = (1.0, 0.5);
    let critical = 2.0 * alpha1 * alpha1 * gamma0;
    let nm_at = |ratio: f64| {
        let params = CavityParams::new(gamma0, ratio * critical, 1.0, alpha1, 0.0).unwrap();
        let traj = cavity_distance_trajectory(&params, StatePair::Excitation, 80.0, 4001).unwrap();
        blp_measure(traj).unwrap().value
    };
    let grid = |lo: f64, hi: f64| (0..10).map(move |k| lo + (hi - lo) * k as f64 / 9.0);
    let damped_max = grid(1.05, 3.0).map(nm_at).fold(0.0, f64::max);
    let oscillating_min = grid(0.1, 0.7).map(nm_at).fold(f64::INFINITY, f64::min);
    all(vec![
        (damped_max < 1e-12, format!("overdamped max nm {damped_max:.2e} (< 1e-12)")),
        (oscillating_min > 1e-6, format!("oscillatory min nm {oscillating_min:.2e} (> 1e-6)")),
    ])
}

fn sweep_config(text: &str) -> SweepConfig {
    let cfg = SweepConfig::parse_str(text).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn spearman_check(records: &[SweepRecord], cfg: &SweepConfig, tracking: f64) -> Vec<(bool, String)> {
    let report = backflow::sweep::summarize(cfg.model, &cfg.modes, records, 0);
    report
        .modes
        .iter()
        .map(|m| {
            let rho = m.spearman.unwrap_or(f64::NAN);
            match m.mode {
                AddressingMode::Global => (rho <= 0.8, format!("GA rho {rho:.3} (<= 0.8, n={})", m.n_points)),
                mode => (rho >= tracking, format!("{mode} rho {rho:.3} (>= {tracking}, n={})", m.n_points)),
            }
        })
        .collect()
}

/// DA's mean concurrence must reach SA's in every populated bin below 0.15.
fn binned_dominance(records: &[SweepRecord]) -> (bool, String) {
    let edges = [MARKOVIAN_THRESHOLD, 0.05, 0.10, 0.15];
    let mut ok = true;
    let mut text = Vec::new();
    for w in edges.windows(2) {
        let bin: Vec<&SweepRecord> = records.iter().filter(|r| r.nm > w[0] && r.nm <= w[1]).collect();
        if bin.is_empty() {
            continue;
        }
        let mean = |mode| bin.iter().filter_map(|r| r.conc_opt(mode)).sum::<f64>() / bin.len() as f64;
        let (sa, da) = (mean(AddressingMode::Single), mean(AddressingMode::Double));
        ok &= da >= sa;
        text.push(format!("({:.2},{:.2}] DA {da:.4} vs SA {sa:.4}", w[0], w[1]));
    }
    (ok && !text.is_empty(), format!("bins {}", text.join(", ")))
}

fn markovian_control(records: &[SweepRecord]) -> Verdict {
    let markovian: Vec<&SweepRecord> = records.iter().filter(|r| r.nm < MARKOVIAN_THRESHOLD).collect();
    let gain = markovian
        .iter()
        .map(|r| r.conc_opt(AddressingMode::Single).unwrap() - r.conc_free)
        .fold(f64::NEG_INFINITY, f64::max);
    let entangled = markovian.iter().filter(|r| r.conc_free > 1e-9).count();
    all(vec![
        (
            !markovian.is_empty() && gain <= 0.05,
            format!("{} Markovian points, max SA gain {gain:.4} (<= 0.05)", markovian.len()),
        ),
        (entangled > 0, format!("{entangled} with conc_free > 0")),
    ])
}

fn conservation(cavity_states: &[CavityState]) -> Verdict {
    let max_pop = cavity_states.iter().map(CavityState::excited_population).fold(0.0, f64::max);
    let mut min_eig = cavity_states
        .iter()
        .map(|s| min_eigenvalue(&assemble_density(s).unwrap()))
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut drift: f64 = 0.0;
    for n_total in 2..=8 {
        let params = SpinStarParams::new(n_total, rng.gen_range(0.0..0.2), 1.0).unwrap();
        let ops = build_operators(&params).unwrap();
        let amps: Vec<f64> = (0..500).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let pulse = PulseSequence::new(10.0, 2, 250, amps).unwrap();
        let (e1, e2) = expand_addressing(&pulse, AddressingMode::Double).unwrap();
        let central = PureState::normalized(DVector::from_fn(4, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
        .unwrap();
        let initial = embed_initial(&central, n_total).unwrap();
        let traj = propagate_spinstar(&ops, &e1, &e2, 10.0, &initial, 250).unwrap();
        drift = drift.max(traj.norm_drift);
        min_eig = traj.states.iter().map(min_eigenvalue).fold(min_eig, f64::min);
    }
    all(vec![
        (drift < 1e-10, format!("spin-star norm drift {drift:.2e} (< 1e-10)")),
        (max_pop <= 1.0 + 1e-8, format!("cavity max |C1|^2+|C2|^2 {max_pop:.12}")),
        (min_eig >= -1e-10, format!("min reduced eigenvalue {min_eig:.2e} (>= -1e-10)")),
    ])
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, args: &[&str]| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_backflow"))
            .arg("sweep")
            .args(args)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert!(status.success(), "sweep run {name} failed");
        fs::read(out).unwrap()
    };
    let cavity = ["--n-points", "6", "--seeds", "2", "--master-seed", "42", "--set", "max_evals=150"];
    let star = [
        "--model", "spinstar", "--n-points", "4", "--seeds", "2", "--set", "max_evals=60", "--set", "segments=10",
    ];
    let a = run("a.csv", &cavity);
    let b = run("b.csv", &[&cavity[..], &["--set", "workers=1"]].concat());
    let c = run("c.csv", &star);
    let d = run("d.csv", &[&star[..], &["--set", "workers=3"]].concat());
    all(vec![
        (a == b, format!("cavity CSV {} bytes identical", a.len())),
        (c == d, format!("spin-star CSV {} bytes identical", c.len())),
    ])
}

fn baseline_dominance(records: &[SweepRecord]) -> Verdict {
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for r in records {
        for c in r.conc_opt.iter().flatten() {
            checked += 1;
            worst = worst.min(c - r.conc_free);
        }
    }
    Verdict::new(
        checked > 0 && worst >= -1e-9,
        format!("{checked} optimizations, min conc_opt - conc_free {worst:.2e} (>= -1e-9)"),
    )
}

fn report(id: u8, name: &str, start: Instant, verdict: Verdict, failed: &mut usize) {
    let tag = if verdict.passed { "PASS" } else { "FAIL" };
    println!("{tag} [{id}] {name}: {} ({:.1}s)", verdict.detail, start.elapsed().as_secs_f64());
    if !verdict.passed {
        *failed += 1;
    }
}

fn main() -> ExitCode {
    let mut failed = 0;

    let t = Instant::now();
    report(1, "analytic single-atom decay", t, analytic_oracle(), &mut failed);

    let t = Instant::now();
    let cavity_states = random_cavity_runs();
    report(2, "Wootters consistency", t, wootters_consistency(&cavity_states), &mut failed);

    let t = Instant::now();
    report(3, "NM regime boundary", t, regime_boundary(), &mut failed);

    let t = Instant::now();
    let cavity_cfg = sweep_config("model = cavity\nn_points = 100\nT = 1\nseeds = 4\nmax_evals = 2000\n");
    let cavity = run_points(&cavity_cfg).unwrap().records();
    assert_eq!(cavity.len(), cavity_cfg.n_points, "cavity sweep had failed points");
    let mut parts = spearman_check(&cavity, &cavity_cfg, 0.95);
    parts.push(binned_dominance(&cavity));
    report(4, "cavity sweep monotonicity", t, all(parts), &mut failed);

    let t = Instant::now();
    report(5, "Markovian cavity control", t, markovian_control(&cavity), &mut failed);

    let t = Instant::now();
    let star_cfg = sweep_config("model = spinstar\nn_points = 60\nT = 10\nsegments = 50\n");
    let star = run_points(&star_cfg).unwrap().records();
    assert_eq!(star.len(), star_cfg.n_points, "spin-star sweep had failed points");
    report(6, "spin-star sweep monotonicity", t, all(spearman_check(&star, &star_cfg, 0.9)), &mut failed);

    let t = Instant::now();
    report(7, "conservation and positivity", t, conservation(&cavity_states), &mut failed);

    let t = Instant::now();
    report(8, "replay determinism", t, determinism(), &mut failed);

    let t = Instant::now();
    let optimized: Vec<SweepRecord> = cavity.into_iter().chain(star).collect();
    report(9, "baseline dominance", t, baseline_dominance(&optimized), &mut failed);

    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
