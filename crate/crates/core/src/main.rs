use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backflow::cavity::{concurrence_cavity, integrate_cavity};
use backflow::control::{aligned_steps, optimize_cavity, optimize_spinstar, CavityProblem, SpinStarProblem};
use backflow::nm::{blp_measure, cavity_distance_trajectory, spinstar_distance_trajectory, StatePair};
use backflow::pulse::{expand_addressing, AddressingMode};
use backflow::quantum::concurrence;
use backflow::spinstar::{default_central_state, CollectiveSpinStar};
use backflow::sweep::{format_float, run_sweep, sample_point, PointParams, SweepConfig};
use backflow::{Error, Result};

#[derive(Parser)]
#[command(name = "backflow", version, about = "Non-Markovianity and optimal entanglement control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write t, pop1, pop2, concurrence.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated pulse amplitudes for the chosen mode; zero when omitted.
        #[arg(long)]
        amplitudes: Option<String>,
    },
    /// Free-dynamics non-Markovianity of one point, with its distance series.
    Nm {
        #[command(flatten)]
        common: Common,
        /// Evolve |10> against |00> instead of |10> against |01>.
        #[arg(long)]
        excitation_pair: bool,
    },
    /// Optimize one point under one addressing mode.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Full randomized sweep to CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Exit with status 1 when the monotonicity thresholds fail.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set alpha1=0.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(short = 'T', long = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    n_points: Option<usize>,
    /// Which sampled point to use for single-point commands.
    #[arg(long, default_value_t = 0)]
    point: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::from_file(path)?,
            None => SweepConfig::default(),
        };
        let flags = [
            ("model", self.model.clone()),
            ("mode", self.mode.clone()),
            ("T", self.horizon.map(|v| v.to_string())),
            ("seeds", self.seeds.map(|v| v.to_string())),
            ("master_seed", self.master_seed.map(|v| v.to_string())),
            ("n_points", self.n_points.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{kv}' is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        })
    }
}

fn single_mode(cfg: &SweepConfig) -> Result<AddressingMode> {
    match cfg.modes.as_slice() {
        [m] => Ok(*m),
        _ if cfg.modes.len() == 3 => Ok(AddressingMode::Single),
        _ => Err(Error::Config("choose exactly one mode".into())),
    }
}

fn parse_amplitudes(text: Option<&str>, n: usize) -> Result<Vec<f64>> {
    let Some(text) = text else {
        return Ok(vec![0.0; n]);
    };
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad amplitude '{s}'")))
        })
        .collect()
}

fn describe(params: &PointParams) -> String {
    match params {
        PointParams::Cavity(p) => format!("alpha1={} alpha2={}", format_float(p.alpha1), format_float(p.alpha2)),
        PointParams::SpinStar(p) => format!("A={} N={}", format_float(p.coupling), p.n_total),
    }
}

fn simulate(common: &Common, amplitudes: Option<&str>) -> Result<()> {
    let cfg = common.load()?;
    let mode = single_mode(&cfg)?;
    let params = sample_point(&cfg, common.point)?;
    let segments = cfg.segments();
    let horizon = cfg.horizon();
    let amps = parse_amplitudes(amplitudes, mode.channels() * segments)?;
    let mut out = common.writer()?;
    writeln!(out, "t,pop1,pop2,concurrence")?;
    match params {
        PointParams::Cavity(p) => {
            let problem = CavityProblem::new(p, mode, horizon, segments)?;
            let (e1, e2) = expand_addressing(&problem.pulse(&amps)?, mode)?;
            let steps = aligned_steps(segments, cfg.steps);
            let traj = integrate_cavity(&p, &problem.initial_state(), &e1, &e2, horizon, steps)?;
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let c = concurrence_cavity(s);
                writeln!(
                    out,
                    "{},{},{},{}",
                    format_float(*t),
                    format_float(s.c1.norm_sqr()),
                    format_float(s.c2.norm_sqr()),
                    format_float(c)
                )?;
            }
        }
        PointParams::SpinStar(p) => {
            let problem = SpinStarProblem::new(&p, mode, horizon, segments)?;
            let (e1, e2) = expand_addressing(&problem.pulse(&amps)?, mode)?;
            let model = CollectiveSpinStar::new(&p)?;
            let traj = model.propagate(&e1, &e2, horizon, &default_central_state(), segments)?;
            for (t, rho) in traj.times.iter().zip(&traj.states) {
                let m = rho.matrix();
                let pop1 = (m[(0b10, 0b10)] + m[(0b11, 0b11)]).re;
                let pop2 = (m[(0b01, 0b01)] + m[(0b11, 0b11)]).re;
                writeln!(
                    out,
                    "{},{},{},{}",
                    format_float(*t),
                    format_float(pop1),
                    format_float(pop2),
                    format_float(concurrence(rho)?)
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn nm(common: &Common, excitation_pair: bool) -> Result<()> {
    let cfg = common.load()?;
    let params = sample_point(&cfg, common.point)?;
    let pair = if excitation_pair {
        StatePair::Excitation
    } else {
        StatePair::Exchange
    };
    let traj = match params {
        PointParams::Cavity(p) => cavity_distance_trajectory(&p, pair, cfg.horizon(), cfg.grid_points())?,
        PointParams::SpinStar(p) => spinstar_distance_trajectory(&p, pair, cfg.horizon(), cfg.grid_points())?,
    };
    let result = blp_measure(traj)?;
    eprintln!("{} nm={} regime={}", describe(&params), format_float(result.value), result.regime);
    let mut out = common.writer()?;
    writeln!(out, "t,distance")?;
    for (t, d) in result.trajectory.times.iter().zip(&result.trajectory.values) {
        writeln!(out, "{},{}", format_float(*t), format_float(*d))?;
    }
    out.flush()?;
    Ok(())
}

fn optimize(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let mode = single_mode(&cfg)?;
    let params = sample_point(&cfg, common.point)?;
    let optimizer = cfg.optimizer();
    let (result, free) = match params {
        PointParams::Cavity(p) => {
            let mut problem = CavityProblem::new(p, mode, cfg.horizon(), cfg.segments())?;
            problem.steps = aligned_steps(cfg.segments(), cfg.steps);
            (optimize_cavity(&problem, &optimizer, cfg.master_seed)?, problem.free_concurrence()?)
        }
        PointParams::SpinStar(p) => {
            let problem = SpinStarProblem::new(&p, mode, cfg.horizon(), cfg.segments())?;
            (optimize_spinstar(&problem, &optimizer, cfg.master_seed)?, problem.free_concurrence()?)
        }
    };
    eprintln!(
        "{} mode={mode} objective={} concurrence={} free={} best_seed={} evaluations={}",
        describe(&params),
        format_float(result.objective),
        format_float(result.concurrence),
        format_float(free),
        result.outcome.best_seed,
        result.outcome.evaluations
    );
    let mut out = common.writer()?;
    writeln!(out, "channel,segment,amplitude")?;
    for c in 0..result.pulse.channels() {
        for (k, a) in result.pulse.channel(c).iter().enumerate() {
            writeln!(out, "{c},{k},{}", format_float(*a))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn sweep(common: &Common, check: bool) -> Result<bool> {
    let mut cfg = common.load()?;
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    let report = run_sweep(&cfg)?;
    for o in &report.outcomes {
        if let Err(e) = &o.result {
            eprintln!("point {} failed: {e}", o.point_index);
        }
    }
    println!("{}", report.summary);
    if !check {
        return Ok(true);
    }
    let mut ok = true;
    for (label, passed) in report.summary.check() {
        println!("{} {label}", if passed { "PASS" } else { "FAIL" });
        ok &= passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, amplitudes } => simulate(common, amplitudes.as_deref()).map(|_| true),
        Command::Nm { common, excitation_pair } => nm(common, *excitation_pair).map(|_| true),
        Command::Optimize { common } => optimize(common).map(|_| true),
        Command::Sweep { common, check } => sweep(common, *check),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
