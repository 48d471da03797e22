//! Command-line front end. `main` only forwards to [`run`].

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_bench, BenchConfig};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fasteval::FastTide;
use crate::hansen::build_g20_table;
use crate::integrators::{Dynamics, MapMode, Method, TideEval};
use crate::manifest::RunManifest;
use crate::model::{Model, State};
use crate::montecarlo::{run_campaign, summarize, Checkpoint};
use crate::strips::{default_layout, StripLayout};
use crate::validation::{fast_tide_gate, hansen_gate, hem_gate};
use crate::{CaptureDecision, CaptureDetector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "spinorbit", version, about = "Spin-orbit capture dynamics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Parameter file of `key = value` lines.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Extra `key=value` setting, applied after the file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file; standard output when absent (campaign: base path).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long = "max-iters", global = true)]
    pub max_iters: Option<u64>,
    #[arg(long = "capture-L", global = true)]
    pub capture_l: Option<usize>,
    #[arg(long = "capture-K", global = true)]
    pub capture_k: Option<usize>,
    #[arg(long = "capture-eps-i", global = true)]
    pub capture_eps_i: Option<f64>,
    #[arg(long = "capture-eps-m", global = true)]
    pub capture_eps_m: Option<f64>,
    /// Orbital eccentricity.
    #[arg(long = "e", global = true)]
    pub e: Option<f64>,
    /// Cache file for the fitted tidal acceleration.
    #[arg(long = "fit-cache", global = true)]
    pub fit_cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hansen coefficients G_20q(e) as CSV.
    Hansen {
        #[arg(long, default_value_t = -12, allow_hyphen_values = true)]
        q_min: i32,
        #[arg(long, default_value_t = 12, allow_hyphen_values = true)]
        q_max: i32,
    },
    /// Tidal acceleration and its derivative on a grid of theta_dot / n.
    TideDump {
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 6001)]
        samples: usize,
    },
    /// Triaxial acceleration over theta in [0, 2 pi) at a fixed time.
    TriDump {
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 361)]
        samples: usize,
    },
    /// Strip layout as JSON.
    Layout,
    /// Error gates; exits 1 if any fails.
    Validate {
        /// Random states per Taylor strip.
        #[arg(long, default_value_t = 250)]
        points: usize,
        /// Random rates for the fitted tidal path.
        #[arg(long, default_value_t = 100_000)]
        tide_samples: usize,
        /// Override every Taylor strip's series degree.
        #[arg(long = "corrupt-ds")]
        corrupt_ds: Option<u32>,
    },
    /// Iterate the Poincaré map from one state; CSV of the section points.
    Traj {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta0: f64,
        /// Initial rate in rad/yr.
        #[arg(long = "theta-dot0", allow_hyphen_values = true)]
        theta_dot0: f64,
        #[arg(long, default_value_t = 100_000)]
        iters: u64,
        /// Write every `stride`-th point.
        #[arg(long, default_value_t = 1)]
        stride: u64,
        /// Stop at capture (up to the iteration cap) instead of after `iters`.
        #[arg(long)]
        until_capture: bool,
        #[arg(long)]
        rk_only: bool,
        #[arg(long)]
        exact_tide: bool,
    },
    /// Monte Carlo capture probabilities; writes `<out>.json` and `<out>.csv`.
    Campaign {
        /// Number of initial conditions.
        #[arg(long)]
        trajectories: Option<u64>,
        /// Continue from `<out>.checkpoint.jsonl`.
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value_t = 1)]
        checkpoint_every: u64,
        #[arg(long)]
        calibration_terms: Option<u64>,
        #[arg(long)]
        rk_only: bool,
        #[arg(long)]
        exact_tide: bool,
    },
    /// Map timings in CPU-sec per 1e5 iterations.
    Bench {
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 2000)]
        taylor_iters: u64,
        #[arg(long, default_value_t = 200)]
        rk_iters: u64,
        #[arg(long)]
        calibration_terms: Option<u64>,
    },
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Error(Error::Json(e))
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Error(Error::IntegrationFailure { .. } | Error::OutsideStrip { .. }) => {
                EXIT_INTEGRATION
            }
            Failure::Error(_) => EXIT_CONFIG,
        }
    }
}

/// Parse the process arguments, run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Validation(msg) => eprintln!("validation failed: {msg}"),
                Failure::Error(e) => eprintln!("error: {e}"),
            }
            f.exit_code()
        }
    }
}

/// Resolve defaults, the parameter file, `--set` pairs and dedicated flags,
/// in that order.
pub fn resolve_config(g: &GlobalArgs) -> Result<(RunConfig, Vec<String>)> {
    let mut cfg = match &g.params {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut overrides = Vec::new();
    for pair in &g.set {
        cfg.apply_override(pair)?;
        overrides.push(pair.clone());
    }
    let flags: [(&str, Option<String>); 8] = [
        ("seed", g.seed.map(|v| v.to_string())),
        ("workers", g.workers.map(|v| v.to_string())),
        ("max_iters", g.max_iters.map(|v| v.to_string())),
        ("L", g.capture_l.map(|v| v.to_string())),
        ("K", g.capture_k.map(|v| v.to_string())),
        ("eps_i", g.capture_eps_i.map(|v| format!("{v:e}"))),
        ("eps_m", g.capture_eps_m.map(|v| format!("{v:e}"))),
        ("e", g.e.map(|v| format!("{v:e}"))),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
            overrides.push(format!("{key}={v}"));
        }
    }
    cfg.capture.validate()?;
    cfg.stepper.validate()?;
    Ok((cfg, overrides))
}

/// Round-trip formatting, 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct Context {
    cfg: RunConfig,
    manifest: RunManifest,
    fit_cache: Option<PathBuf>,
}

impl Context {
    fn model(&self) -> Result<Model> {
        self.cfg.build_model()
    }

    fn fast_tide(&self, model: &Model) -> Result<FastTide> {
        match &self.fit_cache {
            Some(p) => FastTide::load_or_build(model, p),
            None => FastTide::build(model),
        }
    }

    fn dynamics(&self, layout: impl FnOnce(&Model) -> StripLayout) -> Result<Dynamics> {
        let model = self.model()?;
        let fast = self.fast_tide(&model)?;
        let layout = layout(&model);
        Dynamics::new(model, fast, layout, self.cfg.stepper)
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

#[derive(Serialize)]
struct JsonOutput<'a, T: Serialize> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(path: Option<&Path>, manifest: &RunManifest, body: T) -> Result<()> {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, &JsonOutput { manifest, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn mode_for(rk_only: bool, exact_tide: bool) -> MapMode {
    MapMode {
        method: if rk_only {
            Method::RkOnly
        } else {
            Method::Hybrid
        },
        tide: if exact_tide {
            TideEval::Exact
        } else {
            TideEval::Fast
        },
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Hansen { .. } => "hansen",
        Command::TideDump { .. } => "tide-dump",
        Command::TriDump { .. } => "tri-dump",
        Command::Layout => "layout",
        Command::Validate { .. } => "validate",
        Command::Traj { .. } => "traj",
        Command::Campaign { .. } => "campaign",
        Command::Bench { .. } => "bench",
    }
}

pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let (cfg, overrides) = resolve_config(&cli.global)?;
    let mut manifest = RunManifest::new(subcommand_name(&cli.command), &cfg);
    manifest.params_file = cli.global.params.as_ref().map(|p| p.display().to_string());
    manifest.overrides = overrides;
    manifest.arguments = vec![format!("{:?}", cli.command)];
    let out = cli.global.out.clone();
    if let Some(p) = &out {
        manifest.outputs.push(p.display().to_string());
    }
    let mut ctx = Context {
        cfg,
        manifest,
        fit_cache: cli.global.fit_cache.clone(),
    };
    let out = out.as_deref();

    match &cli.command {
        Command::Hansen { q_min, q_max } => cmd_hansen(&ctx, *q_min, *q_max, out)?,
        Command::TideDump { from, to, samples } => cmd_tide_dump(&ctx, *from, *to, *samples, out)?,
        Command::TriDump { t, samples } => cmd_tri_dump(&ctx, *t, *samples, out)?,
        Command::Layout => {
            let model = ctx.model()?;
            let layout = default_layout(model.n());
            #[derive(Serialize)]
            struct Body<'a> {
                n: f64,
                h_measure: f64,
                strips: &'a [crate::strips::Strip],
            }
            write_json(
                out,
                &ctx.manifest,
                Body {
                    n: layout.n(),
                    h_measure: layout.h_measure(),
                    strips: layout.strips(),
                },
            )?;
        }
        Command::Validate {
            points,
            tide_samples,
            corrupt_ds,
        } => cmd_validate(&ctx, *points, *tide_samples, *corrupt_ds, out)?,
        Command::Traj {
            theta0,
            theta_dot0,
            iters,
            stride,
            until_capture,
            rk_only,
            exact_tide,
        } => {
            let mode = mode_for(*rk_only, *exact_tide);
            let count = if *until_capture {
                ctx.cfg.capture.max_iterations
            } else {
                *iters
            };
            cmd_traj(
                &ctx,
                State::new(*theta0, *theta_dot0, 0.0),
                count,
                *stride,
                *until_capture,
                mode,
                out,
            )?
        }
        Command::Campaign {
            trajectories,
            resume,
            checkpoint_every,
            calibration_terms,
            rk_only,
            exact_tide,
        } => {
            if let Some(i) = trajectories {
                ctx.cfg.trajectories = *i;
            }
            let mut campaign = ctx.cfg.campaign();
            campaign.checkpoint_every = *checkpoint_every;
            if let Some(t) = calibration_terms {
                campaign.calibration_terms = *t;
            }
            let base = out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("campaign"));
            cmd_campaign(
                &mut ctx,
                campaign,
                mode_for(*rk_only, *exact_tide),
                *resume,
                &base,
            )?
        }
        Command::Bench {
            samples,
            taylor_iters,
            rk_iters,
            calibration_terms,
        } => {
            let mut bench = BenchConfig {
                samples: *samples,
                taylor_iterations: *taylor_iters,
                rk_iterations: *rk_iters,
                seed: ctx.cfg.seed,
                ..BenchConfig::default()
            };
            if let Some(t) = calibration_terms {
                bench.calibration_terms = *t;
            }
            let dynamics = ctx.dynamics(|m| default_layout(m.n()))?;
            let report = run_bench(&dynamics, &bench)?;
            eprintln!("{:<26} {:>12}", "method", "CPU-sec/1e5");
            for row in &report.rows {
                eprintln!("{:<26} {:>12.4}", row.label, row.cpu_sec);
            }
            eprintln!(
                "Taylor/RK-fast speedup {:.1}, RK exact/fast {:.2}, tide exact/fast {:.2}",
                report.taylor_vs_rk_fast, report.rk_exact_vs_fast, report.tide_exact_vs_fast
            );
            write_json(out, &ctx.manifest, &report)?;
        }
    }
    Ok(())
}

fn cmd_hansen(ctx: &Context, q_min: i32, q_max: i32, out: Option<&Path>) -> Result<()> {
    if q_min > q_max {
        return Err(Error::Config(format!("empty q range {q_min}..{q_max}")));
    }
    let table = build_g20_table(ctx.cfg.constants.e, q_min..=q_max)?;
    let mut w = open_out(out)?;
    write!(w, "{}", ctx.manifest.csv_header())?;
    writeln!(w, "q,G20q,log10_abs_G20q")?;
    for (q, g) in table.iter() {
        let log = if g == 0.0 {
            String::new()
        } else {
            fmt17(g.abs().log10())
        };
        writeln!(w, "{q},{},{log}", fmt17(g))?;
    }
    w.flush()?;
    Ok(())
}

fn grid(from: f64, to: f64, samples: usize) -> impl Iterator<Item = f64> {
    let step = if samples > 1 {
        (to - from) / (samples - 1) as f64
    } else {
        0.0
    };
    (0..samples).map(move |i| from + step * i as f64)
}

fn cmd_tide_dump(
    ctx: &Context,
    from: f64,
    to: f64,
    samples: usize,
    out: Option<&Path>,
) -> Result<()> {
    let model = ctx.model()?;
    let n = model.n();
    let mut w = open_out(out)?;
    write!(w, "{}", ctx.manifest.csv_header())?;
    writeln!(w, "ratio,theta_dot,accel_tide,d_accel_tide")?;
    for ratio in grid(from, to, samples) {
        let x = ratio * n;
        let deriv = match model.accel_tide_deriv(x) {
            Ok(d) => fmt17(d),
            Err(Error::SingularPoint { .. }) => String::new(),
            Err(e) => return Err(e),
        };
        writeln!(
            w,
            "{},{},{},{deriv}",
            fmt17(ratio),
            fmt17(x),
            fmt17(model.accel_tide_exact(x))
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_tri_dump(ctx: &Context, t: f64, samples: usize, out: Option<&Path>) -> Result<()> {
    let model = ctx.model()?;
    let mut w = open_out(out)?;
    write!(w, "{}", ctx.manifest.csv_header())?;
    writeln!(w, "theta,t,accel_tri")?;
    let step = std::f64::consts::TAU / samples.max(1) as f64;
    for i in 0..samples {
        let theta = step * i as f64;
        writeln!(
            w,
            "{},{},{}",
            fmt17(theta),
            fmt17(t),
            fmt17(model.accel_tri(theta, t))
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_validate(
    ctx: &Context,
    points: usize,
    tide_samples: usize,
    corrupt_ds: Option<u32>,
    out: Option<&Path>,
) -> std::result::Result<(), Failure> {
    let dynamics = ctx.dynamics(|m| {
        let layout = default_layout(m.n());
        match corrupt_ds {
            Some(d) => layout.with_series_degree(d),
            None => layout,
        }
    })?;
    let hem = hem_gate(&dynamics, points, ctx.cfg.seed)?;
    let tide = fast_tide_gate(
        dynamics.model(),
        dynamics.fast_tide(),
        tide_samples,
        ctx.cfg.seed,
    );
    let hansen = hansen_gate(dynamics.model().table())?;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    eprintln!(
        "{} taylor map: worst theta {:.3e}, theta_dot {:.3e} over {} strips",
        verdict(hem.pass),
        hem.worst_theta,
        hem.worst_rate,
        hem.strips.len()
    );
    eprintln!(
        "{} fitted tide: max error {:.3e}, fractional powers <= {}",
        verdict(tide.pass),
        tide.max_error,
        tide.max_fractional_powers
    );
    eprintln!(
        "{} hansen: max |series - quadrature| {:.3e}, G(-2) {:.3e}, negative {:?}",
        verdict(hansen.pass),
        hansen.max_difference,
        hansen.g_minus_2,
        hansen.negative_indices
    );
    let pass = hem.pass && tide.pass && hansen.pass;
    #[derive(Serialize)]
    struct Body {
        pass: bool,
        hem: crate::validation::HemGate,
        fast_tide: crate::validation::FastTideGate,
        hansen: crate::validation::HansenGate,
    }
    write_json(
        out,
        &ctx.manifest,
        Body {
            pass,
            hem,
            fast_tide: tide,
            hansen,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Validation("one or more gates failed".into()))
    }
}

fn cmd_traj(
    ctx: &Context,
    start: State,
    count: u64,
    stride: u64,
    until_capture: bool,
    mode: MapMode,
    out: Option<&Path>,
) -> Result<()> {
    if !start.is_finite() {
        return Err(Error::Config("initial state must be finite".into()));
    }
    let dynamics = ctx.dynamics(|m| default_layout(m.n()))?;
    let n = dynamics.model().n();
    let stride = stride.max(1);
    let mut prop = dynamics.propagator(mode);
    let mut detector = CaptureDetector::new(ctx.cfg.capture, n)?;
    let mut w = open_out(out)?;
    write!(w, "{}", ctx.manifest.csv_header())?;
    writeln!(w, "k,theta,theta_dot,ratio")?;
    let row = |w: &mut dyn Write, k: u64, s: &State| {
        writeln!(
            w,
            "{k},{},{},{}",
            fmt17(s.theta),
            fmt17(s.theta_dot),
            fmt17(s.theta_dot / n)
        )
    };
    row(&mut w, 0, &start)?;
    let mut state = start;
    let mut done = 0;
    for k in 1..=count {
        state = prop.map(state)?;
        done = k;
        if k % stride == 0 {
            row(&mut w, k, &state)?;
        }
        if let CaptureDecision::Captured { .. } = detector.update(state.theta_dot) {
            if until_capture {
                break;
            }
        }
    }
    let report = detector.report(None);
    writeln!(w, "# capture: {}", serde_json::to_string(&report)?)?;
    writeln!(
        w,
        "# iterations: {}",
        serde_json::to_string(&prop.counts())?
    )?;
    w.flush()?;
    match report.attractor_2p {
        Some(a) if report.captured => eprintln!(
            "captured at theta_dot/n = {}/2 after {} iterations",
            a, report.capture_iteration
        ),
        _ => eprintln!("not captured in {done} iterations"),
    }
    Ok(())
}

fn cmd_campaign(
    ctx: &mut Context,
    campaign: crate::montecarlo::CampaignConfig,
    mode: MapMode,
    resume: bool,
    base: &Path,
) -> Result<()> {
    let with_ext = |ext: &str| {
        let mut s = base.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let (json_path, csv_path, cp_path) = (
        with_ext(".json"),
        with_ext(".csv"),
        with_ext(".checkpoint.jsonl"),
    );
    ctx.manifest.outputs = [&json_path, &csv_path, &cp_path]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let done = if resume {
        Checkpoint::load(&cp_path)?
    } else {
        if cp_path.exists() {
            fs::remove_file(&cp_path)?;
        }
        Vec::new()
    };
    if !done.is_empty() {
        eprintln!("resuming with {} finished trajectories", done.len());
    }
    let dynamics = ctx.dynamics(|m| default_layout(m.n()))?;
    let checkpoint = Checkpoint::open(&cp_path, campaign.checkpoint_every)?;
    let outcomes = run_campaign(&dynamics, mode, &campaign, done, Some(&checkpoint))?;
    let report = summarize(&outcomes);

    let mut w = open_out(Some(&csv_path))?;
    write!(w, "{}", ctx.manifest.csv_header())?;
    writeln!(
        w,
        "index,theta0,theta_dot0,attractor_2p,capture_iteration,cpu_sec,error"
    )?;
    for o in &outcomes {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            o.index,
            fmt17(o.theta0),
            fmt17(o.theta_dot0),
            o.capture
                .attractor_2p
                .map(|a| a.to_string())
                .unwrap_or_default(),
            o.capture.capture_iteration,
            o.capture.cpu_seconds.map(fmt17).unwrap_or_default(),
            o.error.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    w.flush()?;

    #[derive(Serialize)]
    struct Body<'a> {
        campaign: &'a crate::montecarlo::CampaignConfig,
        mode: MapMode,
        report: &'a crate::montecarlo::ProbabilityReport,
    }
    write_json(
        Some(&json_path),
        &ctx.manifest,
        Body {
            campaign: &campaign,
            mode,
            report: &report,
        },
    )?;
    for row in &report.attractors {
        eprintln!(
            "{:>5} {:>7} {:>8.3}% +- {:.3}%",
            format!("{}/2", row.attractor_2p),
            row.count,
            100.0 * row.p_hat,
            100.0 * row.delta_p
        );
    }
    eprintln!("uncaptured {}, failed {}", report.uncaptured, report.failed);
    Ok(())
}
