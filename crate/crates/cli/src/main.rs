use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qpu_stencil::harness::{
    self, run_convergence, run_cost_model, run_error_propagation, run_hardware_style,
    run_jacobi_demo, shock_diagnostics, Problem, RunConfig, Setup,
};
use qpu_stencil::Error;

#[derive(Parser)]
#[command(name = "qpu-stencil", version, about = "Sampled quantum micro-kernel PDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Final errors after `sweep_steps` steps for each shot count in `shots_sweep`.
    Convergence(RunArgs),
    /// Per-step errors over `steps` steps for each shot count in `propagation_shots`.
    Propagation(RunArgs),
    /// Single noisy step, raw and mitigated on the same shots.
    HardwareStyle(RunArgs),
    /// Launch/node cost fit, delay-model telemetry and strategy choice.
    CostModel(RunArgs),
    /// One sampled Jacobi sweep on the 1D Poisson system.
    JacobiDemo(JacobiArgs),
    /// Print the resolved configuration as TOML.
    ShowConfig(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Built-in preset to start from.
    #[arg(long)]
    preset: Option<String>,
    /// Config file (TOML); may name a `base` preset.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set shots_sweep=[500,8000]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    /// Time step, or `auto`.
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    mitigation: Option<bool>,
    #[arg(long)]
    strategy: Option<String>,
}

#[derive(Args)]
struct JacobiArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn resolve(&self, default_preset: &str) -> qpu_stencil::Result<RunConfig> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::from_file(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::preset(default_preset)?,
        };
        let mut overrides = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                overrides.push(format!("{key}={v}"));
            }
        };
        push("problem", self.problem.clone().map(quoted));
        push("n", self.n.map(|v| v.to_string()));
        push("nu", self.nu.map(float));
        push("dt", self.dt.clone());
        push("kernel", self.kernel.clone().map(quoted));
        push("shots", self.shots.map(|v| v.to_string()));
        push("steps", self.steps.map(|v| v.to_string()));
        push("repetitions", self.repetitions.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("window", self.window.clone().map(quoted));
        push("noise", self.noise.clone().map(quoted));
        push("mitigation", self.mitigation.map(|v| v.to_string()));
        push("strategy", self.strategy.clone().map(quoted));
        push("output_dir", self.out.as_ref().map(|p| quoted(p.display().to_string())));
        overrides.extend(self.set.iter().cloned());
        let cfg = base.with_overrides(&overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn quoted(s: String) -> String {
    format!("{s:?}")
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stability { .. } | Error::Range { .. } => 3,
        Error::Config(_) | Error::Validation(_) => 2,
        _ => 1,
    }
}

fn run(command: Command) -> qpu_stencil::Result<()> {
    match command {
        Command::Convergence(args) => {
            let cfg = args.resolve("heat-default")?;
            let conv = run_convergence(&cfg)?;
            let files = harness::write_error_report(&cfg.output_dir, "convergence", &conv.report)?;
            let finals = conv.report.final_rows();
            let shocks = if cfg.problem == Problem::Burgers {
                let setup = Setup::new(&cfg, cfg.sweep_steps)?;
                shock_diagnostics(&setup, &conv.report)
            } else {
                Vec::new()
            };
            for r in &finals {
                println!("M={:<6} L2={:.6e} ± {:.2e}  Linf={:.6e}", r.shots, r.l2.mean, r.l2.std, r.linf.mean);
            }
            if let Some(s) = conv.l2_slope {
                println!("log-log slope of L2 vs M: {s:.3}");
            }
            let meta = harness::write_metadata(
                &cfg.output_dir,
                "convergence",
                &cfg,
                &files,
                json!({ "final": finals, "l2_slope": conv.l2_slope, "shock": shocks }),
            )?;
            report_files(&files, &meta);
        }
        Command::Propagation(args) => {
            let cfg = args.resolve("heat-default")?;
            let report = run_error_propagation(&cfg)?;
            let files = harness::write_error_report(&cfg.output_dir, "propagation", &report)?;
            let finals = report.final_rows();
            for r in &finals {
                println!(
                    "M={:<6} step={} relL2={:.4}%  relLinf={:.4}%",
                    r.shots,
                    r.step,
                    100.0 * r.rel_l2.mean,
                    100.0 * r.rel_linf.mean
                );
            }
            let meta = harness::write_metadata(&cfg.output_dir, "propagation", &cfg, &files, json!({ "final": finals }))?;
            report_files(&files, &meta);
        }
        Command::HardwareStyle(args) => {
            let cfg = args.resolve("hardware-style")?;
            let report = run_hardware_style(&cfg)?;
            let files = harness::write_hardware_report(&cfg.output_dir, "hardware_style", &report)?;
            let pairs = report.linf_pairs();
            let improved = pairs.iter().filter(|(raw, mit)| mit <= raw).count();
            for (rep, (raw, mit)) in pairs.iter().enumerate() {
                println!("rep {rep}: Linf raw={raw:.6} mitigated={mit:.6}");
            }
            println!("mitigated <= raw in {improved}/{} repetitions", pairs.len());
            let meta = harness::write_metadata(
                &cfg.output_dir,
                "hardware_style",
                &cfg,
                &files,
                json!({ "rows": report.rows, "mitigated_not_worse": improved }),
            )?;
            report_files(&files, &meta);
        }
        Command::CostModel(args) => {
            let cfg = args.resolve("heat-default")?;
            let report = run_cost_model(&cfg)?;
            let files = harness::write_cost_model(&cfg.output_dir, "cost_model", &report)?;
            println!(
                "T_launch={:.6} s (generating {:.6}), T_node={:.6} s (generating {:.6})",
                report.fitted.0, report.generating.0, report.fitted.1, report.generating.1
            );
            println!("execution ratio M=30000/M=4000: {:.4}", report.execution_ratio);
            println!(
                "strategy: {:?} k_fused={} batch={} per-node {:.6} s",
                report.strategy.strategy, report.strategy.k_fused, report.strategy.batch, report.strategy.per_node_s
            );
            let meta = harness::write_metadata(
                &cfg.output_dir,
                "cost_model",
                &cfg,
                &files,
                json!({
                    "generating": report.generating,
                    "fitted": report.fitted,
                    "execution_ratio": report.execution_ratio,
                    "strategy": report.strategy,
                    "summary": report.table_summary,
                }),
            )?;
            report_files(&files, &meta);
        }
        Command::JacobiDemo(args) => {
            let rows = run_jacobi_demo(args.n, args.shots, args.seed)?;
            let files = harness::write_jacobi(&args.out, "jacobi", &rows)?;
            let mut max_z: f64 = 0.0;
            for r in &rows {
                let z = if r.std_error > 0.0 { (r.estimate - r.exact).abs() / r.std_error } else { 0.0 };
                max_z = max_z.max(z);
                println!("node {}: exact={:.6e} estimate={:.6e} se={:.2e}", r.node, r.exact, r.estimate, r.std_error);
            }
            println!("max |estimate - exact| / se = {max_z:.3}");
            let mut cfg = RunConfig::preset("heat-default")?;
            cfg.n = args.n;
            cfg.shots = args.shots;
            cfg.seed = args.seed;
            cfg.output_dir = args.out.clone();
            let meta = harness::write_metadata(&args.out, "jacobi", &cfg, &files, json!({ "rows": rows, "max_z": max_z }))?;
            report_files(&files, &meta);
        }
        Command::ShowConfig(args) => {
            let cfg = args.resolve("heat-default")?;
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

fn report_files(files: &[PathBuf], meta: &std::path::Path) {
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", meta.display());
}
