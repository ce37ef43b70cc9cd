//! `spdc-schmidt`: theory, synthesis, reconstruction and benchmarking from
//! the command line.
//!
//! Settings come from built-in defaults, then `--config FILE`, then each
//! `--set key=value` in order, then dedicated flags. Failures print one line
//! `error[<class>]: <message>` to stderr and exit with the class's code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use spdc_schmidt::io::{
    read_correlation, read_decomposition, read_stack, read_table, write_bench_report,
    write_correlation, write_intensity, write_result_bundle, write_stack, BundleContext, RunConfig,
};
use spdc_schmidt::spdc::g1_slice;
use spdc_schmidt::{
    compare_methods, diagonalize_1d, reconstruct_pipeline, synthesize_stack, tensor_spectrum,
    CompareConfig, CorrelationMatrix, Error, IntensityProfile, SchmidtResult, SynthesisSpec,
};

#[derive(Parser, Debug)]
#[command(name = "spdc-schmidt", version, about = "Spatial Schmidt modes of high-gain PDC")]
struct Cli {
    /// key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Theory correlation slice and far-field intensity.
    Simulate {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        gain: Option<f64>,
    },
    /// Schmidt decomposition of a correlation file.
    Decompose {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Thermal frame stack from a 1D decomposition.
    Generate {
        /// Directory holding eigenvalues.tsv and modes_1d.tsv.
        #[arg(long, value_name = "DIR")]
        decomposition: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Schmidt decomposition reconstructed from a frame stack.
    Reconstruct {
        #[arg(long, value_name = "FILE")]
        stack: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Theory bundles over a list of gains plus a summary table.
    Sweep {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Comma-separated gains; overrides the `gains` key.
        #[arg(long)]
        gains: Option<String>,
    },
    /// Time the slice method against the full 4D method.
    Bench {
        #[arg(long, value_name = "FILE", conflicts_with = "decomposition", required_unless_present = "decomposition")]
        stack: Option<PathBuf>,
        /// Synthesize the stack from this decomposition instead.
        #[arg(long, value_name = "DIR")]
        decomposition: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = 8)]
        m_top: usize,
        #[command(flatten)]
        synth: SynthFlags,
    },
}

#[derive(Args, Debug)]
struct SynthFlags {
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    read_noise: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    quantize: Option<bool>,
}

impl SynthFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.synthesis;
        if let Some(v) = self.frames {
            s.n_frames = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.read_noise {
            s.noise.read_noise = v;
        }
        if let Some(v) = self.offset {
            s.noise.offset = v;
        }
        if let Some(v) = self.quantize {
            s.noise.quantize = v;
        }
    }
}

/// Exit code per error class; 2 is reserved for command-line usage errors.
fn exit_code(class: &str) -> u8 {
    match class {
        "config" => 3,
        "io" => 4,
        "format" => 5,
        "argument" => 6,
        "domain" => 7,
        "phase-matching" => 8,
        "evanescent" => 9,
        "accuracy" => 10,
        "degenerate-input" => 11,
        "data" => 12,
        "contract" => 13,
        "index" => 14,
        "not-measurable" => 15,
        "geometry" => 16,
        "resource" => 17,
        _ => 1,
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid usage");
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), one_line(&e.to_string()));
            ExitCode::from(exit_code(e.class()))
        }
    }
}

fn load_config(cli: &Cli) -> spdc_schmidt::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    Ok(cfg)
}

fn context(cfg: &RunConfig, source: String, seed: Option<u64>) -> BundleContext {
    BundleContext {
        source,
        seed,
        config: Some(cfg.to_text()),
        modes_2d: cfg.modes_2d,
        ..BundleContext::default()
    }
}

fn create_dir(dir: &Path) -> spdc_schmidt::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn decompose_and_write(
    corr: &CorrelationMatrix,
    cfg: &RunConfig,
    dir: &Path,
    mut ctx: BundleContext,
) -> spdc_schmidt::Result<SchmidtResult> {
    let one_d = diagonalize_1d(corr)?;
    let n = one_d.mu.len();
    let result = tensor_spectrum(&one_d, cfg.recon.n_keep.min(n * n))?;
    ctx.metrics.push(("total_intensity".into(), corr.diagonal().iter().sum()));
    write_result_bundle(dir, &result, &ctx)?;
    Ok(result)
}

fn run(cli: Cli) -> spdc_schmidt::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate { out, gain } => {
            if let Some(g) = gain {
                cfg.crystal.gain = g;
            }
            create_dir(&out)?;
            let corr = g1_slice(&cfg.crystal, &cfg.grid, &cfg.quad)?;
            let ctx = context(&cfg, "theory".into(), None);
            write_correlation(&out.join("correlation.tsv"), &corr, &ctx)?;
            let profile = IntensityProfile {
                values: corr.diagonal(),
                grid: corr.grid,
            };
            write_intensity(&out.join("intensity.tsv"), &profile, &ctx)?;
            println!(
                "simulated g={} on {} points: total intensity {:.6e}",
                cfg.crystal.gain,
                cfg.grid.n_points,
                profile.total()
            );
        }
        Command::Decompose { input, out } => {
            let corr = read_correlation(&input)?;
            let ctx = context(&cfg, format!("decompose {}", input.display()), None);
            let r = decompose_and_write(&corr, &cfg, &out, ctx)?;
            println!("K = {:.6}", r.metrics.schmidt_number);
        }
        Command::Generate {
            decomposition,
            out,
            synth,
        } => {
            synth.apply(&mut cfg);
            let one_d = read_decomposition(&decomposition)?;
            let eig = read_table(&decomposition.join("eigenvalues.tsv"))?;
            let mut spec = SynthesisSpec::new(one_d, cfg.synthesis.n_frames, cfg.synthesis.seed);
            spec.noise = cfg.synthesis.noise;
            spec.gain = eig.comment("config.gain").and_then(|g| g.parse().ok());
            let stack = synthesize_stack(&spec)?;
            write_stack(&out, &stack)?;
            println!(
                "wrote {}x{}x{} stack to {}",
                stack.n_rows,
                stack.n_cols,
                stack.n_frames,
                out.display()
            );
        }
        Command::Reconstruct { stack, out } => {
            let s = read_stack(&stack)?;
            let rec = reconstruct_pipeline(&s, &cfg.recon)?;
            create_dir(&out)?;
            let d = &rec.diagnostics;
            let mut ctx = context(&cfg, format!("reconstruct {}", stack.display()), s.metadata.seed);
            ctx.metrics.push(("total_intensity".into(), rec.correlation.diagonal().iter().sum()));
            ctx.diagnostics = vec![
                ("center".into(), format!("{},{}", d.center.0, d.center.1)),
                ("slice_length".into(), d.length.to_string()),
                ("n_angles".into(), d.n_angles.to_string()),
                ("n_frames".into(), d.n_frames.to_string()),
                ("clamped_entries".into(), d.clamped_entries.to_string()),
                ("clamped_eigen_mass".into(), format!("{:.8e}", d.clamped_eigen_mass)),
                ("accidental_ratio".into(), format!("{:.8e}", d.accidental_ratio)),
            ];
            write_result_bundle(&out, &rec.result, &ctx)?;
            write_correlation(&out.join("correlation.tsv"), &rec.correlation, &ctx)?;
            println!("K = {:.6}", rec.result.metrics.schmidt_number);
        }
        Command::Sweep { out, gains } => {
            if let Some(g) = gains {
                cfg.set("gains", &g)?;
            }
            if cfg.gains.is_empty() {
                return Err(Error::InvalidArgument("empty gain list".into()));
            }
            create_dir(&out)?;
            let mut table = String::from("g\ttotal_intensity\tschmidt_number\tfwhm_u0_mrad\n");
            for &g in &cfg.gains {
                let mut point = cfg.clone();
                point.crystal.gain = g;
                let corr = g1_slice(&point.crystal, &point.grid, &point.quad)?;
                let dir = out.join(format!("g_{g:.4}"));
                let ctx = context(&point, "theory".into(), None);
                let r = decompose_and_write(&corr, &point, &dir, ctx)?;
                let fwhm = r.metrics.fwhm_mrad.first().copied().flatten();
                let _ = writeln!(
                    table,
                    "{g:.8e}\t{:.8e}\t{:.8e}\t{}",
                    corr.diagonal().iter().sum::<f64>(),
                    r.metrics.schmidt_number,
                    fwhm.map_or("nan".into(), |w| format!("{w:.8e}"))
                );
            }
            let path = out.join("sweep.tsv");
            let text = context(&cfg, "sweep".into(), None).config.map_or(String::new(), |c| {
                c.lines().map(|l| format!("# config.{l}\n")).collect()
            }) + &table;
            fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
            print!("{table}");
        }
        Command::Bench {
            stack,
            decomposition,
            out,
            runs,
            m_top,
            synth,
        } => {
            synth.apply(&mut cfg);
            let (s, io_seconds, source) = match (stack, decomposition) {
                (Some(p), _) => {
                    let t = Instant::now();
                    let s = read_stack(&p)?;
                    (s, Some(t.elapsed().as_secs_f64()), format!("bench {}", p.display()))
                }
                (None, Some(d)) => {
                    let mut spec = SynthesisSpec::new(read_decomposition(&d)?, cfg.synthesis.n_frames, cfg.synthesis.seed);
                    spec.noise = cfg.synthesis.noise;
                    (synthesize_stack(&spec)?, None, format!("bench synthetic {}", d.display()))
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            let compare = CompareConfig {
                recon: cfg.recon.clone(),
                m_top,
                runs,
                ..CompareConfig::default()
            };
            let mut report = compare_methods(&s, &compare)?;
            report.io_seconds = io_seconds;
            let ctx = context(&cfg, source, s.metadata.seed);
            write_bench_report(&out, &report, &ctx)?;
            println!(
                "speedup {:.1}x, spectrum L1 {:.4}, subspace overlap {:.4}",
                report.speedup, report.spectrum_l1, report.subspace_overlap
            );
        }
    }
    Ok(())
}
