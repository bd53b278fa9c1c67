use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tdumpc_core::{
    generate_network, gradcheck, load_config, load_network, run_experiment, save_network,
    write_json, write_outputs, Experiment, ExperimentConfig, GradcheckConfig, Preset, RunOptions,
    Synapse,
};

#[derive(Parser)]
#[command(
    name = "tdumpc",
    version,
    about = "Receding-horizon control of modular spiking networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment file (TOML)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: n15 or n30
    #[arg(long)]
    preset: Option<Preset>,
    /// Master seed, overriding the config; `run` accepts a comma-separated list
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
}

impl Source {
    fn load(&self) -> Result<(ExperimentConfig, Option<String>)> {
        match (&self.config, self.preset) {
            (Some(path), _) => Ok((load_config(path)?, None)),
            (None, Some(p)) => Ok((ExperimentConfig::preset(p), Some(p.to_string()))),
            (None, None) => bail!("give either --config <file> or --preset <n15|n30>"),
        }
    }

    fn single_seed(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        match self.seed.as_slice() {
            [] => {}
            [s] => cfg.seed = *s,
            _ => bail!("this command takes a single --seed"),
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a network and write it as an edge list
    Generate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Warm up, run the closed loop and the zero-control baseline, write
    /// trace.csv, control.csv and report.json
    Run {
        #[command(flatten)]
        source: Source,
        /// Use this network file instead of sampling one
        #[arg(long)]
        network: Option<PathBuf>,
        /// Output directory (default: the config's output.dir); one
        /// subdirectory per seed when several are given
        #[arg(long)]
        out: Option<PathBuf>,
        /// Apply zero control instead of optimizing
        #[arg(long)]
        no_control: bool,
        /// Seeds run concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Per-step progress on stderr
        #[arg(long)]
        verbose: bool,
    },
    /// Compare reverse-mode gradients with finite differences, then repeat
    /// with hard-threshold synapses
    Gradcheck {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Also write both reports as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Command::Generate { source, out } => {
            let (mut cfg, _) = source.load()?;
            source.single_seed(&mut cfg)?;
            cfg.validate()?;
            let g = generate_network(&cfg.network, cfg.seed)?;
            save_network(&g, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {}: n={} edges={} partition={:?} inhibitory={:?}",
                out.display(),
                g.n(),
                g.edges().len(),
                g.partition().sizes(),
                g.inhibitory()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            source,
            network,
            out,
            no_control,
            jobs,
            verbose,
        } => run(source, network, out, no_control, jobs, verbose),
        Command::Gradcheck {
            source,
            samples,
            h,
            out,
        } => {
            let (mut cfg, _) = source.load()?;
            source.single_seed(&mut cfg)?;
            let gc = GradcheckConfig {
                samples,
                h,
                ..GradcheckConfig::default()
            };
            let soft = gradcheck(&cfg, &gc, Synapse::Soft)?;
            let hard = gradcheck(&cfg, &gc, Synapse::Hard)?;
            println!(
                "soft threshold: {} samples, {} checked, {} skipped ({:.1}%)",
                soft.samples,
                soft.checked,
                soft.skipped,
                100.0 * soft.skip_fraction
            );
            println!(
                "  max relative error {:.3e} at h={:e} ({} of {} within {:e}); {:.3e} at h={:e}",
                soft.max_rel_error,
                gc.h,
                soft.within_tolerance,
                soft.checked,
                gc.tolerance,
                soft.max_rel_error_fine,
                gc.h_fine
            );
            println!("  {}", if soft.passed { "PASS" } else { "FAIL" });
            let pathology = hard.zero_fraction >= 0.9;
            println!(
                "hard threshold: {:.1}% of control gradients exactly zero ({})",
                100.0 * hard.zero_fraction,
                if pathology {
                    "gradient signal lost"
                } else {
                    "gradient signal survives"
                }
            );
            if let Some(path) = out {
                write_json(&serde_json::json!({ "soft": soft, "hard": hard }), &path)?;
            }
            Ok(if soft.passed && pathology {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn run(
    source: Source,
    network: Option<PathBuf>,
    out: Option<PathBuf>,
    no_control: bool,
    jobs: usize,
    verbose: bool,
) -> Result<ExitCode> {
    let (mut base, preset) = source.load()?;
    if let Some(dir) = &out {
        base.output.dir = dir.clone();
    }
    let seeds = if source.seed.is_empty() {
        vec![base.seed]
    } else {
        source.seed.clone()
    };
    let graph = match &network {
        Some(path) => Some(load_network(path)?),
        None => None,
    };
    let single = seeds.len() == 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let results: Vec<Result<Experiment>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = base.clone();
                cfg.seed = seed;
                if !single {
                    cfg.output.dir = base.output.dir.join(format!("seed-{seed}"));
                }
                let opts = RunOptions {
                    preset: preset.clone(),
                    network: graph.clone().zip(network.clone()),
                    no_control,
                    verbose,
                };
                let exp = run_experiment(&cfg, opts).with_context(|| format!("seed {seed}"))?;
                let dir = &exp.report.config.output.dir;
                write_outputs(&exp, dir).with_context(|| format!("writing {}", dir.display()))?;
                Ok(exp)
            })
            .collect()
    });

    let mut dominated = 0;
    let mut improved = 0;
    let total = results.len();
    for r in results {
        let exp = r?;
        print_run(&exp, &exp.report.config.output.dir);
        dominated += exp.report.dominance as usize;
        improved += (exp.report.improves_on_baseline == Some(true)) as usize;
    }
    if total > 1 {
        println!("2x dominance in both intervals: {dominated}/{total} seeds");
        if base.output.baseline {
            println!("objective above baseline:        {improved}/{total} seeds");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_run(exp: &Experiment, dir: &Path) {
    let r = &exp.report;
    let part = exp.graph.partition();
    println!(
        "seed {} | {} neurons, {} edges | written to {}",
        r.seed,
        r.network.n,
        r.network.edges,
        dir.display()
    );
    println!("controlled");
    print!("{}", r.controlled.table(part));
    if let Some(b) = &r.baseline {
        println!("zero-control baseline");
        print!("{}", b.table(part));
    }
    let c = &r.controlled.counts;
    let ratio = |x: Option<f64>, target: usize| match (x, target) {
        (Some(v), _) => format!("{v:.2}"),
        (None, 0) => "n/a (both silent)".to_string(),
        (None, _) => "inf".to_string(),
    };
    println!(
        "target/other ratio: {} in interval 1, {} in interval 2 -> {}",
        ratio(r.controlled.ratio_interval1, c.module1_interval1),
        ratio(r.controlled.ratio_interval2, c.module2_interval2),
        if r.dominance {
            "at least 2x"
        } else {
            "below 2x"
        }
    );
    println!(
        "MPC step time: mean {:.4} s, max {:.4} s",
        r.timings.mean_step_secs, r.timings.max_step_secs
    );
    println!();
}
