use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rhm::bp;
use rhm::grammar::{sample_tree, RuleSet};
use rhm::noise;
use rhm::seeding;
use rhm_cli::{presets, run, CliError, ExperimentConfig};

/// Hierarchical grammar simulator: exact denoising, phase structure,
/// dynamical observables and learnability scans.
#[derive(Parser)]
#[command(name = "rhm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// TOML experiment configuration; defaults to the matching preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also emit SVG line plots.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check rule sets.
    Rules {
        #[command(subcommand)]
        action: RulesAction,
    },
    /// Draw strings from a stored rule set.
    Sample {
        #[arg(long)]
        rules: PathBuf,
        #[arg(short = 'n', long, default_value_t = 1)]
        count: usize,
        /// Fix the class instead of drawing it uniformly.
        #[arg(long)]
        root: Option<u16>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (one string per row); stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corrupt one string and reconstruct it from the posterior.
    Denoise {
        #[arg(long)]
        rules: PathBuf,
        /// epsilon, masking, uniform or gaussian.
        #[arg(long, default_value = "epsilon")]
        channel: String,
        /// eps, t/T or 1 - alpha_bar depending on the channel.
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 20)]
        cap_t: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dump the message field as JSON for debugging.
        #[arg(long)]
        dump_beliefs: Option<PathBuf>,
    },
    /// Fixed-point classification of grammar instances.
    PhaseDiagram(RunFlags),
    /// Layer-reconstruction sweeps over a noise channel.
    Sweep {
        /// epsilon, masking or gaussian.
        channel: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Gaussian random field baseline.
    Grf(RunFlags),
    /// Clustering sample-complexity scan.
    Cluster(RunFlags),
    /// One-step gradient identity residuals.
    Onestep(RunFlags),
    /// Run any named preset.
    Run {
        /// Preset name (see `rhm presets`).
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List available presets.
    Presets,
    /// Validate a configuration without executing it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum RulesAction {
    /// Generate a rule set and write it as JSON.
    Gen {
        #[arg(long)]
        v: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "rules.json")]
        out: PathBuf,
    },
    /// Re-validate a stored rule set.
    Check { file: PathBuf },
}

fn load_config(default_preset: &str, flags: &RunFlags) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => presets::by_name(default_preset)
            .ok_or_else(|| CliError::Config(format!("unknown preset {default_preset:?}")))?,
    };
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &flags.out {
        cfg.out = Some(out.clone());
    }
    if let Some(threads) = flags.threads {
        cfg.threads = Some(threads);
    }
    if flags.svg {
        cfg.emit_svg = true;
    }
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let output = run(cfg)?;
    println!(
        "wrote {} file(s) to {}",
        output.manifest.outputs.len() + 1,
        output.dir.display()
    );
    Ok(())
}

fn leaves_csv(leaves: &[u16]) -> String {
    leaves
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rules { action } => match action {
            RulesAction::Gen {
                v,
                m,
                s,
                depth,
                seed,
                out,
            } => {
                let params = rhm::RhmParams::new(v, m, s, depth, seed)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let rules = RuleSet::generate(params)?;
                std::fs::write(&out, rules.to_json())?;
                println!("wrote {}", out.display());
                Ok(())
            }
            RulesAction::Check { file } => {
                let text = std::fs::read_to_string(&file)?;
                let rules =
                    RuleSet::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
                let p = rules.params();
                println!(
                    "ok: v={} m={} s={} depth={} ({} rules per level)",
                    p.v,
                    p.m,
                    p.s,
                    p.depth,
                    p.m * p.v
                );
                Ok(())
            }
        },
        Command::Sample {
            rules,
            count,
            root,
            seed,
            out,
        } => {
            let rules = RuleSet::from_json(&std::fs::read_to_string(&rules)?)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let mut lines = Vec::with_capacity(count);
            for i in 0..count {
                let mut rng = seeding::stream(seed, "cli-sample", i as u64);
                let tree = sample_tree(&rules, root, &mut rng);
                lines.push(leaves_csv(tree.leaves()));
            }
            let text = lines.join("\n") + "\n";
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Denoise {
            rules,
            channel,
            level,
            cap_t,
            seed,
            dump_beliefs,
        } => {
            let rules = RuleSet::from_json(&std::fs::read_to_string(&rules)?)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let v = rules.params().v;
            let spec = match channel.as_str() {
                "epsilon" => noise::NoiseSpec::Epsilon { eps: level },
                "masking" => noise::NoiseSpec::Masking {
                    t: (level * cap_t as f64).round() as u32,
                    cap_t,
                },
                "uniform" => noise::NoiseSpec::Uniform {
                    alpha_bar: 1.0 - level,
                },
                "gaussian" => noise::NoiseSpec::GaussianOneHot {
                    alpha_bar: 1.0 - level,
                },
                other => return Err(CliError::Config(format!("unknown channel {other:?}"))),
            };
            let mut rng = seeding::stream(seed, "cli-denoise", 0);
            let tree = sample_tree(&rules, None, &mut rng);
            let obs = noise::forward(tree.leaves(), v, spec, &mut rng)?;
            let priors = noise::prior(&obs, v, spec)?;
            let reconstruction = bp::sample_posterior(&rules, &priors, None, &mut rng)?;
            println!("original,{}", leaves_csv(tree.leaves()));
            match &obs {
                noise::NoisyObservation::Masked(x) | noise::NoisyObservation::Uniform(x) => {
                    println!("observed,{}", leaves_csv(x))
                }
                noise::NoisyObservation::Gaussian(_) => {
                    print!("{}", noise::observation_to_csv(&obs))
                }
            }
            println!("reconstructed,{}", leaves_csv(reconstruction.leaves()));
            if let Some(path) = dump_beliefs {
                let field = bp::run(&rules, &priors, None)?;
                std::fs::write(path, field.to_json())?;
            }
            Ok(())
        }
        Command::PhaseDiagram(flags) => execute(&load_config("phase-diagram", &flags)?),
        Command::Sweep { channel, flags } => {
            let preset = match channel.as_str() {
                "epsilon" => "epsilon-sweep",
                "masking" => "masking-inversion",
                "gaussian" => "epsilon-sweep",
                other => {
                    return Err(CliError::Config(format!(
                        "sweep channel must be epsilon, masking or gaussian, got {other:?}"
                    )))
                }
            };
            let mut cfg = load_config(preset, &flags)?;
            if channel == "gaussian" && flags.config.is_none() {
                if let Some(n) = cfg.noise.as_mut() {
                    n.channel = "gaussian".into();
                    // at level 0 the gaussian channel is lossless; start the
                    // grid above the exact endpoint
                    n.grid = (1..=20).map(|k| k as f64 / 20.0).collect();
                }
                cfg.out = cfg
                    .out
                    .or_else(|| Some(PathBuf::from("runs/gaussian-sweep")));
            }
            execute(&cfg)
        }
        Command::Grf(flags) => execute(&load_config("grf-baseline", &flags)?),
        Command::Cluster(flags) => execute(&load_config("cluster-scan", &flags)?),
        Command::Onestep(flags) => execute(&load_config("onestep", &flags)?),
        Command::Run { preset, flags } => {
            let name = preset.unwrap_or_else(|| "susceptibility".into());
            execute(&load_config(&name, &flags)?)
        }
        Command::Presets => {
            for p in presets::list() {
                println!("{:<18} {}", p.name, p.description);
            }
            Ok(())
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_toml(&text)?;
            let issues = cfg.validate();
            if issues.is_empty() {
                println!("ok");
                Ok(())
            } else {
                for issue in &issues {
                    eprintln!("{issue}");
                }
                Err(CliError::Config(format!("{} issue(s)", issues.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
