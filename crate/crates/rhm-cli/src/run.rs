//! Experiment execution: dispatch per kind, deterministic parallel farms
//! over (start, trajectory) cells, CSV/SVG emission and the run manifest.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use rhm::bp::{self, BackwardChannel};
use rhm::grammar::{sample_tree, RuleSet};
use rhm::learnstats::{self, Context, PatchSpec};
use rhm::noise;
use rhm::observables::{self, CorrelationAccumulator, CorrelationTable};
use rhm::seeding;
use rhm::{meanfield, RhmParams};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::csvout::{fmt_f64, Csv};
use crate::error::CliError;
use crate::svg;

/// Checksummed record of one run.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub config_sha256: String,
    pub wall_clock_ms: u128,
    /// Output file name to SHA-256 of its bytes.
    pub outputs: std::collections::BTreeMap<String, String>,
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Executes a validated configuration and writes its artifact directory.
/// The same configuration and seed produce byte-identical CSV outputs.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let issues = config.validate();
    if !issues.is_empty() {
        return Err(CliError::Config(issues.join("; ")));
    }
    let started = Instant::now();

    let execute = || -> Result<Vec<(String, String)>, CliError> {
        match config.kind {
            ExperimentKind::PhaseDiagram => phase_diagram(config),
            ExperimentKind::EpsilonSweep => epsilon_sweep(config),
            ExperimentKind::MaskingInversion => masking_inversion(config),
            ExperimentKind::Susceptibility => susceptibility(config),
            ExperimentKind::GrfBaseline => grf_baseline(config),
            ExperimentKind::ClusterScan => cluster_scan(config),
            ExperimentKind::OneStep => one_step(config),
            ExperimentKind::RuleUsage => rule_usage(config),
            ExperimentKind::BpVsBackward => bp_vs_backward(config),
            ExperimentKind::GenerationStats => generation_stats(config),
        }
    };
    let files = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(execute),
        None => execute(),
    }?;

    let dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(config.kind.as_str()));
    std::fs::create_dir_all(&dir)?;
    let mut outputs = std::collections::BTreeMap::new();
    for (name, contents) in &files {
        std::fs::write(dir.join(name), contents)?;
        outputs.insert(name.clone(), sha256_hex(contents.as_bytes()));
    }
    let manifest = Manifest {
        version: 1,
        kind: config.kind.as_str().into(),
        seed: config.seed,
        config_sha256: sha256_hex(config.to_toml().as_bytes()),
        wall_clock_ms: started.elapsed().as_millis(),
        outputs,
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable"),
    )?;
    Ok(RunOutput { dir, manifest })
}

fn rules_for(config: &ExperimentConfig) -> Result<RuleSet, CliError> {
    let params = config
        .rhm
        .as_ref()
        .expect("validated")
        .params(config.seed)?;
    Ok(RuleSet::generate(params)?)
}

// ---------------------------------------------------------------- runners

fn phase_diagram(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let mut csv = Csv::new(&[
        "v", "m", "s", "f_exact", "sf", "fprime1", "transition", "eps_star", "nu",
    ]);
    for inst in config.instances.as_ref().expect("validated") {
        let p = inst.params(config.seed)?;
        let fp1 = meanfield::map_f_prime(1.0, &p);
        let (transition, eps_star, nu) = match meanfield::phase_diagram(&p) {
            meanfield::Phase::Transition { p_star, eps_star } => {
                let nu = meanfield::nu_from_derivative(p.s, meanfield::map_f_prime(p_star, &p));
                (1u8, eps_star, nu)
            }
            meanfield::Phase::NoInference => (0u8, f64::NAN, f64::NAN),
        };
        csv.row(&[
            p.v.to_string(),
            p.m.to_string(),
            p.s.to_string(),
            fmt_f64(p.f_exact()),
            fmt_f64(p.s as f64 * p.f_exact()),
            fmt_f64(fp1),
            transition.to_string(),
            fmt_f64(eps_star),
            fmt_f64(nu),
        ]);
    }
    Ok(vec![("phase.csv".into(), csv.into_string())])
}

/// Mean and standard error over a slice.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn epsilon_sweep(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let rules = rules_for(config)?;
    let p = *rules.params();
    let noise_sec = config.noise.as_ref().expect("validated");
    let batch = config.batch.expect("validated");
    let gaussian = noise_sec.channel == "gaussian";
    let seed = config.seed;

    let mut layers = Csv::new(&["index", "layer", "p", "stderr"]);
    let mut theory = Csv::new(&["index", "layer", "p"]);
    let mut effeps = Csv::new(&["index", "eps_eff", "stderr"]);
    let mut svg_series: Vec<(usize, Vec<(f64, f64)>)> = (0..=p.depth).map(|l| (l, vec![])).collect();

    for (gi, &level) in noise_sec.grid.iter().enumerate() {
        // per tree: marginal of the original symbol, averaged per layer
        let per_tree: Vec<(Vec<f64>, f64)> = (0..batch.starts)
            .into_par_iter()
            .map(|b| {
                let cell = (gi * batch.starts + b) as u64;
                let mut rng = seeding::stream(seed, "sweep-tree", b as u64);
                let tree = sample_tree(&rules, None, &mut rng);
                let (priors, e_eff) = if gaussian {
                    // alpha_bar = 1 - level, clamped away from zero
                    let alpha_bar = (1.0 - level).max(1e-9);
                    let mut nrng = seeding::stream(seed, "sweep-noise", cell);
                    let enc = rhm::grammar::encode_onehot(tree.leaves(), p.v)?;
                    let xt = noise::gaussian_onehot_forward(&enc, alpha_bar, &mut nrng)?;
                    let priors = noise::gaussian_prior(&xt, alpha_bar)?;
                    let e = noise::effective_epsilon(&priors, tree.leaves());
                    (priors, e)
                } else {
                    let priors = noise::epsilon_prior(tree.leaves(), p.v, level)?;
                    (priors, level)
                };
                let field = bp::run(&rules, &priors, None)?;
                let mut per_layer = Vec::with_capacity(p.depth + 1);
                for l in 0..=p.depth {
                    let mut acc = 0.0;
                    for (i, &x) in tree.level(l).iter().enumerate() {
                        acc += field.marginal(l, i)[x as usize];
                    }
                    per_layer.push(acc / p.nodes_at(l) as f64);
                }
                Ok::<_, rhm::Error>((per_layer, e_eff))
            })
            .collect::<Result<_, _>>()?;

        for l in 0..=p.depth {
            let xs: Vec<f64> = per_tree.iter().map(|(layers, _)| layers[l]).collect();
            let (mean, se) = mean_se(&xs);
            layers.row(&[
                fmt_f64(level),
                l.to_string(),
                fmt_f64(mean),
                fmt_f64(se),
            ]);
            svg_series[l].1.push((level, mean));
        }
        let eff: Vec<f64> = per_tree.iter().map(|(_, e)| *e).collect();
        let (eff_mean, eff_se) = mean_se(&eff);
        effeps.row(&[fmt_f64(level), fmt_f64(eff_mean), fmt_f64(eff_se)]);

        let th = meanfield::sweep(&p, if gaussian { eff_mean.clamp(0.0, 1.0) } else { level })?
            .marginals(p.v);
        for (l, &value) in th.iter().enumerate() {
            theory.row(&[fmt_f64(level), l.to_string(), fmt_f64(value)]);
        }
    }

    let mut files = vec![
        ("layers.csv".into(), layers.into_string()),
        ("theory.csv".into(), theory.into_string()),
        ("effeps.csv".into(), effeps.into_string()),
    ];
    if config.emit_svg {
        let series: Vec<svg::Series> = svg_series
            .iter()
            .map(|(l, pts)| svg::Series {
                label: Box::leak(format!("layer {l}").into_boxed_str()),
                points: pts.clone(),
            })
            .collect();
        files.push((
            "layers.svg".into(),
            svg::line_plot("reconstruction per layer", "noise level", "p", &series),
        ));
    }
    Ok(files)
}

fn masking_inversion(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let rules = rules_for(config)?;
    let p = *rules.params();
    let noise_sec = config.noise.as_ref().expect("validated");
    let batch = config.batch.expect("validated");
    let cap_t = noise_sec.cap_t;
    let seed = config.seed;

    let mut layers = Csv::new(&["index", "layer", "p", "stderr"]);
    let mut svg_series: Vec<(usize, Vec<(f64, f64)>)> = (0..=p.depth).map(|l| (l, vec![])).collect();

    for (gi, &frac) in noise_sec.grid.iter().enumerate() {
        let t = (frac * cap_t as f64).round() as u32;
        let per_start: Vec<Vec<f64>> = (0..batch.starts)
            .into_par_iter()
            .map(|b| {
                let mut rng = seeding::stream(seed, "mask-tree", b as u64);
                let tree = sample_tree(&rules, None, &mut rng);
                let mut samples = Vec::with_capacity(batch.trajectories);
                for k in 0..batch.trajectories {
                    let cell = ((gi * batch.starts + b) * batch.trajectories + k) as u64;
                    let mut nrng = seeding::stream(seed, "mask-noise", cell);
                    let obs = noise::masking_forward(tree.leaves(), t, cap_t, p.v, &mut nrng);
                    let priors = noise::masking_prior(&obs, p.v)?;
                    let mut srng = seeding::stream(seed, "mask-draw", cell);
                    samples.push(bp::sample_posterior(&rules, &priors, None, &mut srng)?);
                }
                Ok::<_, rhm::Error>(observables::layer_reconstruction(&tree, &samples))
            })
            .collect::<Result<_, _>>()?;

        for l in 0..=p.depth {
            let xs: Vec<f64> = per_start.iter().map(|layers| layers[l]).collect();
            let (mean, se) = mean_se(&xs);
            layers.row(&[fmt_f64(frac), l.to_string(), fmt_f64(mean), fmt_f64(se)]);
            svg_series[l].1.push((frac, mean));
        }
    }

    let mut files = vec![("layers.csv".into(), layers.into_string())];
    if config.emit_svg {
        let series: Vec<svg::Series> = svg_series
            .iter()
            .map(|(l, pts)| svg::Series {
                label: Box::leak(format!("layer {l}").into_boxed_str()),
                points: pts.clone(),
            })
            .collect();
        files.push((
            "layers.svg".into(),
            svg::line_plot("reconstruction per layer", "t/T", "p", &series),
        ));
    }
    Ok(files)
}

/// Spin trajectories for one start under the epsilon or masking channel.
fn spin_trajectories(
    rules: &RuleSet,
    level: f64,
    masking: bool,
    cap_t: u32,
    n_traj: usize,
    seed: u64,
    cell_base: u64,
) -> Result<Vec<Vec<i8>>, rhm::Error> {
    let p = rules.params();
    let mut rng = seeding::stream(seed, "chi-tree", cell_base);
    let tree = sample_tree(rules, None, &mut rng);
    let mut trajs = Vec::with_capacity(n_traj);
    if masking {
        for k in 0..n_traj {
            let cell = cell_base * n_traj as u64 + k as u64;
            let t = (level * cap_t as f64).round() as u32;
            let mut nrng = seeding::stream(seed, "chi-noise", cell);
            let obs = noise::masking_forward(tree.leaves(), t, cap_t, p.v, &mut nrng);
            let priors = noise::masking_prior(&obs, p.v)?;
            let mut srng = seeding::stream(seed, "chi-draw", cell);
            let s = bp::sample_posterior(rules, &priors, None, &mut srng)?;
            trajs.push(observables::spin_field(tree.leaves(), s.leaves())?);
        }
    } else {
        // flat noise: the beliefs are deterministic, so one upward pass
        // serves every trajectory of this start
        let priors = noise::epsilon_prior(tree.leaves(), p.v, level)?;
        for k in 0..n_traj {
            let cell = cell_base * n_traj as u64 + k as u64;
            let mut srng = seeding::stream(seed, "chi-draw", cell);
            let s = bp::sample_posterior(rules, &priors, None, &mut srng)?;
            trajs.push(observables::spin_field(tree.leaves(), s.leaves())?);
        }
    }
    Ok(trajs)
}

fn correlation_table_at(
    rules: &RuleSet,
    level: f64,
    masking: bool,
    cap_t: u32,
    starts: usize,
    n_traj: usize,
    seed: u64,
    grid_index: usize,
) -> Result<CorrelationTable, CliError> {
    let d = rules.params().leaf_count();
    let accs: Vec<CorrelationAccumulator> = (0..starts)
        .into_par_iter()
        .map(|b| {
            let cell_base = (grid_index * starts + b) as u64;
            let trajs =
                spin_trajectories(rules, level, masking, cap_t, n_traj, seed, cell_base)?;
            let mut acc = CorrelationAccumulator::new(d);
            acc.add_start_spins(&trajs)?;
            Ok::<_, rhm::Error>(acc)
        })
        .collect::<Result<_, _>>()?;
    // fixed-order reduction keeps results independent of scheduling
    let mut merged = CorrelationAccumulator::new(d);
    for acc in accs {
        merged = merged.merge(acc)?;
    }
    Ok(merged.finish()?)
}

fn susceptibility(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let rules = rules_for(config)?;
    let p = *rules.params();
    let noise_sec = config.noise.as_ref().expect("validated");
    let batch = config.batch.expect("validated");
    let masking = noise_sec.channel == "masking";

    let mut corr = Csv::new(&["index", "r", "c", "stderr", "n"]);
    let mut susc = Csv::new(&["index", "chi", "stderr"]);
    let mut theory_corr = Csv::new(&["index", "r", "c"]);
    let mut chi_points = Vec::new();

    for (gi, &level) in noise_sec.grid.iter().enumerate() {
        let table = correlation_table_at(
            &rules,
            level,
            masking,
            noise_sec.cap_t,
            batch.starts,
            batch.trajectories,
            config.seed,
            gi,
        )?;
        let n = (batch.starts * batch.trajectories) as u64;
        for point in table.radial_profile() {
            corr.row(&[
                fmt_f64(level),
                point.r.to_string(),
                fmt_f64(point.c_norm),
                fmt_f64(point.stderr_norm),
                n.to_string(),
            ]);
        }
        let (chi, se) = table.susceptibility_jackknife();
        susc.row(&[fmt_f64(level), fmt_f64(chi), fmt_f64(se)]);
        chi_points.push((level, chi));

        // annealed two-leaf theory at matched flat-noise level, normalized
        // like the measured profile
        if !masking {
            let rows = meanfield::correlation_theory(&p, level, p.depth)?;
            let c0 = rows[0].connected;
            for row in &rows {
                theory_corr.row(&[
                    fmt_f64(level),
                    (row.r as u64).to_string(),
                    fmt_f64(if c0 > 0.0 { row.connected / c0 } else { 0.0 }),
                ]);
            }
        }
    }

    let mut files = vec![
        ("corr.csv".into(), corr.into_string()),
        ("susc.csv".into(), susc.into_string()),
    ];
    if !masking {
        files.push(("theory_corr.csv".into(), theory_corr.into_string()));
    }
    if config.emit_svg {
        files.push((
            "susc.svg".into(),
            svg::line_plot(
                "dynamical susceptibility",
                "noise level",
                "chi",
                &[svg::Series {
                    label: "chi",
                    points: chi_points,
                }],
            ),
        ));
    }
    Ok(files)
}

fn grf_baseline(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let g = config.grf.expect("validated");
    let spec = rhm::grf::GrfSpec::new(g.n, g.a)?;
    let noise_sec = config.noise.as_ref().expect("validated");
    let batch = config.batch.expect("validated");

    let mut corr = Csv::new(&["index", "r", "c", "stderr", "n"]);
    let mut susc = Csv::new(&["index", "chi", "stderr"]);
    let mut modal = Csv::new(&["index", "k", "rms_error", "kappa_star"]);
    let mut chi_points = Vec::new();

    for (gi, &frac) in noise_sec.grid.iter().enumerate() {
        let alpha_bar = 1.0 - frac;
        let obs = rhm::grf::observables(
            &spec,
            alpha_bar,
            batch.starts,
            batch.trajectories,
            config.seed ^ (gi as u64).wrapping_mul(0x9e3779b97f4a7c15),
        )?;
        let n = (batch.starts * batch.trajectories) as u64;
        for point in obs.table.radial_profile() {
            corr.row(&[
                fmt_f64(frac),
                point.r.to_string(),
                fmt_f64(point.c_norm),
                fmt_f64(point.stderr_norm),
                n.to_string(),
            ]);
        }
        let (chi, se) = obs.table.susceptibility_jackknife();
        susc.row(&[fmt_f64(frac), fmt_f64(chi), fmt_f64(se)]);
        chi_points.push((frac, chi));
        let ks = rhm::grf::kappa_star(alpha_bar, spec.a);
        for (k, &rms) in obs.modal_rms.iter().enumerate().skip(1) {
            modal.row(&[
                fmt_f64(frac),
                k.to_string(),
                fmt_f64(rms),
                fmt_f64(ks),
            ]);
        }
    }

    let mut files = vec![
        ("corr.csv".into(), corr.into_string()),
        ("susc.csv".into(), susc.into_string()),
        ("modal.csv".into(), modal.into_string()),
    ];
    if config.emit_svg {
        files.push((
            "susc.svg".into(),
            svg::line_plot(
                "susceptibility of the field baseline",
                "t/T",
                "chi",
                &[svg::Series {
                    label: "chi",
                    points: chi_points,
                }],
            ),
        ));
    }
    Ok(files)
}

fn cluster_scan(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let base = config.rhm.as_ref().expect("validated");
    let scan = config.scan.as_ref().expect("validated");
    let spec = PatchSpec {
        tuple_level: 0,
        block: 1,
        context: Context::VisibleTuple { block: 0 },
    };
    let target_level = spec.tuple_level + 2;

    let mut scan_csv = Csv::new(&["v", "m", "s", "L", "l", "P", "success_rate"]);
    let mut pstar_csv = Csv::new(&["v", "m", "s", "L", "l", "pstar"]);
    for &m in &scan.m_values {
        let params = RhmParams::new(base.v, m, base.s, base.depth, config.seed)
            .map_err(|e| CliError::Config(format!("scan.m_values: {e}")))?;
        let (points, pstar) = learnstats::sample_complexity_scan(
            params,
            spec,
            &scan.p_grid,
            scan.trials,
            scan.purity_threshold,
            0.5,
            config.seed,
        )?;
        for pt in &points {
            scan_csv.row(&[
                base.v.to_string(),
                m.to_string(),
                base.s.to_string(),
                base.depth.to_string(),
                target_level.to_string(),
                pt.p.to_string(),
                fmt_f64(pt.success_rate),
            ]);
        }
        pstar_csv.row(&[
            base.v.to_string(),
            m.to_string(),
            base.s.to_string(),
            base.depth.to_string(),
            target_level.to_string(),
            pstar.map_or("nan".into(), |p| p.to_string()),
        ]);
    }
    Ok(vec![
        ("scan.csv".into(), scan_csv.into_string()),
        ("pstar.csv".into(), pstar_csv.into_string()),
    ])
}

fn one_step(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let rules = rules_for(config)?;
    let p = *rules.params();
    let section = config.onestep.expect("validated");

    let mut csv = Csv::new(&["batch", "n_pairs", "eta", "max_residual"]);
    for b in 0..section.batches {
        let mut rng = seeding::stream(config.seed, "onestep", b as u64);
        let pairs: Vec<(usize, u16)> = (0..section.pairs_per_batch)
            .map(|_| {
                let tree = sample_tree(&rules, None, &mut rng);
                let idx = learnstats::tuple_index(&rules, &tree.leaves()[..p.s])
                    .expect("sampled tuple is a production");
                (idx, tree.leaves()[p.s])
            })
            .collect();
        let out = learnstats::one_step_gd(&pairs, p.v, p.m * p.v, section.eta)?;
        let mut worst = 0.0f64;
        for i in 0..out.after.w.len() {
            let delta = out.after.w[i] - out.init.w[i];
            worst = worst.max((delta - section.eta * out.corr[i]).abs());
        }
        csv.row(&[
            b.to_string(),
            pairs.len().to_string(),
            fmt_f64(section.eta),
            fmt_f64(worst),
        ]);
    }
    Ok(vec![("onestep.csv".into(), csv.into_string())])
}

fn rule_usage(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let base = config.rhm.as_ref().expect("validated");
    let gen = config.generation.expect("validated");
    let seed = config.seed;

    // fresh rules per sample keep rule identities exchangeable, so the
    // pooled occurrences are uniform in expectation
    let counts: Vec<Vec<f64>> = (0..gen.samples)
        .into_par_iter()
        .map(|i| {
            let params = RhmParams::new(
                base.v,
                base.m,
                base.s,
                base.depth,
                u64::from_le_bytes(
                    seeding::stream_seed(seed, "usage-instance", i as u64)[..8]
                        .try_into()
                        .unwrap(),
                ),
            )?;
            let rules = RuleSet::generate(params)?;
            let mut rng = seeding::stream(seed, "usage-x0", i as u64);
            let tree = sample_tree(&rules, None, &mut rng);
            let priors = noise::epsilon_prior(tree.leaves(), base.v, gen.eps)?;
            let mut srng = seeding::stream(seed, "usage-draw", i as u64);
            let sample = bp::sample_posterior(&rules, &priors, None, &mut srng)?;
            observables::rule_counts(&sample, &rules)
        })
        .collect::<Result<_, _>>()?;

    let k = counts[0].len();
    let n = counts.len() as f64;
    let mut mean = vec![0.0; k];
    for row in &counts {
        for (m, &c) in mean.iter_mut().zip(row) {
            *m += c / n;
        }
    }
    let per_level = base.m * base.v;
    let mut mean_csv = Csv::new(&["level", "parent", "rule", "mean", "expected"]);
    for idx in 0..k {
        let level = idx / per_level + 1;
        let rest = idx % per_level;
        let slots = base.s.pow((base.depth - level) as u32) as f64;
        mean_csv.row(&[
            level.to_string(),
            (rest / base.m).to_string(),
            (rest % base.m).to_string(),
            fmt_f64(mean[idx]),
            fmt_f64(slots / per_level as f64),
        ]);
    }

    let mut cov_csv = Csv::new(&["a", "b", "cov"]);
    for a in 0..k {
        for b in a..k {
            let mut acc = 0.0;
            for row in &counts {
                acc += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
            cov_csv.row(&[a.to_string(), b.to_string(), fmt_f64(acc / (n - 1.0))]);
        }
    }
    Ok(vec![
        ("rules_mean.csv".into(), mean_csv.into_string()),
        ("rules_cov.csv".into(), cov_csv.into_string()),
    ])
}

fn bp_vs_backward(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let rules = rules_for(config)?;
    let p = *rules.params();
    let noise_sec = config.noise.as_ref().expect("validated");
    let batch = config.batch.expect("validated");
    let cap_t = noise_sec.cap_t;
    let t = (noise_sec.grid[0] * cap_t as f64).round() as u32;
    let seed = config.seed;

    let mut rng = seeding::stream(seed, "bpback-x0", 0);
    let x0 = sample_tree(&rules, None, &mut rng).leaves().to_vec();

    let draw = |label: &str, i: u64, chain: bool| -> Result<Vec<u16>, rhm::Error> {
        let mut rng = seeding::stream(seed, label, i);
        if chain {
            bp::backward_chain(&rules, &x0, t, cap_t, BackwardChannel::Masking, &mut rng)
        } else {
            let obs = noise::masking_forward(&x0, t, cap_t, p.v, &mut rng);
            let priors = noise::masking_prior(&obs, p.v)?;
            let s = bp::sample_posterior(&rules, &priors, None, &mut rng)?;
            Ok(s.leaves().to_vec())
        }
    };

    let n = batch.starts as u64;
    let mut sampler: HashMap<Vec<u16>, u64> = HashMap::new();
    let mut chain: HashMap<Vec<u16>, u64> = HashMap::new();
    for i in 0..n {
        *sampler.entry(draw("bpback-post", i, false)?).or_insert(0) += 1;
        *chain.entry(draw("bpback-chain", i, true)?).or_insert(0) += 1;
    }

    let mut keys: Vec<Vec<u16>> = sampler.keys().chain(chain.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let mut csv = Csv::new(&["string", "sampler", "chain"]);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for key in &keys {
        let ca = *sampler.get(key).unwrap_or(&0);
        let cb = *chain.get(key).unwrap_or(&0);
        a.push(ca);
        b.push(cb);
        let name: Vec<String> = key.iter().map(|x| x.to_string()).collect();
        csv.row(&[name.join(" "), ca.to_string(), cb.to_string()]);
    }

    // two-sample statistic over the shared support
    let (ka, kb) = (1.0f64, 1.0f64); // equal draw counts
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(&b) {
        let tot = x + y;
        if tot > 0 {
            stat += (ka * x as f64 - kb * y as f64).powi(2) / tot as f64;
            cells += 1;
        }
    }
    let df = cells.saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
    };
    let mut summary = Csv::new(&["statistic", "df", "p_value"]);
    summary.row(&[fmt_f64(stat), df.to_string(), fmt_f64(p_value)]);

    Ok(vec![
        ("bpback.csv".into(), csv.into_string()),
        ("bpback_summary.csv".into(), summary.into_string()),
    ])
}

fn generation_stats(config: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let rules = rules_for(config)?;
    let p = *rules.params();
    let gen = config.generation.expect("validated");
    let seed = config.seed;

    let mut trng = seeding::stream(seed, "gen-train", 0);
    let train: Vec<Vec<u16>> = (0..gen.train)
        .map(|_| sample_tree(&rules, None, &mut trng).leaves().to_vec())
        .collect();

    let generated: Vec<Vec<u16>> = (0..gen.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, "gen-x0", i as u64);
            let tree = sample_tree(&rules, None, &mut rng);
            let priors = noise::epsilon_prior(tree.leaves(), p.v, gen.eps)?;
            let mut srng = seeding::stream(seed, "gen-draw", i as u64);
            Ok::<_, rhm::Error>(
                bp::sample_posterior(&rules, &priors, None, &mut srng)?
                    .leaves()
                    .to_vec(),
            )
        })
        .collect::<Result<_, _>>()?;

    let mut token_csv = Csv::new(&["dist", "frobenius", "noise_floor", "n_pairs"]);
    for point in observables::token_token_correlation(&generated, p.v) {
        token_csv.row(&[
            point.dist.to_string(),
            fmt_f64(point.frobenius),
            fmt_f64(point.noise_floor),
            point.n_pairs.to_string(),
        ]);
    }

    let report = observables::copy_fraction(&generated, &train, 0.0)?;
    let mut copies_csv = Csv::new(&["sample_id", "min_hamming", "is_copy"]);
    for (i, (&dist, &is_copy)) in report.min_dist.iter().zip(&report.is_copy).enumerate() {
        copies_csv.row(&[
            i.to_string(),
            fmt_f64(dist),
            (is_copy as u8).to_string(),
        ]);
    }
    let mut summary = Csv::new(&["fraction", "n_generated", "n_train"]);
    summary.row(&[
        fmt_f64(report.fraction),
        gen.samples.to_string(),
        gen.train.to_string(),
    ]);

    Ok(vec![
        ("tokencorr.csv".into(), token_csv.into_string()),
        ("copies.csv".into(), copies_csv.into_string()),
        ("copies_summary.csv".into(), summary.into_string()),
    ])
}
