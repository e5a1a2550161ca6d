//! Harness integration: config plumbing, CSV schemas, exit codes and the
//! smaller experiment kinds end to end.

use std::process::Command;

use rhm_cli::config::*;
use rhm_cli::{presets, run, ExperimentConfig, ExperimentKind};

fn small_susceptibility(channel: &str) -> ExperimentConfig {
    let mut cfg = presets::by_name("susceptibility").unwrap();
    cfg.rhm = Some(RhmSection {
        v: 8,
        m: 2,
        s: 2,
        depth: 5,
    });
    cfg.noise = Some(NoiseSection {
        channel: channel.into(),
        grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
        cap_t: 10,
    });
    cfg.batch = Some(BatchSection {
        starts: 24,
        trajectories: 16,
    });
    cfg.seed = 5;
    cfg
}

fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn masking_susceptibility_peaks_inside_the_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_susceptibility("masking");
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    let susc = read(&out.dir, "susc.csv");
    let mut rows: Vec<(f64, f64)> = susc
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 9);
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let argmax = rows
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap()
        .0;
    // interior peak, the defining contrast with the monotone field baseline
    assert!(
        (0.15..=0.85).contains(&argmax),
        "masking chi peak at t/T = {argmax}"
    );
}

#[test]
fn epsilon_susceptibility_emits_theory_overlay_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_susceptibility("epsilon");
    cfg.emit_svg = true;
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    assert!(out.manifest.outputs.contains_key("theory_corr.csv"));
    assert!(out.manifest.outputs.contains_key("susc.svg"));
    let corr = read(&out.dir, "corr.csv");
    assert!(corr.starts_with("index,r,c,stderr,n\n"));
    // normalized on-site value is exactly 1 for every index
    for line in corr.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] == "0" {
            let c: f64 = f[2].parse().unwrap();
            assert!((c - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn gaussian_sweep_reports_the_effective_noise_map() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = presets::by_name("epsilon-sweep").unwrap();
    cfg.rhm = Some(RhmSection {
        v: 8,
        m: 2,
        s: 2,
        depth: 4,
    });
    cfg.noise = Some(NoiseSection {
        channel: "gaussian".into(),
        grid: (1..=8).map(|k| k as f64 / 8.0).collect(),
        cap_t: 10,
    });
    cfg.batch = Some(BatchSection {
        starts: 48,
        trajectories: 1,
    });
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    let effeps = read(&out.dir, "effeps.csv");
    let rows: Vec<(f64, f64)> = effeps
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 8);
    // the effective flat-noise level grows with the schedule and stays in
    // range
    for w in rows.windows(2) {
        assert!(w[1].1 >= w[0].1 - 0.02, "{rows:?}");
    }
    assert!(rows.iter().all(|&(_, e)| (0.0..=1.0 + 1e-9).contains(&e)));
    assert!(rows.last().unwrap().1 > 0.9);

    // layer curves exist for all levels
    let layers = read(&out.dir, "layers.csv");
    assert!(layers.starts_with("index,layer,p,stderr\n"));
    let n_rows = layers.lines().count() - 1;
    assert_eq!(n_rows, 8 * 5);
}

#[test]
fn grf_baseline_runs_small() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = presets::by_name("grf-baseline").unwrap();
    cfg.grf = Some(GrfSection { n: 64, a: 1.0 });
    cfg.batch = Some(BatchSection {
        starts: 16,
        trajectories: 8,
    });
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    for name in ["corr.csv", "susc.csv", "modal.csv"] {
        assert!(out.manifest.outputs.contains_key(name), "{name}");
    }
    let modal = read(&out.dir, "modal.csv");
    assert!(modal.starts_with("index,k,rms_error,kappa_star\n"));
}

#[test]
fn cluster_scan_small_emits_both_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = presets::by_name("cluster-scan").unwrap();
    cfg.rhm = Some(RhmSection {
        v: 8,
        m: 2,
        s: 2,
        depth: 2,
    });
    cfg.scan = Some(ScanSection {
        m_values: vec![2, 3],
        p_grid: vec![64, 256, 1024, 4096],
        trials: 6,
        purity_threshold: 0.9,
    });
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    let scan = read(&out.dir, "scan.csv");
    assert!(scan.starts_with("v,m,s,L,l,P,success_rate\n"));
    let pstar = read(&out.dir, "pstar.csv");
    assert!(pstar.starts_with("v,m,s,L,l,pstar\n"));
    assert_eq!(pstar.lines().count(), 3);
}

#[test]
fn bp_vs_backward_preset_reports_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = presets::by_name("bp-vs-backward").unwrap();
    cfg.batch = Some(BatchSection {
        starts: 4000,
        trajectories: 1,
    });
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    let summary = read(&out.dir, "bpback_summary.csv");
    let row = summary.lines().nth(1).unwrap();
    let p_value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!(p_value > 0.01, "{summary}");
}

#[test]
fn generation_stats_copy_rate_matches_counting() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = presets::by_name("generation-stats").unwrap();
    cfg.out = Some(tmp.path().into());
    let out = run(&cfg).unwrap();
    let summary = read(&out.dir, "copies_summary.csv");
    let fraction: f64 = summary
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    // 256 training strings over m^((d-1)/(s-1)) * v = 131072 possibilities:
    // the copy rate of fresh samples stays within a few sigma of the
    // counting estimate 256/131072
    let expect = 256.0 / 131072.0;
    let sigma = (expect / 8192.0f64).sqrt();
    assert!(
        (fraction - expect).abs() < 4.0 * sigma,
        "fraction {fraction} vs {expect}"
    );

    // ground-truth samples carry correlations above the reported floor at
    // short distance
    let token = read(&out.dir, "tokencorr.csv");
    let first: Vec<&str> = token.lines().nth(1).unwrap().split(',').collect();
    let frob: f64 = first[1].parse().unwrap();
    let floor: f64 = first[2].parse().unwrap();
    assert!(frob > 5.0 * floor, "frobenius {frob} vs floor {floor}");
}

#[test]
fn invalid_config_fails_without_running() {
    let mut cfg = presets::by_name("susceptibility").unwrap();
    cfg.noise.as_mut().unwrap().grid = vec![];
    let err = match run(&cfg) {
        Err(e) => e,
        Ok(_) => panic!("empty grid must not run"),
    };
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("noise.grid"));
}

// ------------------------------------------------------------- binary

fn rhm_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rhm"))
}

#[test]
fn binary_round_trips_rules_and_reports_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let rules_path = tmp.path().join("rules.json");
    let status = rhm_bin()
        .args(["rules", "gen", "--v", "4", "--m", "2", "--s", "2", "--depth", "2"])
        .args(["--seed", "3", "--out"])
        .arg(&rules_path)
        .status()
        .unwrap();
    assert!(status.success());

    let status = rhm_bin().args(["rules", "check"]).arg(&rules_path).status().unwrap();
    assert!(status.success());

    // corrupting the file must fail the check with the config exit code
    let text = std::fs::read_to_string(&rules_path).unwrap();
    std::fs::write(&rules_path, text.replace("\"version\": 1", "\"version\": 9")).unwrap();
    let status = rhm_bin().args(["rules", "check"]).arg(&rules_path).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.toml");
    std::fs::write(&good, presets::by_name("onestep").unwrap().to_toml()).unwrap();
    let status = rhm_bin().args(["validate", "--config"]).arg(&good).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let bad = tmp.path().join("bad.toml");
    let mut cfg = presets::by_name("susceptibility").unwrap();
    cfg.noise.as_mut().unwrap().grid = vec![0.9, 0.1];
    std::fs::write(&bad, cfg.to_toml()).unwrap();
    let status = rhm_bin().args(["validate", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_runs_a_preset_from_a_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = presets::by_name("onestep").unwrap();
    cfg.onestep = Some(OneStepSection {
        batches: 3,
        pairs_per_batch: 32,
        eta: 1.0,
    });
    let path = tmp.path().join("cfg.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let outdir = tmp.path().join("out");
    let status = rhm_bin()
        .args(["onestep", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&outdir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(outdir.join("onestep.csv").exists());
    assert!(outdir.join("manifest.json").exists());
    let _ = ExperimentKind::OneStep;
}
