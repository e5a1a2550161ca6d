//! Named experiment presets: ready-to-run configurations reproducing the
//! reference figures at desk scale.

use crate::config::*;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub fn list() -> Vec<Preset> {
    vec![
        Preset {
            name: "phase-diagram",
            description: "fixed-point classification over a synonym-count sweep at v=32, s=2",
        },
        Preset {
            name: "epsilon-sweep",
            description: "per-layer reconstruction vs flat noise with the annealed theory overlay (v=32, m=8, depth 10)",
        },
        Preset {
            name: "masking-inversion",
            description: "per-layer reconstruction vs masking inversion time (v=32, m=8, depth 10)",
        },
        Preset {
            name: "susceptibility",
            description: "change-spin correlations and susceptibility across the transition (v=32, m=8, depth 9)",
        },
        Preset {
            name: "grf-baseline",
            description: "Gaussian random field null model: monotone correlation growth, modal retrieval",
        },
        Preset {
            name: "cluster-scan",
            description: "clustering sample complexity over synonym counts (v=16, depth 2)",
        },
        Preset {
            name: "onestep",
            description: "one-step gradient identity residuals over random batches",
        },
        Preset {
            name: "rule-usage",
            description: "rule occurrence statistics of posterior samples below the transition (v=16, m=4, depth 3)",
        },
        Preset {
            name: "bp-vs-backward",
            description: "posterior sampling against the stepwise reverse chain on a tiny instance",
        },
        Preset {
            name: "generation-stats",
            description: "token correlations and copy metrics of generated strings",
        },
    ]
}

pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig {
        kind: ExperimentKind::PhaseDiagram,
        seed: 0,
        out: None,
        threads: None,
        emit_svg: false,
        rhm: None,
        grf: None,
        noise: None,
        batch: None,
        scan: None,
        onestep: None,
        generation: None,
        instances: None,
    };
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    };
    Some(match name {
        "phase-diagram" => ExperimentConfig {
            kind: ExperimentKind::PhaseDiagram,
            instances: Some(
                [2usize, 4, 6, 8, 12, 16, 20, 24, 28, 32]
                    .iter()
                    .map(|&m| RhmSection {
                        v: 32,
                        m,
                        s: 2,
                        depth: 10,
                    })
                    .collect(),
            ),
            ..base
        },
        "epsilon-sweep" => ExperimentConfig {
            kind: ExperimentKind::EpsilonSweep,
            rhm: Some(RhmSection {
                v: 32,
                m: 8,
                s: 2,
                depth: 10,
            }),
            noise: Some(NoiseSection {
                channel: "epsilon".into(),
                grid: grid(0.0, 1.0, 21),
                cap_t: 20,
            }),
            batch: Some(BatchSection {
                starts: 256,
                trajectories: 1,
            }),
            ..base
        },
        "masking-inversion" => ExperimentConfig {
            kind: ExperimentKind::MaskingInversion,
            rhm: Some(RhmSection {
                v: 32,
                m: 8,
                s: 2,
                depth: 10,
            }),
            noise: Some(NoiseSection {
                channel: "masking".into(),
                grid: (1..=20).map(|k| k as f64 / 20.0).collect(),
                cap_t: 20,
            }),
            batch: Some(BatchSection {
                starts: 64,
                trajectories: 8,
            }),
            ..base
        },
        "susceptibility" => ExperimentConfig {
            kind: ExperimentKind::Susceptibility,
            rhm: Some(RhmSection {
                v: 32,
                m: 8,
                s: 2,
                depth: 9,
            }),
            noise: Some(NoiseSection {
                channel: "epsilon".into(),
                grid: grid(0.575, 0.875, 13),
                cap_t: 20,
            }),
            batch: Some(BatchSection {
                starts: 128,
                trajectories: 128,
            }),
            ..base
        },
        "grf-baseline" => ExperimentConfig {
            kind: ExperimentKind::GrfBaseline,
            grf: Some(GrfSection { n: 256, a: 1.0 }),
            noise: Some(NoiseSection {
                channel: "gaussian".into(),
                grid: (1..=10).map(|k| k as f64 / 10.0).collect(),
                cap_t: 10,
            }),
            batch: Some(BatchSection {
                starts: 64,
                trajectories: 16,
            }),
            ..base
        },
        "cluster-scan" => ExperimentConfig {
            kind: ExperimentKind::ClusterScan,
            rhm: Some(RhmSection {
                v: 16,
                m: 2,
                s: 2,
                depth: 2,
            }),
            scan: Some(ScanSection {
                m_values: vec![2, 3, 4, 6, 8],
                p_grid: (5..=17).map(|k| 1usize << k).collect(),
                trials: 16,
                purity_threshold: 0.9,
            }),
            ..base
        },
        "onestep" => ExperimentConfig {
            kind: ExperimentKind::OneStep,
            rhm: Some(RhmSection {
                v: 8,
                m: 2,
                s: 2,
                depth: 2,
            }),
            onestep: Some(OneStepSection {
                batches: 100,
                pairs_per_batch: 512,
                eta: 1.0,
            }),
            ..base
        },
        "rule-usage" => ExperimentConfig {
            kind: ExperimentKind::RuleUsage,
            rhm: Some(RhmSection {
                v: 16,
                m: 4,
                s: 2,
                depth: 3,
            }),
            generation: Some(GenerationSection {
                samples: 2048,
                train: 0,
                eps: 0.3,
            }),
            ..base
        },
        "bp-vs-backward" => ExperimentConfig {
            kind: ExperimentKind::BpVsBackward,
            rhm: Some(RhmSection {
                v: 2,
                m: 2,
                s: 2,
                depth: 2,
            }),
            noise: Some(NoiseSection {
                channel: "masking".into(),
                grid: vec![0.5],
                cap_t: 8,
            }),
            batch: Some(BatchSection {
                starts: 20_000,
                trajectories: 1,
            }),
            ..base
        },
        "generation-stats" => ExperimentConfig {
            kind: ExperimentKind::GenerationStats,
            rhm: Some(RhmSection {
                v: 8,
                m: 4,
                s: 2,
                depth: 3,
            }),
            generation: Some(GenerationSection {
                samples: 8192,
                train: 256,
                eps: 1.0,
            }),
            ..base
        },
        _ => return None,
    })
}
