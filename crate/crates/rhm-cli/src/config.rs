//! Experiment configuration: TOML on disk, validated before any work runs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Fixed-point classification of a list of instances.
    PhaseDiagram,
    /// Per-layer reconstruction under flat belief noise, with theory.
    EpsilonSweep,
    /// Per-layer reconstruction under masking versus inversion time.
    MaskingInversion,
    /// Change-spin correlations and susceptibility over a noise grid.
    Susceptibility,
    /// Gaussian-field null model: correlations, susceptibility, modal errors.
    GrfBaseline,
    /// Clustering sample-complexity scan over synonym counts.
    ClusterScan,
    /// One-step gradient identity residuals over random batches.
    #[serde(rename = "onestep")]
    OneStep,
    /// Rule occurrence statistics of posterior samples.
    RuleUsage,
    /// Posterior sampling versus the stepwise reverse chain.
    BpVsBackward,
    /// Token correlations and copy metrics of generated strings.
    GenerationStats,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::PhaseDiagram => "phase-diagram",
            ExperimentKind::EpsilonSweep => "epsilon-sweep",
            ExperimentKind::MaskingInversion => "masking-inversion",
            ExperimentKind::Susceptibility => "susceptibility",
            ExperimentKind::GrfBaseline => "grf-baseline",
            ExperimentKind::ClusterScan => "cluster-scan",
            ExperimentKind::OneStep => "onestep",
            ExperimentKind::RuleUsage => "rule-usage",
            ExperimentKind::BpVsBackward => "bp-vs-backward",
            ExperimentKind::GenerationStats => "generation-stats",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RhmSection {
    pub v: usize,
    pub m: usize,
    pub s: usize,
    pub depth: usize,
}

impl RhmSection {
    pub fn params(&self, seed: u64) -> Result<rhm::RhmParams, CliError> {
        rhm::RhmParams::new(self.v, self.m, self.s, self.depth, seed)
            .map_err(|e| CliError::Config(format!("rhm: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GrfSection {
    pub n: usize,
    pub a: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseSection {
    /// `epsilon`, `masking`, `uniform` or `gaussian`.
    pub channel: String,
    /// Noise levels: `eps`, `t/T` or `1 - alpha_bar` depending on the
    /// channel; must be strictly increasing.
    pub grid: Vec<f64>,
    /// Discrete steps for the masking schedule.
    #[serde(default = "default_cap_t")]
    pub cap_t: u32,
}

fn default_cap_t() -> u32 {
    20
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BatchSection {
    pub starts: usize,
    pub trajectories: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanSection {
    pub m_values: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_purity")]
    pub purity_threshold: f64,
}

fn default_purity() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OneStepSection {
    pub batches: usize,
    pub pairs_per_batch: usize,
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GenerationSection {
    pub samples: usize,
    /// Training strings for copy detection.
    pub train: usize,
    /// Flat corruption level for posterior sampling (rule usage).
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub emit_svg: bool,
    #[serde(default)]
    pub rhm: Option<RhmSection>,
    #[serde(default)]
    pub grf: Option<GrfSection>,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub batch: Option<BatchSection>,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub onestep: Option<OneStepSection>,
    #[serde(default)]
    pub generation: Option<GenerationSection>,
    /// Instance list for the phase diagram.
    #[serde(default)]
    pub instances: Option<Vec<RhmSection>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable")
    }

    /// Full validation; returns every problem with its field path.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let need_rhm = |issues: &mut Vec<String>, cfg: &Self| match &cfg.rhm {
            None => issues.push("rhm: section required for this kind".into()),
            Some(r) => {
                if let Err(e) = r.params(cfg.seed) {
                    issues.push(e.to_string());
                }
            }
        };
        let need_noise = |issues: &mut Vec<String>, cfg: &Self, channels: &[&str]| match &cfg.noise
        {
            None => issues.push("noise: section required for this kind".into()),
            Some(n) => {
                if !channels.contains(&n.channel.as_str()) {
                    issues.push(format!(
                        "noise.channel: {:?} not in {channels:?}",
                        n.channel
                    ));
                }
                if n.grid.is_empty() {
                    issues.push("noise.grid: must not be empty".into());
                } else if !n.grid.windows(2).all(|w| w[0] < w[1]) {
                    issues.push("noise.grid: must be strictly increasing".into());
                }
                if n.grid.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    issues.push("noise.grid: levels must lie in [0, 1]".into());
                }
                if n.channel == "masking" && n.cap_t == 0 {
                    issues.push("noise.cap_t: must be positive".into());
                }
            }
        };
        let need_batch = |issues: &mut Vec<String>, cfg: &Self, min_traj: usize| match &cfg.batch {
            None => issues.push("batch: section required for this kind".into()),
            Some(b) => {
                if b.starts < 1 {
                    issues.push("batch.starts: must be at least 1".into());
                }
                if b.trajectories < min_traj {
                    issues.push(format!("batch.trajectories: must be at least {min_traj}"));
                }
            }
        };

        match self.kind {
            ExperimentKind::PhaseDiagram => match &self.instances {
                None => issues.push("instances: list required for phase-diagram".into()),
                Some(list) if list.is_empty() => {
                    issues.push("instances: must not be empty".into())
                }
                Some(list) => {
                    for (i, r) in list.iter().enumerate() {
                        if let Err(e) = r.params(self.seed) {
                            issues.push(format!("instances[{i}]: {e}"));
                        }
                    }
                }
            },
            ExperimentKind::EpsilonSweep => {
                need_rhm(&mut issues, self);
                need_noise(&mut issues, self, &["epsilon", "gaussian"]);
                need_batch(&mut issues, self, 1);
            }
            ExperimentKind::MaskingInversion => {
                need_rhm(&mut issues, self);
                need_noise(&mut issues, self, &["masking"]);
                need_batch(&mut issues, self, 1);
            }
            ExperimentKind::Susceptibility => {
                need_rhm(&mut issues, self);
                need_noise(&mut issues, self, &["epsilon", "masking"]);
                need_batch(&mut issues, self, 2);
            }
            ExperimentKind::GrfBaseline => {
                match &self.grf {
                    None => issues.push("grf: section required for this kind".into()),
                    Some(g) => {
                        if let Err(e) = rhm::grf::GrfSpec::new(g.n, g.a) {
                            issues.push(format!("grf: {e}"));
                        }
                    }
                }
                need_noise(&mut issues, self, &["gaussian"]);
                need_batch(&mut issues, self, 2);
            }
            ExperimentKind::ClusterScan => {
                need_rhm(&mut issues, self);
                match &self.scan {
                    None => issues.push("scan: section required for this kind".into()),
                    Some(s) => {
                        if s.m_values.is_empty() {
                            issues.push("scan.m_values: must not be empty".into());
                        }
                        if s.p_grid.is_empty() {
                            issues.push("scan.p_grid: must not be empty".into());
                        } else if !s.p_grid.windows(2).all(|w| w[0] < w[1]) {
                            issues.push("scan.p_grid: must be strictly increasing".into());
                        }
                        if s.trials == 0 {
                            issues.push("scan.trials: must be at least 1".into());
                        }
                        if !(0.0..=1.0).contains(&s.purity_threshold) {
                            issues.push("scan.purity_threshold: must lie in [0, 1]".into());
                        }
                    }
                }
            }
            ExperimentKind::OneStep => {
                need_rhm(&mut issues, self);
                match &self.onestep {
                    None => issues.push("onestep: section required for this kind".into()),
                    Some(o) => {
                        if o.batches == 0 || o.pairs_per_batch == 0 {
                            issues
                                .push("onestep: batches and pairs_per_batch must be positive".into());
                        }
                    }
                }
            }
            ExperimentKind::RuleUsage | ExperimentKind::GenerationStats => {
                need_rhm(&mut issues, self);
                match &self.generation {
                    None => issues.push("generation: section required for this kind".into()),
                    Some(g) => {
                        if g.samples == 0 {
                            issues.push("generation.samples: must be positive".into());
                        }
                        if !(0.0..=1.0).contains(&g.eps) {
                            issues.push("generation.eps: must lie in [0, 1]".into());
                        }
                        if self.kind == ExperimentKind::GenerationStats && g.train == 0 {
                            issues.push("generation.train: must be positive".into());
                        }
                    }
                }
            }
            ExperimentKind::BpVsBackward => {
                need_rhm(&mut issues, self);
                need_noise(&mut issues, self, &["masking"]);
                need_batch(&mut issues, self, 1);
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = crate::presets::by_name("susceptibility").unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back.kind, cfg.kind);
        assert!(back.validate().is_empty());
    }

    #[test]
    fn empty_grid_is_named() {
        let mut cfg = crate::presets::by_name("susceptibility").unwrap();
        cfg.noise.as_mut().unwrap().grid.clear();
        let issues = cfg.validate();
        assert!(issues.iter().any(|i| i.contains("noise.grid")));
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let mut cfg = crate::presets::by_name("susceptibility").unwrap();
        cfg.noise.as_mut().unwrap().grid = vec![0.5, 0.4];
        let issues = cfg.validate();
        assert!(issues.iter().any(|i| i.contains("strictly increasing")));
    }

    #[test]
    fn invalid_rule_budget_surfaces() {
        let mut cfg = crate::presets::by_name("susceptibility").unwrap();
        cfg.rhm = Some(RhmSection {
            v: 2,
            m: 3,
            s: 2,
            depth: 2,
        });
        let issues = cfg.validate();
        assert!(issues.iter().any(|i| i.contains("exceeds v^s")), "{issues:?}");
    }
}
