//! Experiment configuration: a TOML file with documented keys plus CLI flag
//! overrides. Every field has a default mirroring the reference setup
//! (phi = (pi/6, pi/6, pi/6), N = 3, gamma = 0.1, tau_c = 20, ADAM at
//! alpha = 0.2, beta1 = 0.8), so an empty config is runnable.

use crate::ansatz::AnsatzKind;
use crate::channel::NoiseModel;
use crate::fisher::{CostKind, DEFAULT_FD_SHIFT};
use crate::train::{GradMode, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// The experiments the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Train,
    SweepDephasing,
    BarrenPlateau,
    OuSweep,
    LayerScan,
    CostVariant,
    Entanglement,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Train => "train",
            Experiment::SweepDephasing => "sweep-dephasing",
            Experiment::BarrenPlateau => "barren-plateau",
            Experiment::OuSweep => "ou-sweep",
            Experiment::LayerScan => "layer-scan",
            Experiment::CostVariant => "cost-variant",
            Experiment::Entanglement => "entanglement",
        }
    }

    /// Restart count used when the config does not set one. Sweeps that train
    /// at every grid point default lower to keep desk-scale runtimes sane.
    pub fn default_restarts(self) -> usize {
        match self {
            Experiment::SweepDephasing | Experiment::Train | Experiment::CostVariant => 10,
            Experiment::OuSweep | Experiment::LayerScan => 3,
            Experiment::BarrenPlateau | Experiment::Entanglement => 1,
        }
    }
}

/// Raw file schema. All keys optional; unknown keys are rejected so typos
/// surface as errors with their TOML location.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub plot_scripts: Option<bool>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub ansatz: AnsatzSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub entanglement: EntanglementSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_qubits: Option<usize>,
    pub phi: Option<[f64; 3]>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSection {
    pub kind: Option<AnsatzKind>,
    pub prep_layers: Option<usize>,
    pub povm_layers: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// "dephasing" or "ou".
    pub kind: Option<String>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub tau_c: Option<f64>,
    pub markovian: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub alpha: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub patience: Option<usize>,
    pub min_delta: Option<f64>,
    pub grad_mode: Option<GradMode>,
    pub grad_shift: Option<f64>,
    pub fd_shift: Option<f64>,
    pub cost: Option<CostKind>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_grid: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub prep_layers_range: Option<Vec<usize>>,
    pub povm_layers_range: Option<Vec<usize>>,
    pub n_runs: Option<usize>,
    pub ansatz_kinds: Option<Vec<AnsatzKind>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntanglementSection {
    /// "product", "ghz", or "ansatz" (requires theta_file).
    pub state: Option<String>,
    pub theta_file: Option<PathBuf>,
}

/// CLI flag overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub ansatz: Option<AnsatzKind>,
    pub n_qubits: Option<usize>,
    pub restarts: Option<usize>,
    pub threads: Option<usize>,
}

/// Fully resolved configuration with every default applied.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub plot_scripts: bool,
    pub n_qubits: usize,
    pub phi: [f64; 3],
    pub t: f64,
    pub ansatz_kind: AnsatzKind,
    pub prep_layers: usize,
    pub povm_layers: usize,
    /// Layer counts were set explicitly (vs per-kind defaults); multi-ansatz
    /// experiments fall back to per-kind optima when this is false.
    layers_explicit: bool,
    pub noise: NoiseModel,
    pub train: TrainConfig,
    pub fd_shift: f64,
    pub restarts: usize,
    pub lambda_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub prep_layers_range: Vec<usize>,
    pub povm_layers_range: Vec<usize>,
    pub n_runs: usize,
    pub ansatz_kinds: Vec<AnsatzKind>,
    pub entanglement_state: String,
    pub theta_file: Option<PathBuf>,
}

impl ResolvedConfig {
    pub fn layers_explicit(&self) -> bool {
        self.layers_explicit
    }
}

/// Optimal layer counts per ansatz from the layer scan, used as defaults.
pub fn default_layers(kind: AnsatzKind) -> (usize, usize) {
    match kind {
        AnsatzKind::Star => (2, 2),
        AnsatzKind::Ring => (3, 2),
        AnsatzKind::Squeezing => (2, 2),
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn resolve(
    experiment: Experiment,
    file: &FileConfig,
    overrides: &Overrides,
) -> Result<ResolvedConfig, ConfigError> {
    if let Some(named) = &file.experiment {
        if named != experiment.name() {
            return Err(ConfigError::Invalid(format!(
                "config file names experiment '{named}' but '{}' was requested",
                experiment.name()
            )));
        }
    }
    let ansatz_kind = overrides
        .ansatz
        .or(file.ansatz.kind)
        .unwrap_or(AnsatzKind::Star);
    let (default_prep, default_povm) = default_layers(ansatz_kind);
    let prep_layers = file.ansatz.prep_layers.unwrap_or(default_prep);
    let povm_layers = file.ansatz.povm_layers.unwrap_or(default_povm);
    let n_qubits = overrides.n_qubits.or(file.system.n_qubits).unwrap_or(3);
    let phi = file.system.phi.unwrap_or([PI / 6.0; 3]);
    let t = file.system.t.unwrap_or(1.0);

    let gamma = file.noise.gamma.unwrap_or(0.1);
    let tau_c = file.noise.tau_c.unwrap_or(20.0);
    let markovian = file.noise.markovian.unwrap_or(false);
    let lambda = file.noise.lambda.unwrap_or(0.0);
    let noise = match file.noise.kind.as_deref() {
        None | Some("dephasing") => NoiseModel::Dephasing { lambda },
        Some("ou") => NoiseModel::OrnsteinUhlenbeck {
            gamma,
            tau_c,
            markovian,
        },
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "noise.kind must be 'dephasing' or 'ou', got '{other}'"
            )))
        }
    };
    noise
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let defaults = TrainConfig::default();
    let train = TrainConfig {
        alpha: file.train.alpha.unwrap_or(defaults.alpha),
        beta1: file.train.beta1.unwrap_or(defaults.beta1),
        beta2: file.train.beta2.unwrap_or(defaults.beta2),
        epsilon: file.train.epsilon.unwrap_or(defaults.epsilon),
        max_iters: file.train.max_iters.unwrap_or(defaults.max_iters),
        patience: file.train.patience.unwrap_or(defaults.patience),
        min_delta: file.train.min_delta.unwrap_or(defaults.min_delta),
        grad_mode: file.train.grad_mode.unwrap_or(defaults.grad_mode),
        grad_shift: file.train.grad_shift.unwrap_or(defaults.grad_shift),
        seed: overrides.seed.or(file.seed).unwrap_or(42),
        cost_kind: file.train.cost.unwrap_or(defaults.cost_kind),
    };

    let restarts = overrides
        .restarts
        .or(file.train.restarts)
        .unwrap_or_else(|| experiment.default_restarts());

    let lambda_grid = file
        .sweep
        .lambda_grid
        .clone()
        .unwrap_or_else(|| (0..10).map(|i| i as f64 * 0.1).collect());
    let t_grid = file
        .sweep
        .t_grid
        .clone()
        .unwrap_or_else(|| (1..=20).map(|i| i as f64 * 0.5).collect());
    let n_grid = file.sweep.n_grid.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let prep_layers_range = file
        .sweep
        .prep_layers_range
        .clone()
        .unwrap_or_else(|| vec![1, 2, 3]);
    let povm_layers_range = file
        .sweep
        .povm_layers_range
        .clone()
        .unwrap_or_else(|| vec![1, 2, 3]);
    let n_runs = file.sweep.n_runs.unwrap_or(50);
    let ansatz_kinds = file.sweep.ansatz_kinds.clone().unwrap_or_else(|| {
        vec![AnsatzKind::Star, AnsatzKind::Ring, AnsatzKind::Squeezing]
    });

    let out = overrides
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", experiment.name())));

    let resolved = ResolvedConfig {
        experiment,
        seed: train.seed,
        out,
        threads: overrides.threads.or(file.threads).unwrap_or(0),
        plot_scripts: file.plot_scripts.unwrap_or(true),
        n_qubits,
        phi,
        t,
        ansatz_kind,
        prep_layers,
        povm_layers,
        layers_explicit: file.ansatz.prep_layers.is_some() || file.ansatz.povm_layers.is_some(),
        noise,
        train,
        fd_shift: file.train.fd_shift.unwrap_or(DEFAULT_FD_SHIFT),
        restarts,
        lambda_grid,
        t_grid,
        n_grid,
        prep_layers_range,
        povm_layers_range,
        n_runs,
        ansatz_kinds,
        entanglement_state: file
            .entanglement
            .state
            .clone()
            .unwrap_or_else(|| "ghz".to_string()),
        theta_file: file.entanglement.theta_file.clone(),
    };
    validate(&resolved)?;
    Ok(resolved)
}

/// A kind fits a register when the circuit layout exists there; one qubit is
/// always allowed through the degenerate single-qubit probe.
fn kind_supports(kind: AnsatzKind, n_qubits: usize) -> bool {
    n_qubits == 1
        || match kind {
            AnsatzKind::Ring => n_qubits >= 3,
            AnsatzKind::Star | AnsatzKind::Squeezing => n_qubits >= 2,
        }
}

fn validate(cfg: &ResolvedConfig) -> Result<(), ConfigError> {
    let fail = |msg: String| Err(ConfigError::Invalid(msg));
    if cfg.n_qubits == 0 || cfg.n_qubits > 7 {
        return fail(format!("n_qubits must be in 1..=7, got {}", cfg.n_qubits));
    }
    if !kind_supports(cfg.ansatz_kind, cfg.n_qubits) {
        return fail(format!(
            "{} ansatz does not fit {} qubits",
            cfg.ansatz_kind.name(),
            cfg.n_qubits
        ));
    }
    if !cfg.phi.iter().all(|x| x.is_finite()) {
        return fail("phi components must be finite".into());
    }
    if cfg.t.is_nan() || cfg.t < 0.0 {
        return fail(format!("sensing time must be >= 0, got {}", cfg.t));
    }
    if cfg.prep_layers == 0 || cfg.povm_layers == 0 {
        return fail("layer counts must be >= 1".into());
    }
    if cfg.restarts == 0 {
        return fail("restarts must be >= 1".into());
    }
    if cfg.fd_shift.is_nan() || cfg.fd_shift <= 0.0 {
        return fail(format!("fd_shift must be > 0, got {}", cfg.fd_shift));
    }
    if cfg.train.grad_shift.is_nan() || cfg.train.grad_shift <= 0.0 {
        return fail(format!(
            "grad_shift must be > 0, got {}",
            cfg.train.grad_shift
        ));
    }
    match cfg.experiment {
        Experiment::SweepDephasing => {
            if cfg.lambda_grid.is_empty() {
                return fail("sweep.lambda_grid is empty".into());
            }
            if cfg
                .lambda_grid
                .iter()
                .any(|l| !(0.0..=1.0).contains(l))
            {
                return fail("sweep.lambda_grid entries must lie in [0, 1]".into());
            }
        }
        Experiment::BarrenPlateau => {
            if cfg.lambda_grid.is_empty() {
                return fail("sweep.lambda_grid is empty".into());
            }
            if cfg.n_runs < 2 {
                return fail(format!("sweep.n_runs must be >= 2, got {}", cfg.n_runs));
            }
            if cfg.ansatz_kinds.is_empty() {
                return fail("sweep.ansatz_kinds is empty".into());
            }
            for &kind in &cfg.ansatz_kinds {
                if !kind_supports(kind, cfg.n_qubits) {
                    return fail(format!(
                        "{} ansatz in sweep.ansatz_kinds does not fit {} qubits",
                        kind.name(),
                        cfg.n_qubits
                    ));
                }
            }
        }
        Experiment::OuSweep => {
            if cfg.t_grid.is_empty() {
                return fail("sweep.t_grid is empty".into());
            }
            if cfg.t_grid.iter().any(|t| t.is_nan() || *t < 0.0) {
                return fail("sweep.t_grid entries must be >= 0".into());
            }
            if cfg.n_grid.is_empty() {
                return fail("sweep.n_grid is empty".into());
            }
            for &n in &cfg.n_grid {
                if n == 0 || n > 7 {
                    return fail(format!("sweep.n_grid entries must be in 1..=7, got {n}"));
                }
                if !kind_supports(cfg.ansatz_kind, n) {
                    return fail(format!(
                        "{} ansatz does not fit {} qubits in sweep.n_grid",
                        cfg.ansatz_kind.name(),
                        n
                    ));
                }
            }
        }
        Experiment::LayerScan => {
            if cfg.prep_layers_range.is_empty() || cfg.povm_layers_range.is_empty() {
                return fail("layer ranges must be non-empty".into());
            }
            if cfg
                .prep_layers_range
                .iter()
                .chain(cfg.povm_layers_range.iter())
                .any(|&l| l == 0)
            {
                return fail("layer ranges must contain only values >= 1".into());
            }
        }
        Experiment::Entanglement => {
            match cfg.entanglement_state.as_str() {
                "ghz" | "product" => {}
                "ansatz" => {
                    if cfg.theta_file.is_none() {
                        return fail(
                            "entanglement.state = 'ansatz' requires entanglement.theta_file".into(),
                        );
                    }
                }
                other => {
                    return fail(format!(
                        "entanglement.state must be ghz|product|ansatz, got '{other}'"
                    ))
                }
            }
        }
        Experiment::Train | Experiment::CostVariant => {}
    }
    Ok(())
}

/// Short stable hash of the resolved configuration for CSV metadata.
/// Runtime knobs that cannot change results (threads, output path, plot
/// scripts) are excluded, so reruns at different parallelism hash alike.
pub fn config_hash(cfg: &ResolvedConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!(
        "{:?}|{}|{:?}|{:?}|{}|{:?}|{}|{}|{}|{:?}|{:?}|{}|{}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{}|{:?}",
        cfg.experiment.name(),
        cfg.seed,
        cfg.phi,
        cfg.t,
        cfg.n_qubits,
        cfg.ansatz_kind,
        cfg.prep_layers,
        cfg.povm_layers,
        cfg.layers_explicit,
        cfg.noise,
        cfg.train,
        cfg.fd_shift,
        cfg.restarts,
        cfg.lambda_grid,
        cfg.t_grid,
        cfg.n_grid,
        cfg.prep_layers_range,
        cfg.povm_layers_range,
        cfg.n_runs,
        cfg.ansatz_kinds,
        cfg.entanglement_state,
        cfg.theta_file,
    ));
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_reference_defaults() {
        let cfg = resolve(
            Experiment::SweepDephasing,
            &FileConfig::default(),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(cfg.n_qubits, 3);
        assert_eq!(cfg.phi, [PI / 6.0; 3]);
        assert_eq!(cfg.ansatz_kind, AnsatzKind::Star);
        assert_eq!((cfg.prep_layers, cfg.povm_layers), (2, 2));
        assert_eq!(cfg.train.alpha, 0.2);
        assert_eq!(cfg.train.beta1, 0.8);
        assert_eq!(cfg.train.beta2, 0.999);
        assert_eq!(cfg.train.epsilon, 1e-8);
        assert_eq!(cfg.restarts, 10);
        assert_eq!(cfg.lambda_grid.len(), 10);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn ring_defaults_to_scan_optimum_layers() {
        let file = FileConfig {
            ansatz: AnsatzSection {
                kind: Some(AnsatzKind::Ring),
                ..Default::default()
            },
            ..Default::default()
        };
        let cfg = resolve(Experiment::Train, &file, &Overrides::default()).unwrap();
        assert_eq!((cfg.prep_layers, cfg.povm_layers), (3, 2));
    }

    #[test]
    fn toml_round_trip_with_overrides() {
        let text = r#"
            seed = 7
            [system]
            n_qubits = 2
            [ansatz]
            kind = "ring"
            prep_layers = 1
            [noise]
            kind = "ou"
            gamma = 0.2
            markovian = true
            [train]
            alpha = 0.1
            restarts = 4
            [sweep]
            n_grid = [3, 4]
        "#;
        let file: FileConfig = toml::from_str(text).unwrap();
        let overrides = Overrides {
            n_qubits: Some(4),
            ..Default::default()
        };
        let cfg = resolve(Experiment::OuSweep, &file, &overrides).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n_qubits, 4); // flag wins over file
        assert_eq!(cfg.train.alpha, 0.1);
        assert_eq!(cfg.restarts, 4);
        assert!(matches!(
            cfg.noise,
            NoiseModel::OrnsteinUhlenbeck {
                markovian: true,
                ..
            }
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<FileConfig>("nonsense = 1").unwrap_err();
        assert!(err.to_string().contains("nonsense"));
    }

    #[test]
    fn empty_lambda_grid_rejected() {
        let file = FileConfig {
            sweep: SweepSection {
                lambda_grid: Some(vec![]),
                ..Default::default()
            },
            ..Default::default()
        };
        let err = resolve(Experiment::SweepDephasing, &file, &Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn experiment_name_mismatch_rejected() {
        let file = FileConfig {
            experiment: Some("train".into()),
            ..Default::default()
        };
        let err = resolve(Experiment::OuSweep, &file, &Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn bad_noise_probability_rejected() {
        let file = FileConfig {
            noise: NoiseSection {
                lambda: Some(1.5),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(resolve(Experiment::Train, &file, &Overrides::default()).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = resolve(
            Experiment::Train,
            &FileConfig::default(),
            &Overrides::default(),
        )
        .unwrap();
        let b = resolve(
            Experiment::Train,
            &FileConfig::default(),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c = resolve(
            Experiment::Train,
            &FileConfig::default(),
            &Overrides {
                seed: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }
}
