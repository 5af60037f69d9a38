//! Variational loop: ADAM updates of the concatenated (theta, mu) vector
//! against a selected cost, gradient estimation by central differences or the
//! parameter-shift rule, early stopping, layer scanning, and the
//! barren-plateau gradient-variance study.

use crate::ansatz::{self, AnsatzKind};
use crate::channel::{EncodingConfig, NoiseModel};
use crate::fisher::{
    dprob_dphi, CostKind, FisherBundle, FisherError, Pipeline, FIELD_COMPONENTS,
    PROB_FLOOR,
};
use crate::linalg::{pinv_symmetric, RMat, RVec, PINV_REL_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Fisher(#[from] FisherError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    CentralDiff,
    ParamShift,
}

impl FromStr for GradMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "central_diff" => Ok(GradMode::CentralDiff),
            "param_shift" => Ok(GradMode::ParamShift),
            other => Err(format!(
                "unknown gradient mode '{other}' (expected central_diff|param_shift)"
            )),
        }
    }
}

/// Optimizer and stopping configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub grad_mode: GradMode,
    pub grad_shift: f64,
    pub seed: u64,
    pub cost_kind: CostKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.2,
            beta1: 0.8,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 300,
            patience: 20,
            min_delta: 1e-4,
            grad_mode: GradMode::CentralDiff,
            grad_shift: 1e-3,
            seed: 0,
            cost_kind: CostKind::Relative,
        }
    }
}

/// A cost at or below this is treated as a saturated bound and training stops.
const CONVERGED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Patience,
    MaxIters,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Patience => "patience",
            StopReason::MaxIters => "max_iters",
        }
    }
}

/// One recorded training iteration.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub cost: f64,
    pub c_f: f64,
    pub c_s: f64,
    pub tradeoff: f64,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Full iteration history of one training run.
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub iterations: Vec<IterRecord>,
    pub stop_reason: StopReason,
    pub best_index: usize,
}

impl TrainRecord {
    pub fn best(&self) -> &IterRecord {
        &self.iterations[self.best_index]
    }

    pub fn best_cost(&self) -> f64 {
        self.best().cost
    }
}

/// Updated (vars, first moment, second moment) after one ADAM step.
pub type AdamUpdate = (Vec<f64>, Vec<f64>, Vec<f64>);

/// One exact ADAM update (step counter k starts at 1). The second moment
/// accumulates the elementwise square of the gradient.
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    vars: &[f64],
    grads: &[f64],
    m: &[f64],
    v: &[f64],
    k: usize,
    config: &TrainConfig,
) -> Result<AdamUpdate, TrainError> {
    let n = vars.len();
    if grads.len() != n || m.len() != n || v.len() != n {
        return Err(TrainError::ShapeMismatch(format!(
            "vars {n}, grads {}, m {}, v {}",
            grads.len(),
            m.len(),
            v.len()
        )));
    }
    assert!(k >= 1, "ADAM step counter starts at 1");
    let mut m_next = vec![0.0; n];
    let mut v_next = vec![0.0; n];
    let mut vars_next = vec![0.0; n];
    let bias1 = 1.0 - config.beta1.powi(k as i32);
    let bias2 = 1.0 - config.beta2.powi(k as i32);
    for i in 0..n {
        m_next[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
        v_next[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        let m_hat = m_next[i] / bias1;
        let v_hat = v_next[i] / bias2;
        vars_next[i] = vars[i] - config.alpha * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok((vars_next, m_next, v_next))
}

/// Derive an independent RNG stream from a base seed and a stream index
/// (splitmix64 finalizer), so parallel runs stay deterministic.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cost_at(pipeline: &Pipeline, x: &[f64], cost: CostKind) -> Result<f64, FisherError> {
    Ok(pipeline.eval_x(x, cost)?.cost)
}

/// Probability derivative with respect to one training coordinate via the
/// parameter-shift rule: every gate here has a half-spectrum generator, so
/// dp/dx = [p(x + pi/2) - p(x - pi/2)] / 2 exactly.
pub fn prob_gradient_param_shift(
    pipeline: &Pipeline,
    x: &[f64],
    coord: usize,
) -> Result<RVec, FisherError> {
    let mut up = x.to_vec();
    up[coord] += FRAC_PI_2;
    let mut down = x.to_vec();
    down[coord] -= FRAC_PI_2;
    let (theta_u, mu_u) = pipeline.split(&up);
    let (theta_d, mu_d) = pipeline.split(&down);
    let p_up = pipeline.probabilities_at(theta_u, mu_u)?;
    let p_down = pipeline.probabilities_at(theta_d, mu_d)?;
    Ok((p_up - p_down).scale(0.5))
}

/// Probability derivative with respect to one training coordinate via central
/// differences with shift h.
pub fn prob_gradient_central(
    pipeline: &Pipeline,
    x: &[f64],
    coord: usize,
    h: f64,
) -> Result<RVec, FisherError> {
    let mut up = x.to_vec();
    up[coord] += h;
    let mut down = x.to_vec();
    down[coord] -= h;
    let (theta_u, mu_u) = pipeline.split(&up);
    let (theta_d, mu_d) = pipeline.split(&down);
    let p_up = pipeline.probabilities_at(theta_u, mu_u)?;
    let p_down = pipeline.probabilities_at(theta_d, mu_d)?;
    Ok((p_up - p_down).scale(1.0 / (2.0 * h)))
}

/// Matrix gradients (dC/dF, dC/dQ) of the selected cost at a center point.
fn cost_matrix_gradients(bundle: &FisherBundle, cost: CostKind) -> (RMat, RMat) {
    let d = bundle.f.nrows();
    let (f_inv, _) = pinv_symmetric(&bundle.f, PINV_REL_TOL);
    let (q_inv, _) = pinv_symmetric(&bundle.q, PINV_REL_TOL);
    match cost {
        CostKind::Relative => {
            let f_inv2 = &f_inv * &f_inv;
            let q_inv2 = &q_inv * &q_inv;
            let grad_f = f_inv2.scale(-bundle.c_s / (bundle.c_f * bundle.c_f));
            let grad_q = q_inv2.scale(1.0 / bundle.c_f);
            (grad_f, grad_q)
        }
        CostKind::Tradeoff => {
            let grad_f = q_inv.scale(-1.0 / FIELD_COMPONENTS as f64);
            let grad_q = (&q_inv * &bundle.f * &q_inv).scale(1.0 / FIELD_COMPONENTS as f64);
            (grad_f, grad_q)
        }
        CostKind::Norm2 => {
            let diff = &bundle.f - &bundle.q;
            let sym = (diff.clone() + diff.transpose()).scale(0.5);
            let eig = sym.symmetric_eigen();
            let mut top = 0usize;
            for i in 1..d {
                if eig.eigenvalues[i].abs() > eig.eigenvalues[top].abs() {
                    top = i;
                }
            }
            let sign = if eig.eigenvalues[top] >= 0.0 { 1.0 } else { -1.0 };
            let u = eig.eigenvectors.column(top);
            let grad = RMat::from_fn(d, d, |i, j| sign * u[i] * u[j]);
            (grad.clone(), grad.scale(-1.0))
        }
        CostKind::CfOnly => {
            let f_inv2 = &f_inv * &f_inv;
            (f_inv2.scale(-1.0), RMat::zeros(d, d))
        }
    }
}

fn frobenius_inner(a: &RMat, b: &RMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// dF/dx for one training coordinate, with the x-derivatives of p and of the
/// field derivatives dp taken exactly from the parameter-shift rule and the
/// chain rule of the CFIM applied analytically.
fn cfim_coordinate_derivative(
    pipeline: &Pipeline,
    x: &[f64],
    coord: usize,
    p0: &RVec,
    dp0: &RMat,
    s: f64,
) -> Result<RMat, FisherError> {
    let mut up = x.to_vec();
    up[coord] += FRAC_PI_2;
    let mut down = x.to_vec();
    down[coord] -= FRAC_PI_2;
    let (theta_u, mu_u) = pipeline.split(&up);
    let (theta_d, mu_d) = pipeline.split(&down);
    let (p_up, dp_up) = dprob_dphi(pipeline, theta_u, mu_u, s)?;
    let (p_down, dp_down) = dprob_dphi(pipeline, theta_d, mu_d, s)?;
    let dx_p = (p_up - p_down).scale(0.5);
    let dx_dp = (dp_up - dp_down).scale(0.5);
    let d = dp0.nrows();
    let mut df = RMat::zeros(d, d);
    for m in 0..p0.len() {
        let pm = p0[m];
        if pm < PROB_FLOOR {
            continue;
        }
        for i in 0..d {
            for j in i..d {
                let val = (dx_dp[(i, m)] * dp0[(j, m)] + dp0[(i, m)] * dx_dp[(j, m)]) / pm
                    - dp0[(i, m)] * dp0[(j, m)] * dx_p[m] / (pm * pm);
                df[(i, j)] += val;
                if i != j {
                    df[(j, i)] += val;
                }
            }
        }
    }
    Ok(df)
}

/// Gradient of the training cost over the concatenated (theta, mu) vector.
///
/// Central differences evaluate the scalar cost at x +- h per coordinate.
/// The parameter-shift mode differentiates the probability layer exactly and
/// chains it through the CFIM analytically; the QFIM dependence still goes
/// through central differences of Q on each coordinate.
pub fn cost_gradient(
    pipeline: &Pipeline,
    x: &[f64],
    config: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    let n = pipeline.n_params();
    if x.len() != n {
        return Err(TrainError::ShapeMismatch(format!(
            "expected {n} variables, got {}",
            x.len()
        )));
    }
    match config.grad_mode {
        GradMode::CentralDiff => {
            let h = config.grad_shift;
            let grads: Result<Vec<f64>, FisherError> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut up = x.to_vec();
                    up[j] += h;
                    let mut down = x.to_vec();
                    down[j] -= h;
                    Ok((cost_at(pipeline, &up, config.cost_kind)?
                        - cost_at(pipeline, &down, config.cost_kind)?)
                        / (2.0 * h))
                })
                .collect();
            Ok(grads?)
        }
        GradMode::ParamShift => {
            let (theta, mu) = pipeline.split(x);
            let center = pipeline.eval(theta, mu, config.cost_kind)?;
            let (grad_f, grad_q) = cost_matrix_gradients(&center, config.cost_kind);
            let s = pipeline.fd_shift;
            let (p0, dp0) = dprob_dphi(pipeline, theta, mu, s)?;
            let h = config.grad_shift;
            let grads: Result<Vec<f64>, FisherError> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let df = cfim_coordinate_derivative(pipeline, x, j, &p0, &dp0, s)?;
                    let dq = {
                        let mut up = x.to_vec();
                        up[j] += h;
                        let mut down = x.to_vec();
                        down[j] -= h;
                        let q_up = pipeline.eval_x(&up, config.cost_kind)?.q;
                        let q_down = pipeline.eval_x(&down, config.cost_kind)?.q;
                        (q_up - q_down).scale(1.0 / (2.0 * h))
                    };
                    Ok(frobenius_inner(&grad_f, &df) + frobenius_inner(&grad_q, &dq))
                })
                .collect();
            Ok(grads?)
        }
    }
}

/// Run ADAM from a seeded uniform initialization until early stopping or the
/// iteration cap. Deterministic given (pipeline, config).
pub fn train(pipeline: &Pipeline, config: &TrainConfig) -> Result<TrainRecord, TrainError> {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let n = pipeline.n_params();
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * TAU).collect();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];

    let record_point = |x: &[f64]| -> Result<IterRecord, TrainError> {
        let (theta, mu) = pipeline.split(x);
        let bundle = pipeline.eval(theta, mu, config.cost_kind)?;
        Ok(IterRecord {
            cost: bundle.cost,
            c_f: bundle.c_f,
            c_s: bundle.c_s,
            tradeoff: bundle.tradeoff,
            theta: theta.to_vec(),
            mu: mu.to_vec(),
        })
    };

    let mut iterations = vec![record_point(&x)?];
    let mut best_cost = iterations[0].cost;
    let mut best_index = 0;
    let mut since_improvement = 0usize;
    let mut stop_reason = StopReason::MaxIters;

    for k in 1..=config.max_iters {
        let grads = cost_gradient(pipeline, &x, config)?;
        let (x_next, m_next, v_next) = adam_step(&x, &grads, &m, &v, k, config)?;
        x = x_next;
        m = m_next;
        v = v_next;
        let rec = record_point(&x)?;
        let cost = rec.cost;
        iterations.push(rec);
        if cost < best_cost - config.min_delta {
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if cost < best_cost {
            best_cost = cost;
            best_index = iterations.len() - 1;
        }
        if cost <= CONVERGED_TOL {
            stop_reason = StopReason::Converged;
            break;
        }
        if since_improvement >= config.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    Ok(TrainRecord {
        iterations,
        stop_reason,
        best_index,
    })
}

/// One cell of a layer scan.
#[derive(Debug, Clone, Copy)]
pub struct LayerScanCell {
    pub prep_layers: usize,
    pub povm_layers: usize,
    pub best_cost: f64,
}

/// Train over a grid of (preparation layers, POVM layers) and report the best
/// cost per cell (minimum over `restarts` seeded restarts) plus the argmin.
#[allow(clippy::too_many_arguments)]
pub fn layer_scan(
    kind: AnsatzKind,
    n_qubits: usize,
    enc: EncodingConfig,
    noise: NoiseModel,
    fd_shift: f64,
    prep_layers_range: &[usize],
    povm_layers_range: &[usize],
    config: &TrainConfig,
    restarts: usize,
) -> Result<(Vec<LayerScanCell>, LayerScanCell), TrainError> {
    let mut cells = Vec::new();
    for &lp in prep_layers_range {
        for &lm in povm_layers_range {
            cells.push((lp, lm));
        }
    }
    let results: Result<Vec<LayerScanCell>, TrainError> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_idx, &(lp, lm))| {
            let pipeline = Pipeline {
                prep: ansatz::build(kind, n_qubits, lp).map_err(FisherError::from)?,
                meas: ansatz::build(kind, n_qubits, lm).map_err(FisherError::from)?,
                enc,
                noise,
                fd_shift,
            };
            let best = (0..restarts)
                .map(|r| {
                    let run_config = TrainConfig {
                        seed: mix_seed(config.seed, (cell_idx * restarts + r) as u64),
                        ..*config
                    };
                    train(&pipeline, &run_config).map(|rec| rec.best_cost())
                })
                .collect::<Result<Vec<f64>, TrainError>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Ok(LayerScanCell {
                prep_layers: lp,
                povm_layers: lm,
                best_cost: best,
            })
        })
        .collect();
    let results = results?;
    let argmin = results
        .iter()
        .copied()
        .min_by(|a, b| a.best_cost.partial_cmp(&b.best_cost).expect("finite costs"))
        .expect("non-empty layer grid");
    Ok((results, argmin))
}

/// Gradient statistics at one noise level.
#[derive(Debug, Clone, Copy)]
pub struct BarrenPlateauPoint {
    pub lambda: f64,
    pub mean_abs_grad: f64,
    pub var_grad: f64,
}

/// Least-squares fit of log10 Var vs lambda.
#[derive(Debug, Clone, Copy)]
pub struct BarrenPlateauFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone)]
pub struct BarrenPlateauResult {
    pub points: Vec<BarrenPlateauPoint>,
    pub fit: Option<BarrenPlateauFit>,
}

/// Sample uniformly random (theta, mu), measure the first-coordinate cost
/// derivative per run, and track its spread across noise levels. The variance
/// decay slope over lambda is the barren-plateau signature.
///
/// The derivative here is the parameter-shift evaluation of the cost,
/// [C(theta_1 + pi/2) - C(theta_1 - pi/2)]/2. Unlike small-shift central
/// differences it is bounded by the cost range, which keeps the run-to-run
/// variance free of the heavy tails that rank-deficient Fisher matrices
/// produce at random configurations.
#[allow(clippy::too_many_arguments)]
pub fn barren_plateau_study(
    kind: AnsatzKind,
    n_qubits: usize,
    prep_layers: usize,
    povm_layers: usize,
    enc: EncodingConfig,
    lambda_grid: &[f64],
    n_runs: usize,
    config: &TrainConfig,
) -> Result<BarrenPlateauResult, TrainError> {
    assert!(n_runs >= 2, "need at least 2 runs for a variance");
    let prep = ansatz::build(kind, n_qubits, prep_layers).map_err(FisherError::from)?;
    let meas = ansatz::build(kind, n_qubits, povm_layers).map_err(FisherError::from)?;
    let n = prep.n_params + meas.n_params;

    let points: Result<Vec<BarrenPlateauPoint>, TrainError> = lambda_grid
        .iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let pipeline = Pipeline {
                prep: prep.clone(),
                meas: meas.clone(),
                enc,
                noise: NoiseModel::Dephasing { lambda },
                fd_shift: crate::fisher::DEFAULT_FD_SHIFT,
            };
            let grads: Result<Vec<f64>, FisherError> = (0..n_runs)
                .into_par_iter()
                .map(|run| {
                    let stream = (li * n_runs + run) as u64;
                    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(config.seed, stream));
                    let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * TAU).collect();
                    let mut up = x.clone();
                    up[0] += FRAC_PI_2;
                    let mut down = x;
                    down[0] -= FRAC_PI_2;
                    Ok((cost_at(&pipeline, &up, config.cost_kind)?
                        - cost_at(&pipeline, &down, config.cost_kind)?)
                        / 2.0)
                })
                .collect();
            let grads = grads?;
            let mean = grads.iter().sum::<f64>() / n_runs as f64;
            let mean_abs = grads.iter().map(|g| g.abs()).sum::<f64>() / n_runs as f64;
            let var = grads.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n_runs as f64;
            Ok(BarrenPlateauPoint {
                lambda,
                mean_abs_grad: mean_abs,
                var_grad: var,
            })
        })
        .collect();
    let points = points?;

    let fit = fit_log_variance(&points);
    Ok(BarrenPlateauResult { points, fit })
}

fn fit_log_variance(points: &[BarrenPlateauPoint]) -> Option<BarrenPlateauFit> {
    let valid: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.var_grad > 0.0)
        .map(|p| (p.lambda, p.var_grad.log10()))
        .collect();
    if valid.len() < 2 {
        return None;
    }
    let n = valid.len() as f64;
    let mean_x = valid.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let mean_y = valid.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = valid.iter().map(|&(x, _)| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = valid
        .iter()
        .map(|&(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = valid.iter().map(|&(_, y)| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = valid
        .iter()
        .map(|&(x, y)| {
            let fit_y = slope * x + intercept;
            (y - fit_y) * (y - fit_y)
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(BarrenPlateauFit {
        slope,
        intercept,
        r2,
    })
}
