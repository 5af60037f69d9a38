//! Experiment drivers reproducing the reference figures at desk scale. Each
//! driver returns a CSV document with a metadata header; grid points run in a
//! worker pool but rows are assembled in grid order, so thread count never
//! changes output bytes.

use crate::ansatz::{self, Ansatz, AnsatzKind};
use crate::channel::{EncodingConfig, NoiseModel};
use crate::config::{config_hash, default_layers, ConfigError, Experiment, ResolvedConfig};
use crate::entanglement::{ce_ame, ce_ghz, ce_of_trained_probe, concentratable_entanglement, swap_test_ce, EntanglementError};
use crate::fisher::{CostKind, FisherError, Pipeline};
use crate::linalg::{basis_state, ghz_state};
use crate::report::{Cell, CsvDoc, ReportError};
use crate::train::{
    barren_plateau_study, layer_scan, mix_seed, train, TrainConfig, TrainError, TrainRecord,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Fisher(#[from] FisherError),
    #[error(transparent)]
    Entanglement(#[from] EntanglementError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn base_metadata(doc: &mut CsvDoc, cfg: &ResolvedConfig) {
    doc.meta("experiment", cfg.experiment.name());
    doc.meta("seed", cfg.seed.to_string());
    doc.meta("config_hash", config_hash(cfg));
    doc.meta("version", env!("CARGO_PKG_VERSION"));
}

fn build_circuit(kind: AnsatzKind, n_qubits: usize, layers: usize) -> Result<Ansatz, FisherError> {
    if n_qubits == 1 {
        Ok(ansatz::build_single_qubit(layers)?)
    } else {
        Ok(ansatz::build(kind, n_qubits, layers)?)
    }
}

fn pipeline_for(
    cfg: &ResolvedConfig,
    n_qubits: usize,
    t: f64,
    noise: NoiseModel,
) -> Result<Pipeline, FisherError> {
    Ok(Pipeline {
        prep: build_circuit(cfg.ansatz_kind, n_qubits, cfg.prep_layers)?,
        meas: build_circuit(cfg.ansatz_kind, n_qubits, cfg.povm_layers)?,
        enc: EncodingConfig {
            phi: cfg.phi,
            t,
            n_qubits,
        },
        noise,
        fd_shift: cfg.fd_shift,
    })
}

/// Best iterate of a finished run: the values at the minimum-cost iteration.
struct BestPoint {
    cost: f64,
    c_f: f64,
    c_s: f64,
    tradeoff: f64,
    theta: Vec<f64>,
}

fn best_point(record: &TrainRecord) -> BestPoint {
    let best = record.best();
    BestPoint {
        cost: best.cost,
        c_f: best.c_f,
        c_s: best.c_s,
        tradeoff: best.tradeoff,
        theta: best.theta.clone(),
    }
}

/// Train `restarts` times with derived seeds; returns the records in restart
/// order. `stream_base` keeps seed streams distinct across grid points.
fn train_restarts(
    pipeline: &Pipeline,
    config: &TrainConfig,
    restarts: usize,
    stream_base: u64,
) -> Result<Vec<TrainRecord>, TrainError> {
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let run_config = TrainConfig {
                seed: mix_seed(config.seed, stream_base + r as u64),
                ..*config
            };
            train(pipeline, &run_config)
        })
        .collect()
}

/// Single training experiment: serializes the iteration history of the best
/// restart (one row per iteration).
pub fn run_train(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let pipeline = pipeline_for(cfg, cfg.n_qubits, cfg.t, cfg.noise)?;
    let records = train_restarts(&pipeline, &cfg.train, cfg.restarts, 0)?;
    let winner_idx = records
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.best_cost()
                .partial_cmp(&b.1.best_cost())
                .expect("finite costs")
        })
        .map(|(i, _)| i)
        .expect("at least one restart");
    let winner = &records[winner_idx];

    let mut doc = CsvDoc::new(&["iter", "cost", "c_f", "c_s", "tradeoff"]);
    base_metadata(&mut doc, cfg);
    doc.meta("ansatz", cfg.ansatz_kind.name());
    doc.meta(
        "layers",
        format!("{}-{}", cfg.prep_layers, cfg.povm_layers),
    );
    doc.meta("n_qubits", cfg.n_qubits.to_string());
    doc.meta("cost_kind", cfg.train.cost_kind.name());
    doc.meta("restarts", cfg.restarts.to_string());
    doc.meta("best_restart", winner_idx.to_string());
    doc.meta("best_cost", crate::report::fmt_f64(winner.best_cost()));
    doc.meta("stop_reason", winner.stop_reason.name());
    for (i, rec) in winner.iterations.iter().enumerate() {
        doc.push_row(vec![
            Cell::Int(i as i64),
            rec.cost.into(),
            rec.c_f.into(),
            rec.c_s.into(),
            rec.tradeoff.into(),
        ])?;
    }
    Ok(doc)
}

/// Dephasing sweep: per lambda, mean over restarts of the best-iterate cost,
/// bounds, tradeoff and probe entanglement.
pub fn run_sweep_dephasing(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let tasks: Vec<(usize, usize)> = (0..cfg.lambda_grid.len())
        .flat_map(|li| (0..cfg.restarts).map(move |r| (li, r)))
        .collect();
    let results: Result<Vec<(BestPoint, Option<f64>)>, ExperimentError> = tasks
        .par_iter()
        .map(|&(li, r)| {
            let lambda = cfg.lambda_grid[li];
            let pipeline = pipeline_for(
                cfg,
                cfg.n_qubits,
                cfg.t,
                NoiseModel::Dephasing { lambda },
            )?;
            let run_config = TrainConfig {
                seed: mix_seed(cfg.train.seed, (li * cfg.restarts + r) as u64),
                ..cfg.train
            };
            let record = train(&pipeline, &run_config)?;
            let best = best_point(&record);
            let ce = if cfg.n_qubits <= 6 {
                Some(ce_of_trained_probe(&pipeline.prep, &best.theta)?)
            } else {
                None
            };
            Ok((best, ce))
        })
        .collect();
    let results = results?;

    let mut doc = CsvDoc::new(&["lambda", "cost", "c_f", "c_s", "tradeoff", "ce"]);
    base_metadata(&mut doc, cfg);
    doc.meta("ansatz", cfg.ansatz_kind.name());
    doc.meta(
        "layers",
        format!("{}-{}", cfg.prep_layers, cfg.povm_layers),
    );
    doc.meta("n_qubits", cfg.n_qubits.to_string());
    doc.meta("t", crate::report::fmt_f64(cfg.t));
    doc.meta("restarts", cfg.restarts.to_string());
    doc.meta("averaging", "mean over restarts of best-iterate values");

    for (li, &lambda) in cfg.lambda_grid.iter().enumerate() {
        let chunk = &results[li * cfg.restarts..(li + 1) * cfg.restarts];
        let n = chunk.len() as f64;
        let mean = |f: &dyn Fn(&BestPoint) -> f64| chunk.iter().map(|(b, _)| f(b)).sum::<f64>() / n;
        let ce_cell = if chunk.iter().all(|(_, ce)| ce.is_some()) {
            Cell::Float(chunk.iter().map(|(_, ce)| ce.unwrap()).sum::<f64>() / n)
        } else {
            Cell::Empty
        };
        doc.push_row(vec![
            lambda.into(),
            mean(&|b| b.cost).into(),
            mean(&|b| b.c_f).into(),
            mean(&|b| b.c_s).into(),
            mean(&|b| b.tradeoff).into(),
            ce_cell,
        ])?;
    }
    Ok(doc)
}

/// Barren-plateau study over the configured ansatz kinds: per-lambda gradient
/// statistics plus one fit-summary row per ansatz.
pub fn run_barren_plateau(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let mut doc = CsvDoc::new(&[
        "ansatz",
        "lambda",
        "mean_abs_grad",
        "var_grad",
        "slope",
        "r2",
    ]);
    base_metadata(&mut doc, cfg);
    doc.meta("n_qubits", cfg.n_qubits.to_string());
    doc.meta("n_runs", cfg.n_runs.to_string());
    doc.meta("t", crate::report::fmt_f64(cfg.t));
    doc.meta(
        "gradient_estimator",
        "parameter-shift [C(+pi/2) - C(-pi/2)]/2 on the first preparation angle",
    );

    let enc = EncodingConfig {
        phi: cfg.phi,
        t: cfg.t,
        n_qubits: cfg.n_qubits,
    };
    for &kind in &cfg.ansatz_kinds {
        let (lp, lm) = if cfg.layers_explicit() {
            (cfg.prep_layers, cfg.povm_layers)
        } else {
            default_layers(kind)
        };
        let result = barren_plateau_study(
            kind,
            cfg.n_qubits,
            lp,
            lm,
            enc,
            &cfg.lambda_grid,
            cfg.n_runs,
            &cfg.train,
        )?;
        for point in &result.points {
            doc.push_row(vec![
                kind.name().into(),
                point.lambda.into(),
                point.mean_abs_grad.into(),
                point.var_grad.into(),
                Cell::Empty,
                Cell::Empty,
            ])?;
        }
        match result.fit {
            Some(fit) => doc.push_row(vec![
                kind.name().into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                fit.slope.into(),
                fit.r2.into(),
            ])?,
            None => doc.push_row(vec![
                kind.name().into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ])?,
        }
    }
    Ok(doc)
}

/// Minimum classical bound found across every iterate of every restart, with
/// the quantum bound at the same iterate.
struct SweepPoint {
    c_f: f64,
    c_s: f64,
}

fn min_cf_over_restarts(
    pipeline: &Pipeline,
    config: &TrainConfig,
    restarts: usize,
    stream_base: u64,
) -> Result<SweepPoint, TrainError> {
    let records = train_restarts(pipeline, config, restarts, stream_base)?;
    let mut best = SweepPoint {
        c_f: f64::INFINITY,
        c_s: f64::INFINITY,
    };
    for record in &records {
        for it in &record.iterations {
            if it.c_f < best.c_f {
                best = SweepPoint {
                    c_f: it.c_f,
                    c_s: it.c_s,
                };
            }
        }
    }
    Ok(best)
}

/// Ornstein-Uhlenbeck sweep. Curve rows: trained bounds vs sensing time per
/// (mode, N). Minima rows: min-over-t bounds per (mode, N) next to the
/// SQL/HL references anchored at the computed N = 1 minimum.
pub fn run_ou_sweep(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let modes = [true, false]; // markovian, non-markovian
    let mut n_list = cfg.n_grid.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let gamma = match cfg.noise {
        NoiseModel::OrnsteinUhlenbeck { gamma, .. } => gamma,
        NoiseModel::Dephasing { .. } => 0.1,
    };
    let tau_c = match cfg.noise {
        NoiseModel::OrnsteinUhlenbeck { tau_c, .. } => tau_c,
        NoiseModel::Dephasing { .. } => 20.0,
    };

    // every (mode, n, t) cell, with N = 1 always present for the SQL anchor
    let mut anchor_ns = n_list.clone();
    if !anchor_ns.contains(&1) {
        anchor_ns.insert(0, 1);
    }
    let mut tasks = Vec::new();
    for (mi, &markovian) in modes.iter().enumerate() {
        for &n in &anchor_ns {
            for (ti, &t) in cfg.t_grid.iter().enumerate() {
                tasks.push((mi, markovian, n, ti, t));
            }
        }
    }
    let cells: Result<Vec<SweepPoint>, ExperimentError> = tasks
        .par_iter()
        .map(|&(mi, markovian, n, ti, t)| {
            if t == 0.0 {
                // no encoding happened: nothing depends on the field, both
                // information matrices vanish, and the pseudo-inverse bounds
                // are exactly zero for any variables — no training needed
                return Ok(SweepPoint { c_f: 0.0, c_s: 0.0 });
            }
            let noise = NoiseModel::OrnsteinUhlenbeck {
                gamma,
                tau_c,
                markovian,
            };
            let pipeline = pipeline_for(cfg, n, t, noise)?;
            let stream_base =
                ((mi * 8 + n) * cfg.t_grid.len() + ti) as u64 * cfg.restarts as u64;
            Ok(min_cf_over_restarts(
                &pipeline,
                &cfg.train,
                cfg.restarts,
                stream_base,
            )?)
        })
        .collect();
    let cells = cells?;

    let mut doc = CsvDoc::new(&["section", "mode", "n", "t", "c_f", "c_s", "sql", "hl"]);
    base_metadata(&mut doc, cfg);
    doc.meta("ansatz", cfg.ansatz_kind.name());
    doc.meta(
        "layers",
        format!("{}-{}", cfg.prep_layers, cfg.povm_layers),
    );
    doc.meta("gamma", crate::report::fmt_f64(gamma));
    doc.meta("tau_c", crate::report::fmt_f64(tau_c));
    doc.meta("restarts", cfg.restarts.to_string());
    doc.meta(
        "selection",
        "per (mode, n, t): iterate with minimal c_f across all restarts",
    );
    doc.meta(
        "sql_hl_anchor",
        "sql = c1/n, hl = c1/n^2 with c1 the computed N=1 min-over-t c_f per mode",
    );

    let cell_at = |mi: usize, n: usize, ti: usize| -> &SweepPoint {
        let n_idx = anchor_ns.iter().position(|&x| x == n).expect("n present");
        &cells[(mi * anchor_ns.len() + n_idx) * cfg.t_grid.len() + ti]
    };
    let mode_name = |markovian: bool| if markovian { "markovian" } else { "non-markovian" };

    // curve rows for the configured N values
    for (mi, &markovian) in modes.iter().enumerate() {
        for &n in &n_list {
            for (ti, &t) in cfg.t_grid.iter().enumerate() {
                let point = cell_at(mi, n, ti);
                doc.push_row(vec![
                    "curve".into(),
                    mode_name(markovian).into(),
                    Cell::Int(n as i64),
                    t.into(),
                    point.c_f.into(),
                    point.c_s.into(),
                    Cell::Empty,
                    Cell::Empty,
                ])?;
            }
        }
    }

    // minima rows with SQL/HL anchored at the N = 1 minimum per mode
    for (mi, &markovian) in modes.iter().enumerate() {
        let c1 = (0..cfg.t_grid.len())
            .map(|ti| cell_at(mi, 1, ti).c_f)
            .fold(f64::INFINITY, f64::min);
        for &n in &n_list {
            let (best_ti, best) = (0..cfg.t_grid.len())
                .map(|ti| (ti, cell_at(mi, n, ti)))
                .min_by(|a, b| a.1.c_f.partial_cmp(&b.1.c_f).expect("finite bounds"))
                .expect("non-empty t grid");
            doc.push_row(vec![
                "minimum".into(),
                mode_name(markovian).into(),
                Cell::Int(n as i64),
                cfg.t_grid[best_ti].into(),
                best.c_f.into(),
                best.c_s.into(),
                (c1 / n as f64).into(),
                (c1 / (n * n) as f64).into(),
            ])?;
        }
    }
    Ok(doc)
}

/// Layer scan: trained best cost per (prep layers, POVM layers) cell.
pub fn run_layer_scan(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let enc = EncodingConfig {
        phi: cfg.phi,
        t: cfg.t,
        n_qubits: cfg.n_qubits,
    };
    let (cells, argmin) = layer_scan(
        cfg.ansatz_kind,
        cfg.n_qubits,
        enc,
        cfg.noise,
        cfg.fd_shift,
        &cfg.prep_layers_range,
        &cfg.povm_layers_range,
        &cfg.train,
        cfg.restarts,
    )?;
    let mut doc = CsvDoc::new(&["ansatz", "prep_layers", "povm_layers", "best_cost"]);
    base_metadata(&mut doc, cfg);
    doc.meta("n_qubits", cfg.n_qubits.to_string());
    doc.meta("restarts", cfg.restarts.to_string());
    doc.meta(
        "argmin",
        format!(
            "({}, {}-{})",
            crate::report::fmt_f64(argmin.best_cost),
            argmin.prep_layers,
            argmin.povm_layers
        ),
    );
    for cell in &cells {
        doc.push_row(vec![
            cfg.ansatz_kind.name().into(),
            Cell::Int(cell.prep_layers as i64),
            Cell::Int(cell.povm_layers as i64),
            cell.best_cost.into(),
        ])?;
    }
    Ok(doc)
}

/// Classical-bound-only training (cost = C_F): per-iteration history of the
/// best restart plus the final bounds, which need not coincide.
pub fn run_cost_variant(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let pipeline = pipeline_for(cfg, cfg.n_qubits, cfg.t, cfg.noise)?;
    let train_cf = TrainConfig {
        cost_kind: CostKind::CfOnly,
        ..cfg.train
    };
    let records = train_restarts(&pipeline, &train_cf, cfg.restarts, 0)?;
    let winner = records
        .iter()
        .min_by(|a, b| {
            a.best_cost()
                .partial_cmp(&b.best_cost())
                .expect("finite costs")
        })
        .expect("at least one restart");
    let best = winner.best();

    let mut doc = CsvDoc::new(&["iter", "cost", "c_f", "c_s", "tradeoff"]);
    base_metadata(&mut doc, cfg);
    doc.meta("ansatz", cfg.ansatz_kind.name());
    doc.meta("cost_kind", "cf");
    doc.meta("noise", format!("{:?}", cfg.noise));
    doc.meta("restarts", cfg.restarts.to_string());
    doc.meta("initial_c_f", crate::report::fmt_f64(winner.iterations[0].c_f));
    doc.meta("final_c_f", crate::report::fmt_f64(best.c_f));
    doc.meta("final_c_s", crate::report::fmt_f64(best.c_s));
    doc.meta(
        "final_gap",
        crate::report::fmt_f64(best.c_f - best.c_s),
    );
    for (i, rec) in winner.iterations.iter().enumerate() {
        doc.push_row(vec![
            Cell::Int(i as i64),
            rec.cost.into(),
            rec.c_f.into(),
            rec.c_s.into(),
            rec.tradeoff.into(),
        ])?;
    }
    Ok(doc)
}

/// Concentratable entanglement report for a named reference state or a
/// circuit state loaded from a parameter file.
pub fn run_entanglement(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    let n = cfg.n_qubits;
    let (label, psi) = match cfg.entanglement_state.as_str() {
        "product" => ("product".to_string(), basis_state(n, 0)),
        "ghz" => ("ghz".to_string(), ghz_state(n)),
        "ansatz" => {
            let path = cfg
                .theta_file
                .as_ref()
                .expect("validated: theta_file present");
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.display().to_string(),
                source,
            })?;
            let theta: Vec<f64> = text
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        ConfigError::Invalid(format!("bad number '{tok}' in theta file"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let circuit = build_circuit(cfg.ansatz_kind, n, cfg.prep_layers)?;
            if theta.len() != circuit.n_params {
                return Err(ConfigError::Invalid(format!(
                    "theta file has {} values but the {} ansatz with {} layers needs {}",
                    theta.len(),
                    cfg.ansatz_kind.name(),
                    cfg.prep_layers,
                    circuit.n_params
                ))
                .into());
            }
            (
                format!("{}({} layers)", cfg.ansatz_kind.name(), cfg.prep_layers),
                ansatz::prepare_vector(&circuit, &theta).map_err(FisherError::from)?,
            )
        }
        other => unreachable!("validated state '{other}'"),
    };

    let report = concentratable_entanglement(&psi, n)?;
    let swap = if n <= 4 {
        Some(swap_test_ce(&psi, n)?)
    } else {
        None
    };

    let mut doc = CsvDoc::new(&[
        "state",
        "n_qubits",
        "xi",
        "xi_swap_test",
        "ghz_reference",
        "ame_reference",
    ]);
    base_metadata(&mut doc, cfg);
    doc.push_row(vec![
        label.into(),
        Cell::Int(n as i64),
        report.xi.into(),
        swap.map(Cell::Float).unwrap_or(Cell::Empty),
        ce_ghz(n).into(),
        ce_ame(n).into(),
    ])?;
    Ok(doc)
}

/// Dispatch an experiment to its driver.
pub fn run(cfg: &ResolvedConfig) -> Result<CsvDoc, ExperimentError> {
    match cfg.experiment {
        Experiment::Train => run_train(cfg),
        Experiment::SweepDephasing => run_sweep_dephasing(cfg),
        Experiment::BarrenPlateau => run_barren_plateau(cfg),
        Experiment::OuSweep => run_ou_sweep(cfg),
        Experiment::LayerScan => run_layer_scan(cfg),
        Experiment::CostVariant => run_cost_variant(cfg),
        Experiment::Entanglement => run_entanglement(cfg),
    }
}

/// Plot-script column layout per experiment (1-indexed gnuplot columns).
pub fn plot_spec(cfg: &ResolvedConfig) -> (&'static str, &'static str, Vec<(usize, usize, &'static str)>) {
    match cfg.experiment {
        Experiment::Train | Experiment::CostVariant => (
            "iteration",
            "value",
            vec![(1, 2, "cost"), (1, 3, "c_f"), (1, 4, "c_s")],
        ),
        Experiment::SweepDephasing => (
            "dephasing probability",
            "value",
            vec![(1, 2, "cost"), (1, 3, "c_f"), (1, 4, "c_s"), (1, 5, "tradeoff")],
        ),
        Experiment::BarrenPlateau => ("lambda", "var grad", vec![(2, 4, "var_grad")]),
        Experiment::OuSweep => ("t", "bound", vec![(4, 5, "c_f"), (4, 6, "c_s")]),
        Experiment::LayerScan => ("prep layers", "best cost", vec![(2, 4, "best_cost")]),
        Experiment::Entanglement => ("n", "xi", vec![(2, 3, "xi")]),
    }
}
