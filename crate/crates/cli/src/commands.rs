use std::path::{Path, PathBuf};

use mlm_core::data::{encode_labeled, split, Table};
use mlm_core::document::TrainingMetrics;
use mlm_core::interpret::{
    explain_epic_pr, explainable_dimensions, ExplainableCondition, ExplainableDims, FeatureView,
};
use mlm_core::pipeline::{
    cross_validate_k, fit_pipeline, mlm_predict, mlp_predict, Evaluation, PipelineParams,
};
use mlm_core::report::{self, CoefficientRow};
use mlm_core::{dummy_encode, load_csv, Dataset, ModelDocument, PipelineConfig, PredictMode};
use serde::Serialize;

use crate::error::CliError;
use crate::{Common, Method, Mode};

type Doc = ModelDocument<f64>;

pub fn setup(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &PipelineConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.out_dir.display())))?;
    Ok(&cfg.out_dir)
}

fn model_path(cfg: &PipelineConfig, model: Option<PathBuf>) -> PathBuf {
    model.unwrap_or_else(|| cfg.out_dir.join("model.json"))
}

/// Training and test sets in raw units. Without a test file the training
/// file is split with `seed`.
fn load_split(
    cfg: &PipelineConfig,
    seed: u64,
    test: Option<&Path>,
) -> Result<(Dataset<f64>, Dataset<f64>), CliError> {
    let raw = load_csv::<f64>(
        &cfg.data.train,
        &cfg.data.target,
        cfg.data.task,
        &cfg.data.nominal,
    )?;
    let all = dummy_encode(&raw)?;
    match test.or(cfg.data.test.as_deref()) {
        Some(path) => {
            let test = encode_labeled(&all.schema()?, &Table::read(path)?, cfg.data.task)?;
            Ok((all, test))
        }
        None => Ok(split(&all, cfg.data.test_fraction, seed)?),
    }
}

fn evaluate_all(doc: &Doc, ds: &Dataset<f64>) -> Result<TrainingMetrics, CliError> {
    let truth = ds.y.as_slice().expect("contiguous");
    let mlp = mlp_predict(&doc.mlp, &doc.mlm.scaler, ds.x.view())
        .map_err(|e| CliError::Train(e.into()))?;
    let cell = mlm_predict(&doc.cell_mlm, ds.x.view(), PredictMode::Soft)?;
    let epic = mlm_predict(&doc.mlm, ds.x.view(), PredictMode::Soft)?;
    let of = |p: &[f64]| Evaluation::of(p, truth, ds.task);
    Ok(TrainingMetrics {
        mlp: of(mlp.as_slice().expect("contiguous")),
        mlm_cell: of(cell.as_slice().expect("contiguous")),
        mlm_epic: of(epic.as_slice().expect("contiguous")),
    })
}

#[derive(Serialize)]
struct TrainReport<'a> {
    k_per_layer: &'a [usize],
    possible_cells: usize,
    cells: usize,
    j_requested: usize,
    epics: usize,
    epic_sizes: Vec<usize>,
    epic_cells: Vec<&'a [usize]>,
    cell_sizes: &'a [usize],
    train: &'a TrainingMetrics,
}

pub fn train(cfg: &PipelineConfig) -> Result<(), CliError> {
    let (train, _) = load_split(cfg, cfg.seed, None)?;
    let params = PipelineParams::from_config(cfg);
    let fit = fit_pipeline(&train, &params)?;
    let mut doc = ModelDocument::new(fit, train.schema()?, params);
    let metrics = evaluate_all(&doc, &train)?;
    doc.metrics = Some(metrics);
    let dir = out_dir(cfg)?;
    doc.save(dir.join("model.json"))?;

    let metrics = doc.metrics.as_ref().expect("just set");
    let sizes: Vec<usize> = doc.mlm.epics.iter().map(|e| e.size).collect();
    let rep = TrainReport {
        k_per_layer: &doc.layers.k_per_layer,
        possible_cells: doc.cells.n_possible,
        cells: doc.cells.n_cells,
        j_requested: doc.j_requested,
        epics: doc.mlm.n_epics(),
        epic_sizes: sizes.clone(),
        epic_cells: doc
            .mlm
            .epics
            .iter()
            .map(|e| e.member_cells.as_slice())
            .collect(),
        cell_sizes: &doc.cells.sizes,
        train: metrics,
    };
    report::write_json(&dir.join("train_report.json"), &rep)?;
    let labels: Vec<String> = (0..sizes.len()).map(|j| format!("EPIC {j}")).collect();
    let values: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    report::write_text(
        &dir.join("epic_sizes.svg"),
        &report::bar_svg(&labels, &values, "EPIC sizes"),
    )?;
    let rows =
        report::model_coefficient_rows(&doc.mlm, &train.feature_names, cfg.interpret.confidence);
    report::write_csv(&dir.join("coefficients.csv"), &rows)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&rep).expect("report serializes")
    );
    Ok(())
}

pub fn cv_k(
    cfg: &PipelineConfig,
    grid: Option<Vec<usize>>,
    folds: Option<usize>,
) -> Result<(), CliError> {
    let grid = grid.unwrap_or_else(|| cfg.cv.grid.clone());
    let folds = folds.unwrap_or(cfg.cv.folds);
    let (train, _) = load_split(cfg, cfg.seed, None)?;
    let res = cross_validate_k(&train, &PipelineParams::from_config(cfg), &grid, folds)?;
    let dir = out_dir(cfg)?;
    report::write_json(&dir.join("cv_k.json"), &res)?;
    #[derive(Serialize)]
    struct Row {
        k: usize,
        mean: f64,
    }
    let rows: Vec<Row> = res
        .rows
        .iter()
        .map(|r| Row {
            k: r.k,
            mean: r.mean,
        })
        .collect();
    report::write_csv(&dir.join("cv_k.csv"), &rows)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&res).expect("report serializes")
    );
    Ok(())
}

pub fn predict(
    cfg: &PipelineConfig,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    mode: Mode,
    posteriors: bool,
) -> Result<(), CliError> {
    let doc = Doc::load(model_path(cfg, model))?;
    let input = input
        .or_else(|| cfg.data.predict.clone())
        .ok_or_else(|| CliError::Usage("no input file: pass --input or set data.predict".into()))?;
    let x = doc.schema.encode::<f64>(&Table::read(&input)?)?;
    let mode = match mode {
        Mode::Soft => PredictMode::Soft,
        Mode::Hard => PredictMode::Hard,
    };
    let pred = mlm_predict(&doc.mlm, x.view(), mode)?;
    let xs = doc.mlm.scaler.transform(&x);
    let gamma = doc.mlm.posteriors_batch_standardized(xs.view())?;
    let classify = doc.task.is_classification();

    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let mut header = vec!["row".to_string(), "prediction".to_string()];
    if classify {
        header.push("label".into());
    }
    header.push("epic".into());
    if posteriors {
        header.extend((0..doc.mlm.n_epics()).map(|j| format!("gamma_{j}")));
    }
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (i, &p) in pred.iter().enumerate() {
        let g = gamma.row(i);
        let epic = mlm_core::scalar::argmax(g.as_slice().expect("contiguous"));
        let mut rec = vec![i.to_string(), p.to_string()];
        if classify {
            rec.push(u8::from(p >= 0.5).to_string());
        }
        rec.push(epic.to_string());
        if posteriors {
            rec.extend(g.iter().map(|v| v.to_string()));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    train: TrainingMetrics,
    test: TrainingMetrics,
}

pub fn evaluate(
    cfg: &PipelineConfig,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
) -> Result<(), CliError> {
    let doc = Doc::load(model_path(cfg, model))?;
    let (train, test) = load_split(cfg, doc.params.seed, input.as_deref())?;
    check_training_rows(&doc, &train)?;
    let rep = EvaluationReport {
        train: evaluate_all(&doc, &train)?,
        test: evaluate_all(&doc, &test)?,
    };
    report::write_json(&out_dir(cfg)?.join("evaluation.json"), &rep)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&rep).expect("report serializes")
    );
    Ok(())
}

fn check_training_rows(doc: &Doc, train: &Dataset<f64>) -> Result<(), CliError> {
    let schema = train.schema()?;
    if schema != doc.schema || train.n_samples() != doc.mlm.train_epic_labels.len() {
        return Err(CliError::Usage(
            "training data does not match the model; use the config and seed it was trained with"
                .into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct LdsEntry {
    #[serde(flatten)]
    result: ExplainableDims,
    dim_names: Vec<String>,
    /// Only one EPIC exists, so every point belongs to it.
    trivial: bool,
}

#[derive(Serialize)]
struct PrEntry {
    epic: usize,
    epic_size: usize,
    conditions: Vec<ExplainableCondition<f64>>,
    text: Vec<String>,
}

pub fn explain(
    cfg: &PipelineConfig,
    model: Option<PathBuf>,
    method: Method,
    epic: &str,
) -> Result<(), CliError> {
    let doc = Doc::load(model_path(cfg, model))?;
    let n_epics = doc.mlm.n_epics();
    let epics: Vec<usize> = if epic == "all" {
        (0..n_epics).collect()
    } else {
        let j: usize = epic
            .parse()
            .map_err(|_| CliError::Usage(format!("--epic expects an id or `all`, got `{epic}`")))?;
        if j >= n_epics {
            return Err(
                mlm_core::interpret::InterpretError::UnknownEpic { epic: j, n_epics }.into(),
            );
        }
        vec![j]
    };
    let (train, _) = load_split(cfg, doc.params.seed, None)?;
    check_training_rows(&doc, &train)?;
    let xs = doc.mlm.scaler.transform(&train.x);
    let labels = &doc.mlm.train_epic_labels;
    let names = &train.feature_names;
    let dir = out_dir(cfg)?.join("explain");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let rows: Vec<CoefficientRow> =
        report::model_coefficient_rows(&doc.mlm, names, cfg.interpret.confidence)
            .into_iter()
            .filter(|r| epics.contains(&r.epic))
            .collect();
    report::write_csv(&dir.join("coefficients.csv"), &rows)?;

    if matches!(method, Method::Lds | Method::Both) {
        let mut out = Vec::new();
        for &j in &epics {
            let result = explainable_dimensions(&doc.mlm, xs.view(), labels, j, cfg.interpret.xi)?;
            for &d in &result.dims {
                let curve = report::density_curve(&doc.mlm, xs.view(), d, &names[d], 200)?;
                let stem = format!("lds_epic{j}_{}", file_safe(&names[d]));
                report::write_csv(&dir.join(format!("{stem}.csv")), &curve)?;
                let title = format!("EPIC {j}: {}", names[d]);
                report::write_text(
                    &dir.join(format!("{stem}.svg")),
                    &report::density_svg(&curve, &title),
                )?;
            }
            if result.dims.len() >= 2 {
                let dims = [result.dims[0], result.dims[1]];
                let surf = report::density_surface(&doc.mlm, xs.view(), j, dims, 40)?;
                let stem = format!("lds_epic{j}_2d");
                report::write_csv(&dir.join(format!("{stem}.csv")), &surf)?;
                let title = format!("EPIC {j}: {} vs {}", names[dims[0]], names[dims[1]]);
                report::write_text(
                    &dir.join(format!("{stem}.svg")),
                    &report::surface_svg(&surf, 40, &title),
                )?;
            }
            let dim_names = result.dims.iter().map(|&d| names[d].clone()).collect();
            out.push(LdsEntry {
                result,
                dim_names,
                trivial: n_epics == 1,
            });
        }
        report::write_json(&dir.join("lds.json"), &out)?;
        for e in &out {
            println!(
                "LDS EPIC {}: dims {:?} rate {:.4} {}",
                e.result.epic,
                e.dim_names,
                e.result.rate,
                if e.result.found { "found" } else { "not found" }
            );
        }
    }

    if matches!(method, Method::Pr | Method::Both) {
        let view = FeatureView {
            names,
            kinds: &train.column_kinds,
            scaler: &doc.mlm.scaler,
        };
        let mut out = Vec::new();
        let mut table = String::new();
        for &j in &epics {
            let conditions = explain_epic_pr(
                &doc.mlm,
                xs.view(),
                labels,
                j,
                cfg.interpret.psi,
                cfg.interpret.eta,
                &view,
            )?;
            let size = doc.mlm.epics[j].size;
            table.push_str(&report::condition_table(j, size, &conditions));
            let text = conditions.iter().map(|c| c.to_string()).collect();
            out.push(PrEntry {
                epic: j,
                epic_size: size,
                conditions,
                text,
            });
        }
        report::write_json(&dir.join("pr.json"), &out)?;
        report::write_text(&dir.join("pr.txt"), &table)?;
        print!("{table}");
    }
    Ok(())
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
