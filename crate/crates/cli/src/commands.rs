use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use grridge::io::{
    read_codata_tsv, read_design_csv, read_response_csv, write_codata_tsv, write_design_csv, write_response_csv,
    write_text, CoDataColumn, CoDataTable,
};
use grridge::{
    fit_pipeline, nested_cv, select_posthoc, simulate_scenario, DesignMatrix, EbMethod, FoldConfig, GRridgeModel,
    GRridgeOptions, MetricsReport, Partition, PipelineConfig, Response, ResponseKind, SelectionConfig, SimScenario,
};

use crate::config::{Resolver, RunConfig};
use crate::partspec::parse_specs;
use crate::{DataArgs, EvalArgs, FitArgs, PipelineArgs, PredictArgs, SelectArgs, SimulateArgs};

/// A fold count or leave-one-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldSpec {
    K(usize),
    Loo,
}

impl FoldSpec {
    fn k(self) -> Option<usize> {
        match self {
            FoldSpec::K(k) => Some(k),
            FoldSpec::Loo => None,
        }
    }
}

impl FromStr for FoldSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "loo" | "loocv" => Ok(FoldSpec::Loo),
            t => match t.parse::<usize>() {
                Ok(k) if k >= 2 => Ok(FoldSpec::K(k)),
                _ => Err(format!("expected a fold count >= 2 or 'loo', found '{t}'")),
            },
        }
    }
}

impl fmt::Display for FoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldSpec::K(k) => write!(f, "{k}"),
            FoldSpec::Loo => f.write_str("loo"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Family(ResponseKind);

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "binary" | "binomial" | "logistic" => Ok(Family(ResponseKind::Binary)),
            "continuous" | "gaussian" | "linear" => Ok(Family(ResponseKind::Continuous)),
            other => Err(format!("unknown family '{other}' (expected binary or continuous)")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            ResponseKind::Binary => "binary",
            ResponseKind::Continuous => "continuous",
        })
    }
}

struct Loaded {
    x: DesignMatrix,
    y: Response,
}

fn load_data(r: &mut Resolver, a: &DataArgs) -> Result<Loaded> {
    let x_path: String = r.required("x", a.x.clone())?;
    let y_path: String = r.required("y", a.y.clone())?;
    let family: Family = r.get(
        "family",
        a.family.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?,
        Family(ResponseKind::Binary),
    )?;
    let x = read_design_csv(Path::new(&x_path))?;
    let y = read_response_csv(Path::new(&y_path), family.0, x.sample_ids())?;
    Ok(Loaded { x, y })
}

fn load_partitions(r: &mut Resolver, a: &PipelineArgs, x: &DesignMatrix) -> Result<Vec<Partition>> {
    let codata_path: String = r.required("codata", a.codata.clone())?;
    let spec_text: String = r.required("partitions", a.partitions.clone())?;
    let specs = parse_specs(&spec_text)?;
    let table = read_codata_tsv(Path::new(&codata_path))?
        .align(x.variable_ids())
        .with_context(|| format!("matching {codata_path} to the design variables"))?;
    specs.iter().map(|s| s.build(&table).with_context(|| format!("building partition '{}'", s.id()))).collect()
}

fn pipeline_config(r: &mut Resolver, a: &PipelineArgs, seed: u64) -> Result<PipelineConfig> {
    let lambda = r.optional("lambda", a.lambda)?;
    let method_text: String = r.get("method", a.method.clone(), EbMethod::default().to_string())?;
    let method: EbMethod = method_text.parse()?;
    let max_outer_iters = r.get("max_iters", a.max_iters, 10)?;
    let folds: FoldSpec =
        r.get("folds", a.folds.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?, FoldSpec::K(10))?;
    let stratify = r.get("stratify", a.stratify, true)?;
    let cvl_tolerance = r.get("cvl_tolerance", a.cvl_tolerance, 0.0)?;
    let p_max = r.optional("p_max", a.p_max)?;
    let q_marg = r.get("q_marg", a.q_marg, SelectionConfig::default().q_marg)?;
    let selection = p_max.map(|p_max| SelectionConfig { p_max, q_marg, schedule: None });
    let options = GRridgeOptions {
        method,
        max_outer_iters,
        folds: FoldConfig { k: folds.k(), seed, stratify },
        cvl_tolerance,
        selection,
        ..GRridgeOptions::default()
    };
    options.validate()?;
    Ok(PipelineConfig { lambda, options, ..PipelineConfig::default() })
}

fn out_dir(r: &mut Resolver, out: &Option<String>) -> Result<PathBuf> {
    let dir: String = r.required("out", out.clone())?;
    let dir = PathBuf::from(dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    write_text(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write(dir, "config.txt", &cfg.render())
}

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `iteration,partition,cvl,accepted`; the initial fit has an empty partition.
pub fn cvl_trace_csv(model: &GRridgeModel) -> String {
    let mut s = String::from("iteration,partition,cvl,accepted\n");
    for e in &model.cvl_trace {
        s.push_str(&format!(
            "{},{},{},{}\n",
            e.iteration,
            e.partition.as_deref().unwrap_or(""),
            opt_num(e.cvl),
            e.accepted
        ));
    }
    s
}

/// One row per group of every partition: retained multiplier (product of the
/// accepted steps) and the group variance behind the last accepted step.
pub fn multiplier_table_csv(model: &GRridgeModel) -> String {
    let mut s = String::from("partition,group,size,tau2,multiplier,accepted_steps\n");
    for h in &model.partitions {
        let tau2 = h.retained_tau2();
        for (g, label) in h.partition.labels().iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                h.partition.id(),
                label,
                h.partition.sizes()[g],
                opt_num(tau2.map(|t| t[g])),
                num(h.group_multipliers[g]),
                h.steps.len()
            ));
        }
    }
    s
}

fn selection_outputs(dir: &Path, model: &GRridgeModel) -> Result<()> {
    let Some(sel) = &model.selection else { return Ok(()) };
    let mut curve = String::from("size,cvl\n");
    for pt in &sel.curve {
        curve.push_str(&format!("{},{}\n", pt.size, opt_num(pt.cvl)));
    }
    write(dir, "selection_curve.csv", &curve)?;
    let mut chosen = String::from("variable_id,coefficient\n");
    for (id, b) in sel.variable_ids.iter().zip(sel.fit.coefficients.iter()) {
        chosen.push_str(&format!("{id},{}\n", num(*b)));
    }
    write(dir, "selected.csv", &chosen)
}

fn fit_report(model: &GRridgeModel, partitions: &[Partition]) -> String {
    let initial = model.cvl_trace.first().and_then(|e| e.cvl);
    let mut s = format!(
        "samples={}\nvariables={}\nlambda={}\nmethod={}\ninitial_cvl={}\nretained_cvl={}\n",
        model.folds.n_samples(),
        model.n_vars(),
        model.lambda,
        model.method,
        opt_num(initial),
        model.retained_cvl()
    );
    for (h, p) in model.partitions.iter().zip(partitions) {
        s.push_str(&format!(
            "partition {}: groups={} accepted_steps={} active={} fallbacks={}\n",
            p.id(),
            p.n_groups(),
            h.steps.len(),
            h.active,
            h.fallbacks
        ));
    }
    if let Some(sel) = &model.selection {
        s.push_str(&format!("selected={} selection_cvl={}\n", sel.indices.len(), sel.cvl));
    }
    s
}

pub fn fit(a: FitArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new))?;
    let dir = out_dir(&mut r, &a.common.out)?;
    let seed = r.get("seed", a.common.seed, 0)?;
    let data = load_data(&mut r, &a.data)?;
    let partitions = load_partitions(&mut r, &a.pipeline, &data.x)?;
    let cfg = pipeline_config(&mut r, &a.pipeline, seed)?;
    let run = r.finish("fit")?;

    let model = fit_pipeline(&data.x, &data.y, &partitions, &cfg)?;
    write_config(&dir, &run)?;
    write(&dir, "model.json", &model.to_json()?)?;
    write(&dir, "cvl_trace.csv", &cvl_trace_csv(&model))?;
    write(&dir, "multipliers.csv", &multiplier_table_csv(&model))?;
    write(&dir, "report.txt", &fit_report(&model, &partitions))?;
    selection_outputs(&dir, &model)
}

fn metrics_row(name: &str, folds: usize, m: &MetricsReport) -> String {
    format!("{name},{folds},{},{}\n", m.auc, m.brier)
}

fn write_roc(dir: &Path, name: &str, m: &MetricsReport) -> Result<()> {
    let mut buf = Vec::new();
    grridge::eval::write_roc_csv(&mut buf, &m.roc_points)?;
    write(dir, name, &String::from_utf8(buf)?)
}

fn predictions_csv(ids: &[String], columns: &[(&str, &[f64])]) -> String {
    let mut s = String::from("sample_id");
    for (name, _) in columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for (_, v) in columns {
            s.push(',');
            s.push_str(&num(v[i]));
        }
        s.push('\n');
    }
    s
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new))?;
    let dir = out_dir(&mut r, &a.common.out)?;
    let seed = r.get("seed", a.common.seed, 0)?;
    let data = load_data(&mut r, &a.data)?;
    let model_path = r.optional("model", a.model.clone())?;
    let ids = data.x.sample_ids().to_vec();

    if let Some(path) = model_path {
        let run = r.finish("eval")?;
        let model = load_model(&path)?;
        if model.kind != data.y.kind() {
            bail!("model was fitted for a different response family");
        }
        let scores: Vec<f64> = model.predict(&data.x, false)?.iter().copied().collect();
        write_config(&dir, &run)?;
        write(&dir, "predictions.csv", &predictions_csv(&ids, &[("score", &scores)]))?;
        return match data.y.labels() {
            Some(labels) => {
                let m = MetricsReport::from_predictions(&scores, &labels, None)?;
                write(&dir, "metrics.csv", &format!("model,folds,auc,brier\n{}", metrics_row("model", 0, &m)))?;
                write_roc(&dir, "roc_model.csv", &m)
            }
            None => {
                let mse = mse(&scores, data.y.values().as_slice());
                write(&dir, "metrics.csv", &format!("model,folds,mse\nmodel,0,{mse}\n"))
            }
        };
    }

    let partitions = load_partitions(&mut r, &a.pipeline, &data.x)?;
    let cfg = pipeline_config(&mut r, &a.pipeline, seed)?;
    let cv: FoldSpec =
        r.get("cv", a.cv.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?, FoldSpec::K(10))?;
    let run = r.finish("eval")?;

    let ev = nested_cv(&data.x, &data.y, &partitions, &cfg, cv.k(), seed)?;
    let k = ev.outer.k();
    write_config(&dir, &run)?;
    write(
        &dir,
        "predictions.csv",
        &predictions_csv(&ids, &[("grridge", &ev.grridge_scores), ("ridge", &ev.ridge_scores)]),
    )?;
    let mut lambdas = String::from("fold,lambda\n");
    for (f, l) in ev.lambdas.iter().enumerate() {
        lambdas.push_str(&format!("{},{l}\n", f + 1));
    }
    write(&dir, "fold_lambdas.csv", &lambdas)?;
    if data.y.kind() == ResponseKind::Binary {
        let (gr, ridge) = ev.metrics(&data.y)?;
        write(
            &dir,
            "metrics.csv",
            &format!("model,folds,auc,brier\n{}{}", metrics_row("grridge", k, &gr), metrics_row("ridge", k, &ridge)),
        )?;
        write_roc(&dir, "roc_grridge.csv", &gr)?;
        write_roc(&dir, "roc_ridge.csv", &ridge)
    } else {
        let (gr, ridge) = ev.mse(&data.y);
        write(&dir, "metrics.csv", &format!("model,folds,mse\ngrridge,{k},{gr}\nridge,{k},{ridge}\n"))
    }
}

fn mse(scores: &[f64], y: &[f64]) -> f64 {
    scores.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

fn load_model(path: &str) -> Result<GRridgeModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    GRridgeModel::from_json(&text).with_context(|| format!("loading model {path}"))
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new))?;
    let dir = out_dir(&mut r, &a.common.out)?;
    let model_path: String = r.required("model", a.model.clone())?;
    let x_path: String = r.required("x", a.x.clone())?;
    let use_selection = r.get("use_selection", a.use_selection, false)?;
    if a.common.seed.is_some() {
        r.get("seed", a.common.seed, 0)?;
    }
    let run = r.finish("predict")?;

    let model = load_model(&model_path)?;
    let x = read_design_csv(Path::new(&x_path))?;
    let scores: Vec<f64> = model.predict(&x, use_selection)?.iter().copied().collect();
    write_config(&dir, &run)?;
    write(&dir, "predictions.csv", &predictions_csv(x.sample_ids(), &[("score", &scores)]))
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new))?;
    let dir = out_dir(&mut r, &a.common.out)?;
    let d = SimScenario::default();
    let sc = SimScenario {
        groups: r.get("groups", a.groups, d.groups)?,
        group_size: r.get("group_size", a.group_size, d.group_size)?,
        n: r.get("n", a.n, d.n)?,
        n_test: r.get("n_test", a.n_test, d.n_test)?,
        rho: r.get("rho", a.rho, d.rho)?,
        signal_skew: r.get("signal_skew", a.signal_skew, d.signal_skew)?,
        sparsity: r.get("sparsity", a.sparsity, d.sparsity)?,
        signal_var: r.get("signal_var", a.signal_var, d.signal_var)?,
        seed: r.get("seed", a.common.seed, d.seed)?,
    };
    let run = r.finish("simulate")?;
    let data = simulate_scenario(&sc)?;

    write_config(&dir, &run)?;
    write_design_csv(&dir.join("train_x.csv"), &data.train_x)?;
    write_response_csv(&dir.join("train_y.csv"), data.train_x.sample_ids(), &data.train_y)?;
    write_design_csv(&dir.join("test_x.csv"), &data.test_x)?;
    write_response_csv(&dir.join("test_y.csv"), data.test_x.sample_ids(), &data.test_y)?;
    let p = sc.n_vars();
    let labels: Vec<String> = data.partition.group_of().iter().map(|&g| data.partition.labels()[g].clone()).collect();
    let table = CoDataTable {
        variable_ids: data.train_x.variable_ids().to_vec(),
        columns: vec![
            ("group".into(), CoDataColumn::Labels(labels)),
            ("position".into(), CoDataColumn::Numeric((1..=p).map(|k| k as f64).collect())),
        ],
    };
    write_codata_tsv(&dir.join("codata.tsv"), &table)?;
    write(&dir, "truth.json", &serde_json::to_string_pretty(&data.truth)?)
}

pub fn select(a: SelectArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new))?;
    let dir = out_dir(&mut r, &a.common.out)?;
    let model_path: String = r.required("model", a.model.clone())?;
    let data = load_data(&mut r, &a.data)?;
    let d = SelectionConfig::default();
    let cfg = SelectionConfig {
        p_max: r.get("p_max", a.p_max, d.p_max)?,
        q_marg: r.get("q_marg", a.q_marg, d.q_marg)?,
        schedule: None,
    };
    if a.common.seed.is_some() {
        r.get("seed", a.common.seed, 0)?;
    }
    let run = r.finish("select")?;

    let mut model = load_model(&model_path)?;
    if model.kind != data.y.kind() {
        bail!("model was fitted for a different response family");
    }
    // Columns in model order, joined by id.
    let cols: Vec<usize> = model
        .variable_ids
        .iter()
        .map(|id| {
            data.x
                .variable_ids()
                .iter()
                .position(|v| v == id)
                .ok_or_else(|| anyhow!("model variable '{id}' missing from the data"))
        })
        .collect::<Result<_>>()?;
    let x = data.x.select_columns(&cols)?;
    if model.folds.n_samples() != data.y.len() {
        bail!("model folds cover {} samples but the data has {}", model.folds.n_samples(), data.y.len());
    }
    let folds = model.folds.clone();
    let sel = select_posthoc(&model, &x, &data.y, &folds, &cfg)?;
    model.selection = Some(sel);
    write_config(&dir, &run)?;
    write(&dir, "model.json", &model.to_json()?)?;
    selection_outputs(&dir, &model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_spec_parsing() {
        assert_eq!("loo".parse::<FoldSpec>().unwrap(), FoldSpec::Loo);
        assert_eq!("5".parse::<FoldSpec>().unwrap(), FoldSpec::K(5));
        assert!("1".parse::<FoldSpec>().is_err());
        assert!("x".parse::<FoldSpec>().is_err());
        assert_eq!(FoldSpec::K(7).to_string(), "7");
    }

    #[test]
    fn family_parsing() {
        assert_eq!("binary".parse::<Family>().unwrap().0, ResponseKind::Binary);
        assert_eq!("gaussian".parse::<Family>().unwrap().to_string(), "continuous");
        assert!("poisson".parse::<Family>().is_err());
    }
}
