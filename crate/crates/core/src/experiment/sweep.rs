use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{MethodCell, MiBucket, SweepConfig};
use super::methods::{fit_method, xstar_bayes_accuracy, zero_one_risk, Fitted};
use crate::data::LabeledExample;
use crate::dgp::{
    build_default_gaussian_dgp, sample_dataset, GaussianDgp, InterventionPolicy, TableSampler,
};
use crate::error::{Error, Result};
use crate::metrics::{
    aug_bound, expected_corruption_tv, mutual_information_in, renyi_bound, BoundReport, Classifier,
    JointTable, LambdaInputs, McEstimate,
};
use crate::rng::{derive_seed, seeded, SeedPart};
use crate::train::{reweighting_weights, LinearModel, TrainingSet};

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub n: usize,
    pub bucket: usize,
    pub rep: usize,
}

/// One accuracy measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub param: Option<f64>,
    pub mi_lo: f64,
    pub mi_hi: f64,
    pub mi_achieved: f64,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub ood_acc: f64,
    pub ood_se: f64,
    pub id_acc: f64,
    pub bayes_acc: f64,
}

/// A failed cell or method; the sweep carries on without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub stage: String,
    pub method: String,
    pub n: usize,
    pub mi_lo: f64,
    pub mi_hi: f64,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<CellError>,
}

/// Sampled ingredients of a cell shared by all of its methods.
#[derive(Debug, Clone)]
pub struct CellData {
    pub dgp: GaussianDgp,
    pub train: Vec<LabeledExample>,
    pub mi_achieved: f64,
    pub ood: Vec<LabeledExample>,
    pub id: Vec<LabeledExample>,
}

fn seed_for(cfg: &SweepConfig, tag: &str, parts: &[u64]) -> u64 {
    let mut all = vec![SeedPart::Tag(tag)];
    all.extend(parts.iter().map(|&p| SeedPart::Index(p)));
    derive_seed(cfg.base_seed, &all)
}

/// Seed of one method in one cell; also the training seed.
pub fn method_seed(cfg: &SweepConfig, key: CellKey, method: &MethodCell) -> u64 {
    let label = method.label();
    derive_seed(
        cfg.base_seed,
        &[
            SeedPart::Tag("method"),
            SeedPart::Tag(&label),
            key.bucket.into(),
            key.rep.into(),
            key.n.into(),
        ],
    )
}

/// The DGP and attribute table depend on (bucket, rep); the training sample
/// also on N, so sample-size curves share their population per repetition.
pub fn prepare_cell(cfg: &SweepConfig, key: CellKey) -> Result<CellData> {
    let bucket = cfg.mi_buckets[key.bucket];
    let (b, r) = (key.bucket as u64, key.rep as u64);
    let base = build_default_gaussian_dgp(
        seed_for(cfg, "dgp", &[b, r]),
        cfg.class_mean_norm,
        cfg.attr_mean_norm,
    )?;
    let mut rng = seeded(seed_for(cfg, "table", &[b, r]));
    let table = TableSampler::with_unit(cfg.mi_unit).sample(
        &base.p_y,
        base.num_attributes,
        bucket.lo,
        bucket.hi,
        &mut rng,
    )?;
    let dgp = base.with_table(table)?;
    let jt = JointTable::from_conditionals(&dgp.p_y, &dgp.p_c_given_y)?;
    let mi_achieved = mutual_information_in(&jt, cfg.mi_unit);
    let mut rng = seeded(seed_for(cfg, "train", &[b, r, key.n as u64]));
    let train = sample_dataset(&dgp, key.n, &InterventionPolicy::KeepTraining, &mut rng)?;
    let mut rng = seeded(seed_for(cfg, "eval", &[b, r]));
    let ood = sample_dataset(&dgp, cfg.n_mc, &InterventionPolicy::UniformC, &mut rng)?;
    let id = sample_dataset(&dgp, cfg.n_mc, &InterventionPolicy::KeepTraining, &mut rng)?;
    Ok(CellData {
        dgp,
        train,
        mi_achieved,
        ood,
        id,
    })
}

pub fn accuracy_on(model: &LinearModel, data: &[LabeledExample]) -> McEstimate {
    McEstimate::from_counts(
        data.iter().filter(|e| model.predict(&e.x) == e.y).count(),
        data.len(),
    )
}

fn cell_keys(cfg: &SweepConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &n in &cfg.n_list {
        for bucket in 0..cfg.mi_buckets.len() {
            for rep in 0..cfg.repetitions {
                keys.push(CellKey { n, bucket, rep });
            }
        }
    }
    keys
}

fn cell_error(
    cfg: &SweepConfig,
    key: CellKey,
    stage: &str,
    method: &str,
    err: &Error,
) -> CellError {
    let b: MiBucket = cfg.mi_buckets[key.bucket];
    CellError {
        stage: stage.to_string(),
        method: method.to_string(),
        n: key.n,
        mi_lo: b.lo,
        mi_hi: b.hi,
        rep: key.rep,
        message: err.to_string(),
    }
}

/// Runs `work` on every cell inside a pool capped at `cfg.parallelism`;
/// results come back in cell order whatever the completion order.
fn run_cells<T: Send>(
    cfg: &SweepConfig,
    work: impl Fn(CellKey) -> (Vec<T>, Vec<CellError>) + Sync + Send,
) -> Result<(Vec<T>, Vec<CellError>)> {
    let keys = cell_keys(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(p) = cfg.parallelism {
        builder = builder.num_threads(p);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let parts: Vec<(Vec<T>, Vec<CellError>)> =
        pool.install(|| keys.par_iter().map(|&k| work(k)).collect());
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (r, e) in parts {
        rows.extend(r);
        errors.extend(e);
    }
    Ok((rows, errors))
}

fn sweep_cell(cfg: &SweepConfig, key: CellKey) -> (Vec<SweepRow>, Vec<CellError>) {
    let data = match prepare_cell(cfg, key) {
        Ok(d) => d,
        Err(e) => return (Vec::new(), vec![cell_error(cfg, key, "prepare", "*", &e)]),
    };
    let bucket = cfg.mi_buckets[key.bucket];
    let bayes_acc = xstar_bayes_accuracy(&data.dgp).unwrap_or(f64::NAN);
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for method in cfg.method_cells() {
        let seed = method_seed(cfg, key, &method);
        match fit_method(method, &data.dgp, &data.train, cfg, seed) {
            Ok(fitted) => {
                let ood = accuracy_on(&fitted.model, &data.ood);
                let id = accuracy_on(&fitted.model, &data.id);
                rows.push(SweepRow {
                    method: method.name().to_string(),
                    lambda: method.lambda(),
                    param: method.param(),
                    mi_lo: bucket.lo,
                    mi_hi: bucket.hi,
                    mi_achieved: data.mi_achieved,
                    n: key.n,
                    rep: key.rep,
                    seed,
                    ood_acc: ood.accuracy,
                    ood_se: ood.std_error,
                    id_acc: id.accuracy,
                    bayes_acc,
                });
            }
            Err(e) => errors.push(cell_error(cfg, key, "fit", &method.label(), &e)),
        }
    }
    (rows, errors)
}

/// Accuracy over the correlation grid: every (N, bucket, repetition) cell
/// trains every configured method on one shared training sample.
pub fn run_corr_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let (rows, errors) = run_cells(cfg, |k| sweep_cell(cfg, k))?;
    Ok(SweepOutcome { rows, errors })
}

/// Sample-size curves; the same cells as [`run_corr_sweep`], ordered by N.
pub fn run_n_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    run_corr_sweep(cfg)
}

/// Mean accuracy of one method at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub method: String,
    pub lambda: Option<f64>,
    pub param: Option<f64>,
    pub n: usize,
    pub mi_lo: f64,
    pub mi_hi: f64,
    pub reps: usize,
    pub mean_ood_acc: f64,
    pub se_ood_acc: f64,
    pub mean_id_acc: f64,
}

/// Means over repetitions, in first-appearance order of the rows.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut out: Vec<(SweepSummary, Vec<f64>)> = Vec::new();
    for r in rows {
        let same = |s: &SweepSummary| {
            s.method == r.method
                && s.lambda == r.lambda
                && s.param == r.param
                && s.n == r.n
                && s.mi_lo == r.mi_lo
        };
        match out.iter_mut().find(|(s, _)| same(s)) {
            Some((s, accs)) => {
                s.reps += 1;
                s.mean_id_acc += r.id_acc;
                accs.push(r.ood_acc);
            }
            None => out.push((
                SweepSummary {
                    method: r.method.clone(),
                    lambda: r.lambda,
                    param: r.param,
                    n: r.n,
                    mi_lo: r.mi_lo,
                    mi_hi: r.mi_hi,
                    reps: 1,
                    mean_ood_acc: 0.0,
                    se_ood_acc: 0.0,
                    mean_id_acc: r.id_acc,
                },
                vec![r.ood_acc],
            )),
        }
    }
    out.into_iter()
        .map(|(mut s, accs)| {
            let k = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / k;
            let var = if accs.len() > 1 {
                accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            s.mean_ood_acc = mean;
            s.se_ood_acc = (var / k).sqrt();
            s.mean_id_acc /= k;
            s
        })
        .collect()
}

/// One bound report for one method in one cell, next to the measured risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub mi_lo: f64,
    pub mi_hi: f64,
    pub mi_achieved: f64,
    pub n: usize,
    pub rep: usize,
    pub ood_risk: f64,
    pub ood_se: f64,
    pub report: BoundReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundsOutcome {
    pub rows: Vec<BoundRow>,
    pub errors: Vec<CellError>,
}

/// Weighted 0-1 training risk with plug-in reweighting weights.
pub fn weighted_zero_one_risk(model: &LinearModel, data: &[LabeledExample]) -> Result<f64> {
    let w = reweighting_weights(data)?;
    let s: f64 = data
        .iter()
        .zip(&w)
        .filter(|(e, _)| model.predict(&e.x) != e.y)
        .fold(0.0, |acc, (_, w)| acc + w);
    Ok(s / data.len() as f64)
}

/// Reweighting bound for any model on a labeled sample.
pub fn renyi_report(
    model: &LinearModel,
    data: &[LabeledExample],
    num_attributes: usize,
    delta: f64,
) -> Result<BoundReport> {
    let l = data.iter().map(|e| e.y + 1).max().unwrap_or(0).max(2);
    // unobserved attributes carry no mass; d_2 and d_inf live on the support
    let mut seen = vec![false; num_attributes.max(data.iter().map(|e| e.c + 1).max().unwrap_or(0))];
    data.iter().for_each(|e| seen[e.c] = true);
    let mut remap = vec![0; seen.len()];
    let mut next = 0;
    for (c, &s) in seen.iter().enumerate() {
        if s {
            remap[c] = next;
            next += 1;
        }
    }
    let support: Vec<LabeledExample> = data
        .iter()
        .map(|e| LabeledExample::new(Vec::new(), e.y, remap[e.c]))
        .collect();
    let jt = JointTable::from_examples(&support, l, next)?;
    renyi_bound(weighted_zero_one_risk(model, data)?, &jt, data.len(), delta)
}

/// Per-target divergence of the augmentation: for each c, the mean over
/// training examples of the TV between the estimated and the true
/// counterfactual distribution (zero where the original is kept).
pub fn augmentation_divergences(
    dgp: &GaussianDgp,
    train: &[LabeledExample],
    cell: MethodCell,
    cfg: &SweepConfig,
) -> Result<Vec<f64>> {
    let k = dgp.num_attributes;
    let lambda = match cell {
        MethodCell::AugCorrupt(l) => l,
        _ => return Ok(vec![0.0; k]),
    };
    let law = cfg.xi_mode.law(lambda);
    let mut tv = vec![vec![0.0; k]; k];
    for from in 0..k {
        for to in 0..k {
            if from != to {
                let norm = dgp
                    .attribute_shift(from, to)
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                tv[from][to] = expected_corruption_tv(norm, dgp.sigma_spu, law)?;
            }
        }
    }
    Ok((0..k)
        .map(|c| train.iter().map(|e| tv[e.c][c]).sum::<f64>() / train.len() as f64)
        .collect())
}

fn bounds_for(
    cfg: &SweepConfig,
    key: CellKey,
    data: &CellData,
    fitted: &Fitted,
    ood: McEstimate,
) -> Result<Vec<BoundRow>> {
    let bucket = cfg.mi_buckets[key.bucket];
    let row = |report: BoundReport| BoundRow {
        method: fitted.cell.name().to_string(),
        lambda: fitted.cell.lambda(),
        mi_lo: bucket.lo,
        mi_hi: bucket.hi,
        mi_achieved: data.mi_achieved,
        n: key.n,
        rep: key.rep,
        ood_risk: 1.0 - ood.accuracy,
        ood_se: ood.std_error,
        report,
    };
    // the bound holds for a fixed hypothesis, so the weighted risk of a fitted
    // model is taken on a fresh training-distribution sample of the same size
    let holdout = &data.id[..data.train.len().min(data.id.len())];
    let mut out = vec![row(renyi_report(
        &fitted.model,
        holdout,
        data.dgp.num_attributes,
        cfg.delta,
    )?)];
    if let Some(plan) = &fitted.plan {
        let set = TrainingSet::from_shift_plan(&data.dgp, &data.train, plan)?;
        let empirical = zero_one_risk(&fitted.model, &set);
        let divergences = augmentation_divergences(&data.dgp, &data.train, fitted.cell, cfg)?;
        // the x*-Bayes rule stands in for both population minimizers
        let bayes_risk = 1.0 - xstar_bayes_accuracy(&data.dgp)?;
        let perp = (1.0 - ood.accuracy).max(bayes_risk);
        let lambda = LambdaInputs {
            perp_risk_of_aug_minimizer: perp,
            min_perp_risk: bayes_risk,
            joint_aug_risk: bayes_risk,
            joint_perp_risk: bayes_risk,
        };
        out.push(row(aug_bound(
            empirical,
            &divergences,
            data.train.len(),
            cfg.delta,
            &lambda,
        )?));
    }
    Ok(out)
}

fn bounds_cell(cfg: &SweepConfig, key: CellKey) -> (Vec<BoundRow>, Vec<CellError>) {
    let data = match prepare_cell(cfg, key) {
        Ok(d) => d,
        Err(e) => return (Vec::new(), vec![cell_error(cfg, key, "prepare", "*", &e)]),
    };
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for method in cfg.method_cells() {
        let seed = method_seed(cfg, key, &method);
        let result = fit_method(method, &data.dgp, &data.train, cfg, seed).and_then(|fitted| {
            let ood = accuracy_on(&fitted.model, &data.ood);
            bounds_for(cfg, key, &data, &fitted, ood)
        });
        match result {
            Ok(r) => rows.extend(r),
            Err(e) => errors.push(cell_error(cfg, key, "bounds", &method.label(), &e)),
        }
    }
    (rows, errors)
}

/// Bound reports for every method in every cell; or, when `model_path` and
/// `data_path` are set, the reweighting bound of that model on that data.
pub fn run_bounds(cfg: &SweepConfig) -> Result<BoundsOutcome> {
    cfg.validate()?;
    if let Some(path) = &cfg.model_path {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.clone()));
        }
        let data_path = cfg
            .data_path
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("model_path needs data_path".into()))?;
        if !data_path.exists() {
            return Err(Error::MissingArtifact(data_path.clone()));
        }
        let model = LinearModel::load(path)?;
        let data = crate::data::read_dataset_file(data_path)?;
        let k = data.iter().map(|e| e.c + 1).max().unwrap_or(1);
        let report = renyi_report(&model, &data, k, cfg.delta)?;
        return Ok(BoundsOutcome {
            rows: vec![BoundRow {
                method: "artifact".into(),
                lambda: None,
                mi_lo: f64::NAN,
                mi_hi: f64::NAN,
                mi_achieved: f64::NAN,
                n: data.len(),
                rep: 0,
                ood_risk: f64::NAN,
                ood_se: f64::NAN,
                report,
            }],
            errors: Vec::new(),
        });
    }
    let (rows, errors) = run_cells(cfg, |k| bounds_cell(cfg, k))?;
    Ok(BoundsOutcome { rows, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::MethodSpec;

    fn tiny() -> SweepConfig {
        SweepConfig {
            methods: vec![MethodSpec::Erm],
            n_list: vec![80],
            repetitions: 1,
            n_mc: 500,
            train: crate::train::TrainConfig {
                iterations: 50,
                ..Default::default()
            },
            parallelism: Some(1),
            ..SweepConfig::default()
        }
    }

    #[test]
    fn one_cell_one_row() {
        let out = run_corr_sweep(&tiny()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.errors.is_empty());
        assert_eq!(out.rows, run_corr_sweep(&tiny()).unwrap().rows);
    }

    #[test]
    fn failures_are_collected_not_fatal() {
        let mut cfg = tiny();
        cfg.methods = vec![MethodSpec::Erm, MethodSpec::Irmv1 { gamma: 1e12 }];
        cfg.train.learning_rate = 1e3;
        let out = run_corr_sweep(&cfg).unwrap();
        assert_eq!(out.rows.len() + out.errors.len(), 2);
        assert!(!out.errors.is_empty());
    }

    #[test]
    fn exact_augmentation_has_zero_divergence() {
        let mut cfg = tiny();
        cfg.methods = vec![
            MethodSpec::AugOracle,
            MethodSpec::AugCorrupt { lambdas: vec![0.5] },
        ];
        let out = run_bounds(&cfg).unwrap();
        assert!(out.errors.is_empty(), "{:?}", out.errors);
        let aug: Vec<&BoundRow> = out
            .rows
            .iter()
            .filter(|r| r.report.kind == crate::metrics::BoundKind::Augmentation)
            .collect();
        assert_eq!(aug.len(), 2);
        assert_eq!(aug[0].report.divergence, 0.0);
        assert!(aug[1].report.divergence > 0.0);
        assert!(out.rows.iter().all(|r| r.report.check_consistency()));
    }

    #[test]
    fn missing_artifact() {
        let mut cfg = tiny();
        cfg.model_path = Some("/nonexistent/model.txt".into());
        assert!(matches!(run_bounds(&cfg), Err(Error::MissingArtifact(_))));
    }
}
