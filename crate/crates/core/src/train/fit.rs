use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::features::{DenseFeatures, Features, ShiftFeatures};
use super::penalties::{
    group_dro_state_update, irm_value_grad, logistic_loss, mmd_value_grad,
    reweighting_weights_from_labels, sigmoid, Bandwidth,
};
use super::LinearModel;
use crate::augment::{AugmentedExample, ShiftPlan};
use crate::data::LabeledExample;
use crate::dgp::GaussianDgp;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, SeedPart};

/// Rows to fit on: features plus binary label and attribute per row.
#[derive(Debug, Clone)]
pub struct TrainingSet<F: Features> {
    pub features: F,
    pub y: Vec<usize>,
    pub c: Vec<usize>,
}

impl<F: Features> TrainingSet<F> {
    pub fn new(features: F, y: Vec<usize>, c: Vec<usize>) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::InvalidParameter("empty training set".into()));
        }
        if y.len() != n || c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len().min(c.len()),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParameter(format!(
                "binary labels only, found class {bad}"
            )));
        }
        Ok(Self { features, y, c })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

impl TrainingSet<DenseFeatures> {
    pub fn from_examples(data: &[LabeledExample]) -> Result<Self> {
        Self::new(
            DenseFeatures::from_examples(data)?,
            data.iter().map(|e| e.y).collect(),
            data.iter().map(|e| e.c).collect(),
        )
    }

    /// Augmented records; the attribute of a record is its target.
    pub fn from_augmented(records: &[AugmentedExample]) -> Result<Self> {
        Self::new(
            DenseFeatures::from_rows(records.iter().map(|r| r.x.as_slice()))?,
            records.iter().map(|r| r.y).collect(),
            records.iter().map(|r| r.c_target).collect(),
        )
    }
}

impl TrainingSet<ShiftFeatures> {
    pub fn from_shift_plan(
        dgp: &GaussianDgp,
        data: &[LabeledExample],
        plan: &ShiftPlan,
    ) -> Result<Self> {
        let features = ShiftFeatures::new(dgp, data, plan)?;
        Self::new(
            features,
            plan.rows.iter().map(|r| data[r.source_idx].y).collect(),
            plan.rows.iter().map(|r| r.to).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    Erm,
    /// ERM over the N*K rows of an augmented set.
    Augmented,
    Reweighted,
    /// Reweighted risk plus `gamma` times the MMD between the logit
    /// distributions of attribute groups, each group capped at
    /// `max_per_group` rows (fixed subsample chosen by the seed).
    Mmd {
        gamma: f64,
        bandwidth: Bandwidth,
        unbiased: bool,
        max_per_group: usize,
    },
    Irmv1 {
        gamma: f64,
    },
    GroupDro {
        eta_q: f64,
    },
}

impl Objective {
    pub fn mmd(gamma: f64) -> Self {
        Objective::Mmd {
            gamma,
            bandwidth: Bandwidth::Median,
            unbiased: true,
            max_per_group: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Objective::Mmd {
                gamma,
                max_per_group,
                bandwidth,
                ..
            } => {
                gamma >= 0.0
                    && max_per_group >= 2
                    && !matches!(bandwidth, Bandwidth::Fixed(h) if !(h > 0.0))
            }
            Objective::Irmv1 { gamma } => gamma >= 0.0,
            Objective::GroupDro { eta_q } => eta_q > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("objective {self:?}")))
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Objective::Erm => "erm",
            Objective::Augmented => "augmented",
            Objective::Reweighted => "reweighted",
            Objective::Mmd { .. } => "mmd",
            Objective::Irmv1 { .. } => "irmv1",
            Objective::GroupDro { .. } => "group_dro",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_decay: f64,
    pub seed: u64,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 3000,
            weight_decay: 1e-4,
            seed: 0,
            tolerance: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0)
            || self.iterations == 0
            || !(self.weight_decay >= 0.0)
            || !(self.tolerance > 0.0)
        {
            return Err(Error::InvalidParameter(format!("train config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
    pub group_weights: Option<Vec<f64>>,
}

fn compact(ids: &[usize]) -> (Vec<usize>, usize) {
    let max = ids.iter().max().map_or(0, |m| m + 1);
    let mut map = vec![usize::MAX; max];
    let mut next = 0;
    for &i in ids {
        if map[i] == usize::MAX {
            map[i] = next;
            next += 1;
        }
    }
    // renumber in ascending id order
    let mut present: Vec<usize> = (0..max).filter(|&i| map[i] != usize::MAX).collect();
    present.sort_unstable();
    for (new, &old) in present.iter().enumerate() {
        map[old] = new;
    }
    (ids.iter().map(|&i| map[i]).collect(), next)
}

/// A training objective over standardized parameters `theta = (w, b)`:
/// the logit of row `r` is `sum_j w_j (x_rj - m_j) / s_j + b`.
pub struct Problem<'a, F: Features> {
    set: &'a TrainingSet<F>,
    objective: Objective,
    mean: Vec<f64>,
    scale: Vec<f64>,
    weight_decay: f64,
    row_weights: Option<Vec<f64>>,
    env: Vec<usize>,
    groups: Vec<usize>,
    n_groups: usize,
    mmd_rows: Vec<usize>,
}

impl<'a, F: Features> Problem<'a, F> {
    pub fn new(set: &'a TrainingSet<F>, objective: Objective, cfg: &TrainConfig) -> Result<Self> {
        objective.validate()?;
        let (mean, sd) = set.features.column_moments();
        let scale = sd
            .into_iter()
            .map(|s| if s > 1e-12 { s } else { 1.0 })
            .collect();
        Self::with_scaling(set, objective, cfg, mean, scale)
    }

    /// As [`Problem::new`] with explicit centring and scaling.
    pub fn with_scaling(
        set: &'a TrainingSet<F>,
        objective: Objective,
        cfg: &TrainConfig,
        mean: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<Self> {
        let d = set.features.dim();
        if mean.len() != d || scale.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: mean.len().min(scale.len()),
            });
        }
        let row_weights = match objective {
            Objective::Reweighted | Objective::Mmd { .. } => {
                Some(reweighting_weights_from_labels(&set.y, &set.c)?)
            }
            _ => None,
        };
        let (env, _) = compact(&set.c);
        let cells: Vec<usize> = set.y.iter().zip(&set.c).map(|(&y, &c)| c * 2 + y).collect();
        let (groups, n_groups) = compact(&cells);
        let mut mmd_rows = Vec::new();
        if let Objective::Mmd { max_per_group, .. } = objective {
            let n_env = env.iter().max().map_or(0, |m| m + 1);
            for e in 0..n_env {
                let members: Vec<usize> = (0..set.len()).filter(|&r| env[r] == e).collect();
                if members.len() <= max_per_group {
                    mmd_rows.extend(members);
                } else {
                    let mut rng = seeded(derive_seed(
                        cfg.seed,
                        &[SeedPart::Tag("mmd"), (e as u64).into()],
                    ));
                    let mut pick: Vec<usize> = sample(&mut rng, members.len(), max_per_group)
                        .into_iter()
                        .map(|i| members[i])
                        .collect();
                    pick.sort_unstable();
                    mmd_rows.extend(pick);
                }
            }
        }
        Ok(Self {
            set,
            objective,
            mean,
            scale,
            weight_decay: cfg.weight_decay,
            row_weights,
            env,
            groups,
            n_groups,
            mmd_rows,
        })
    }

    pub fn num_params(&self) -> usize {
        self.set.features.dim() + 1
    }

    pub fn num_groups(&self) -> usize {
        self.n_groups
    }

    /// Raw-space effective weights and bias for `theta`.
    pub fn to_model(&self, theta: &[f64]) -> LinearModel {
        let d = self.set.features.dim();
        let weights: Vec<f64> = theta[..d]
            .iter()
            .zip(&self.scale)
            .map(|(w, s)| w / s)
            .collect();
        let bias = theta[d]
            - weights
                .iter()
                .zip(&self.mean)
                .map(|(v, m)| v * m)
                .sum::<f64>();
        LinearModel { weights, bias }
    }

    pub fn logits(&self, theta: &[f64]) -> Vec<f64> {
        let model = self.to_model(theta);
        let mut f = vec![0.0; self.set.len()];
        self.set.features.matvec(&model.weights, &mut f);
        f.iter_mut().for_each(|v| *v += model.bias);
        f
    }

    /// Mean loss per (y, c) group.
    pub fn group_losses(&self, f: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.n_groups];
        let mut cnt = vec![0usize; self.n_groups];
        for ((&fr, &y), &g) in f.iter().zip(&self.set.y).zip(&self.groups) {
            sum[g] += logistic_loss(fr, y);
            cnt[g] += 1;
        }
        sum.iter().zip(&cnt).map(|(s, &n)| s / n as f64).collect()
    }

    /// Objective value (without weight decay) and its derivative per logit.
    fn loss_and_dlogits(&self, f: &[f64], q: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let n = f.len() as f64;
        let y = &self.set.y;
        let row_coef: Vec<f64> = match (&self.objective, q) {
            (Objective::GroupDro { .. }, Some(q)) => {
                let mut cnt = vec![0usize; self.n_groups];
                self.groups.iter().for_each(|&g| cnt[g] += 1);
                self.groups.iter().map(|&g| q[g] / cnt[g] as f64).collect()
            }
            (Objective::GroupDro { .. }, None) => {
                return Err(Error::InvalidParameter(
                    "GroupDRO needs a group state".into(),
                ))
            }
            _ => match &self.row_weights {
                Some(w) => w.iter().map(|w| w / n).collect(),
                None => vec![1.0 / n; f.len()],
            },
        };
        let mut loss = 0.0;
        let mut df = vec![0.0; f.len()];
        for r in 0..f.len() {
            loss += row_coef[r] * logistic_loss(f[r], y[r]);
            df[r] = row_coef[r] * (sigmoid(f[r]) - y[r] as f64);
        }
        match self.objective {
            Objective::Mmd {
                gamma,
                bandwidth,
                unbiased,
                ..
            } if gamma > 0.0 => {
                let w = self.row_weights.as_deref().unwrap_or(&[]);
                let s: Vec<f64> = self.mmd_rows.iter().map(|&r| f[r]).collect();
                let g: Vec<usize> = self.mmd_rows.iter().map(|&r| self.env[r]).collect();
                let ws: Vec<f64> = self.mmd_rows.iter().map(|&r| w[r]).collect();
                let (v, gs) = mmd_value_grad(&s, &g, &ws, bandwidth, unbiased)?;
                loss += gamma * v;
                for (&r, gr) in self.mmd_rows.iter().zip(gs) {
                    df[r] += gamma * gr;
                }
            }
            Objective::Irmv1 { gamma } if gamma > 0.0 => {
                let (v, gs) = irm_value_grad(f, y, &self.env)?;
                loss += gamma * v;
                df.iter_mut().zip(gs).for_each(|(d, g)| *d += gamma * g);
            }
            _ => {}
        }
        Ok((loss, df))
    }

    fn backward(&self, theta: &[f64], df: &[f64]) -> Vec<f64> {
        let d = self.set.features.dim();
        let mut gv = vec![0.0; d];
        self.set.features.tmatvec(df, &mut gv);
        let total: f64 = df.iter().sum();
        let mut grad: Vec<f64> = (0..d)
            .map(|j| (gv[j] - self.mean[j] * total) / self.scale[j] + self.weight_decay * theta[j])
            .collect();
        grad.push(total);
        grad
    }

    /// Objective value and gradient at `theta`; `q` is the GroupDRO state.
    pub fn value_grad(&self, theta: &[f64], q: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let f = self.logits(theta);
        self.value_grad_at(theta, &f, q)
    }

    fn value_grad_at(
        &self,
        theta: &[f64],
        f: &[f64],
        q: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let d = self.set.features.dim();
        let (mut loss, df) = self.loss_and_dlogits(f, q)?;
        loss += 0.5 * self.weight_decay * theta[..d].iter().map(|w| w * w).sum::<f64>();
        Ok((loss, self.backward(theta, &df)))
    }
}

/// Full-batch gradient descent; returns the model in raw feature space.
pub fn fit_with_report<F: Features>(
    set: &TrainingSet<F>,
    objective: Objective,
    cfg: &TrainConfig,
) -> Result<(LinearModel, FitReport)> {
    cfg.validate()?;
    let problem = Problem::new(set, objective, cfg)?;
    let mut theta = vec![0.0; problem.num_params()];
    let mut q = matches!(objective, Objective::GroupDro { .. })
        .then(|| vec![1.0 / problem.num_groups() as f64; problem.num_groups()]);
    let mut report = FitReport {
        iterations: 0,
        final_loss: f64::NAN,
        converged: false,
        group_weights: None,
    };
    for it in 0..cfg.iterations {
        let f = problem.logits(&theta);
        if let (Some(state), Objective::GroupDro { eta_q }) = (q.as_mut(), objective) {
            let losses = problem.group_losses(&f);
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFinite { iteration: it });
            }
            *state = group_dro_state_update(&losses, state, eta_q)?;
        }
        let (loss, grad) = problem.value_grad_at(&theta, &f, q.as_deref())?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: it });
        }
        report.iterations = it + 1;
        report.final_loss = loss;
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < cfg.tolerance {
            report.converged = true;
            break;
        }
        theta
            .iter_mut()
            .zip(&grad)
            .for_each(|(t, g)| *t -= cfg.learning_rate * g);
    }
    let model = problem.to_model(&theta);
    if !model.is_finite() {
        return Err(Error::NonFinite {
            iteration: report.iterations,
        });
    }
    report.group_weights = q;
    Ok((model, report))
}

pub fn fit<F: Features>(
    set: &TrainingSet<F>,
    objective: Objective,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    fit_with_report(set, objective, cfg).map(|(m, _)| m)
}
