use super::config::{MethodCell, SweepConfig};
use crate::augment::{
    build_available_augmented_dataset, corruption_plan, diff_in_diff_all, oracle_plan, MatchConfig,
    NoMatchPolicy, ShiftPlan,
};
use crate::data::LabeledExample;
use crate::dgp::{sample_panel_dataset, GaussianDgp};
use crate::error::{Error, Result};
use crate::metrics::std_normal_cdf;
use crate::rng::seeded;
use crate::train::{fit, Features, LinearModel, Objective, TrainConfig, TrainingSet};

/// Bayes classifier on the invariant block for two classes with isotropic
/// noise: `w = (mu_1 - mu_0) / sigma^2` on x*, zero on the spurious block.
pub fn xstar_bayes_model(dgp: &GaussianDgp) -> Result<LinearModel> {
    if dgp.num_classes != 2 {
        return Err(Error::InvalidParameter("two classes required".into()));
    }
    let s2 = dgp.sigma * dgp.sigma;
    let (m0, m1) = (&dgp.class_means[0], &dgp.class_means[1]);
    let mut weights = vec![0.0; dgp.dim()];
    for j in 0..dgp.d_star {
        weights[j] = (m1[j] - m0[j]) / s2;
    }
    let sq = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>();
    let bias = -(sq(m1) - sq(m0)) / (2.0 * s2) + (dgp.p_y[1] / dgp.p_y[0]).ln();
    Ok(LinearModel { weights, bias })
}

/// Exact accuracy of [`xstar_bayes_model`]; the same under every
/// intervention on C.
pub fn xstar_bayes_accuracy(dgp: &GaussianDgp) -> Result<f64> {
    if dgp.num_classes != 2 {
        return Err(Error::InvalidParameter("two classes required".into()));
    }
    let dist = dgp.class_means[0]
        .iter()
        .zip(&dgp.class_means[1])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let t = (dgp.p_y[1] / dgp.p_y[0]).ln();
    let base = dist / (2.0 * dgp.sigma);
    let tilt = t * dgp.sigma / dist;
    Ok(dgp.p_y[1] * std_normal_cdf(base + tilt) + dgp.p_y[0] * std_normal_cdf(base - tilt))
}

/// A trained method together with what the bound report needs.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub cell: MethodCell,
    pub model: LinearModel,
    /// Shift plan of oracle/corrupted augmentation.
    pub plan: Option<ShiftPlan>,
    /// Training rows actually used.
    pub rows: usize,
    /// (source, target) pairs dropped for lack of a match.
    pub dropped: usize,
}

fn train_cfg(cfg: &SweepConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.train }
}

pub fn fit_method(
    cell: MethodCell,
    dgp: &GaussianDgp,
    train: &[LabeledExample],
    cfg: &SweepConfig,
    seed: u64,
) -> Result<Fitted> {
    let tc = train_cfg(cfg, seed);
    let dense = |obj: Objective| -> Result<Fitted> {
        let set = TrainingSet::from_examples(train)?;
        Ok(Fitted {
            cell,
            model: fit(&set, obj, &tc)?,
            plan: None,
            rows: set.len(),
            dropped: 0,
        })
    };
    let shifted = |plan: ShiftPlan| -> Result<Fitted> {
        let set = TrainingSet::from_shift_plan(dgp, train, &plan)?;
        let model = fit(&set, Objective::Augmented, &tc)?;
        Ok(Fitted {
            cell,
            model,
            rows: set.len(),
            plan: Some(plan),
            dropped: 0,
        })
    };
    match cell {
        MethodCell::Erm => dense(Objective::Erm),
        MethodCell::Reweight => dense(Objective::Reweighted),
        MethodCell::Mmd(gamma) => dense(Objective::mmd(gamma)),
        MethodCell::Irmv1(gamma) => dense(Objective::Irmv1 { gamma }),
        MethodCell::GroupDro(eta_q) => dense(Objective::GroupDro { eta_q }),
        MethodCell::AugOracle => shifted(oracle_plan(dgp, train)?),
        MethodCell::AugCorrupt(lambda) => {
            let mut rng = seeded(seed);
            shifted(corruption_plan(dgp, train, lambda, cfg.xi_mode, &mut rng)?)
        }
        MethodCell::AugDiffInDiff => {
            // diff-in-diff needs panels: a panel sample of the same size
            let mut rng = seeded(seed);
            let panel = sample_panel_dataset(dgp, train.len(), &mut rng)?;
            let out = diff_in_diff_all(
                &panel,
                dgp.num_attributes,
                &MatchConfig::default(),
                NoMatchPolicy::Drop,
            )?;
            let records = build_available_augmented_dataset(&panel, &out.set)?;
            let set = TrainingSet::from_augmented(&records)?;
            Ok(Fitted {
                cell,
                model: fit(&set, Objective::Augmented, &tc)?,
                plan: None,
                rows: set.len(),
                dropped: out.dropped.len(),
            })
        }
        MethodCell::XstarBayes => Ok(Fitted {
            cell,
            model: xstar_bayes_model(dgp)?,
            plan: None,
            rows: 0,
            dropped: 0,
        }),
    }
}

/// 0-1 risk of `model` over the rows of a training set.
pub fn zero_one_risk<F: Features>(model: &LinearModel, set: &TrainingSet<F>) -> f64 {
    let mut f = vec![0.0; set.len()];
    set.features.matvec(&model.weights, &mut f);
    let wrong = f
        .iter()
        .zip(&set.y)
        .filter(|(&v, &y)| ((v + model.bias > 0.0) as usize) != y)
        .count();
    wrong as f64 / set.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{build_default_gaussian_dgp, sample_dataset, InterventionPolicy};
    use crate::metrics::Classifier;

    #[test]
    fn bayes_accuracy_matches_monte_carlo() {
        let dgp = build_default_gaussian_dgp(3, 1.0 / 3.0, 60.0).unwrap();
        let m = xstar_bayes_model(&dgp).unwrap();
        let exact = xstar_bayes_accuracy(&dgp).unwrap();
        let mut rng = seeded(1);
        let data = sample_dataset(&dgp, 40_000, &InterventionPolicy::UniformC, &mut rng).unwrap();
        let acc = data.iter().filter(|e| m.predict(&e.x) == e.y).count() as f64 / data.len() as f64;
        let se = (exact * (1.0 - exact) / data.len() as f64).sqrt();
        assert!((acc - exact).abs() < 4.0 * se, "{acc} vs {exact}");
    }

    #[test]
    fn bayes_accuracy_with_unequal_priors() {
        let mut dgp = build_default_gaussian_dgp(5, 1.0 / 3.0, 60.0).unwrap();
        dgp.sigma = 0.3;
        dgp.p_y = vec![0.3, 0.7];
        let m = xstar_bayes_model(&dgp).unwrap();
        let exact = xstar_bayes_accuracy(&dgp).unwrap();
        let mut rng = seeded(2);
        let data = sample_dataset(&dgp, 40_000, &InterventionPolicy::UniformC, &mut rng).unwrap();
        let acc = data.iter().filter(|e| m.predict(&e.x) == e.y).count() as f64 / data.len() as f64;
        let se = (exact * (1.0 - exact) / data.len() as f64).sqrt();
        assert!((acc - exact).abs() < 4.0 * se, "{acc} vs {exact}");
    }
}
