use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{renyi_dependence, JointTable, RenyiOrder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Reweighting,
    Augmentation,
}

impl BoundKind {
    pub fn label(self) -> &'static str {
        match self {
            BoundKind::Reweighting => "reweighting",
            BoundKind::Augmentation => "augmentation",
        }
    }
}

/// One total of a bound under a particular reading of its slack term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVariant {
    pub name: String,
    pub lambda_aug: f64,
    pub total: f64,
}

/// Term-by-term decomposition of a generalization bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub n: usize,
    pub delta: f64,
    pub empirical: f64,
    pub concentration: f64,
    /// `d_inf ln(1/delta) / N` for the reweighting bound, zero otherwise.
    pub dependence_term: f64,
    pub d2: Option<f64>,
    pub d_inf: Option<f64>,
    /// Mean divergence over target attributes (augmentation bound).
    pub divergence: f64,
    pub per_attribute_divergence: Vec<f64>,
    pub variants: Vec<BoundVariant>,
}

/// Ingredients of the augmentation slack term.
///
/// `difference` form: risk under P-perp of the augmented-risk minimizer
/// minus the minimal P-perp risk. `sum` form: augmented risk plus P-perp risk
/// of the minimizer of their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LambdaInputs {
    pub perp_risk_of_aug_minimizer: f64,
    pub min_perp_risk: f64,
    pub joint_aug_risk: f64,
    pub joint_perp_risk: f64,
}

impl LambdaInputs {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn difference_form(&self) -> Result<f64> {
        let v = self.perp_risk_of_aug_minimizer - self.min_perp_risk;
        if v < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "aug minimizer beats the P-perp minimum by {}",
                -v
            )));
        }
        Ok(v.max(0.0))
    }

    pub fn sum_form(&self) -> f64 {
        self.joint_aug_risk + self.joint_perp_risk
    }

    fn check(&self) -> Result<()> {
        for v in [
            self.perp_risk_of_aug_minimizer,
            self.min_perp_risk,
            self.joint_aug_risk,
            self.joint_perp_risk,
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange(format!("risk {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn check_common(empirical: f64, n: usize, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(empirical >= 0.0) || !empirical.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "empirical risk {empirical}"
        )));
    }
    Ok(())
}

/// `R_w + sqrt(2 d_2 ln(1/delta) / N) + d_inf ln(1/delta) / N`.
pub fn renyi_bound(
    empirical_weighted_risk: f64,
    jt: &JointTable,
    n: usize,
    delta: f64,
) -> Result<BoundReport> {
    check_common(empirical_weighted_risk, n, delta)?;
    let d2 = renyi_dependence(jt, RenyiOrder::Two)?;
    let d_inf = renyi_dependence(jt, RenyiOrder::Infinity)?;
    let log = (1.0 / delta).ln();
    let concentration = (2.0 * d2 * log / n as f64).sqrt();
    let dependence_term = d_inf * log / n as f64;
    Ok(BoundReport {
        kind: BoundKind::Reweighting,
        n,
        delta,
        empirical: empirical_weighted_risk,
        concentration,
        dependence_term,
        d2: Some(d2),
        d_inf: Some(d_inf),
        divergence: 0.0,
        per_attribute_divergence: Vec::new(),
        variants: vec![BoundVariant {
            name: "renyi".into(),
            lambda_aug: 0.0,
            total: empirical_weighted_risk + concentration + dependence_term,
        }],
    })
}

/// `R_aug + sqrt(ln(1/delta) / N) + mean_c div_c + lambda_aug`, reported
/// for both forms of `lambda_aug`.
pub fn aug_bound(
    empirical_aug_risk: f64,
    divergences: &[f64],
    n: usize,
    delta: f64,
    lambda: &LambdaInputs,
) -> Result<BoundReport> {
    check_common(empirical_aug_risk, n, delta)?;
    if divergences.is_empty() {
        return Err(Error::InvalidParameter("no divergence estimates".into()));
    }
    if let Some(bad) = divergences.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::OutOfRange(format!(
            "divergence {bad} outside [0, 1]"
        )));
    }
    lambda.check()?;
    let concentration = ((1.0 / delta).ln() / n as f64).sqrt();
    let divergence = divergences.iter().sum::<f64>() / divergences.len() as f64;
    let base = empirical_aug_risk + concentration + divergence;
    let diff = lambda.difference_form()?;
    let sum = lambda.sum_form();
    Ok(BoundReport {
        kind: BoundKind::Augmentation,
        n,
        delta,
        empirical: empirical_aug_risk,
        concentration,
        dependence_term: 0.0,
        d2: None,
        d_inf: None,
        divergence,
        per_attribute_divergence: divergences.to_vec(),
        variants: vec![
            BoundVariant {
                name: "lambda_difference".into(),
                lambda_aug: diff,
                total: base + diff,
            },
            BoundVariant {
                name: "lambda_sum".into(),
                lambda_aug: sum,
                total: base + sum,
            },
        ],
    })
}

pub const BOUND_CSV_HEADER: [&str; 12] = [
    "bound",
    "variant",
    "n",
    "delta",
    "empirical",
    "concentration",
    "dependence_term",
    "d2",
    "d_inf",
    "divergence",
    "lambda_aug",
    "total",
];

impl BoundReport {
    pub fn variant(&self, name: &str) -> Option<&BoundVariant> {
        self.variants.iter().find(|v| v.name == name)
    }

    /// One CSV record per variant, columns as in [`BOUND_CSV_HEADER`].
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        self.variants
            .iter()
            .map(|v| {
                vec![
                    self.kind.label().to_string(),
                    v.name.clone(),
                    self.n.to_string(),
                    self.delta.to_string(),
                    self.empirical.to_string(),
                    self.concentration.to_string(),
                    self.dependence_term.to_string(),
                    opt(self.d2),
                    opt(self.d_inf),
                    self.divergence.to_string(),
                    v.lambda_aug.to_string(),
                    v.total.to_string(),
                ]
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if header {
            w.write_record(BOUND_CSV_HEADER)?;
        }
        for r in self.csv_records() {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Flat `key=value` lines; variant totals are keyed `total.<variant>`.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bound={}", self.kind.label());
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "delta={}", self.delta);
        let _ = writeln!(s, "empirical={}", self.empirical);
        let _ = writeln!(s, "concentration={}", self.concentration);
        match self.kind {
            BoundKind::Reweighting => {
                let _ = writeln!(s, "d2={}", self.d2.unwrap_or(f64::NAN));
                let _ = writeln!(s, "d_inf={}", self.d_inf.unwrap_or(f64::NAN));
                let _ = writeln!(s, "dependence_term={}", self.dependence_term);
            }
            BoundKind::Augmentation => {
                let _ = writeln!(s, "divergence={}", self.divergence);
                for (c, d) in self.per_attribute_divergence.iter().enumerate() {
                    let _ = writeln!(s, "divergence.{c}={d}");
                }
            }
        }
        for v in &self.variants {
            let _ = writeln!(s, "lambda_aug.{}={}", v.name, v.lambda_aug);
            let _ = writeln!(s, "total.{}={}", v.name, v.total);
        }
        s
    }

    /// Sum-of-parts identity and finiteness of every term.
    pub fn check_consistency(&self) -> bool {
        let parts = self.empirical + self.concentration + self.dependence_term + self.divergence;
        let terms = [
            self.empirical,
            self.concentration,
            self.dependence_term,
            self.divergence,
        ];
        terms.iter().all(|t| t.is_finite() && *t >= 0.0)
            && self
                .variants
                .iter()
                .all(|v| v.lambda_aug >= 0.0 && (v.total - (parts + v.lambda_aug)).abs() <= 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn independent() -> JointTable {
        JointTable::new(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap()
    }

    #[test]
    fn renyi_bound_arithmetic() {
        let r = renyi_bound(0.1, &independent(), 2, (-1.0f64).exp()).unwrap();
        assert!((r.concentration - 1.0).abs() < 1e-15);
        assert!((r.dependence_term - 0.5).abs() < 1e-15);
        assert!((r.variants[0].total - 1.6).abs() < 1e-15);
        assert!(r.check_consistency());
    }

    #[test]
    fn renyi_bound_monotone() {
        let weak = JointTable::new(vec![vec![0.3, 0.2], vec![0.2, 0.3]]).unwrap();
        let strong = JointTable::new(vec![vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap();
        let a = renyi_bound(0.2, &weak, 100, 0.05).unwrap();
        let b = renyi_bound(0.2, &strong, 100, 0.05).unwrap();
        assert!(b.variants[0].total > a.variants[0].total);
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1_000, 100_000, 10_000_000] {
            let t = renyi_bound(0.2, &strong, n, 0.05).unwrap().variants[0].total;
            assert!(t < prev);
            prev = t;
        }
        assert!((prev - 0.2).abs() < 2e-3);
    }

    #[test]
    fn renyi_bound_rejects_bad_inputs() {
        assert!(renyi_bound(0.1, &independent(), 0, 0.1).is_err());
        assert!(renyi_bound(0.1, &independent(), 10, 1.0).is_err());
        let zero = JointTable::new(vec![vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(
            renyi_bound(0.1, &zero, 10, 0.1),
            Err(Error::ZeroMarginal { .. })
        ));
    }

    #[test]
    fn aug_bound_zero_divergence() {
        let r = aug_bound(0.2, &[0.0; 4], 50, 0.1, &LambdaInputs::zero()).unwrap();
        let expect = 0.2 + ((10.0f64).ln() / 50.0).sqrt();
        for v in &r.variants {
            assert!((v.total - expect).abs() < 1e-15);
        }
        assert!(r.check_consistency());
        assert!(aug_bound(0.2, &[1.1], 50, 0.1, &LambdaInputs::zero()).is_err());
    }

    #[test]
    fn aug_bound_lambda_variants() {
        let l = LambdaInputs {
            perp_risk_of_aug_minimizer: 0.3,
            min_perp_risk: 0.25,
            joint_aug_risk: 0.1,
            joint_perp_risk: 0.2,
        };
        let r = aug_bound(0.2, &[0.5, 0.25], 50, 0.1, &l).unwrap();
        assert!((r.variant("lambda_difference").unwrap().lambda_aug - 0.05).abs() < 1e-15);
        assert!((r.variant("lambda_sum").unwrap().lambda_aug - 0.3).abs() < 1e-15);
        assert!((r.divergence - 0.375).abs() < 1e-15);
        assert!(r.check_consistency());
    }

    #[test]
    fn serializations() {
        let r = renyi_bound(0.1, &independent(), 2, 0.5).unwrap();
        let kv = r.to_key_value();
        assert!(kv.contains("bound=reweighting\n") && kv.contains("total.renyi="));
        let mut buf = Vec::new();
        aug_bound(0.2, &[0.1], 5, 0.1, &LambdaInputs::zero())
            .unwrap()
            .write_csv(&mut buf, true)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("bound,variant,n,"));
    }
}
