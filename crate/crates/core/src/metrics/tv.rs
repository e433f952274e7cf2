use std::sync::OnceLock;

use libm::erfc;
use serde::{Deserialize, Serialize};

use super::quadrature::GaussLegendre;
use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// TV between N(a, s^2 I) and N(b, s^2 I) with `||a - b|| = delta_norm`.
pub fn tv_gaussian_shared_cov(delta_norm: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(delta_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mean distance {delta_norm}"
        )));
    }
    Ok((2.0 * std_normal_cdf(delta_norm / (2.0 * sigma)) - 1.0).clamp(0.0, 1.0))
}

/// Half the L1 distance between two distributions on the same alphabet.
pub fn tv_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Law of the corruption factor xi applied to attribute shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XiLaw {
    /// xi is the constant `lambda`.
    Fixed(f64),
    /// N(mean, sd^2) truncated to (0, 1].
    Truncated { mean: f64, sd: f64 },
}

impl XiLaw {
    pub fn truncated(lambda: f64) -> Self {
        XiLaw::Truncated {
            mean: lambda,
            sd: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            XiLaw::Fixed(l) if l > 0.0 && l <= 1.0 => Ok(()),
            XiLaw::Truncated { mean, sd } if mean > 0.0 && mean <= 1.0 && sd > 0.0 => Ok(()),
            other => Err(Error::InvalidParameter(format!("corruption law {other:?}"))),
        }
    }

    /// E[g(xi)]; 64-point Gauss–Legendre over (0, 1] for the truncated law.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        self.validate()?;
        match *self {
            XiLaw::Fixed(l) => Ok(g(l)),
            XiLaw::Truncated { mean, sd } => {
                let z = std_normal_cdf((1.0 - mean) / sd) - std_normal_cdf(-mean / sd);
                let dens = |t: f64| {
                    (-0.5 * ((t - mean) / sd).powi(2)).exp()
                        / (sd * (2.0 * std::f64::consts::PI).sqrt())
                };
                Ok(rule().integrate(0.0, 1.0, |t| g(t) * dens(t)) / z)
            }
        }
    }
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}

/// TV between the true interventional spurious block and a corrupted
/// counterfactual shifted by `xi (mu_c - mu_ci)` instead of the full shift,
/// averaged over xi. For random xi this is the convexity upper bound.
pub fn expected_corruption_tv(shift_norm: f64, sigma: f64, law: XiLaw) -> Result<f64> {
    tv_gaussian_shared_cov(0.0, sigma)?;
    law.expect(|xi| {
        let d = (1.0 - xi).max(0.0) * shift_norm;
        2.0 * std_normal_cdf(d / (2.0 * sigma)) - 1.0
    })
    .map(|v| v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn phi_reference_values() {
        // high-precision reference values of the standard normal CDF
        let refs = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.96, 0.024_997_895_148_220_435),
            (3.0, 0.998_650_101_968_369_9),
            (-8.0, 6.220_960_574_271_785e-16),
        ];
        for (x, p) in refs {
            assert!(
                (std_normal_cdf(x) - p).abs() < 1e-12,
                "{x}: {} vs {p}",
                std_normal_cdf(x)
            );
        }
    }

    #[test]
    fn gaussian_tv_closed_form() {
        assert_eq!(tv_gaussian_shared_cov(0.0, 1.0).unwrap(), 0.0);
        let v = tv_gaussian_shared_cov(2.0 * 0.3, 0.3).unwrap();
        assert!((v - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert!(tv_gaussian_shared_cov(1.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_tv_monte_carlo() {
        // TV = P_p(log p/q > 0) - P_q(log p/q > 0); in 1-D along the mean difference
        let (d, s) = (0.7, 0.5);
        let mut rng = seeded(11);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let xp = s * z;
            let xq = d + s * z;
            acc += ((xp < d / 2.0) as u8 as f64) - ((xq < d / 2.0) as u8 as f64);
        }
        let mc = acc / n as f64;
        assert!((mc - tv_gaussian_shared_cov(d, s).unwrap()).abs() < 0.01);
    }

    #[test]
    fn discrete_tv_examples() {
        assert_eq!(tv_discrete(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tv_discrete(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_discrete(&[0.5, 0.5], &[0.9, 0.1]).unwrap() - 0.4).abs() < 1e-15);
        assert!(tv_discrete(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn truncated_law_expectations() {
        let law = XiLaw::truncated(0.5);
        // symmetric truncation: mean is the centre, mass is one
        assert!((law.expect(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((law.expect(|t| t).unwrap() - 0.5).abs() < 1e-12);
        // Monte-Carlo oracle by rejection for an asymmetric case
        let law = XiLaw::truncated(0.95);
        let mut rng = seeded(5);
        let (mut acc, mut n) = (0.0, 0);
        while n < 400_000 {
            let t = 0.95 + 0.1 * rng.sample::<f64, _>(StandardNormal);
            if t > 0.0 && t <= 1.0 {
                acc += t * t;
                n += 1;
            }
        }
        assert!((law.expect(|t| t * t).unwrap() - acc / n as f64).abs() < 2e-3);
        assert!(XiLaw::Fixed(0.0).validate().is_err());
        assert!(XiLaw::truncated(1.2).validate().is_err());
    }

    #[test]
    fn corruption_tv_monotone_in_lambda() {
        let mut prev = 1.0;
        for l in [0.05, 0.2, 0.5, 0.9, 0.99, 1.0] {
            let v = expected_corruption_tv(0.5, 0.2236, XiLaw::Fixed(l)).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        assert_eq!(prev, 0.0);
    }

    proptest! {
        #[test]
        fn tv_discrete_is_a_metric(raw in proptest::collection::vec(0.01f64..1.0, 15)) {
            let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|a| a / s).collect::<Vec<_>>() };
            let (p, q, r) = (norm(&raw[0..5]), norm(&raw[5..10]), norm(&raw[10..15]));
            let d = |a: &[f64], b: &[f64]| tv_discrete(a, b).unwrap();
            prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-12);
            prop_assert!(d(&p, &p).abs() < 1e-12);
            prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d(&p, &q)));
        }
    }
}
