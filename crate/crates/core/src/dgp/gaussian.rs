use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_distribution, sample_categorical, InterventionPolicy};
use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// The Gaussian synthetic model: `x = [x*, x_spu]` with
/// `x* ~ N(mu_y, sigma^2 I)` and `x_spu ~ N(mu_c, sigma_spu^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDgp {
    pub num_attributes: usize,
    pub num_classes: usize,
    pub d_star: usize,
    pub d_spu: usize,
    pub sigma: f64,
    pub sigma_spu: f64,
    pub class_means: Vec<Vec<f64>>,
    pub attr_means: Vec<Vec<f64>>,
    pub class_mean_norm: f64,
    pub attr_mean_norm: f64,
    pub p_y: Vec<f64>,
    pub p_c_given_y: Vec<Vec<f64>>,
    /// Unit direction used to summarise `x*` into the auxiliary channel.
    pub aux_projection: Vec<f64>,
    pub aux_levels: usize,
    /// Emit the quantised summary as `m` on ordinary (non-panel) samples.
    pub emit_aux: bool,
}

fn sphere_point<R: Rng + ?Sized>(dim: usize, norm: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len > 1e-300 {
            return v.into_iter().map(|a| a * norm / len).collect();
        }
    }
}

/// The default synthetic configuration: K=8, L=2, d*=10, d_spu=300,
/// sigma = 0.01 d* and sigma_spu^2 = 0.05, uniform P(Y), means drawn
/// uniformly from spheres of the requested norms.
pub fn build_default_gaussian_dgp(
    seed: u64,
    class_mean_norm: f64,
    attr_mean_norm: f64,
) -> Result<GaussianDgp> {
    GaussianDgp::random(
        seed,
        8,
        2,
        10,
        300,
        0.01 * 10.0,
        0.05f64.sqrt(),
        class_mean_norm,
        attr_mean_norm,
    )
}

impl GaussianDgp {
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        seed: u64,
        num_attributes: usize,
        num_classes: usize,
        d_star: usize,
        d_spu: usize,
        sigma: f64,
        sigma_spu: f64,
        class_mean_norm: f64,
        attr_mean_norm: f64,
    ) -> Result<Self> {
        if !(class_mean_norm > 0.0) || !(attr_mean_norm > 0.0) {
            return Err(Error::InvalidParameter(
                "mean norms must be positive".into(),
            ));
        }
        if num_attributes == 0 || num_classes == 0 || d_star == 0 || d_spu == 0 {
            return Err(Error::InvalidParameter("sizes must be positive".into()));
        }
        let mut rng = seeded(seed);
        let class_means = (0..num_classes)
            .map(|_| sphere_point(d_star, class_mean_norm, &mut rng))
            .collect();
        let attr_means = (0..num_attributes)
            .map(|_| sphere_point(d_spu, attr_mean_norm, &mut rng))
            .collect();
        let aux_projection = sphere_point(d_star, 1.0, &mut rng);
        let dgp = Self {
            num_attributes,
            num_classes,
            d_star,
            d_spu,
            sigma,
            sigma_spu,
            class_means,
            attr_means,
            class_mean_norm,
            attr_mean_norm,
            p_y: vec![1.0 / num_classes as f64; num_classes],
            p_c_given_y: vec![vec![1.0 / num_attributes as f64; num_attributes]; num_classes],
            aux_projection,
            aux_levels: 8,
            emit_aux: false,
        };
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn dim(&self) -> usize {
        self.d_star + self.d_spu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.sigma_spu > 0.0) {
            return Err(Error::InvalidParameter(
                "noise scales must be positive".into(),
            ));
        }
        check_distribution(&self.p_y, "P(Y)")?;
        if self.p_y.len() != self.num_classes || self.p_c_given_y.len() != self.num_classes {
            return Err(Error::AlphabetMismatch(self.p_y.len(), self.num_classes));
        }
        for row in &self.p_c_given_y {
            if row.len() != self.num_attributes {
                return Err(Error::AlphabetMismatch(row.len(), self.num_attributes));
            }
            check_distribution(row, "P(C|Y) row")?;
        }
        let norm_ok = |v: &[f64], dim: usize, norm: f64| {
            v.len() == dim
                && (v.iter().map(|a| a * a).sum::<f64>().sqrt() - norm).abs()
                    <= 1e-9 * norm.max(1.0)
        };
        if self.class_means.len() != self.num_classes
            || !self
                .class_means
                .iter()
                .all(|m| norm_ok(m, self.d_star, self.class_mean_norm))
        {
            return Err(Error::InvalidParameter(
                "class means violate norm/dimension".into(),
            ));
        }
        if self.attr_means.len() != self.num_attributes
            || !self
                .attr_means
                .iter()
                .all(|m| norm_ok(m, self.d_spu, self.attr_mean_norm))
        {
            return Err(Error::InvalidParameter(
                "attribute means violate norm/dimension".into(),
            ));
        }
        Ok(())
    }

    /// Replaces the training attribute mechanism.
    pub fn with_table(mut self, p_c_given_y: Vec<Vec<f64>>) -> Result<Self> {
        self.p_c_given_y = p_c_given_y;
        self.validate()?;
        Ok(self)
    }

    /// Quantised projection of the invariant block onto `aux_projection`.
    pub fn aux_level(&self, x_star: &[f64]) -> usize {
        let s: f64 = x_star
            .iter()
            .zip(&self.aux_projection)
            .map(|(a, b)| a * b)
            .sum();
        // bins cover +-1.5 class-mean norms; tails clamp to the end bins
        let half = 1.5 * self.class_mean_norm;
        let t = ((s + half) / (2.0 * half) * self.aux_levels as f64).floor();
        t.clamp(0.0, (self.aux_levels - 1) as f64) as usize
    }

    fn draw_invariant<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> Vec<f64> {
        self.class_means[y]
            .iter()
            .map(|&mu| mu + self.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn draw_spurious<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Vec<f64> {
        self.attr_means[c]
            .iter()
            .map(|&mu| mu + self.sigma_spu * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// `mu_to - mu_from` on the spurious block.
    pub fn attribute_shift(&self, from: usize, to: usize) -> Vec<f64> {
        self.attr_means[to]
            .iter()
            .zip(&self.attr_means[from])
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Draws `n` examples with the attribute mechanism replaced per `policy`.
pub fn sample_dataset<R: Rng + ?Sized>(
    dgp: &GaussianDgp,
    n: usize,
    policy: &InterventionPolicy,
    rng: &mut R,
) -> Result<Vec<LabeledExample>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let table = policy.resolve(&dgp.p_c_given_y, dgp.num_attributes)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_categorical(&dgp.p_y, rng);
        let c = sample_categorical(&table[y], rng);
        let mut x = dgp.draw_invariant(y, rng);
        let m = dgp.emit_aux.then(|| vec![dgp.aux_level(&x) as f64]);
        x.extend(dgp.draw_spurious(c, rng));
        out.push(LabeledExample {
            x,
            y,
            c,
            m,
            x_pre: None,
        });
    }
    Ok(out)
}

/// Two-period panel: a pre-treatment vector generated under attribute
/// `c_pre` (uniform, independent of Y) and the observed vector
/// `x = x_pre + (0; mu_c - mu_{c_pre})`, so the constant-effect assumption
/// holds exactly. `m = (c_pre, level(x*))`.
pub fn sample_panel_dataset<R: Rng + ?Sized>(
    dgp: &GaussianDgp,
    n: usize,
    rng: &mut R,
) -> Result<Vec<LabeledExample>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let k = dgp.num_attributes;
    let uniform = vec![1.0 / k as f64; k];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_categorical(&dgp.p_y, rng);
        let c = sample_categorical(&dgp.p_c_given_y[y], rng);
        let c_pre = sample_categorical(&uniform, rng);
        let mut x_pre = dgp.draw_invariant(y, rng);
        let level = dgp.aux_level(&x_pre);
        x_pre.extend(dgp.draw_spurious(c_pre, rng));
        let mut x = x_pre.clone();
        if c != c_pre {
            let shift = dgp.attribute_shift(c_pre, c);
            for (xi, s) in x[dgp.d_star..].iter_mut().zip(&shift) {
                *xi += s;
            }
        }
        out.push(LabeledExample {
            x,
            y,
            c,
            m: Some(vec![c_pre as f64, level as f64]),
            x_pre: Some(x_pre),
        });
    }
    Ok(out)
}

/// Ground-truth counterfactual: the spurious block moved by
/// `mu_{c_target} - mu_{c}`; the invariant block is untouched.
pub fn oracle_counterfactual(
    dgp: &GaussianDgp,
    ex: &LabeledExample,
    c_target: usize,
) -> Result<Vec<f64>> {
    if ex.x.len() != dgp.dim() {
        return Err(Error::DimensionMismatch {
            expected: dgp.dim(),
            got: ex.x.len(),
        });
    }
    if c_target >= dgp.num_attributes || ex.c >= dgp.num_attributes {
        return Err(Error::OutOfRange(format!("attribute {c_target}")));
    }
    let mut x = ex.x.clone();
    if c_target != ex.c {
        for ((xi, to), from) in x[dgp.d_star..]
            .iter_mut()
            .zip(&dgp.attr_means[c_target])
            .zip(&dgp.attr_means[ex.c])
        {
            *xi += to - from;
        }
    }
    Ok(x)
}
