use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{check_distribution, sample_categorical, InterventionPolicy};
use crate::error::{Error, Result};
use crate::metrics::JointTable;
use crate::rng::seeded;

const MAX_ALPHABET: usize = 8;

/// A classifier over the finite alphabet of X: `h[x]` is the predicted class.
pub type Hypothesis = Vec<usize>;

/// Small discrete model Y -> X* -> X <- C, optionally with an auxiliary
/// variable M drawn from P(M | C, X*) and feeding into X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDgp {
    /// P(Y), length L.
    pub p_y: Vec<f64>,
    /// P(X* | Y), indexed `[y][s]`.
    pub p_xstar_given_y: Vec<Vec<f64>>,
    /// Training mechanism P(C | Y), indexed `[y][c]`.
    pub p_c_given_y: Vec<Vec<f64>>,
    /// P(M | C, X*), indexed `[c][s][m]`; `None` means M is absent.
    pub p_m_given_c_xstar: Option<Vec<Vec<Vec<f64>>>>,
    /// P(X | X*, C, M), indexed `[s][c][m][x]` (a single `m` slot when M is absent).
    pub p_x_given: Vec<Vec<Vec<Vec<f64>>>>,
    /// The extractor e: X -> X*.
    pub extractor: Vec<usize>,
}

/// How counterfactual augmentations are produced on the discrete model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauModel {
    /// The true counterfactual X(c).
    Exact,
    /// With probability `keep` the factual x is returned instead of X(c).
    KeepOriginal { keep: f64 },
}

/// One cell of the exogenous-noise partition for fixed X*: inside a cell
/// every potential outcome `(M(c), X(c))` is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualCell {
    pub weight: f64,
    pub m: Vec<usize>,
    pub x: Vec<usize>,
}

/// A sampled unit together with all its potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDraw {
    pub y: usize,
    pub xstar: usize,
    pub c: usize,
    pub m: usize,
    pub x: usize,
    pub x_cf: Vec<usize>,
}

fn inverse_cdf(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

fn breakpoints<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut pts = vec![0.0, 1.0];
    for row in rows {
        let mut acc = 0.0;
        for &p in row {
            acc += p;
            if acc > 0.0 && acc < 1.0 {
                pts.push(acc);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = g.iter().sum();
    let mut row: Vec<f64> = g.iter().map(|v| v / s).collect();
    let resid = 1.0 - row.iter().sum::<f64>();
    row[0] += resid;
    row
}

impl DiscreteDgp {
    pub fn num_classes(&self) -> usize {
        self.p_y.len()
    }

    pub fn num_xstar(&self) -> usize {
        self.p_xstar_given_y.first().map_or(0, Vec::len)
    }

    pub fn num_attributes(&self) -> usize {
        self.p_c_given_y.first().map_or(0, Vec::len)
    }

    pub fn num_aux(&self) -> usize {
        self.p_m_given_c_xstar
            .as_ref()
            .and_then(|t| t.first()?.first().map(Vec::len))
            .unwrap_or(1)
    }

    pub fn num_x(&self) -> usize {
        self.extractor.len()
    }

    /// The default toy: binary X*, binary C, and X = (X*, C, noise bit)
    /// encoded as `4 x* + 2 c + b`.
    pub fn default_toy() -> Self {
        let q = [[0.2, 0.7], [0.4, 0.9]];
        let mut p_x_given = vec![vec![vec![vec![0.0; 8]]; 2]; 2];
        for s in 0..2 {
            for c in 0..2 {
                let base = 4 * s + 2 * c;
                p_x_given[s][c][0][base] = 1.0 - q[s][c];
                p_x_given[s][c][0][base + 1] = q[s][c];
            }
        }
        Self {
            p_y: vec![0.45, 0.55],
            p_xstar_given_y: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            p_c_given_y: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            p_m_given_c_xstar: None,
            p_x_given,
            extractor: (0..8).map(|x| x / 4).collect(),
        }
    }

    /// The smallest instance: X = (X*, C) encoded as `2 x* + c`.
    pub fn four_state_toy() -> Self {
        let mut p_x_given = vec![vec![vec![vec![0.0; 4]]; 2]; 2];
        for s in 0..2 {
            for c in 0..2 {
                p_x_given[s][c][0][2 * s + c] = 1.0;
            }
        }
        Self {
            p_y: vec![0.5, 0.5],
            p_xstar_given_y: vec![vec![0.75, 0.25], vec![0.35, 0.65]],
            p_c_given_y: vec![vec![0.85, 0.15], vec![0.15, 0.85]],
            p_m_given_c_xstar: None,
            p_x_given,
            extractor: vec![0, 0, 1, 1],
        }
    }

    /// A random model with the default layout. With `with_aux`, a binary M
    /// is added and the noise bit of X depends on it.
    pub fn random(seed: u64, with_aux: bool) -> Self {
        let mut rng = seeded(seed);
        let rng = &mut rng;
        let n_m = if with_aux { 2 } else { 1 };
        let p_m = with_aux.then(|| {
            (0..2)
                .map(|_| (0..2).map(|_| random_simplex(2, rng)).collect())
                .collect()
        });
        let mut p_x_given = vec![vec![vec![vec![0.0; 8]; n_m]; 2]; 2];
        for s in 0..2 {
            for c in 0..2 {
                for m in 0..n_m {
                    let row = random_simplex(2, rng);
                    let base = 4 * s + 2 * c;
                    p_x_given[s][c][m][base] = row[0];
                    p_x_given[s][c][m][base + 1] = row[1];
                }
            }
        }
        Self {
            p_y: random_simplex(2, rng),
            p_xstar_given_y: (0..2).map(|_| random_simplex(2, rng)).collect(),
            p_c_given_y: (0..2).map(|_| random_simplex(2, rng)).collect(),
            p_m_given_c_xstar: p_m,
            p_x_given,
            extractor: (0..8).map(|x| x / 4).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l, s, k, nm, nx) = (
            self.num_classes(),
            self.num_xstar(),
            self.num_attributes(),
            self.num_aux(),
            self.num_x(),
        );
        for (n, what) in [(l, "Y"), (s, "X*"), (k, "C"), (nm, "M"), (nx, "X")] {
            if n == 0 || n > MAX_ALPHABET {
                return Err(Error::InvalidTable(format!(
                    "alphabet of {what} has size {n}"
                )));
            }
        }
        check_distribution(&self.p_y, "P(Y)")?;
        let rows_ok = |t: &[Vec<f64>], len: usize, width: usize, what: &str| -> Result<()> {
            if t.len() != len {
                return Err(Error::AlphabetMismatch(t.len(), len));
            }
            for r in t {
                if r.len() != width {
                    return Err(Error::AlphabetMismatch(r.len(), width));
                }
                check_distribution(r, what)?;
            }
            Ok(())
        };
        rows_ok(&self.p_xstar_given_y, l, s, "P(X*|Y)")?;
        rows_ok(&self.p_c_given_y, l, k, "P(C|Y)")?;
        if let Some(pm) = &self.p_m_given_c_xstar {
            if pm.len() != k {
                return Err(Error::AlphabetMismatch(pm.len(), k));
            }
            for t in pm {
                rows_ok(t, s, nm, "P(M|C,X*)")?;
            }
        }
        if self.p_x_given.len() != s {
            return Err(Error::AlphabetMismatch(self.p_x_given.len(), s));
        }
        for (xs, by_c) in self.p_x_given.iter().enumerate() {
            if by_c.len() != k {
                return Err(Error::AlphabetMismatch(by_c.len(), k));
            }
            for t in by_c {
                rows_ok(t, nm, nx, "P(X|X*,C,M)")?;
                for row in t {
                    for (x, &p) in row.iter().enumerate() {
                        if p > 0.0 && self.extractor[x] != xs {
                            return Err(Error::InvalidTable(format!(
                                "x={x} reachable from x*={xs} but e(x)={}",
                                self.extractor[x]
                            )));
                        }
                    }
                }
            }
        }
        if self.extractor.iter().any(|&e| e >= s) {
            return Err(Error::InvalidTable(
                "extractor leaves the X* alphabet".into(),
            ));
        }
        Ok(())
    }

    fn p_m(&self, c: usize, s: usize) -> &[f64] {
        match &self.p_m_given_c_xstar {
            Some(t) => &t[c][s],
            None => &[1.0],
        }
    }

    fn check_hypothesis(&self, h: &[usize]) -> Result<()> {
        if h.len() != self.num_x() {
            return Err(Error::AlphabetMismatch(h.len(), self.num_x()));
        }
        if h.iter().any(|&v| v >= self.num_classes()) {
            return Err(Error::OutOfRange(
                "hypothesis predicts an unknown class".into(),
            ));
        }
        Ok(())
    }

    /// Exact expectation of `f(y, x*, c, m, x)` under the policy-induced joint.
    pub fn expectation(
        &self,
        policy: &InterventionPolicy,
        f: impl Fn(usize, usize, usize, usize, usize) -> f64,
    ) -> Result<f64> {
        self.validate()?;
        let q = policy.resolve(&self.p_c_given_y, self.num_attributes())?;
        let mut total = 0.0;
        for (y, &py) in self.p_y.iter().enumerate() {
            for (s, &ps) in self.p_xstar_given_y[y].iter().enumerate() {
                for (c, &pc) in q[y].iter().enumerate() {
                    for (m, &pm) in self.p_m(c, s).iter().enumerate() {
                        for (x, &px) in self.p_x_given[s][c][m].iter().enumerate() {
                            let w = py * ps * pc * pm * px;
                            if w > 0.0 {
                                total += w * f(y, s, c, m, x);
                            }
                        }
                    }
                }
            }
        }
        Ok(total)
    }

    /// Exact 0-1 risk of `h` under the joint induced by `policy`.
    pub fn enumerate_and_evaluate(&self, h: &[usize], policy: &InterventionPolicy) -> Result<f64> {
        self.check_hypothesis(h)?;
        self.expectation(policy, |y, _, _, _, x| (h[x] != y) as u8 as f64)
    }

    /// Exact risk of `h` with each (y, c) cell weighted by `w[y][c]`.
    pub fn weighted_risk(
        &self,
        h: &[usize],
        policy: &InterventionPolicy,
        w: &[Vec<f64>],
    ) -> Result<f64> {
        self.check_hypothesis(h)?;
        self.expectation(policy, |y, _, c, _, x| w[y][c] * (h[x] != y) as u8 as f64)
    }

    /// The (Y, C) joint under a policy.
    pub fn joint_yc(&self, policy: &InterventionPolicy) -> Result<JointTable> {
        let q = policy.resolve(&self.p_c_given_y, self.num_attributes())?;
        JointTable::from_conditionals(&self.p_y, &q)
    }

    /// Bayes classifier on X* under the unconfounded distribution, lifted to
    /// X through the extractor. Ties go to the lower class.
    pub fn bayes_xstar_hypothesis(&self) -> Hypothesis {
        let s = self.num_xstar();
        let g: Vec<usize> = (0..s)
            .map(|xs| {
                let mut best = 0;
                for y in 1..self.num_classes() {
                    let score = self.p_y[y] * self.p_xstar_given_y[y][xs];
                    if score > self.p_y[best] * self.p_xstar_given_y[best][xs] {
                        best = y;
                    }
                }
                best
            })
            .collect();
        self.extractor.iter().map(|&e| g[e]).collect()
    }

    /// Partition of the exogenous noise (uniforms driving M and X through
    /// inverse CDFs) into cells on which all potential outcomes are constant.
    pub fn counterfactual_cells(&self, xs: usize) -> Vec<CounterfactualCell> {
        let k = self.num_attributes();
        let v_pts = breakpoints((0..k).map(|c| self.p_m(c, xs)));
        let mut cells = Vec::new();
        for vw in v_pts.windows(2) {
            let (a, b) = (vw[0], vw[1]);
            if b <= a {
                continue;
            }
            let v = 0.5 * (a + b);
            let m: Vec<usize> = (0..k).map(|c| inverse_cdf(self.p_m(c, xs), v)).collect();
            let u_pts = breakpoints((0..k).map(|c| self.p_x_given[xs][c][m[c]].as_slice()));
            for uw in u_pts.windows(2) {
                let (a2, b2) = (uw[0], uw[1]);
                if b2 <= a2 {
                    continue;
                }
                let u = 0.5 * (a2 + b2);
                let x = (0..k)
                    .map(|c| inverse_cdf(&self.p_x_given[xs][c][m[c]], u))
                    .collect();
                cells.push(CounterfactualCell {
                    weight: (b - a) * (b2 - a2),
                    m: m.clone(),
                    x,
                });
            }
        }
        cells
    }

    fn replaced_x(
        cell: &CounterfactualCell,
        c_obs: usize,
        c: usize,
        tau: TauModel,
    ) -> [(f64, usize); 2] {
        match tau {
            TauModel::Exact => [(1.0, cell.x[c]), (0.0, cell.x[c])],
            TauModel::KeepOriginal { keep } => [(1.0 - keep, cell.x[c]), (keep, cell.x[c_obs])],
        }
    }

    /// Exact population value of the counterfactually augmented risk: the
    /// average over all K targets of the loss on the augmentation of a
    /// training draw (the factual x is kept at its own attribute).
    pub fn augmented_risk(
        &self,
        h: &[usize],
        policy: &InterventionPolicy,
        tau: TauModel,
    ) -> Result<f64> {
        self.check_hypothesis(h)?;
        self.validate()?;
        let k = self.num_attributes();
        let q = policy.resolve(&self.p_c_given_y, k)?;
        let mut total = 0.0;
        for (y, &py) in self.p_y.iter().enumerate() {
            for (s, &ps) in self.p_xstar_given_y[y].iter().enumerate() {
                let cells = self.counterfactual_cells(s);
                for (c_obs, &pc) in q[y].iter().enumerate() {
                    let w0 = py * ps * pc;
                    if w0 == 0.0 {
                        continue;
                    }
                    for cell in &cells {
                        let mut inner = 0.0;
                        for c in 0..k {
                            if c == c_obs {
                                inner += (h[cell.x[c_obs]] != y) as u8 as f64;
                                continue;
                            }
                            for (p, x) in Self::replaced_x(cell, c_obs, c, tau) {
                                inner += p * (h[x] != y) as u8 as f64;
                            }
                        }
                        total += w0 * cell.weight * inner / k as f64;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Distribution of the potential outcome X(c) (independent of the policy).
    pub fn interventional_x(&self, c: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_x()];
        if c >= self.num_attributes() {
            return Err(Error::OutOfRange(format!("attribute {c}")));
        }
        self.validate()?;
        for (y, &py) in self.p_y.iter().enumerate() {
            for (s, &ps) in self.p_xstar_given_y[y].iter().enumerate() {
                for (m, &pm) in self.p_m(c, s).iter().enumerate() {
                    for (x, &px) in self.p_x_given[s][c][m].iter().enumerate() {
                        out[x] += py * ps * pm * px;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Distribution of the augmentation towards attribute `c` applied to
    /// training draws (the original is kept when the draw already has `c`).
    pub fn augmentation_pushforward(
        &self,
        c: usize,
        policy: &InterventionPolicy,
        tau: TauModel,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        let k = self.num_attributes();
        if c >= k {
            return Err(Error::OutOfRange(format!("attribute {c}")));
        }
        let q = policy.resolve(&self.p_c_given_y, k)?;
        let mut out = vec![0.0; self.num_x()];
        for (y, &py) in self.p_y.iter().enumerate() {
            for (s, &ps) in self.p_xstar_given_y[y].iter().enumerate() {
                let cells = self.counterfactual_cells(s);
                for (c_obs, &pc) in q[y].iter().enumerate() {
                    for cell in &cells {
                        let w = py * ps * pc * cell.weight;
                        if c == c_obs {
                            out[cell.x[c]] += w;
                        } else {
                            for (p, x) in Self::replaced_x(cell, c_obs, c, tau) {
                                out[x] += w * p;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Samples units with their potential outcomes under the same noise
    /// coupling used by [`DiscreteDgp::counterfactual_cells`].
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        policy: &InterventionPolicy,
        rng: &mut R,
    ) -> Result<Vec<DiscreteDraw>> {
        self.validate()?;
        let k = self.num_attributes();
        let q = policy.resolve(&self.p_c_given_y, k)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let y = sample_categorical(&self.p_y, rng);
            let xstar = sample_categorical(&self.p_xstar_given_y[y], rng);
            let c = sample_categorical(&q[y], rng);
            let v: f64 = rng.random();
            let u: f64 = rng.random();
            let x_cf: Vec<usize> = (0..k)
                .map(|cc| {
                    let m = inverse_cdf(self.p_m(cc, xstar), v);
                    inverse_cdf(&self.p_x_given[xstar][cc][m], u)
                })
                .collect();
            let m = inverse_cdf(self.p_m(c, xstar), v);
            out.push(DiscreteDraw {
                y,
                xstar,
                c,
                m,
                x: x_cf[c],
                x_cf,
            });
        }
        Ok(out)
    }
}
