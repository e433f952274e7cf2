use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::XiMode;
use crate::error::{Error, Result};
use crate::metrics::MiUnit;
use crate::train::TrainConfig;

/// A method of the synthetic study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Erm,
    Reweight,
    Mmd {
        gamma: f64,
    },
    Irmv1 {
        gamma: f64,
    },
    GroupDro {
        eta_q: f64,
    },
    AugOracle,
    AugCorrupt {
        lambdas: Vec<f64>,
    },
    AugDiffInDiff,
    /// Bayes classifier on the invariant block (no training).
    XstarBayes,
}

/// One trained variant: a method with at most one corruption level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MethodCell {
    Erm,
    Reweight,
    Mmd(f64),
    Irmv1(f64),
    GroupDro(f64),
    AugOracle,
    AugCorrupt(f64),
    AugDiffInDiff,
    XstarBayes,
}

impl MethodCell {
    pub fn name(&self) -> &'static str {
        match self {
            MethodCell::Erm => "erm",
            MethodCell::Reweight => "reweight",
            MethodCell::Mmd(_) => "mmd",
            MethodCell::Irmv1(_) => "irmv1",
            MethodCell::GroupDro(_) => "group_dro",
            MethodCell::AugOracle => "aug_oracle",
            MethodCell::AugCorrupt(_) => "aug_corrupt",
            MethodCell::AugDiffInDiff => "aug_diff_in_diff",
            MethodCell::XstarBayes => "xstar_bayes",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            MethodCell::AugOracle => Some(1.0),
            MethodCell::AugCorrupt(l) => Some(*l),
            _ => None,
        }
    }

    /// The method's hyperparameter, if any (penalty weight or group step).
    pub fn param(&self) -> Option<f64> {
        match self {
            MethodCell::Mmd(g) | MethodCell::Irmv1(g) | MethodCell::GroupDro(g) => Some(*g),
            _ => None,
        }
    }

    pub fn is_augmentation(&self) -> bool {
        matches!(
            self,
            MethodCell::AugOracle | MethodCell::AugCorrupt(_) | MethodCell::AugDiffInDiff
        )
    }

    /// Stable label used in seeds and output, e.g. `aug_corrupt(0.3)`.
    pub fn label(&self) -> String {
        match (self.lambda(), self.param()) {
            (Some(l), _) if matches!(self, MethodCell::AugCorrupt(_)) => {
                format!("{}({l})", self.name())
            }
            (_, Some(p)) => format!("{}({p})", self.name()),
            _ => self.name().to_string(),
        }
    }
}

impl MethodSpec {
    pub fn cells(&self) -> Vec<MethodCell> {
        match self {
            MethodSpec::Erm => vec![MethodCell::Erm],
            MethodSpec::Reweight => vec![MethodCell::Reweight],
            MethodSpec::Mmd { gamma } => vec![MethodCell::Mmd(*gamma)],
            MethodSpec::Irmv1 { gamma } => vec![MethodCell::Irmv1(*gamma)],
            MethodSpec::GroupDro { eta_q } => vec![MethodCell::GroupDro(*eta_q)],
            MethodSpec::AugOracle => vec![MethodCell::AugOracle],
            MethodSpec::AugCorrupt { lambdas } => {
                lambdas.iter().map(|&l| MethodCell::AugCorrupt(l)).collect()
            }
            MethodSpec::AugDiffInDiff => vec![MethodCell::AugDiffInDiff],
            MethodSpec::XstarBayes => vec![MethodCell::XstarBayes],
        }
    }
}

/// Closed MI interval used to sample one attribute table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiBucket {
    pub lo: f64,
    pub hi: f64,
}

/// Buckets `[start + i*step, start + (i+1)*step]` covering `[start, stop]`.
pub fn mi_buckets(start: f64, stop: f64, step: f64) -> Vec<MiBucket> {
    let count = ((stop - start) / step - 1e-9).ceil().max(0.0) as usize;
    (0..count)
        .map(|i| MiBucket {
            lo: start + i as f64 * step,
            hi: (start + (i + 1) as f64 * step).min(stop),
        })
        .collect()
}

/// Configuration of the synthetic sweeps and bound reports. Every field has
/// a default, so a JSON file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub methods: Vec<MethodSpec>,
    pub n_list: Vec<usize>,
    pub mi_buckets: Vec<MiBucket>,
    pub mi_unit: MiUnit,
    pub repetitions: usize,
    pub base_seed: u64,
    pub delta: f64,
    pub out_dir: PathBuf,
    /// Size of each fresh evaluation sample.
    pub n_mc: usize,
    pub xi_mode: XiMode,
    pub class_mean_norm: f64,
    pub attr_mean_norm: f64,
    pub train: TrainConfig,
    /// Worker threads; `None` uses all cores.
    pub parallelism: Option<usize>,
    /// Optional model/data artifacts for `bounds`.
    pub model_path: Option<PathBuf>,
    pub data_path: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                MethodSpec::Erm,
                MethodSpec::Reweight,
                MethodSpec::AugOracle,
                MethodSpec::AugCorrupt {
                    lambdas: vec![0.2, 0.3],
                },
            ],
            n_list: vec![600],
            mi_buckets: vec![MiBucket { lo: 0.7, hi: 0.8 }],
            mi_unit: MiUnit::Bits,
            repetitions: 15,
            base_seed: 0,
            delta: 0.05,
            out_dir: PathBuf::from("out"),
            n_mc: 10_000,
            xi_mode: XiMode::PerPair,
            class_mean_norm: 1.0 / 3.0,
            attr_mean_norm: 60.0,
            train: TrainConfig::default(),
            parallelism: None,
            model_path: None,
            data_path: None,
        }
    }
}

impl SweepConfig {
    /// The correlation sweep grid: buckets of width 0.05 over [0, 0.9],
    /// N = 600, 30 repetitions.
    pub fn corr_sweep_grid() -> Self {
        Self {
            mi_buckets: mi_buckets(0.0, 0.9, 0.05),
            repetitions: 30,
            ..Self::default()
        }
    }

    /// The sample-size sweep: MI in [0.7, 0.8], 15 repetitions.
    pub fn n_sweep_grid() -> Self {
        Self {
            methods: vec![
                MethodSpec::Erm,
                MethodSpec::Reweight,
                MethodSpec::AugCorrupt {
                    lambdas: vec![0.2, 0.3],
                },
            ],
            n_list: vec![200, 600, 2000],
            ..Self::default()
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn method_cells(&self) -> Vec<MethodCell> {
        self.methods.iter().flat_map(MethodSpec::cells).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad(format!("sample sizes {:?}", self.n_list));
        }
        if self.mi_buckets.is_empty() {
            return bad("no MI buckets".into());
        }
        let max = self.mi_unit.max_for(2, 8);
        for b in &self.mi_buckets {
            if !(b.lo >= 0.0 && b.lo < b.hi && b.lo <= max) {
                return bad(format!(
                    "MI bucket [{}, {}] outside [0, {max:.4}] {}",
                    b.lo,
                    b.hi,
                    self.mi_unit.label()
                ));
            }
        }
        for cell in self.method_cells() {
            if let Some(l) = cell.lambda() {
                if !(l > 0.0 && l <= 1.0) {
                    return bad(format!("lambda {l} outside (0, 1]"));
                }
            }
            match cell {
                MethodCell::Mmd(g) | MethodCell::Irmv1(g) if !(g >= 0.0) => {
                    return bad(format!("penalty {g}"))
                }
                MethodCell::GroupDro(e) if !(e > 0.0) => return bad(format!("eta_q {e}")),
                _ => {}
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {}", self.delta));
        }
        if self.n_mc == 0 {
            return bad("n_mc must be at least 1".into());
        }
        if !(self.class_mean_norm > 0.0 && self.attr_mean_norm > 0.0) {
            return bad("mean norms must be positive".into());
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be at least 1".into());
        }
        self.train.validate()
    }
}
