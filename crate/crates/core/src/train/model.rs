use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Classifier;

/// Binary logistic model: `P(Y=1 | x) = sigma(w . x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// Text form, one value per line: `dim`, `L` (= 2), the weights, the bias.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.dim())?;
        writeln!(w, "2")?;
        for v in &self.weights {
            writeln!(w, "{v}")?;
        }
        writeln!(w, "{}", self.bias)?;
        Ok(())
    }

    pub fn read_text<R: Read>(r: R, label: &str) -> Result<Self> {
        let lines: Vec<String> = BufReader::new(r)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect();
        let schema = |row: usize, message: String| Error::Schema {
            path: label.to_string(),
            row,
            message,
        };
        let get = |i: usize| -> Result<&str> {
            lines
                .get(i)
                .map(|s| s.trim())
                .ok_or_else(|| schema(i + 1, "unexpected end of model".into()))
        };
        let dim: usize = get(0)?
            .parse()
            .map_err(|_| schema(1, "bad dimension".into()))?;
        let classes: usize = get(1)?
            .parse()
            .map_err(|_| schema(2, "bad class count".into()))?;
        if classes != 2 {
            return Err(schema(
                2,
                format!("only binary models are supported, got L={classes}"),
            ));
        }
        if lines.len() != dim + 3 {
            return Err(schema(
                lines.len(),
                format!("expected {} values, found {}", dim + 3, lines.len()),
            ));
        }
        let parse = |i: usize| -> Result<f64> {
            get(i)?
                .parse()
                .map_err(|_| schema(i + 1, format!("bad value `{}`", lines[i])))
        };
        let weights = (0..dim).map(|j| parse(2 + j)).collect::<Result<Vec<_>>>()?;
        let bias = parse(dim + 2)?;
        let model = Self { weights, bias };
        if !model.is_finite() {
            return Err(schema(0, "non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_text(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::read_text(fs::File::open(path)?, &path.display().to_string())
    }
}

impl Classifier for LinearModel {
    fn predict(&self, x: &[f64]) -> usize {
        (self.logit(x) > 0.0) as usize
    }
}
