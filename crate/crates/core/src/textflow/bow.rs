use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Count-vector vocabulary: tokens with document frequency of at least
/// `min_df` in the fitting corpus, in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>, min_df: usize) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<String> = tokenize(doc).into_iter().collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let tokens: Vec<String> = df
            .into_iter()
            .filter(|&(_, n)| n >= min_df)
            .map(|(t, _)| t)
            .collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token counts; out-of-vocabulary tokens are ignored.
    pub fn transform(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.tokens.len()];
        for t in tokenize(text) {
            if let Some(&i) = self.index.get(&t) {
                v[i] += 1.0;
            }
        }
        v
    }
}
