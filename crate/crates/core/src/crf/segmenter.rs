use std::io::{BufRead, Write};

use super::{read_model, train, write_model, CrfError, CrfModel, FeatureExtractor, HashedWindowFeatures, TrainConfig};
use crate::document::DocumentRecord;
use crate::tree::{Span, Token};

/// Token label: `B` starts an EDU, `I` continues one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    B,
    I,
}

impl Boundary {
    pub fn index(self) -> usize {
        match self {
            Boundary::B => 0,
            Boundary::I => 1,
        }
    }

    pub fn from_index(i: usize) -> Boundary {
        if i == 0 {
            Boundary::B
        } else {
            Boundary::I
        }
    }
}

/// EDUs starting at every `B` and at token 0 whatever its label.
pub fn labels_to_edus(labels: &[Boundary]) -> Vec<Span> {
    let mut edus = Vec::new();
    let mut start = 0;
    for (t, &b) in labels.iter().enumerate().skip(1) {
        if b == Boundary::B {
            edus.push(Span { first: start, last: t - 1 });
            start = t;
        }
    }
    if !labels.is_empty() {
        edus.push(Span { first: start, last: labels.len() - 1 });
    }
    edus
}

pub fn edus_to_labels(edus: &[Span], n: usize) -> Vec<Boundary> {
    let mut labels = vec![Boundary::I; n];
    for e in edus {
        if e.first < n {
            labels[e.first] = Boundary::B;
        }
    }
    labels
}

/// A `{B, I}` CRF paired with its hashed feature extractor.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmenter {
    pub model: CrfModel,
    pub features: HashedWindowFeatures,
}

impl Segmenter {
    pub fn segment(&self, tokens: &[Token]) -> Result<Vec<Boundary>, CrfError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let (path, _) = self.model.viterbi(&self.features.extract(tokens))?;
        Ok(path.into_iter().map(Boundary::from_index).collect())
    }

    /// Trains on the gold EDUs of `docs`.
    pub fn train(docs: &[DocumentRecord], features: HashedWindowFeatures, config: &TrainConfig) -> Result<(Segmenter, Vec<f64>), CrfError> {
        let data: Vec<_> = docs
            .iter()
            .filter(|d| !d.tokens.is_empty())
            .map(|d| {
                let gold = edus_to_labels(&d.edus, d.tokens.len()).into_iter().map(Boundary::index).collect();
                (features.extract(&d.tokens), gold)
            })
            .collect();
        let outcome = train(CrfModel::boundary(features.dim()), &data, config)?;
        Ok((Segmenter { model: outcome.model, features }, outcome.loss_curve))
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), CrfError> {
        write_model(w, &self.model, Some(&format!("hashed-window {}", self.features.bits)))
    }

    pub fn load<R: BufRead>(r: R) -> Result<Segmenter, CrfError> {
        let (model, feature_line) = read_model(r)?;
        let bad = || CrfError::Format { line: 3, msg: "expected `features hashed-window <bits>`".into() };
        let bits: u32 =
            feature_line.as_deref().and_then(|s| s.strip_prefix("hashed-window ")).and_then(|b| b.trim().parse().ok()).ok_or_else(bad)?;
        let features = HashedWindowFeatures { bits };
        if features.dim() != model.feature_dim() || model.labels != ["B", "I"] {
            return Err(bad());
        }
        Ok(Segmenter { model, features })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Boundary::{B, I};

    #[test]
    fn labels_to_spans() {
        assert_eq!(labels_to_edus(&[B, I, I, B, I]), vec![Span { first: 0, last: 2 }, Span { first: 3, last: 4 }]);
        assert_eq!(labels_to_edus(&[I, I, I]), vec![Span { first: 0, last: 2 }]);
        assert_eq!(labels_to_edus(&[B, B, B]), Span::unit_edus(3));
        assert!(labels_to_edus(&[]).is_empty());
    }

    #[test]
    fn edus_labels_inverse() {
        let edus = vec![Span { first: 0, last: 1 }, Span { first: 2, last: 5 }];
        assert_eq!(labels_to_edus(&edus_to_labels(&edus, 6)), edus);
    }
}
