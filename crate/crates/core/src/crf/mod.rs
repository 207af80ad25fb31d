//! Linear-chain CRF for EDU boundary labeling.
//!
//! Scores are kept in log space everywhere. A label path `y` over `T`
//! tokens scores
//!
//! ```text
//! start[y0] + Σ_t emit(t, y_t) + Σ_{t>0} trans[y_{t-1}][y_t] + stop[y_{T-1}]
//! ```
//!
//! with `emit(t, y) = Σ_f W[y][f] · x[t][f]`.

mod features;
mod io;
mod segmenter;
mod train;

pub use features::{FeatureExtractor, FeatureMatrix, HashedWindowFeatures};
pub use io::{read_model, write_model};
pub use segmenter::{edus_to_labels, labels_to_edus, Boundary, Segmenter};
pub use train::{train, Optimizer, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label index {0} out of range")]
    LabelOutOfRange(usize),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("model file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// CRF parameters, also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfParams {
    pub num_labels: usize,
    pub feature_dim: usize,
    /// `[num_labels × feature_dim]`, row-major.
    pub emission: Vec<f64>,
    /// `[from × to]`, row-major.
    pub transition: Vec<f64>,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
}

impl CrfParams {
    pub fn zeros(num_labels: usize, feature_dim: usize) -> CrfParams {
        CrfParams {
            num_labels,
            feature_dim,
            emission: vec![0.0; num_labels * feature_dim],
            transition: vec![0.0; num_labels * num_labels],
            start: vec![0.0; num_labels],
            stop: vec![0.0; num_labels],
        }
    }

    /// All parameter blocks, in a fixed order.
    pub fn blocks(&self) -> [&[f64]; 4] {
        [&self.emission, &self.transition, &self.start, &self.stop]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.emission, &mut self.transition, &mut self.start, &mut self.stop]
    }

    pub fn fill(&mut self, value: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v = value);
        }
    }

    fn trans(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.num_labels + to]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    pub labels: Vec<String>,
    pub params: CrfParams,
}

impl CrfModel {
    /// Zero-initialized model over `labels`.
    pub fn new(labels: Vec<String>, feature_dim: usize) -> Result<CrfModel, CrfError> {
        if labels.len() < 2 {
            return Err(CrfError::DimensionMismatch { what: "label set size", expected: 2, found: labels.len() });
        }
        let params = CrfParams::zeros(labels.len(), feature_dim);
        Ok(CrfModel { labels, params })
    }

    /// Zero-initialized `{B, I}` model.
    pub fn boundary(feature_dim: usize) -> CrfModel {
        CrfModel::new(vec!["B".into(), "I".into()], feature_dim).expect("two labels")
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.params.feature_dim
    }

    pub fn validate(&self) -> Result<(), CrfError> {
        let p = &self.params;
        let l = self.labels.len();
        let checks = [
            ("label set size", 2.max(l), l),
            ("num_labels", l, p.num_labels),
            ("emission", l * p.feature_dim, p.emission.len()),
            ("transition", l * l, p.transition.len()),
            ("start", l, p.start.len()),
            ("stop", l, p.stop.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(CrfError::DimensionMismatch { what, expected, found });
            }
        }
        if p.blocks().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(CrfError::NonFinite);
        }
        Ok(())
    }

    fn check_features(&self, features: &FeatureMatrix) -> Result<(), CrfError> {
        if features.dim() != self.feature_dim() {
            return Err(CrfError::DimensionMismatch { what: "feature dim", expected: self.feature_dim(), found: features.dim() });
        }
        if features.is_empty() {
            return Err(CrfError::EmptySequence);
        }
        Ok(())
    }

    /// Emission scores `[T × L]`, row-major.
    pub fn emissions(&self, features: &FeatureMatrix) -> Result<Vec<f64>, CrfError> {
        self.check_features(features)?;
        let l = self.num_labels();
        let d = self.feature_dim();
        let mut out = vec![0.0; features.len() * l];
        for (t, row) in features.rows().iter().enumerate() {
            for y in 0..l {
                let w = &self.params.emission[y * d..(y + 1) * d];
                out[t * l + y] = row.iter().map(|&(f, x)| w[f as usize] * x).sum();
            }
        }
        Ok(out)
    }

    /// Score of one label path.
    pub fn path_score(&self, features: &FeatureMatrix, labels: &[usize]) -> Result<f64, CrfError> {
        let emit = self.emissions(features)?;
        self.check_labels(features.len(), labels)?;
        Ok(self.path_score_with(&emit, labels))
    }

    fn check_labels(&self, len: usize, labels: &[usize]) -> Result<(), CrfError> {
        if labels.len() != len {
            return Err(CrfError::DimensionMismatch { what: "gold labels", expected: len, found: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.num_labels()) {
            return Err(CrfError::LabelOutOfRange(bad));
        }
        Ok(())
    }

    fn path_score_with(&self, emit: &[f64], labels: &[usize]) -> f64 {
        let l = self.num_labels();
        let p = &self.params;
        let mut s = p.start[labels[0]];
        for (t, &y) in labels.iter().enumerate() {
            s += emit[t * l + y];
            if t > 0 {
                s += p.trans(labels[t - 1], y);
            }
        }
        s + p.stop[labels[labels.len() - 1]]
    }

    /// Highest-scoring label path and its score. Ties go to the lower label
    /// index, both for back-pointers and for the final label.
    pub fn viterbi(&self, features: &FeatureMatrix) -> Result<(Vec<usize>, f64), CrfError> {
        let emit = self.emissions(features)?;
        let l = self.num_labels();
        let n = features.len();
        let p = &self.params;
        let mut delta: Vec<f64> = (0..l).map(|y| p.start[y] + emit[y]).collect();
        let mut back = vec![0usize; n * l];
        let mut next = vec![0.0; l];
        for t in 1..n {
            for y in 0..l {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (prev, &d) in delta.iter().enumerate() {
                    let s = d + p.trans(prev, y);
                    if s > best {
                        best = s;
                        arg = prev;
                    }
                }
                next[y] = best + emit[t * l + y];
                back[t * l + y] = arg;
            }
            std::mem::swap(&mut delta, &mut next);
        }
        let mut best = f64::NEG_INFINITY;
        let mut last = 0;
        for (y, (d, stop)) in delta.iter().zip(&p.stop).enumerate().take(l) {
            let s = d + stop;
            if s > best {
                best = s;
                last = y;
            }
        }
        let mut path = vec![last; n];
        for t in (1..n).rev() {
            path[t - 1] = back[t * l + path[t]];
        }
        Ok((path, best))
    }

    /// `log Z` by the forward algorithm.
    pub fn log_partition(&self, features: &FeatureMatrix) -> Result<f64, CrfError> {
        let emit = self.emissions(features)?;
        let alpha = self.forward(&emit, features.len());
        Ok(self.log_z(&alpha, features.len()))
    }

    fn forward(&self, emit: &[f64], n: usize) -> Vec<f64> {
        let l = self.num_labels();
        let p = &self.params;
        let mut alpha = vec![0.0; n * l];
        for y in 0..l {
            alpha[y] = p.start[y] + emit[y];
        }
        let mut buf = vec![0.0; l];
        for t in 1..n {
            for y in 0..l {
                for prev in 0..l {
                    buf[prev] = alpha[(t - 1) * l + prev] + p.trans(prev, y);
                }
                alpha[t * l + y] = log_sum_exp(&buf) + emit[t * l + y];
            }
        }
        alpha
    }

    fn backward(&self, emit: &[f64], n: usize) -> Vec<f64> {
        let l = self.num_labels();
        let p = &self.params;
        let mut beta = vec![0.0; n * l];
        beta[(n - 1) * l..].copy_from_slice(&p.stop);
        let mut buf = vec![0.0; l];
        for t in (0..n - 1).rev() {
            for y in 0..l {
                for nxt in 0..l {
                    buf[nxt] = p.trans(y, nxt) + emit[(t + 1) * l + nxt] + beta[(t + 1) * l + nxt];
                }
                beta[t * l + y] = log_sum_exp(&buf);
            }
        }
        beta
    }

    fn log_z(&self, alpha: &[f64], n: usize) -> f64 {
        let l = self.num_labels();
        let last: Vec<f64> = (0..l).map(|y| alpha[(n - 1) * l + y] + self.params.stop[y]).collect();
        log_sum_exp(&last)
    }

    /// `log p(gold | x) = score(gold) − log Z` and its exact gradient with
    /// respect to every parameter.
    pub fn log_likelihood(&self, features: &FeatureMatrix, gold: &[usize]) -> Result<(f64, CrfParams), CrfError> {
        let mut grad = CrfParams::zeros(self.num_labels(), self.feature_dim());
        let ll = self.accumulate_gradient(features, gold, &mut grad)?;
        Ok((ll, grad))
    }

    /// Adds the gradient of `log p(gold | x)` into `grad` and returns the
    /// log-likelihood.
    pub fn accumulate_gradient(&self, features: &FeatureMatrix, gold: &[usize], grad: &mut CrfParams) -> Result<f64, CrfError> {
        let emit = self.emissions(features)?;
        let n = features.len();
        self.check_labels(n, gold)?;
        if grad.num_labels != self.num_labels() || grad.feature_dim != self.feature_dim() {
            return Err(CrfError::DimensionMismatch { what: "gradient", expected: self.num_labels(), found: grad.num_labels });
        }
        let l = self.num_labels();
        let d = self.feature_dim();
        let p = &self.params;
        let alpha = self.forward(&emit, n);
        let beta = self.backward(&emit, n);
        let log_z = self.log_z(&alpha, n);

        for t in 0..n {
            let row = &features.rows()[t];
            for y in 0..l {
                let marginal = (alpha[t * l + y] + beta[t * l + y] - log_z).exp();
                let observed = if gold[t] == y { 1.0 } else { 0.0 };
                let coef = observed - marginal;
                if coef != 0.0 {
                    for &(f, x) in row {
                        grad.emission[y * d + f as usize] += coef * x;
                    }
                }
                if t == 0 {
                    grad.start[y] += coef;
                }
                if t == n - 1 {
                    grad.stop[y] += coef;
                }
            }
            if t > 0 {
                for a in 0..l {
                    for b in 0..l {
                        let pair = (alpha[(t - 1) * l + a] + p.trans(a, b) + emit[t * l + b] + beta[t * l + b] - log_z).exp();
                        grad.transition[a * l + b] -= pair;
                    }
                }
                grad.transition[gold[t - 1] * l + gold[t]] += 1.0;
            }
        }
        Ok(self.path_score_with(&emit, gold) - log_z)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_dense(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn decoupled_chain_is_per_token_argmax() {
        let mut m = CrfModel::boundary(2);
        m.params.emission = vec![1.0, -1.0, -1.0, 1.0]; // B likes f0, I likes f1
        let x = dense(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(m.viterbi(&x).unwrap().0, vec![0, 1, 1, 0]);
    }

    #[test]
    fn single_token() {
        let mut m = CrfModel::boundary(1);
        m.params.start = vec![0.5, 0.0];
        m.params.stop = vec![0.0, 0.2];
        m.params.emission = vec![0.0, 0.4];
        let x = dense(&[&[1.0]]);
        // B: 0.5, I: 0.6
        let (path, score) = m.viterbi(&x).unwrap();
        assert_eq!(path, vec![1]);
        assert!((score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn uniform_single_token_likelihood() {
        let m = CrfModel::boundary(1);
        let x = dense(&[&[0.0]]);
        let (ll, _) = m.log_likelihood(&x, &[0]).unwrap();
        assert!((ll + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_lower_label() {
        let m = CrfModel::boundary(1);
        let x = dense(&[&[1.0], &[1.0], &[1.0]]);
        assert_eq!(m.viterbi(&x).unwrap().0, vec![0, 0, 0]);
    }

    #[test]
    fn errors() {
        let m = CrfModel::boundary(2);
        assert!(matches!(m.viterbi(&dense(&[&[1.0]])), Err(CrfError::DimensionMismatch { .. })));
        assert!(matches!(m.viterbi(&FeatureMatrix::new(2, vec![])), Err(CrfError::EmptySequence)));
        let x = dense(&[&[1.0, 0.0]]);
        assert!(matches!(m.log_likelihood(&x, &[0, 1]), Err(CrfError::DimensionMismatch { .. })));
        assert!(matches!(m.log_likelihood(&x, &[5]), Err(CrfError::LabelOutOfRange(5))));
        assert!(CrfModel::new(vec!["B".into()], 2).is_err());
    }
}
