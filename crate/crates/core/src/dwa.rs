//! Dynamic weight average over task losses with a history window.
//!
//! With window `b`, the descent rate of task `k` at iteration `i` is
//! `w_k = Σ_{j=1..b} L_k(i-j) / Σ_{j=b+1..2b} L_k(i-j)` and the weights are
//! `λ = K · softmax(w / T)`. Until `2b` losses have been seen every weight is 1.
//! `b = 1` is the classic two-step ratio `L_k(i-1) / L_k(i-2)`.

use std::collections::VecDeque;

pub const DEFAULT_WINDOW: usize = 12;
pub const DEFAULT_TEMPERATURE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DwaError {
    #[error("loss for task {task} is {value}, must be positive")]
    NonPositiveLoss { task: usize, value: f64 },
    #[error("loss for task {task} is not a number")]
    NaNLoss { task: usize },
    #[error("expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

#[derive(Clone, Debug)]
pub struct DwaState {
    tasks: usize,
    window: usize,
    temperature: f64,
    /// Per task, most recent loss last; at most `2 * window` entries.
    history: Vec<VecDeque<f64>>,
    iteration: usize,
}

impl DwaState {
    pub fn new(tasks: usize, window: usize, temperature: f64) -> Result<DwaState, DwaError> {
        if tasks == 0 {
            return Err(DwaError::Config("need at least one task"));
        }
        if window == 0 {
            return Err(DwaError::Config("window must be at least 1"));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(DwaError::Config("temperature must be positive and finite"));
        }
        Ok(DwaState { tasks, window, temperature, history: vec![VecDeque::with_capacity(2 * window); tasks], iteration: 0 })
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Number of updates so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn warmed_up(&self) -> bool {
        self.history[0].len() == 2 * self.window
    }

    /// Descent rates `w_k` from the current history, `None` during warm-up.
    pub fn rates(&self) -> Option<Vec<f64>> {
        if !self.warmed_up() {
            return None;
        }
        let b = self.window;
        Some(
            self.history
                .iter()
                .map(|h| {
                    // h[0] is L(i-2b), h[2b-1] is L(i-1)
                    let recent: f64 = h.iter().skip(b).sum();
                    let older: f64 = h.iter().take(b).sum();
                    recent / older
                })
                .collect(),
        )
    }

    /// Weights for the next iteration, without touching the history.
    pub fn weights(&self) -> Vec<f64> {
        let Some(rates) = self.rates() else {
            return vec![1.0; self.tasks];
        };
        let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = rates.iter().map(|w| ((w - max) / self.temperature).exp()).collect();
        let total: f64 = exps.iter().sum();
        let k = self.tasks as f64;
        exps.iter().map(|e| k * e / total).collect()
    }

    /// Returns the weights for iteration `i` (from losses before `i`), then
    /// records `losses`, the losses observed at `i`.
    pub fn update(&mut self, losses: &[f64]) -> Result<Vec<f64>, DwaError> {
        if losses.len() != self.tasks {
            return Err(DwaError::DimensionMismatch { expected: self.tasks, found: losses.len() });
        }
        for (task, &value) in losses.iter().enumerate() {
            if value.is_nan() {
                return Err(DwaError::NaNLoss { task });
            }
            if !(value > 0.0 && value.is_finite()) {
                return Err(DwaError::NonPositiveLoss { task, value });
            }
        }
        let weights = self.weights();
        for (h, &l) in self.history.iter_mut().zip(losses) {
            if h.len() == 2 * self.window {
                h.pop_front();
            }
            h.push_back(l);
        }
        self.iteration += 1;
        Ok(weights)
    }
}

/// `Σ λ_k L_k`.
pub fn total_loss(losses: &[f64], weights: &[f64]) -> Result<f64, DwaError> {
    if losses.len() != weights.len() {
        return Err(DwaError::DimensionMismatch { expected: weights.len(), found: losses.len() });
    }
    Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
}

/// Replays a loss log, returning the weights used at each step.
pub fn trajectory(losses: &[Vec<f64>], window: usize, temperature: f64) -> Result<Vec<Vec<f64>>, DwaError> {
    let tasks = losses.first().map_or(1, Vec::len);
    let mut state = DwaState::new(tasks, window, temperature)?;
    losses.iter().map(|row| state.update(row)).collect()
}
