use serde::{Deserialize, Serialize};

use super::PhaseError;

/// Parameters of `x_{n+1} = r x_n (1 - x_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    r: f64,
    x0: f64,
}

impl LogisticParams {
    pub fn new(r: f64, x0: f64) -> Result<Self, PhaseError> {
        if !((0.0..=4.0).contains(&r) && (0.0..=1.0).contains(&x0)) {
            return Err(PhaseError::InvalidLogisticParams { r, x0 });
        }
        Ok(Self { r, x0 })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

/// `x0` followed by `n` forward iterates.
pub fn logistic_iterate(params: LogisticParams, n: usize) -> Vec<f64> {
    let r = params.r;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = params.x0;
    out.push(x);
    for _ in 0..n {
        x = r * x * (1.0 - x);
        out.push(x);
    }
    out
}
