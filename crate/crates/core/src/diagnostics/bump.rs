use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::linalg::SymMatrix;

/// `φ(x) = (1 − |x − c|²/r²)³` inside the ball of radius `r`, zero outside.
/// Twice continuously differentiable with compact support.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpTestFunction {
    center: Vec<f64>,
    radius: f64,
}

pub fn make_bump(center: Vec<f64>, radius: f64) -> Result<BumpTestFunction> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid(format!("bump radius must be positive, got {radius}")));
    }
    if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
        return Err(invalid("bump center must be a finite point"));
    }
    Ok(BumpTestFunction { center, radius })
}

impl BumpTestFunction {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `1 − |x − c|²/r²`; positive exactly on the support.
    fn slack(&self, x: &[f64]) -> f64 {
        let r2 = self.radius * self.radius;
        1.0 - x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / r2
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.slack(x);
        if s > 0.0 {
            s * s * s
        } else {
            0.0
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.slack(x);
        if s <= 0.0 {
            return vec![0.0; x.len()];
        }
        let k = -6.0 * s * s / (self.radius * self.radius);
        x.iter().zip(&self.center).map(|(a, c)| k * (a - c)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let s = self.slack(x);
        if s <= 0.0 {
            return DMatrix::zeros(d, d);
        }
        let r2 = self.radius * self.radius;
        let diag = -6.0 * s * s / r2;
        let outer = 24.0 * s / (r2 * r2);
        DMatrix::from_fn(d, d, |i, k| {
            let u = (x[i] - self.center[i]) * (x[k] - self.center[k]);
            outer * u + if i == k { diag } else { 0.0 }
        })
    }

    /// `Σ_{i,k} C_ik ∂²φ/∂x_i∂x_k (x)` without forming the Hessian.
    pub fn hessian_contract(&self, x: &[f64], c: &SymMatrix) -> f64 {
        let s = self.slack(x);
        if s <= 0.0 {
            return 0.0;
        }
        let d = x.len();
        let r2 = self.radius * self.radius;
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let m = c.as_matrix();
        let mut quad = 0.0;
        for i in 0..d {
            for k in 0..d {
                quad += u[i] * m[(i, k)] * u[k];
            }
        }
        -6.0 * s * s * c.trace() / r2 + 24.0 * s * quad / (r2 * r2)
    }
}
