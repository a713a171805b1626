//! Empirical measures and their Gibbs reweighting.
//!
//! For an ensemble `θ¹ … θᴶ` and inverse temperature `β`, the reweighted
//! measure puts mass `ŵ_j ∝ exp(−β f(θʲ))` on particle `j`. Its mean and
//! covariance are the consensus point and the diffusion matrix of the
//! dynamics.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{psd_project, spd_sqrt, CheckReport, SymMatrix};
use crate::objectives::{GrowthCertificate, Objective};

/// `J` particles in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl Ensemble {
    pub fn from_flat(len: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if len < 2 {
            return Err(invalid(format!("ensemble needs at least 2 particles, got {len}")));
        }
        if dim == 0 {
            return Err(invalid("ensemble dimension must be ≥ 1"));
        }
        if data.len() != len * dim {
            return Err(invalid(format!(
                "expected {} coordinates for {len} particles in dimension {dim}, got {}",
                len * dim,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("particle {} has a non-finite coordinate", k / dim)));
        }
        Ok(Self { data, len, dim })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("all particles must have the same dimension"));
        }
        Self::from_flat(points.len(), dim, points.concat())
    }

    /// Caller guarantees shape and finiteness.
    pub(crate) fn from_flat_unchecked(len: usize, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), len * dim);
        Self { data, len, dim }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn particles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.particles().map(<[f64]>::to_vec).collect()
    }

    /// The first `n` particles.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.len {
            return Err(invalid(format!("cannot take {n} of {} particles", self.len)));
        }
        Self::from_flat(n, self.dim, self.data[..n * self.dim].to_vec())
    }

    /// Pushes every particle through `x ↦ A x + b`.
    pub fn map_affine(&self, a: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        let d = self.dim;
        if a.nrows() != d || a.ncols() != d || b.len() != d {
            return Err(invalid("affine map has the wrong shape"));
        }
        let mut out = Vec::with_capacity(self.data.len());
        for p in self.particles() {
            for i in 0..d {
                let mut v = b[i];
                for k in 0..d {
                    v += a[(i, k)] * p[k];
                }
                out.push(v);
            }
        }
        Self::from_flat(self.len, d, out)
    }

    /// Unweighted mean.
    pub fn sample_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for p in self.particles() {
            mean.iter_mut().zip(p).for_each(|(m, x)| *m += x);
        }
        let n = self.len as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Unweighted covariance of the empirical measure (normalized by `J`).
    pub fn sample_covariance(&self) -> SymMatrix {
        let uniform = vec![1.0 / self.len as f64; self.len];
        let mean = self.sample_mean();
        SymMatrix::new(centered_scatter(self, &uniform, &mean))
            .expect("scatter of finite particles is finite and square")
    }

    /// Trace of the unweighted covariance; zero exactly at consensus.
    pub fn consensus_spread(&self) -> f64 {
        let mean = self.sample_mean();
        let n = self.len as f64;
        self.particles()
            .map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
            .sum::<f64>()
            / n
    }

    pub fn max_norm(&self) -> f64 {
        self.particles().map(sq_norm).fold(0.0, f64::max).sqrt()
    }

    /// `(1/J) Σ |θʲ|^p`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        let n = self.len as f64;
        self.particles().map(|x| sq_norm(x).sqrt().powf(p)).sum::<f64>() / n
    }
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn centered_scatter(ens: &Ensemble, weights: &[f64], mean: &[f64]) -> DMatrix<f64> {
    let d = ens.dim();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for (p, &w) in ens.particles().zip(weights) {
        centered.iter_mut().zip(p.iter().zip(mean)).for_each(|(c, (x, m))| *c = x - m);
        for i in 0..d {
            let wi = w * centered[i];
            for k in i..d {
                cov[(i, k)] += wi * centered[k];
            }
        }
    }
    for i in 0..d {
        for k in 0..i {
            cov[(i, k)] = cov[(k, i)];
        }
    }
    cov
}

/// Normalized Gibbs weights of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsWeights {
    /// `ŵ_j`, summing to one.
    pub weights: Vec<f64>,
    /// `min_k f(θᵏ)`, subtracted before exponentiation.
    pub shift: f64,
    /// `log((1/J) Σ exp(−β (f(θʲ) − shift)))`.
    pub log_z: f64,
    /// Index of a particle attaining the minimum cost.
    pub best: usize,
}

impl GibbsWeights {
    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid(format!(
            "beta must be positive and finite, got {beta} (use 1e-12 for near-uniform weights)"
        )));
    }
    Ok(())
}

fn check_dims(ens: &Ensemble, obj: &Objective) -> Result<()> {
    if ens.dim() != obj.dim() {
        return Err(invalid(format!(
            "ensemble dimension {} does not match objective dimension {}",
            ens.dim(),
            obj.dim()
        )));
    }
    Ok(())
}

/// `ŵ_j = exp(−β(f(θʲ) − min f)) / Σ_l exp(−β(f(θˡ) − min f))`.
pub fn normalized_weights(ens: &Ensemble, obj: &Objective, beta: f64) -> Result<GibbsWeights> {
    check_beta(beta)?;
    check_dims(ens, obj)?;
    let mut costs = Vec::with_capacity(ens.len());
    for (index, p) in ens.particles().enumerate() {
        let c = obj.value(p);
        if !c.is_finite() {
            return Err(Error::NonFiniteObjective { index });
        }
        costs.push(c);
    }
    let (best, shift) = costs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
    let mut weights: Vec<f64> = costs.iter().map(|c| (-beta * (c - shift)).exp()).collect();
    let total = neumaier_sum(&weights);
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(GibbsWeights { weights, shift, log_z: (total / ens.len() as f64).ln(), best })
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Effective sample size `1 / Σ ŵ_j²`.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Weighted mean, covariance and weight diagnostics of one ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMoments {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub log_z: f64,
    pub shift: f64,
    pub ess: f64,
    pub beta: f64,
}

/// Mean relative to the best particle: `θ_best + Σ ŵ_j (θʲ − θ_best)`.
/// At consensus every difference is zero, so the mean equals the common
/// position exactly.
fn mean_from_weights(ens: &Ensemble, w: &GibbsWeights) -> Vec<f64> {
    let anchor = ens.particle(w.best);
    let mut acc = vec![0.0; ens.dim()];
    for (p, &wj) in ens.particles().zip(&w.weights) {
        acc.iter_mut().zip(p.iter().zip(anchor)).for_each(|(a, (x, r))| *a += wj * (x - r));
    }
    acc.iter().zip(anchor).map(|(a, r)| r + a).collect()
}

pub fn weighted_moments(ens: &Ensemble, obj: &Objective, beta: f64) -> Result<WeightedMoments> {
    let w = normalized_weights(ens, obj, beta)?;
    let mean = mean_from_weights(ens, &w);
    let cov = psd_project(&SymMatrix::new(centered_scatter(ens, &w.weights, &mean))?);
    Ok(WeightedMoments { mean, cov, log_z: w.log_z, shift: w.shift, ess: w.ess(), beta })
}

pub fn weighted_mean(ens: &Ensemble, obj: &Objective, beta: f64) -> Result<Vec<f64>> {
    let w = normalized_weights(ens, obj, beta)?;
    Ok(mean_from_weights(ens, &w))
}

pub fn weighted_covariance(ens: &Ensemble, obj: &Objective, beta: f64) -> Result<SymMatrix> {
    Ok(weighted_moments(ens, obj, beta)?.cov)
}

/// `Σ ŵ_j |θʲ|²`, the second moment of the reweighted measure.
pub fn reweighted_second_moment(ens: &Ensemble, obj: &Objective, beta: f64) -> Result<f64> {
    let w = normalized_weights(ens, obj, beta)?;
    Ok(ens.particles().zip(&w.weights).map(|(p, wj)| wj * sq_norm(p)).sum())
}

/// Constants of the reweighted second-moment bound
/// `∫|x|² dL_β μ ≤ b1 + b2 ∫|x|² dμ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    pub b1: f64,
    pub b2: f64,
}

/// `b2 = 2 (c_u / c_l) (1 + 1 / (β c_l M²))`, `b1 = M² + b2`.
pub fn bound_constants(cert: &GrowthCertificate, beta: f64) -> Result<BoundConstants> {
    if !cert.verified {
        return Err(Error::UnverifiedCertificate);
    }
    check_beta(beta)?;
    for (name, v) in [("c_u", cert.c_u), ("c_l", cert.c_l), ("M", cert.big_m)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("certificate constant {name} must be positive, got {v}")));
        }
    }
    let m2 = cert.big_m * cert.big_m;
    let b2 = 2.0 * (cert.c_u / cert.c_l) * (1.0 + 1.0 / (beta * cert.c_l * m2));
    Ok(BoundConstants { b1: m2 + b2, b2 })
}

/// The four weighted-moment bounds against a common right-hand side
/// `b1 + b2 (1/J) Σ |θʲ|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheckReport {
    pub constants: BoundConstants,
    /// `|M_β|²`
    pub mean_sq: CheckReport,
    /// `Σ ŵ_j |θʲ|²`
    pub second_moment: CheckReport,
    /// `‖C_β‖_F`
    pub cov_frobenius: CheckReport,
    /// `‖√C_β‖_F²`
    pub sqrt_cov_frobenius_sq: CheckReport,
}

impl BoundCheckReport {
    pub fn checks(&self) -> [CheckReport; 4] {
        [self.mean_sq, self.second_moment, self.cov_frobenius, self.sqrt_cov_frobenius_sq]
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }
}

pub fn check_moment_bounds(ens: &Ensemble, obj: &Objective, beta: f64) -> Result<BoundCheckReport> {
    let constants = bound_constants(obj.certificate(), beta)?;
    let moments = weighted_moments(ens, obj, beta)?;
    let rhs = constants.b1 + constants.b2 * ens.abs_moment(2.0);
    let second = reweighted_second_moment(ens, obj, beta)?;
    let root = spd_sqrt(&moments.cov)?;
    let root_f = root.frobenius();
    Ok(BoundCheckReport {
        constants,
        mean_sq: CheckReport::new(sq_norm(&moments.mean), rhs),
        second_moment: CheckReport::new(second, rhs),
        cov_frobenius: CheckReport::new(moments.cov.frobenius(), rhs),
        sqrt_cov_frobenius_sq: CheckReport::new(root_f * root_f, rhs),
    })
}

/// Product-of-moments inequality for the empirical measure:
/// `(∫|x|^p)(∫|x|^q) ≤ ∫|x|^{p+q}`.
pub fn moment_product_check(ens: &Ensemble, p: f64, q: f64) -> Result<CheckReport> {
    if !(p >= 0.0 && q >= 0.0) {
        return Err(invalid("moment exponents must be nonnegative"));
    }
    let lhs = ens.abs_moment(p) * ens.abs_moment(q);
    let rhs = ens.abs_moment(p + q);
    Ok(CheckReport { pass: lhs <= rhs * (1.0 + 1e-12), ..CheckReport::new(lhs, rhs) })
}
