//! Weak Fokker–Planck residual of the empirical measure flow.
//!
//! For a test function `φ ∈ C_c²` the residual at time `t` is
//!
//! ```text
//! F = ⟨φ, ρ_t⟩ − ⟨φ, ρ_0⟩ + ∫₀ᵗ ⟨(x − M_β(ρ_s))·∇φ, ρ_s⟩ ds
//!       − λ⁻¹ ∫₀ᵗ Σ_{i,k} C_β(ρ_s)_{ik} ⟨∂_i∂_k φ, ρ_s⟩ ds
//! ```
//!
//! which vanishes for weak solutions of the mean-field equation. For the
//! empirical measures of the CBS particle system, `E|F|²` decays like `1/J`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{integrate, DynamicsConfig, TrajectoryRecord};
use crate::error::{invalid, Error, Result};
use crate::measures::Ensemble;
use crate::noise::derive_seed;
use crate::objectives::Objective;

use super::bump::BumpTestFunction;

/// Bootstrap resamples used for the slope interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Evaluates the residual at recorded time `t` with trapezoidal quadrature
/// over the recording grid.
pub fn fp_residual(traj: &TrajectoryRecord, phi: &BumpTestFunction, t: f64) -> Result<f64> {
    let end = traj
        .times
        .iter()
        .position(|&s| s == t)
        .ok_or_else(|| invalid(format!("time {t} is not a recorded time of the trajectory")))?;
    if traj.snapshots[0].dim() != phi.dim() {
        return Err(invalid("test function and trajectory dimensions differ"));
    }
    let inv_lambda = 1.0 / traj.lambda;
    let integrand = |k: usize| -> f64 {
        let ens = &traj.snapshots[k];
        let moments = &traj.weighted[k];
        let n = ens.len() as f64;
        let mut drift = 0.0;
        let mut diffusion = 0.0;
        for p in ens.particles() {
            let g = phi.gradient(p);
            drift += p.iter().zip(&moments.mean).zip(&g).map(|((x, m), gi)| (x - m) * gi).sum::<f64>();
            diffusion += phi.hessian_contract(p, &moments.cov);
        }
        drift / n - inv_lambda * diffusion / n
    };
    let mean_phi = |ens: &Ensemble| ens.particles().map(|p| phi.value(p)).sum::<f64>() / ens.len() as f64;

    let mut integral = 0.0;
    let mut prev = integrand(0);
    for k in 1..=end {
        let cur = integrand(k);
        integral += 0.5 * (prev + cur) * (traj.times[k] - traj.times[k - 1]);
        prev = cur;
    }
    Ok(mean_phi(&traj.snapshots[end]) - mean_phi(&traj.snapshots[0]) + integral)
}

/// One replicate of a residual sweep.
#[derive(Clone, Debug)]
pub struct ReplicateRun {
    pub j: usize,
    pub rep: usize,
    pub seed: u64,
    pub residual: f64,
    pub final_ensemble: Ensemble,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualSample {
    pub j: usize,
    pub rep: usize,
    pub seed: u64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JSummary {
    pub j: usize,
    pub reps: usize,
    pub mean_square: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FPResidualReport {
    pub samples: Vec<ResidualSample>,
    pub per_j: Vec<JSummary>,
    /// Least-squares slope of `log E[F²]` against `log J`.
    pub slope: f64,
    pub intercept: f64,
    /// Percentile bootstrap 95% interval for the slope.
    pub slope_ci: [f64; 2],
}

fn validate_sweep(base: &DynamicsConfig, j_list: &[usize], seeds: &[u64]) -> Result<()> {
    if seeds.len() < 10 {
        return Err(invalid(format!("need at least 10 replicates, got {}", seeds.len())));
    }
    if j_list.len() < 3 {
        return Err(invalid(format!("need at least 3 ensemble sizes to fit, got {}", j_list.len())));
    }
    if j_list[0] < 2 || j_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("ensemble sizes must be ≥ 2 and strictly ascending"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("replicate seeds must be distinct"));
    }
    if base.record_stride != 1 {
        return Err(invalid("residual studies need record_stride = 1"));
    }
    DynamicsConfig { particles: j_list[0], ..base.clone() }.validate()
}

/// Replicate seeds `derive_seed(base, r)`. They do not depend on `J`, so
/// replicate `r` of every ensemble size shares initial draws and noise for
/// its common particles.
pub fn replicate_seeds(base_seed: u64, reps: usize) -> Vec<u64> {
    (0..reps as u64).map(|r| derive_seed(base_seed, r)).collect()
}

/// Runs every `(J, replicate)` pair and evaluates the residual at `t_final`.
/// Runs are spread over the current rayon pool; the output is ordered by
/// `(J, replicate)` regardless of scheduling.
pub fn fp_residual_sweep(
    base: &DynamicsConfig,
    obj: &Objective,
    j_list: &[usize],
    seeds: &[u64],
    phi: &BumpTestFunction,
) -> Result<Vec<ReplicateRun>> {
    validate_sweep(base, j_list, seeds)?;
    let jobs: Vec<(usize, usize, u64)> = j_list
        .iter()
        .flat_map(|&j| seeds.iter().enumerate().map(move |(r, &s)| (j, r, s)))
        .collect();
    jobs.par_iter()
        .map(|&(j, rep, seed)| {
            let cfg = DynamicsConfig { particles: j, seed, ..base.clone() };
            let traj = integrate(&cfg, obj)?;
            let residual = fp_residual(&traj, phi, cfg.t_final)?;
            Ok(ReplicateRun { j, rep, seed, residual, final_ensemble: traj.final_snapshot().clone() })
        })
        .collect()
}

/// Ordinary least squares `y = a + b x`; returns `(b, a)`.
pub fn fit_log_log_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

impl FPResidualReport {
    /// Aggregates replicate residuals and bootstraps the slope by resampling
    /// replicates within each `J`.
    pub fn from_runs(runs: &[ReplicateRun], bootstrap_seed: u64) -> Result<Self> {
        let mut samples: Vec<ResidualSample> = runs
            .iter()
            .map(|r| ResidualSample { j: r.j, rep: r.rep, seed: r.seed, residual: r.residual })
            .collect();
        samples.sort_by_key(|s| (s.j, s.rep));
        let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
        for s in &samples {
            match groups.last_mut() {
                Some((j, v)) if *j == s.j => v.push(s.residual),
                _ => groups.push((s.j, vec![s.residual])),
            }
        }
        if groups.len() < 2 {
            return Err(invalid("need at least two ensemble sizes to fit a slope"));
        }
        let mean_square = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let per_j: Vec<JSummary> = groups
            .iter()
            .map(|(j, v)| JSummary { j: *j, reps: v.len(), mean_square: mean_square(v) })
            .collect();
        if per_j.iter().any(|s| !(s.mean_square > 0.0 && s.mean_square.is_finite())) {
            return Err(Error::Unsupported(
                "mean-square residual is zero or non-finite for some J; no slope to fit".into(),
            ));
        }
        let xs: Vec<f64> = per_j.iter().map(|s| (s.j as f64).ln()).collect();
        let ys: Vec<f64> = per_j.iter().map(|s| s.mean_square.ln()).collect();
        let (slope, intercept) = fit_log_log_slope(&xs, &ys);

        let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
        let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut resampled = Vec::new();
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let ys: Vec<f64> = groups
                .iter()
                .map(|(_, v)| {
                    resampled.clear();
                    resampled.extend((0..v.len()).map(|_| v[rng.random_range(0..v.len())]));
                    mean_square(&resampled).ln()
                })
                .collect();
            let (b, _) = fit_log_log_slope(&xs, &ys);
            if b.is_finite() {
                boot.push(b);
            }
        }
        boot.sort_by(f64::total_cmp);
        let pick = |q: f64| boot[((q * boot.len() as f64) as usize).min(boot.len() - 1)];
        let slope_ci = if boot.is_empty() { [f64::NAN; 2] } else { [pick(0.025), pick(0.975)] };
        Ok(Self { samples, per_j, slope, intercept, slope_ci })
    }
}

/// Residual sweep over `j_list` with `reps` replicates per size, fitted.
pub fn fp_residual_scaling(
    base: &DynamicsConfig,
    obj: &Objective,
    j_list: &[usize],
    reps: usize,
    phi: &BumpTestFunction,
) -> Result<FPResidualReport> {
    let seeds = replicate_seeds(base.seed, reps);
    let runs = fp_residual_sweep(base, obj, j_list, &seeds, phi)?;
    FPResidualReport::from_runs(&runs, derive_seed(base.seed, u64::MAX))
}
