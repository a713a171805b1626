//! Euler–Maruyama integration of the two consensus particle systems.
//!
//! CBO: `dθ = −(θ − M_β) dt + λ⁻¹ diag(|θ − M_β|) dW`
//!
//! CBS: `dθ = −(θ − M_β) dt + √(2λ⁻¹ C_β) dW`
//!
//! `M_β`, `C_β` are the weighted mean and covariance of the current
//! ensemble. CBS with `λ = 1` is an optimizer; with `λ = (1 + β)⁻¹` it samples
//! `exp(−f)` when `f` is quadratic.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{spd_sqrt, SymMatrix};
use crate::measures::{weighted_moments, Ensemble, WeightedMoments};
use crate::noise::{NoiseStream, INIT_STREAM};
use crate::objectives::Objective;
use rand::Rng;
use rand_distr::StandardNormal;

/// Particles farther than this from the origin abort the integration.
pub const BLOW_UP_NORM: f64 = 1e8;

/// Largest admissible step: the explicit drift factor `1 − dt` must stay
/// well away from zero.
pub const MAX_DT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Cbo,
    Cbs,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Cbo => "cbo",
            Mode::Cbs => "cbs",
        }
    }
}

/// How `|θ − M|` enters the CBO diffusion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CboNoise {
    /// `diag(|θ_1 − M_1|, …, |θ_d − M_d|)`
    #[default]
    Componentwise,
    /// `|θ − M| · I` with the Euclidean norm.
    Isotropic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    Gaussian { mean: Vec<f64>, cov: SymMatrix },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    Explicit(Ensemble),
}

impl InitialLaw {
    pub fn standard_gaussian(dim: usize) -> Self {
        InitialLaw::Gaussian { mean: vec![0.0; dim], cov: SymMatrix::identity(dim) }
    }

    fn dim(&self) -> usize {
        match self {
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::UniformBox { lo, .. } => lo.len(),
            InitialLaw::Explicit(e) => e.dim(),
        }
    }

    fn validate(&self, particles: usize) -> Result<()> {
        match self {
            InitialLaw::Gaussian { mean, cov } => {
                if cov.dim() != mean.len() {
                    return Err(invalid("initial covariance does not match the mean dimension"));
                }
                if mean.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("initial mean must be finite"));
                }
                spd_sqrt(cov).map(|_| ())
            }
            InitialLaw::UniformBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(invalid("box corners have different dimensions"));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
                    return Err(invalid("box corners must be finite with lo ≤ hi"));
                }
                Ok(())
            }
            InitialLaw::Explicit(e) => {
                if e.len() != particles {
                    return Err(invalid(format!(
                        "explicit initial ensemble has {} particles but the config asks for {particles}",
                        e.len()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Draws `particles` i.i.d. samples; particle `j` only uses its own
    /// window of the initialization stream.
    pub fn sample(&self, particles: usize, noise: &NoiseStream) -> Result<Ensemble> {
        self.validate(particles)?;
        let d = self.dim();
        let data = match self {
            InitialLaw::Explicit(e) => return Ok(e.clone()),
            InitialLaw::Gaussian { mean, cov } => {
                let root = spd_sqrt(cov)?;
                let r = root.as_matrix();
                let mut out = Vec::with_capacity(particles * d);
                for j in 0..particles {
                    let mut rng = noise.rng(INIT_STREAM, j);
                    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    for i in 0..d {
                        out.push(mean[i] + (0..d).map(|k| r[(i, k)] * z[k]).sum::<f64>());
                    }
                }
                out
            }
            InitialLaw::UniformBox { lo, hi } => {
                let mut out = Vec::with_capacity(particles * d);
                for j in 0..particles {
                    let mut rng = noise.rng(INIT_STREAM, j);
                    for i in 0..d {
                        let u: f64 = rng.random();
                        out.push(lo[i] + (hi[i] - lo[i]) * u);
                    }
                }
                out
            }
        };
        Ensemble::from_flat(particles, d, data)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsConfig {
    pub mode: Mode,
    pub lambda: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_final: f64,
    pub particles: usize,
    pub seed: u64,
    pub record_stride: usize,
    pub init: InitialLaw,
    pub cbo_noise: CboNoise,
}

impl DynamicsConfig {
    /// `λ = (1 + β)⁻¹`, the sampling choice.
    pub fn sampling_lambda(beta: f64) -> f64 {
        1.0 / (1.0 + beta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("beta", self.beta)?;
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        if self.dt > self.t_final {
            return Err(invalid(format!("dt = {} exceeds t_final = {}", self.dt, self.t_final)));
        }
        if self.dt > MAX_DT {
            return Err(invalid(format!("dt = {} exceeds the maximum step {MAX_DT}", self.dt)));
        }
        if self.particles < 2 {
            return Err(invalid("need at least 2 particles"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride must be ≥ 1"));
        }
        self.init.validate(self.particles)
    }

    /// Number of steps; the last one is shortened when `t_final` is not a
    /// multiple of `dt`.
    pub fn num_steps(&self) -> usize {
        let ratio = self.t_final / self.dt;
        let nearest = ratio.round();
        let n = if (ratio - nearest).abs() <= 1e-9 * ratio { nearest } else { ratio.ceil() };
        (n as usize).max(1)
    }

    fn step_time(&self, k: usize, n: usize) -> f64 {
        if k >= n {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }
}

fn check_step_args(ens: &Ensemble, obj: &Objective, dt: f64, noise: &[f64]) -> Result<()> {
    if noise.len() != ens.len() * ens.dim() {
        return Err(invalid(format!(
            "noise has {} entries, expected {} × {}",
            noise.len(),
            ens.len(),
            ens.dim()
        )));
    }
    if ens.dim() != obj.dim() {
        return Err(invalid("ensemble and objective dimensions differ"));
    }
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(invalid(format!("dt must be nonnegative, got {dt}")));
    }
    Ok(())
}

fn cbo_advance(
    ens: &Ensemble,
    mean: &[f64],
    lambda: f64,
    dt: f64,
    noise: &[f64],
    kind: CboNoise,
) -> Ensemble {
    let d = ens.dim();
    let scale = dt.sqrt() / lambda;
    let mut out = Vec::with_capacity(ens.as_flat().len());
    for (p, xi) in ens.particles().zip(noise.chunks_exact(d)) {
        let radius = match kind {
            CboNoise::Componentwise => 0.0,
            CboNoise::Isotropic => p.iter().zip(mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>().sqrt(),
        };
        for i in 0..d {
            let gap = p[i] - mean[i];
            let amp = match kind {
                CboNoise::Componentwise => gap.abs(),
                CboNoise::Isotropic => radius,
            };
            out.push(p[i] + dt * (mean[i] - p[i]) + scale * amp * xi[i]);
        }
    }
    Ensemble::from_flat_unchecked(ens.len(), d, out)
}

fn cbs_advance(ens: &Ensemble, mean: &[f64], root: &SymMatrix, dt: f64, noise: &[f64]) -> Ensemble {
    let d = ens.dim();
    let s = root.as_matrix();
    let h = dt.sqrt();
    let mut out = Vec::with_capacity(ens.as_flat().len());
    for (p, xi) in ens.particles().zip(noise.chunks_exact(d)) {
        for i in 0..d {
            let kick: f64 = (0..d).map(|k| s[(i, k)] * xi[k]).sum();
            out.push(p[i] + dt * (mean[i] - p[i]) + h * kick);
        }
    }
    Ensemble::from_flat_unchecked(ens.len(), d, out)
}

/// `√(2λ⁻¹ C)`, shared by every particle in a CBS step.
pub fn cbs_noise_factor(cov: &SymMatrix, lambda: f64) -> Result<SymMatrix> {
    let scaled = SymMatrix::new(cov.as_matrix() * (2.0 / lambda))?;
    spd_sqrt(&scaled)
}

/// One CBO step with the componentwise diffusion.
pub fn cbo_step(
    ens: &Ensemble,
    obj: &Objective,
    lambda: f64,
    beta: f64,
    dt: f64,
    noise: &[f64],
) -> Result<Ensemble> {
    cbo_step_with(ens, obj, lambda, beta, dt, noise, CboNoise::Componentwise)
}

pub fn cbo_step_with(
    ens: &Ensemble,
    obj: &Objective,
    lambda: f64,
    beta: f64,
    dt: f64,
    noise: &[f64],
    kind: CboNoise,
) -> Result<Ensemble> {
    check_step_args(ens, obj, dt, noise)?;
    let moments = weighted_moments(ens, obj, beta)?;
    if dt == 0.0 {
        return Ok(ens.clone());
    }
    Ok(cbo_advance(ens, &moments.mean, lambda, dt, noise, kind))
}

pub fn cbs_step(
    ens: &Ensemble,
    obj: &Objective,
    lambda: f64,
    beta: f64,
    dt: f64,
    noise: &[f64],
) -> Result<Ensemble> {
    check_step_args(ens, obj, dt, noise)?;
    let moments = weighted_moments(ens, obj, beta)?;
    let root = cbs_noise_factor(&moments.cov, lambda)?;
    if dt == 0.0 {
        return Ok(ens.clone());
    }
    Ok(cbs_advance(ens, &moments.mean, &root, dt, noise))
}

/// Conditional law of one CBS step given the current ensemble: particle
/// `j` moves to `means[j] + √dt · S ξ_j`, so its conditional covariance is
/// `dt · S Sᵀ`.
#[derive(Clone, Debug)]
pub struct CbsTransition {
    pub means: Ensemble,
    pub noise_factor: SymMatrix,
    pub dt: f64,
}

impl CbsTransition {
    pub fn conditional_covariance(&self) -> DMatrix<f64> {
        let s = self.noise_factor.as_matrix();
        s * s.transpose() * self.dt
    }
}

pub fn cbs_transition(
    ens: &Ensemble,
    obj: &Objective,
    lambda: f64,
    beta: f64,
    dt: f64,
) -> Result<CbsTransition> {
    let zeros = vec![0.0; ens.len() * ens.dim()];
    check_step_args(ens, obj, dt, &zeros)?;
    let moments = weighted_moments(ens, obj, beta)?;
    let root = cbs_noise_factor(&moments.cov, lambda)?;
    Ok(CbsTransition { means: cbs_advance(ens, &moments.mean, &root, dt, &zeros), noise_factor: root, dt })
}

/// Time-indexed snapshots and per-snapshot statistics of one run.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub mode: Mode,
    pub lambda: f64,
    pub beta: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Ensemble>,
    pub weighted: Vec<WeightedMoments>,
    /// `(1/J) Σ |θʲ|^{2p}` for `p = 1, 2, 3`.
    pub raw_moments: Vec<[f64; 3]>,
    /// Smallest eigenvalue of `C_β`.
    pub min_cov_eig: Vec<f64>,
    pub consensus_spread: Vec<f64>,
}

impl TrajectoryRecord {
    fn new(cfg: &DynamicsConfig) -> Self {
        Self {
            mode: cfg.mode,
            lambda: cfg.lambda,
            beta: cfg.beta,
            times: Vec::new(),
            snapshots: Vec::new(),
            weighted: Vec::new(),
            raw_moments: Vec::new(),
            min_cov_eig: Vec::new(),
            consensus_spread: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, ens: &Ensemble, moments: &WeightedMoments) {
        self.times.push(t);
        self.raw_moments.push([ens.abs_moment(2.0), ens.abs_moment(4.0), ens.abs_moment(6.0)]);
        self.min_cov_eig.push(moments.cov.min_eigenvalue());
        self.consensus_spread.push(ens.consensus_spread());
        self.snapshots.push(ens.clone());
        self.weighted.push(moments.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_snapshot(&self) -> &Ensemble {
        self.snapshots.last().expect("a trajectory always records t = 0")
    }

    pub fn final_moments(&self) -> &WeightedMoments {
        self.weighted.last().expect("a trajectory always records t = 0")
    }

    /// Smallest `λ_min(C_β)` over the recorded times: the empirical
    /// non-degeneracy floor of the diffusion.
    pub fn nondegeneracy_floor(&self) -> f64 {
        self.min_cov_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs the configured dynamics from a freshly sampled initial ensemble.
///
/// Identical `(cfg, obj)` give bit-identical records on one platform.
pub fn integrate(cfg: &DynamicsConfig, obj: &Objective) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if cfg.init.dim() != obj.dim() {
        return Err(invalid(format!(
            "initial law has dimension {} but the objective has dimension {}",
            cfg.init.dim(),
            obj.dim()
        )));
    }
    let noise = NoiseStream::new(cfg.seed);
    let mut ens = cfg.init.sample(cfg.particles, &noise)?;
    let n = cfg.num_steps();
    let mut record = TrajectoryRecord::new(cfg);

    for k in 0..n {
        let moments = weighted_moments(&ens, obj, cfg.beta)?;
        if k % cfg.record_stride == 0 {
            record.push(cfg.step_time(k, n), &ens, &moments);
        }
        let h = if k + 1 == n { cfg.t_final - (n - 1) as f64 * cfg.dt } else { cfg.dt };
        let xi = noise.step_normals(k, ens.len(), ens.dim());
        ens = match cfg.mode {
            Mode::Cbo => cbo_advance(&ens, &moments.mean, cfg.lambda, h, &xi, cfg.cbo_noise),
            Mode::Cbs => {
                let root = cbs_noise_factor(&moments.cov, cfg.lambda)?;
                cbs_advance(&ens, &moments.mean, &root, h, &xi)
            }
        };
        let norm = ens.max_norm();
        if norm.is_nan() || norm > BLOW_UP_NORM {
            return Err(Error::BlowUp { step: k + 1, norm: if norm.is_nan() { f64::INFINITY } else { norm } });
        }
    }
    let moments = weighted_moments(&ens, obj, cfg.beta)?;
    record.push(cfg.t_final, &ens, &moments);
    Ok(record)
}

/// Parameters of the Gaussian `∝ exp(−f)` for quadratic `f`: mean `m`,
/// covariance `A⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianReference {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

pub fn gaussian_stationary_reference(obj: &Objective) -> Result<GaussianReference> {
    let form = obj.quadratic_form().ok_or_else(|| {
        Error::Unsupported(format!("objective '{}' is not quadratic", obj.name()))
    })?;
    let inv = form
        .matrix
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| invalid("quadratic matrix is singular"))?;
    Ok(GaussianReference { mean: form.center.clone(), cov: SymMatrix::new(inv)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn x_squared() -> Objective {
        Objective::black_box("x^2", 1, Arc::new(|x: &[f64]| x[0] * x[0])).unwrap()
    }

    fn line(xs: &[f64]) -> Ensemble {
        Ensemble::from_flat(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn config(mode: Mode) -> DynamicsConfig {
        DynamicsConfig {
            mode,
            lambda: 1.0,
            beta: 1.0,
            dt: 0.01,
            t_final: 0.1,
            particles: 8,
            seed: 5,
            record_stride: 1,
            init: InitialLaw::standard_gaussian(2),
            cbo_noise: CboNoise::Componentwise,
        }
    }

    #[test]
    fn consensus_is_fixed_for_both_steppers() {
        let ens = Ensemble::from_points(&vec![vec![0.3, -1.7]; 5]).unwrap();
        let q = Objective::centered_quadratic(2).unwrap();
        let noise: Vec<f64> = (0..10).map(|k| k as f64 - 4.5).collect();
        assert_eq!(cbo_step(&ens, &q, 1.0, 2.0, 0.1, &noise).unwrap(), ens);
        assert_eq!(cbs_step(&ens, &q, 0.5, 2.0, 0.1, &noise).unwrap(), ens);
    }

    #[test]
    fn zero_step_is_identity() {
        let ens = line(&[-1.0, -0.0, 2.5]);
        assert_eq!(cbo_step(&ens, &x_squared(), 1.0, 1.0, 0.0, &[1.0, 2.0, 3.0]).unwrap(), ens);
        assert_eq!(cbs_step(&ens, &x_squared(), 1.0, 1.0, 0.0, &[1.0, 2.0, 3.0]).unwrap(), ens);
    }

    #[test]
    fn drift_only_step_example() {
        // M = −w_low with w_low = e⁻¹ / (1 + e⁻¹)
        let ens = line(&[-1.0, 0.0]);
        let cbo = cbo_step(&ens, &x_squared(), 1.0, 1.0, 0.1, &[0.0, 0.0]).unwrap();
        let cbs = cbs_step(&ens, &x_squared(), 1.0, 1.0, 0.1, &[0.0, 0.0]).unwrap();
        assert_eq!(cbo, cbs);
        assert!((cbo.particle(0)[0] + 0.92689).abs() < 1e-4);
        assert!((cbo.particle(1)[0] + 0.02689).abs() < 1e-4);
    }

    #[test]
    fn cbs_step_with_unit_noise_example() {
        let w = (-1f64).exp() / (1.0 + (-1f64).exp());
        let mean = -w;
        let var = w * (1.0 - w).powi(2) + (1.0 - w) * w * w;
        let kick = 0.2 * (2.0 * var).sqrt();
        let out = cbs_step(&line(&[-1.0, 0.0]), &x_squared(), 1.0, 1.0, 0.04, &[1.0, 1.0]).unwrap();
        let expect = [-1.0 + 0.04 * (mean + 1.0) + kick, 0.04 * mean + kick];
        for (j, e) in expect.iter().enumerate() {
            assert!((out.particle(j)[0] - e).abs() < 1e-12);
        }
        assert!((kick - 0.12541).abs() < 1e-4);
        assert!((out.particle(0)[0] + 0.84535).abs() < 1e-4);
        assert!((out.particle(1)[0] - 0.11466).abs() < 1e-4);
    }

    #[test]
    fn cbo_noise_uses_componentwise_gap() {
        let ens = Ensemble::from_points(&[vec![1.0, 0.0], vec![1.0, 4.0]]).unwrap();
        let flat = Objective::black_box("flat", 2, Arc::new(|_: &[f64]| 0.0)).unwrap();
        // M = (1, 2); gaps (0, ∓2)
        let out = cbo_step(&ens, &flat, 2.0, 1.0, 0.25, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(out.particle(0), &[1.0, 0.5 + 0.5]);
        assert_eq!(out.particle(1), &[1.0, 3.5 + 0.5]);
        let iso = cbo_step_with(&ens, &flat, 2.0, 1.0, 0.25, &[1.0; 4], CboNoise::Isotropic).unwrap();
        assert_eq!(iso.particle(0), &[1.5, 1.0]);
    }

    #[test]
    fn step_shape_errors() {
        assert!(cbo_step(&line(&[0.0, 1.0]), &x_squared(), 1.0, 1.0, 0.1, &[0.0]).is_err());
        assert!(cbs_step(&line(&[0.0, 1.0]), &x_squared(), 1.0, 1.0, 0.1, &[0.0; 3]).is_err());
    }

    #[test]
    fn single_step_records_two_times() {
        let mut cfg = config(Mode::Cbs);
        cfg.t_final = cfg.dt;
        let q = Objective::centered_quadratic(2).unwrap();
        let rec = integrate(&cfg, &q).unwrap();
        assert_eq!(rec.times, vec![0.0, 0.01]);
    }

    #[test]
    fn partial_final_step_lands_on_horizon() {
        let mut cfg = config(Mode::Cbo);
        cfg.t_final = 0.035;
        cfg.record_stride = 2;
        let q = Objective::centered_quadratic(2).unwrap();
        let rec = integrate(&cfg, &q).unwrap();
        assert_eq!(cfg.num_steps(), 4);
        assert_eq!(rec.times, vec![0.0, 0.02, 0.035]);
        assert!(rec.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cbs_optimization_contracts_at_the_mean_field_rate() {
        // Gaussian closure for f = |x|²/2, β = λ = 1: per-coordinate variance
        // obeys v' = −2v²/(1 + v), i.e. ln v − 1/v = −1 − 2t from v(0) = 1.
        let (mut lo, mut hi) = (1e-3f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid.ln() - 1.0 / mid + 11.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let v = lo;
        assert!((v - 0.1133).abs() < 1e-3);
        let q = Objective::centered_quadratic(2).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let cfg = DynamicsConfig { particles: 50, t_final: 5.0, record_stride: 50, seed, ..config(Mode::Cbs) };
            let rec = integrate(&cfg, &q).unwrap();
            ratios.push(rec.consensus_spread.last().unwrap() / rec.consensus_spread[0]);
        }
        let mean = ratios.iter().sum::<f64>() / 5.0;
        assert!(mean < 2.0 * v && mean > 0.25 * v, "{ratios:?} vs {v}");
    }

    #[test]
    fn explicit_consensus_never_moves() {
        let start = Ensemble::from_points(&vec![vec![0.5, 0.25]; 6]).unwrap();
        let mut cfg = config(Mode::Cbs);
        cfg.particles = 6;
        cfg.init = InitialLaw::Explicit(start.clone());
        let rec = integrate(&cfg, &Objective::centered_quadratic(2).unwrap()).unwrap();
        assert!(rec.snapshots.iter().all(|s| *s == start));
        assert!(rec.consensus_spread.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn integration_is_deterministic() {
        let q = Objective::rastrigin(2, 1.0).unwrap();
        for mode in [Mode::Cbo, Mode::Cbs] {
            let a = integrate(&config(mode), &q).unwrap();
            let b = integrate(&config(mode), &q).unwrap();
            assert_eq!(a.snapshots, b.snapshots);
            assert_eq!(a.weighted, b.weighted);
        }
    }

    #[test]
    fn config_validation() {
        let q = Objective::centered_quadratic(2).unwrap();
        let mut cfg = config(Mode::Cbs);
        cfg.dt = 0.6;
        cfg.t_final = 1.0;
        assert!(integrate(&cfg, &q).is_err());
        let mut cfg = config(Mode::Cbs);
        cfg.dt = 0.2;
        assert!(integrate(&cfg, &q).is_err());
        let mut cfg = config(Mode::Cbs);
        cfg.particles = 1;
        assert!(integrate(&cfg, &q).is_err());
        let mut cfg = config(Mode::Cbs);
        cfg.init = InitialLaw::standard_gaussian(3);
        assert!(integrate(&cfg, &q).is_err());
    }

    #[test]
    fn blow_up_guard_trips() {
        // λ tiny makes the CBO diffusion explode within a few steps
        let mut cfg = config(Mode::Cbo);
        cfg.lambda = 1e-9;
        cfg.t_final = 0.5;
        match integrate(&cfg, &Objective::centered_quadratic(2).unwrap()) {
            Err(Error::BlowUp { step, .. }) => assert!(step >= 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn stationary_reference_examples() {
        let r = gaussian_stationary_reference(&Objective::centered_quadratic(2).unwrap()).unwrap();
        assert_eq!(r.mean, vec![0.0, 0.0]);
        assert_eq!(r.cov, SymMatrix::identity(2));

        let q = Objective::quadratic(vec![1.0, 2.0], SymMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        let r = gaussian_stationary_reference(&q).unwrap();
        assert_eq!(r.mean, vec![1.0, 2.0]);
        assert_eq!(r.cov, SymMatrix::from_diagonal(&[0.5, 0.25]));

        let rast = Objective::rastrigin(2, 1.0).unwrap();
        assert!(matches!(gaussian_stationary_reference(&rast), Err(Error::Unsupported(_))));
    }
}
