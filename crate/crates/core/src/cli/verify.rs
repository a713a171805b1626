//! Randomized check families behind the `verify` subcommand.
//!
//! Case `i` of a family draws from its own generator seeded by
//! `derive_seed(derive_seed(seed, family), i)`, so the outcome does not
//! depend on how cases are spread over threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{frobenius, powers_stormer_check, spd_sqrt, sqrt_perturbation_check, SymMatrix};
use crate::measures::{check_moment_bounds, moment_product_check, Ensemble};
use crate::noise::derive_seed;
use crate::objectives::{verify_assumptions, GrowthCertificate, Objective};

/// Relative Frobenius error allowed when squaring `spd_sqrt(C)` back.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckFamily {
    /// The four weighted-moment bounds on random ensembles.
    MomentBounds,
    /// `‖√A − √B‖₂ ≤ 2 √‖B⁻¹‖₂ ‖A − B‖₂`.
    SqrtPerturbation,
    /// `‖√A − √B‖_F² ≤ ‖A − B‖₁`.
    PowersStormer,
    /// `spd_sqrt(C)² = C`.
    SqrtReconstruction,
    /// Growth conditions of the built-in objectives.
    Assumptions,
    /// `(∫|x|^p)(∫|x|^q) ≤ ∫|x|^{p+q}`.
    MomentProduct,
}

impl CheckFamily {
    pub fn all() -> Vec<CheckFamily> {
        vec![
            CheckFamily::MomentBounds,
            CheckFamily::SqrtPerturbation,
            CheckFamily::PowersStormer,
            CheckFamily::SqrtReconstruction,
            CheckFamily::Assumptions,
            CheckFamily::MomentProduct,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckFamily::MomentBounds => "moment-bounds",
            CheckFamily::SqrtPerturbation => "sqrt-perturbation",
            CheckFamily::PowersStormer => "powers-stormer",
            CheckFamily::SqrtReconstruction => "sqrt-reconstruction",
            CheckFamily::Assumptions => "assumptions",
            CheckFamily::MomentProduct => "moment-product",
        }
    }

    /// Cases per family; for `Assumptions` it is the sample count per
    /// objective.
    pub fn default_cases(&self) -> usize {
        match self {
            CheckFamily::Assumptions => 10_000,
            _ => 1000,
        }
    }

    fn index(&self) -> u64 {
        *self as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyOutcome {
    pub family: CheckFamily,
    pub cases: usize,
    pub failures: usize,
    /// Smallest `rhs − lhs` over every inequality checked; negative on failure.
    pub worst_margin: f64,
}

struct Case {
    failed: bool,
    margin: f64,
}

fn case_rng(seed: u64, family: CheckFamily, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, family.index()), i as u64))
}

/// Uniformly distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// `Q diag(λ) Qᵀ` with `log₁₀ λ` uniform in `[-3, 2]`; with `rank_deficient`
/// each eigenvalue is zero with probability ¼.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, d: usize, rank_deficient: bool) -> SymMatrix {
    let q = random_orthogonal(rng, d);
    let values: Vec<f64> = (0..d)
        .map(|_| {
            let zero = rank_deficient && rng.random::<f64>() < 0.25;
            if zero { 0.0 } else { 10f64.powf(rng.random_range(-3.0..2.0)) }
        })
        .collect();
    let scaled = DMatrix::from_fn(d, d, |i, k| q[(i, k)] * values[k]);
    SymMatrix::new(&scaled * q.transpose()).expect("finite by construction")
}

fn random_ensemble<R: Rng + ?Sized>(rng: &mut R, j: usize, d: usize, half_width: f64) -> Ensemble {
    let data = (0..j * d).map(|_| rng.random_range(-half_width..=half_width)).collect();
    Ensemble::from_flat(j, d, data).expect("finite by construction")
}

/// `|x|²/2` whose certificate wrongly claims `c_l = 10`.
pub fn corrupted_quadratic(d: usize) -> Objective {
    let q = Objective::centered_quadratic(d).expect("d ≥ 1");
    let cert = GrowthCertificate { c_l: 10.0, ..*q.certificate() };
    q.with_certificate(cert)
}

fn reference_quadratic(d: usize, corrupt: bool) -> Objective {
    if corrupt {
        corrupted_quadratic(d)
    } else {
        Objective::centered_quadratic(d).expect("d ≥ 1")
    }
}

const BETAS: [f64; 3] = [0.1, 1.0, 10.0];

fn moment_bounds_case(rng: &mut ChaCha8Rng, corrupt: bool) -> Result<Case> {
    let j = rng.random_range(2..=64);
    let d = rng.random_range(1..=8);
    let beta = BETAS[rng.random_range(0..BETAS.len())];
    let ens = random_ensemble(rng, j, d, 20.0);
    let report = check_moment_bounds(&ens, &reference_quadratic(d, corrupt), beta)?;
    let checks = report.checks();
    Ok(Case {
        failed: checks.iter().any(|c| !c.pass),
        margin: checks.iter().map(|c| c.margin()).fold(f64::INFINITY, f64::min),
    })
}

fn sqrt_perturbation_case(rng: &mut ChaCha8Rng) -> Result<Case> {
    let d = rng.random_range(1..=8);
    let b = random_psd(rng, d, false);
    let a = if rng.random::<bool>() {
        random_psd(rng, d, true)
    } else {
        // nearby PSD matrix
        let e = random_psd(rng, d, true);
        let scale = 10f64.powf(rng.random_range(-6.0..0.0));
        SymMatrix::new(b.as_matrix() + e.as_matrix() * scale)?
    };
    let c = sqrt_perturbation_check(&a, &b)?;
    Ok(Case { failed: !c.pass, margin: c.margin() })
}

fn powers_stormer_case(rng: &mut ChaCha8Rng) -> Result<Case> {
    let d = rng.random_range(1..=8);
    let a = random_psd(rng, d, true);
    let b = random_psd(rng, d, true);
    let c = powers_stormer_check(&a, &b)?;
    Ok(Case { failed: !c.pass, margin: c.margin() })
}

fn reconstruction_case(rng: &mut ChaCha8Rng) -> Result<Case> {
    let d = rng.random_range(1..=16);
    let c = random_psd(rng, d, true);
    let s = spd_sqrt(&c)?;
    let err = frobenius(&(s.as_matrix() * s.as_matrix() - c.as_matrix()));
    let scale = c.frobenius();
    let rel = if scale > 0.0 { err / scale } else { err };
    Ok(Case { failed: rel > RECONSTRUCTION_TOL, margin: RECONSTRUCTION_TOL - rel })
}

fn moment_product_case(rng: &mut ChaCha8Rng) -> Result<Case> {
    let j = rng.random_range(2..=64);
    let d = rng.random_range(1..=8);
    let ens = random_ensemble(rng, j, d, 20.0);
    let p = rng.random_range(0.0..4.0);
    let q = rng.random_range(0.0..4.0);
    let c = moment_product_check(&ens, p, q)?;
    Ok(Case { failed: !c.pass, margin: c.margin() })
}

/// Objectives probed by the `Assumptions` family: `|x|²/2`, a shifted
/// quadratic with a random SPD matrix, and Rastrigin-plus-quadratic.
pub fn assumption_objectives(seed: u64, corrupt: bool) -> Result<Vec<Objective>> {
    let mut rng = case_rng(seed, CheckFamily::Assumptions, usize::MAX);
    let a = random_psd(&mut rng, 3, false);
    let m: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
    Ok(vec![
        reference_quadratic(2, corrupt),
        Objective::quadratic(m, a)?,
        Objective::rastrigin(2, 1.0)?,
    ])
}

fn assumptions(seed: u64, samples: usize, corrupt: bool) -> Result<FamilyOutcome> {
    let objectives = assumption_objectives(seed, corrupt)?;
    let reports: Vec<_> = objectives
        .par_iter()
        .enumerate()
        .map(|(k, obj)| verify_assumptions(obj, &mut case_rng(seed, CheckFamily::Assumptions, k), samples))
        .collect::<Result<_>>()?;
    Ok(FamilyOutcome {
        family: CheckFamily::Assumptions,
        cases: samples * objectives.len(),
        failures: reports.iter().map(|r| r.total_violations()).sum(),
        worst_margin: reports
            .iter()
            .flat_map(|r| r.worst_margins)
            .fold(f64::INFINITY, f64::min),
    })
}

/// Runs one family over `cases` seeded cases.
pub fn run_family(family: CheckFamily, cases: usize, seed: u64, corrupt: bool) -> Result<FamilyOutcome> {
    if family == CheckFamily::Assumptions {
        return assumptions(seed, cases, corrupt);
    }
    let results: Vec<Case> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, family, i);
            match family {
                CheckFamily::MomentBounds => moment_bounds_case(&mut rng, corrupt),
                CheckFamily::SqrtPerturbation => sqrt_perturbation_case(&mut rng),
                CheckFamily::PowersStormer => powers_stormer_case(&mut rng),
                CheckFamily::SqrtReconstruction => reconstruction_case(&mut rng),
                CheckFamily::MomentProduct => moment_product_case(&mut rng),
                CheckFamily::Assumptions => unreachable!("handled above"),
            }
        })
        .collect::<Result<_>>()?;
    Ok(FamilyOutcome {
        family,
        cases,
        failures: results.iter().filter(|c| c.failed).count(),
        worst_margin: results.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min),
    })
}
