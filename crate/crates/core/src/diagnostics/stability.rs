use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::measures::{weighted_moments, Ensemble};
use crate::noise::NoiseStream;
use crate::objectives::Objective;

use super::wasserstein::wasserstein2;

/// Response of `M_β`, `C_β` to one perturbation scale.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityEntry {
    pub epsilon: f64,
    /// `W₂` under the identity coupling; an upper bound on the exact value.
    pub w2_identity: f64,
    pub w2_exact: f64,
    pub mean_shift: f64,
    pub cov_shift: f64,
    /// `|ΔM| / W₂`, zero when nothing moved.
    pub mean_ratio: f64,
    /// `‖ΔC‖_F / W₂`, zero when nothing moved.
    pub cov_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub entries: Vec<StabilityEntry>,
    pub max_mean_ratio: f64,
    pub max_cov_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Perturbs every particle of `a` by `ε` along a seeded uniformly random
/// unit direction and measures how far the weighted moments move per unit
/// of Wasserstein-2 distance. The same directions are reused for every `ε`.
pub fn stability_ratios(
    a: &Ensemble,
    obj: &Objective,
    beta: f64,
    scales: &[f64],
    seed: u64,
) -> Result<StabilityReport> {
    if scales.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(invalid("perturbation scales must be finite and nonnegative"));
    }
    if scales.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("perturbation scales must be in descending order"));
    }
    let d = a.dim();
    let noise = NoiseStream::new(seed);
    let directions: Vec<Vec<f64>> = (0..a.len())
        .map(|j| {
            let mut rng = noise.rng(0, j);
            loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 {
                    break v.into_iter().map(|x| x / n).collect();
                }
            }
        })
        .collect();

    let base = weighted_moments(a, obj, beta)?;
    let mut entries = Vec::with_capacity(scales.len());
    for &epsilon in scales {
        let data: Vec<f64> = a
            .particles()
            .zip(&directions)
            .flat_map(|(p, u)| p.iter().zip(u).map(move |(x, ui)| x + epsilon * ui))
            .collect();
        let b = Ensemble::from_flat(a.len(), d, data)?;
        let w2_identity = (a
            .particles()
            .zip(b.particles())
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum::<f64>()
            / a.len() as f64)
            .sqrt();
        let w2_exact = wasserstein2(a, &b)?;
        let moved = weighted_moments(&b, obj, beta)?;
        let mean_shift = base
            .mean
            .iter()
            .zip(&moved.mean)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let cov_shift = crate::linalg::frobenius(&(base.cov.as_matrix() - moved.cov.as_matrix()));
        entries.push(StabilityEntry {
            epsilon,
            w2_identity,
            w2_exact,
            mean_shift,
            cov_shift,
            mean_ratio: ratio(mean_shift, w2_exact),
            cov_ratio: ratio(cov_shift, w2_exact),
        });
    }
    let max_mean_ratio = entries.iter().map(|e| e.mean_ratio).fold(0.0, f64::max);
    let max_cov_ratio = entries.iter().map(|e| e.cov_ratio).fold(0.0, f64::max);
    Ok(StabilityReport { entries, max_mean_ratio, max_cov_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scale_reports_zero() {
        let a = Ensemble::from_points(&[vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        let q = Objective::centered_quadratic(2).unwrap();
        let r = stability_ratios(&a, &q, 1.0, &[0.0], 3).unwrap();
        let e = &r.entries[0];
        assert_eq!((e.mean_shift, e.cov_shift, e.mean_ratio, e.cov_ratio), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn consensus_ensemble_moves_by_exactly_epsilon() {
        let a = Ensemble::from_points(&vec![vec![0.0, 0.0]; 8]).unwrap();
        let q = Objective::centered_quadratic(2).unwrap();
        let r = stability_ratios(&a, &q, 1.0, &[0.5, 0.01], 9).unwrap();
        for e in &r.entries {
            assert!((e.w2_exact - e.epsilon).abs() <= 1e-12 * e.epsilon);
            assert!((e.w2_identity - e.epsilon).abs() <= 1e-12 * e.epsilon);
            assert!(e.mean_ratio.is_finite() && e.cov_ratio.is_finite());
        }
    }

    #[test]
    fn exact_distance_never_exceeds_identity_coupling() {
        let a = Ensemble::from_points(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1]]).unwrap();
        let q = Objective::centered_quadratic(2).unwrap();
        let r = stability_ratios(&a, &q, 1.0, &[1.0, 0.1, 0.01], 4).unwrap();
        for e in &r.entries {
            assert!(e.w2_exact <= e.w2_identity + 1e-15);
        }
    }

    #[test]
    fn scales_validated() {
        let a = Ensemble::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        let q = Objective::centered_quadratic(1).unwrap();
        assert!(stability_ratios(&a, &q, 1.0, &[0.1, 0.2], 0).is_err());
        assert!(stability_ratios(&a, &q, 1.0, &[-0.1], 0).is_err());
    }
}
