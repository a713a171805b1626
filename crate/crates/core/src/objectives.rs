//! Cost functions with certificates of the growth conditions the moment
//! bounds rely on:
//!
//! 1. `|f(x) − f(y)| ≤ lip · (|x| + |y|) · |x − y|`
//! 2. `f(x) − f_* ≤ c_u (1 + |x|²)`
//! 3. `f(x) − f_* ≥ c_l |x|²` whenever `|x| > M`

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::{CheckReport, SymMatrix};

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Constants of the three growth conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthCertificate {
    pub lip: f64,
    pub f_star: f64,
    pub c_u: f64,
    pub c_l: f64,
    pub big_m: f64,
    /// Condition 1 is only certified for pairs with `|x| + |y| ≥ lip_floor`.
    /// Zero for objectives where it holds globally.
    pub lip_floor: f64,
    /// Only verified certificates may be used to evaluate moment bounds.
    pub verified: bool,
}

impl GrowthCertificate {
    pub fn unverified() -> Self {
        Self {
            lip: f64::NAN,
            f_star: f64::NAN,
            c_u: f64::NAN,
            c_l: f64::NAN,
            big_m: f64::NAN,
            lip_floor: 0.0,
            verified: false,
        }
    }
}

/// `f(x) = ½ (x − m)ᵀ A (x − m)` with `A` symmetric positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub center: Vec<f64>,
    pub matrix: SymMatrix,
}

impl QuadraticForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let a = self.matrix.as_matrix();
        let d = self.center.len();
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(xi, mi)| xi - mi).collect();
        let mut acc = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += a[(i, j)] * diff[j];
            }
            acc += diff[i] * row;
        }
        0.5 * acc
    }
}

#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    func: CostFn,
    certificate: GrowthCertificate,
    minimizer: Option<Vec<f64>>,
    quadratic: Option<QuadraticForm>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("certificate", &self.certificate)
            .field("minimizer", &self.minimizer)
            .field("quadratic", &self.quadratic)
            .finish_non_exhaustive()
    }
}

impl Objective {
    /// Shifted quadratic `½ (x − m)ᵀ A (x − m)`.
    ///
    /// For `m = 0` the certificate is tight: `c_u = λ_max/2`, `c_l = λ_min/2`,
    /// `M = 1`, `lip = λ_max`. For `m ≠ 0` it uses the conservative closed
    /// forms `lip = λ_max (1 + 2|m|)` (valid for `|x| + |y| ≥ 1`),
    /// `c_u = λ_max (1 + |m|²)`, `c_l = λ_min / 8`, `M = max(1, 4|m|)`.
    pub fn quadratic(center: Vec<f64>, matrix: SymMatrix) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(invalid("quadratic objective needs dimension ≥ 1"));
        }
        if matrix.dim() != d {
            return Err(invalid(format!(
                "matrix is {}x{} but center has dimension {d}",
                matrix.dim(),
                matrix.dim()
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(invalid("quadratic center must be finite"));
        }
        let eig = matrix.eigen();
        let (l_min, l_max) = (eig.values[0], eig.values[d - 1]);
        if l_min <= 0.0 {
            return Err(invalid(format!(
                "quadratic matrix must be positive definite (minimum eigenvalue {l_min:e})"
            )));
        }
        let m_norm = norm(&center);
        let certificate = if m_norm == 0.0 {
            GrowthCertificate {
                lip: l_max,
                f_star: 0.0,
                c_u: 0.5 * l_max,
                c_l: 0.5 * l_min,
                big_m: 1.0,
                lip_floor: 0.0,
                verified: true,
            }
        } else {
            GrowthCertificate {
                lip: l_max * (1.0 + 2.0 * m_norm),
                f_star: 0.0,
                c_u: l_max * (1.0 + m_norm * m_norm),
                c_l: l_min / 8.0,
                big_m: f64::max(1.0, 4.0 * m_norm),
                lip_floor: 1.0,
                verified: true,
            }
        };
        let form = QuadraticForm { center: center.clone(), matrix };
        let eval_form = form.clone();
        let name = if m_norm == 0.0 { "quadratic" } else { "quadratic-shifted" };
        Ok(Self {
            name: name.to_string(),
            dim: d,
            func: Arc::new(move |x| eval_form.eval(x)),
            certificate,
            minimizer: Some(center),
            quadratic: Some(form),
        })
    }

    /// `|x|² / 2` in `d` dimensions.
    pub fn centered_quadratic(dim: usize) -> Result<Self> {
        Self::quadratic(vec![0.0; dim], SymMatrix::identity(dim))
    }

    /// `|x|²/2 + a Σ (1 − cos 2πx_i)`, minimized at the origin.
    ///
    /// Since `|sin t| ≤ |t|`, `|∇f(x)| ≤ (1 + 4π²a)|x|`, which gives condition 1
    /// with `lip = 1 + 4π²a`; `1 − cos t ≤ t²/2` gives `c_u = ½ + 2π²a`, and
    /// `f ≥ |x|²/2` gives `c_l = ½`.
    pub fn rastrigin(dim: usize, amplitude: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("rastrigin objective needs dimension ≥ 1"));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(invalid("rastrigin amplitude must be finite and nonnegative"));
        }
        let func: CostFn = Arc::new(move |x: &[f64]| {
            x.iter()
                .map(|&xi| 0.5 * xi * xi + amplitude * (1.0 - (2.0 * PI * xi).cos()))
                .sum()
        });
        Ok(Self {
            name: "rastrigin".to_string(),
            dim,
            func,
            certificate: GrowthCertificate {
                lip: 1.0 + 4.0 * PI * PI * amplitude,
                f_star: 0.0,
                c_u: 0.5 + 2.0 * PI * PI * amplitude,
                c_l: 0.5,
                big_m: 1.0,
                lip_floor: 0.0,
                verified: true,
            },
            minimizer: Some(vec![0.0; dim]),
            quadratic: None,
        })
    }

    /// User-supplied cost. Its certificate is unverified, so moment-bound
    /// checks refuse it.
    pub fn black_box(name: impl Into<String>, dim: usize, func: CostFn) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("objective dimension must be ≥ 1"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            func,
            certificate: GrowthCertificate::unverified(),
            minimizer: None,
            quadratic: None,
        })
    }

    /// Replaces the certificate. The result is marked verified only if the
    /// caller says so; used to inject corrupted certificates into checks.
    pub fn with_certificate(mut self, certificate: GrowthCertificate) -> Self {
        self.certificate = certificate;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn certificate(&self) -> &GrowthCertificate {
        &self.certificate
    }

    pub fn analytic_minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn quadratic_form(&self) -> Option<&QuadraticForm> {
        self.quadratic.as_ref()
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "point has dimension {} but objective '{}' has dimension {}",
                x.len(),
                self.name,
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("point has non-finite entries"));
        }
        Ok((self.func)(x))
    }

    /// Unchecked evaluation for hot loops; the caller guarantees the dimension.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Violation counts from randomly probing a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    /// Pairs that fell below `lip_floor` and were not tested against condition 1.
    pub lipschitz_skipped: usize,
    pub lipschitz_violations: usize,
    pub upper_violations: usize,
    pub lower_violations: usize,
    /// Smallest `rhs − lhs` seen for each condition (negative on violation).
    pub worst_margins: [f64; 3],
}

impl AssumptionReport {
    pub fn total_violations(&self) -> usize {
        self.lipschitz_violations + self.upper_violations + self.lower_violations
    }
}

fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, r_min: f64, r_max: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = norm(&dir);
    if n == 0.0 {
        dir = vec![0.0; dim];
        dir[0] = 1.0;
    } else {
        dir.iter_mut().for_each(|v| *v /= n);
    }
    // radius law for uniform volume in the shell r_min < r ≤ r_max
    let u: f64 = rng.random();
    let d = dim as i32;
    let r = (r_min.powi(d) + u * (r_max.powi(d) - r_min.powi(d))).powf(1.0 / dim as f64);
    dir.iter().map(|v| v * r).collect()
}

/// Probes the three growth conditions with `n` random pairs drawn uniformly
/// from the ball of radius `10·M` and `n` points from the shell
/// `M < |x| ≤ 10·M`.
pub fn verify_assumptions<R: Rng + ?Sized>(
    obj: &Objective,
    rng: &mut R,
    n: usize,
) -> Result<AssumptionReport> {
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let cert = obj.certificate;
    let values = [cert.lip, cert.f_star, cert.c_u, cert.c_l, cert.big_m];
    if values.iter().any(|v| !v.is_finite()) || cert.big_m <= 0.0 {
        return Err(invalid("certificate constants must be finite with M > 0"));
    }
    let radius = 10.0 * cert.big_m;
    let mut report = AssumptionReport {
        samples: n,
        lipschitz_skipped: 0,
        lipschitz_violations: 0,
        upper_violations: 0,
        lower_violations: 0,
        worst_margins: [f64::INFINITY; 3],
    };
    let d = obj.dim();
    for _ in 0..n {
        let x = sample_in_ball(rng, d, 0.0, radius);
        let y = sample_in_ball(rng, d, 0.0, radius);
        let (fx, fy) = (obj.value(&x), obj.value(&y));
        let (nx, ny) = (norm(&x), norm(&y));

        if nx + ny >= cert.lip_floor {
            let dist = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            let check = CheckReport::new((fx - fy).abs(), cert.lip * (nx + ny) * dist);
            report.worst_margins[0] = report.worst_margins[0].min(check.margin());
            if !check.pass {
                report.lipschitz_violations += 1;
            }
        } else {
            report.lipschitz_skipped += 1;
        }

        for (fp, np) in [(fx, nx), (fy, ny)] {
            let check = CheckReport::new(fp - cert.f_star, cert.c_u * (1.0 + np * np));
            report.worst_margins[1] = report.worst_margins[1].min(check.margin());
            if !check.pass {
                report.upper_violations += 1;
            }
        }

        let z = sample_in_ball(rng, d, cert.big_m, radius);
        let nz = norm(&z);
        if nz > cert.big_m {
            let check = CheckReport::new(cert.c_l * nz * nz, obj.value(&z) - cert.f_star);
            report.worst_margins[2] = report.worst_margins[2].min(check.margin());
            if !check.pass {
                report.lower_violations += 1;
            }
        }
    }
    Ok(report)
}
