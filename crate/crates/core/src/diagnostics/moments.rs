use crate::dynamics::TrajectoryRecord;
use crate::error::{invalid, Result};
use crate::measures::Ensemble;

/// `(1/J) Σ |θʲ|^{2p}` for `p ∈ {1, 2, 3}`.
pub fn raw_moment(ens: &Ensemble, p: u32) -> Result<f64> {
    if !(1..=3).contains(&p) {
        return Err(invalid(format!("moment order p must be 1, 2 or 3, got {p}")));
    }
    let n = ens.len() as f64;
    Ok(ens
        .particles()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().powi(p as i32))
        .sum::<f64>()
        / n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentMonitorReport {
    /// Supremum over recorded times of each raw moment, `p = 1, 2, 3`.
    pub sup: [f64; 3],
    pub initial: [f64; 3],
    /// `sup / initial`; `0/0` is reported as 0.
    pub ratio: [f64; 3],
}

pub fn moment_bound_monitor(traj: &TrajectoryRecord) -> MomentMonitorReport {
    let initial = traj.raw_moments.first().copied().unwrap_or([0.0; 3]);
    let mut sup = [0.0f64; 3];
    for m in &traj.raw_moments {
        for p in 0..3 {
            sup[p] = sup[p].max(m[p]);
        }
    }
    let mut ratio = [0.0; 3];
    for p in 0..3 {
        ratio[p] = if sup[p] == 0.0 { 0.0 } else { sup[p] / initial[p] };
    }
    MomentMonitorReport { sup, initial, ratio }
}

/// `sup_t E[(1/J) Σ |θʲ_t|^{2p}]` with the expectation taken as the average
/// over replicate trajectories sharing one recording grid.
pub fn expected_moment_sup(trajs: &[TrajectoryRecord]) -> Result<[f64; 3]> {
    let first = trajs.first().ok_or_else(|| invalid("need at least one trajectory"))?;
    if trajs.iter().any(|t| t.times != first.times) {
        return Err(invalid("replicate trajectories must share their recorded times"));
    }
    let n = trajs.len() as f64;
    let mut sup = [0.0f64; 3];
    for k in 0..first.len() {
        for (p, s) in sup.iter_mut().enumerate() {
            let mean = trajs.iter().map(|t| t.raw_moments[k][p]).sum::<f64>() / n;
            *s = s.max(mean);
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, CboNoise, DynamicsConfig, InitialLaw, Mode};
    use crate::objectives::Objective;

    fn sampling_config(seed: u64) -> DynamicsConfig {
        DynamicsConfig {
            mode: Mode::Cbs,
            lambda: DynamicsConfig::sampling_lambda(1.0),
            beta: 1.0,
            dt: 0.01,
            t_final: 5.0,
            particles: 200,
            seed,
            record_stride: 10,
            init: InitialLaw::standard_gaussian(2),
            cbo_noise: CboNoise::Componentwise,
        }
    }

    #[test]
    fn raw_moment_examples() {
        let e = Ensemble::from_points(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(raw_moment(&e, 1).unwrap(), 1.0);
        let e = Ensemble::from_points(&[vec![2.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(raw_moment(&e, 2).unwrap(), 16.0);
        let e = Ensemble::from_flat(2, 1, vec![-1.0, 3.0]).unwrap();
        assert_eq!(raw_moment(&e, 1).unwrap(), 5.0);
        assert!(raw_moment(&e, 0).is_err());
        assert!(raw_moment(&e, 4).is_err());
    }

    #[test]
    fn raw_moment_agrees_with_abs_moment() {
        let e = Ensemble::from_flat(3, 2, vec![0.5, -1.5, 2.0, 0.25, -3.0, 1.0]).unwrap();
        for p in 1..=3u32 {
            let a = raw_moment(&e, p).unwrap();
            let b = e.abs_moment(2.0 * p as f64);
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn consensus_at_origin_has_zero_sups() {
        let start = Ensemble::from_flat(4, 2, vec![0.0; 8]).unwrap();
        let cfg = DynamicsConfig { particles: 4, init: InitialLaw::Explicit(start), ..sampling_config(0) };
        let traj = integrate(&cfg, &Objective::centered_quadratic(2).unwrap()).unwrap();
        let r = moment_bound_monitor(&traj);
        assert_eq!((r.sup, r.ratio), ([0.0; 3], [0.0; 3]));
    }

    #[test]
    fn sampling_second_moment_stays_near_stationary_value() {
        let q = Objective::centered_quadratic(2).unwrap();
        let traj = integrate(&sampling_config(3), &q).unwrap();
        let r = moment_bound_monitor(&traj);
        for p in 0..3 {
            assert!(r.sup[p].is_finite() && r.sup[p] >= r.initial[p]);
        }
        assert!(r.sup[0] <= 10.0 * 2.0 && r.sup[0] >= 2.0 / 10.0, "{:?}", r.sup);
    }

    #[test]
    fn expected_sup_never_exceeds_mean_of_sups() {
        let q = Objective::centered_quadratic(2).unwrap();
        let trajs: Vec<_> = (0..4).map(|s| integrate(&sampling_config(s), &q).unwrap()).collect();
        let sup = expected_moment_sup(&trajs).unwrap();
        for (p, s) in sup.iter().enumerate() {
            let mean_of_sups = trajs.iter().map(|t| moment_bound_monitor(t).sup[p]).sum::<f64>() / 4.0;
            assert!(*s <= mean_of_sups * (1.0 + 1e-12));
        }
        assert!(expected_moment_sup(&[]).is_err());
    }
}
