use consensus_dyn::diagnostics::{make_bump, wasserstein2};
use consensus_dyn::linalg::{matrix_norms, psd_project, spd_sqrt, SymMatrix};
use consensus_dyn::measures::{check_moment_bounds, moment_product_check, normalized_weights, weighted_moments, Ensemble};
use consensus_dyn::objectives::Objective;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn ensemble(max_j: usize, max_d: usize, range: f64) -> impl Strategy<Value = Ensemble> {
    (2..=max_j, 1..=max_d).prop_flat_map(move |(j, d)| {
        prop::collection::vec(-range..range, j * d).prop_map(move |data| Ensemble::from_flat(j, d, data).unwrap())
    })
}

fn ensemble_pair(max_j: usize, d: usize) -> impl Strategy<Value = (Ensemble, Ensemble)> {
    (2..=max_j).prop_flat_map(move |j| {
        let side = || prop::collection::vec(-5.0..5.0f64, j * d).prop_map(move |v| Ensemble::from_flat(j, d, v).unwrap());
        (side(), side())
    })
}

fn symmetric(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_d).prop_flat_map(|d| {
        prop::collection::vec(-3.0..3.0f64, d * d).prop_map(move |v| SymMatrix::new(DMatrix::from_vec(d, d, v)).unwrap())
    })
}

fn psd(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_d).prop_flat_map(|d| {
        prop::collection::vec(-3.0..3.0f64, d * d).prop_map(move |v| {
            let g = DMatrix::from_vec(d, d, v);
            SymMatrix::new(&g * g.transpose()).unwrap()
        })
    })
}

fn objective_for(d: usize, kind: u8) -> Objective {
    match kind {
        0 => Objective::centered_quadratic(d).unwrap(),
        1 => Objective::rastrigin(d, 1.0).unwrap(),
        _ => Objective::quadratic(vec![1.5; d], SymMatrix::from_diagonal(&vec![2.0; d])).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weights_are_a_probability_vector(ens in ensemble(40, 4, 20.0), kind in 0u8..3, beta in 0.01..50.0f64) {
        let f = objective_for(ens.dim(), kind);
        let w = normalized_weights(&ens, &f, beta).unwrap();
        prop_assert!(w.weights.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.ess() >= 1.0 - 1e-12 && w.ess() <= ens.len() as f64 + 1e-9);
    }

    #[test]
    fn weighted_mean_lies_in_the_bounding_box(ens in ensemble(40, 4, 20.0), kind in 0u8..3, beta in 0.01..50.0f64) {
        let f = objective_for(ens.dim(), kind);
        let m = weighted_moments(&ens, &f, beta).unwrap();
        for (k, mk) in m.mean.iter().enumerate() {
            let lo = ens.particles().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = ens.particles().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*mk >= lo - 1e-12 && *mk <= hi + 1e-12);
        }
        prop_assert!(m.cov.min_eigenvalue() >= -1e-12 * (1.0 + m.cov.trace()));
    }

    #[test]
    fn moment_bounds_hold(ens in ensemble(64, 6, 20.0), kind in 0u8..3, beta in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let f = objective_for(ens.dim(), kind);
        let r = check_moment_bounds(&ens, &f, beta).unwrap();
        prop_assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn moment_product_holds(ens in ensemble(30, 4, 10.0), p in 0.0..4.0f64, q in 0.0..4.0f64) {
        let r = moment_product_check(&ens, p, q).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn sqrt_reconstructs(a in psd(8)) {
        let r = spd_sqrt(&a).unwrap();
        let back = r.as_matrix() * r.as_matrix();
        prop_assert!((back - a.as_matrix()).norm() <= 1e-10 * (1.0 + a.frobenius()));
    }

    #[test]
    fn sqrt_commutes_with_orthogonal_conjugation(a in psd(6), seed in prop::collection::vec(-1.0..1.0f64, 36)) {
        let d = a.dim();
        let q = DMatrix::from_iterator(d, d, seed.into_iter().take(d * d)).qr().q();
        let conj = SymMatrix::new(&q * a.as_matrix() * q.transpose()).unwrap();
        let lhs = spd_sqrt(&conj).unwrap().into_inner();
        let rhs = &q * spd_sqrt(&a).unwrap().as_matrix() * q.transpose();
        prop_assert!((lhs - rhs).norm() <= 1e-8 * (1.0 + a.frobenius().sqrt()));
    }

    #[test]
    fn schatten_two_is_frobenius(a in symmetric(8)) {
        let n = matrix_norms(&a, 2).unwrap();
        prop_assert!((n.schatten - n.frobenius).abs() <= 1e-12 * (1.0 + n.frobenius));
        prop_assert!(n.spectral <= n.frobenius + 1e-12);
    }

    #[test]
    fn psd_projection_is_idempotent_and_contractive(a in symmetric(6), b in symmetric(6)) {
        let pa = psd_project(&a);
        prop_assert!(pa.min_eigenvalue() >= -1e-12 * (1.0 + a.frobenius()));
        let twice = psd_project(&pa);
        prop_assert!((twice.as_matrix() - pa.as_matrix()).norm() <= 1e-12 * (1.0 + a.frobenius()));
        if a.dim() == b.dim() {
            let pb = psd_project(&b);
            let gap = (pa.as_matrix() - pb.as_matrix()).norm();
            prop_assert!(gap <= (a.as_matrix() - b.as_matrix()).norm() + 1e-10);
        }
    }

    #[test]
    fn w2_is_symmetric_and_vanishes_on_the_diagonal((a, b) in ensemble_pair(24, 2)) {
        let ab = wasserstein2(&a, &b).unwrap();
        let ba = wasserstein2(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
        // permuting particles describes the same measure
        let mut pts = a.to_points();
        pts.reverse();
        prop_assert!(wasserstein2(&a, &Ensemble::from_points(&pts).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn w2_triangle_inequality(j in 2usize..16, data in prop::collection::vec(-5.0..5.0f64, 96)) {
        let mk = |k: usize| Ensemble::from_flat(j, 2, data[k * 32..k * 32 + 2 * j].to_vec()).unwrap();
        let (a, b, c) = (mk(0), mk(1), mk(2));
        let ac = wasserstein2(&a, &c).unwrap();
        let ab = wasserstein2(&a, &b).unwrap();
        let bc = wasserstein2(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
    }

    #[test]
    fn w2_sorted_and_assignment_paths_agree((a, b) in ensemble_pair(40, 1)) {
        let embed = |e: &Ensemble| {
            let pts: Vec<Vec<f64>> = e.as_flat().iter().map(|&x| vec![x, 0.0]).collect();
            Ensemble::from_points(&pts).unwrap()
        };
        let one = wasserstein2(&a, &b).unwrap();
        let two = wasserstein2(&embed(&a), &embed(&b)).unwrap();
        prop_assert!((one - two).abs() <= 1e-10 * (1.0 + one));
    }
}

#[test]
fn bump_derivatives_match_finite_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let phi = make_bump(vec![0.3, -0.2, 0.5], 2.0).unwrap();
    let h = 1e-5;
    let mut checked = 0;
    while checked < 200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r2: f64 = x.iter().zip(phi.center()).map(|(a, c)| (a - c) * (a - c)).sum();
        // keep the stencil inside the support where the bump is smooth
        if r2 > 0.9 * 4.0 {
            continue;
        }
        checked += 1;
        let g = phi.gradient(&x);
        let hess = phi.hessian(&x);
        for i in 0..3 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (phi.value(&xp) - phi.value(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "gradient {i} at {x:?}: {fd} vs {}", g[i]);
            let (gp, gm) = (phi.gradient(&xp), phi.gradient(&xm));
            for k in 0..3 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                assert!(
                    (fd - hess[(k, i)]).abs() <= 1e-6 * (1.0 + hess[(k, i)].abs()),
                    "hessian ({k},{i}) at {x:?}: {fd} vs {}",
                    hess[(k, i)]
                );
            }
        }
    }
}
