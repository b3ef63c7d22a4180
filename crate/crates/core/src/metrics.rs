//! Scoring: ergodic metric, trajectory heterogeneity, dimple-distribution
//! coefficients, and whole-trial performance.

use crate::spectral::{CoeffVector, SpectralBasis};
use crate::swarm::{DimpleEvent, TrialRecord};
use crate::{Error, Result};

/// Log rows are scored against the dimple distribution every this many
/// steps when computing trial performance.
pub const METRIC_SAMPLE_EVERY: usize = 10;

fn check_dims(basis: &SpectralBasis, v: &CoeffVector) -> Result<()> {
    if v.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Weighted squared coefficient distance between trajectory statistics and
/// the target: `sum_k w_k (c_k - phi_k)^2`. Zero iff the vectors agree.
pub fn ergodic_metric(c: &CoeffVector, phi: &CoeffVector, basis: &SpectralBasis) -> Result<f64> {
    check_dims(basis, c)?;
    check_dims(basis, phi)?;
    let mut total = 0.0;
    for ((ck, pk), w) in c.values().iter().zip(phi.values()).zip(basis.weights()) {
        let d = ck - pk;
        total += w * d * d;
    }
    Ok(total)
}

/// Same weighted distance applied to two agents' trajectory coefficients.
/// High values mean the agents covered different parts of the task.
pub fn heterogeneity(ci: &CoeffVector, cj: &CoeffVector, basis: &SpectralBasis) -> Result<f64> {
    ergodic_metric(ci, cj, basis)
}

/// Mean pairwise heterogeneity over all unordered agent pairs.
pub fn team_heterogeneity(all: &[CoeffVector], basis: &SpectralBasis) -> Result<f64> {
    if all.len() < 2 {
        return Err(Error::InsufficientAgents(all.len()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            total += heterogeneity(&all[i], &all[j], basis)?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Empirical coefficients of the deposited dimple pattern:
/// `d_k = (1/M) sum_m F_k(x_m)` over the M dimple positions.
pub fn dimple_coeffs(events: &[DimpleEvent], basis: &SpectralBasis) -> Result<CoeffVector> {
    if events.is_empty() {
        return Err(Error::NoDimples);
    }
    let mut sums = vec![0.0; basis.len()];
    let mut vals = vec![0.0; basis.len()];
    for ev in events {
        basis.eval_all_into(ev.position, &mut vals);
        for (acc, v) in sums.iter_mut().zip(&vals) {
            *acc += v;
        }
    }
    let m = events.len() as f64;
    for s in &mut sums {
        *s /= m;
    }
    Ok(CoeffVector::from(sums))
}

/// Time-averaged ergodic metric of the accumulated dimple pattern against
/// the target, sampled every [`METRIC_SAMPLE_EVERY`] steps. Steps before
/// the first dimple are skipped.
pub fn trial_performance(
    record: &TrialRecord,
    phi: &CoeffVector,
    basis: &SpectralBasis,
) -> Result<f64> {
    check_dims(basis, phi)?;
    if record.dimples.is_empty() {
        return Err(Error::NoDimples);
    }
    let times = record.step_times();
    let mut sums = vec![0.0; basis.len()];
    let mut vals = vec![0.0; basis.len()];
    let mut next_event = 0usize;
    let mut count = 0usize;
    let mut metric_total = 0.0;
    let mut samples = 0usize;
    for (step, t) in times.iter().enumerate() {
        while next_event < record.dimples.len() && record.dimples[next_event].time <= *t {
            basis.eval_all_into(record.dimples[next_event].position, &mut vals);
            for (acc, v) in sums.iter_mut().zip(&vals) {
                *acc += v;
            }
            count += 1;
            next_event += 1;
        }
        if count == 0 || step % METRIC_SAMPLE_EVERY != 0 {
            continue;
        }
        let d = CoeffVector::from(
            sums.iter().map(|s| s / count as f64).collect::<Vec<_>>(),
        );
        metric_total += ergodic_metric(&d, phi, basis)?;
        samples += 1;
    }
    if samples == 0 {
        // Dimples exist but fell after the last sampled step; score the
        // final pattern once.
        let d = dimple_coeffs(&record.dimples, basis)?;
        return ergodic_metric(&d, phi, basis);
    }
    Ok(metric_total / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{transform_density, DensityMap};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_basis(k: usize) -> SpectralBasis {
        SpectralBasis::new([1.0, 1.0], k).unwrap()
    }

    fn random_coeffs(basis: &SpectralBasis, rng: &mut ChaCha8Rng) -> CoeffVector {
        CoeffVector::from(
            (0..basis.len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn metric_is_zero_on_equal_vectors() {
        let b = unit_basis(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_coeffs(&b, &mut rng);
        assert_eq!(ergodic_metric(&c, &c, &b).unwrap(), 0.0);
    }

    #[test]
    fn constant_mode_difference_passes_through_unweighted() {
        let b = unit_basis(3);
        let c = CoeffVector::zeros(b.len());
        let mut v = vec![0.0; b.len()];
        let delta = 0.37;
        v[b.mode_index([0, 0])] = delta;
        let phi = CoeffVector::from(v);
        assert!((ergodic_metric(&c, &phi, &b).unwrap() - delta * delta).abs() < 1e-15);
    }

    #[test]
    fn metric_matches_direct_summation() {
        let b = unit_basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_coeffs(&b, &mut rng);
        let phi = random_coeffs(&b, &mut rng);
        let mut oracle = 0.0;
        for k in b.modes() {
            oracle += b.weight(*k) * (c.get(&b, *k) - phi.get(&b, *k)).powi(2);
        }
        assert!((ergodic_metric(&c, &phi, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn metric_rejects_dimension_mismatch() {
        let b = unit_basis(3);
        let c = CoeffVector::zeros(4);
        let phi = CoeffVector::zeros(b.len());
        assert!(matches!(
            ergodic_metric(&c, &phi, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn heterogeneity_is_symmetric_and_zero_on_equality() {
        let b = unit_basis(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_coeffs(&b, &mut rng);
        let c = random_coeffs(&b, &mut rng);
        assert_eq!(heterogeneity(&a, &a, &b).unwrap(), 0.0);
        assert_eq!(
            heterogeneity(&a, &c, &b).unwrap(),
            heterogeneity(&c, &a, &b).unwrap()
        );
    }

    #[test]
    fn heterogeneity_of_two_stationary_agents_matches_closed_form() {
        let b = unit_basis(4);
        let (xi, xj) = ([0.2, 0.7], [0.8, 0.3]);
        let ci = CoeffVector::from(
            b.modes()
                .iter()
                .map(|k| b.eval(*k, xi).unwrap())
                .collect::<Vec<_>>(),
        );
        let cj = CoeffVector::from(
            b.modes()
                .iter()
                .map(|k| b.eval(*k, xj).unwrap())
                .collect::<Vec<_>>(),
        );
        let mut oracle = 0.0;
        for k in b.modes() {
            oracle += b.weight(*k) * (b.eval(*k, xi).unwrap() - b.eval(*k, xj).unwrap()).powi(2);
        }
        assert!((heterogeneity(&ci, &cj, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn team_heterogeneity_averages_all_pairs() {
        let b = unit_basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let team: Vec<CoeffVector> = (0..4).map(|_| random_coeffs(&b, &mut rng)).collect();
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                oracle += heterogeneity(&team[i], &team[j], &b).unwrap();
            }
        }
        oracle /= 6.0;
        assert!((team_heterogeneity(&team, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn team_heterogeneity_of_identical_agents_is_zero() {
        let b = unit_basis(3);
        let c = CoeffVector::zeros(b.len());
        let team = vec![c.clone(), c.clone(), c];
        assert_eq!(team_heterogeneity(&team, &b).unwrap(), 0.0);
    }

    #[test]
    fn team_heterogeneity_with_two_agents_is_the_pair_value() {
        let b = unit_basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_coeffs(&b, &mut rng);
        let c = random_coeffs(&b, &mut rng);
        assert_eq!(
            team_heterogeneity(&[a.clone(), c.clone()], &b).unwrap(),
            heterogeneity(&a, &c, &b).unwrap()
        );
    }

    #[test]
    fn team_heterogeneity_requires_two_agents() {
        let b = unit_basis(2);
        assert!(matches!(
            team_heterogeneity(&[CoeffVector::zeros(b.len())], &b),
            Err(Error::InsufficientAgents(1))
        ));
    }

    #[test]
    fn team_heterogeneity_is_permutation_invariant() {
        let b = unit_basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut team: Vec<CoeffVector> = (0..4).map(|_| random_coeffs(&b, &mut rng)).collect();
        let forward = team_heterogeneity(&team, &b).unwrap();
        team.reverse();
        team.swap(0, 2);
        let shuffled = team_heterogeneity(&team, &b).unwrap();
        assert!((forward - shuffled).abs() < 1e-12);
    }

    // Weighted Euclidean norms satisfy the parallelogram law:
    // 2 E(a,c) + 2 E(b,c) = E(a+b-c, c) + E(a,b).
    #[test]
    fn metric_satisfies_parallelogram_law() {
        let b = unit_basis(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_coeffs(&b, &mut rng);
            let c = random_coeffs(&b, &mut rng);
            let v = random_coeffs(&b, &mut rng);
            let lhs = 2.0 * ergodic_metric(&a, &v, &b).unwrap()
                + 2.0 * ergodic_metric(&c, &v, &b).unwrap();
            let sum_minus_v = a.lin_comb(1.0, &c, 1.0).unwrap().lin_comb(1.0, &v, -1.0).unwrap();
            let rhs = ergodic_metric(&sum_minus_v, &v, &b).unwrap()
                + ergodic_metric(&a, &c, &b).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    fn event(pos: [f64; 2]) -> DimpleEvent {
        DimpleEvent {
            position: pos,
            time: 0.0,
            agent_id: 0,
        }
    }

    #[test]
    fn single_dimple_coeffs_equal_basis_values() {
        let b = unit_basis(4);
        let x0 = [0.4, 0.9];
        let d = dimple_coeffs(&[event(x0)], &b).unwrap();
        for k in b.modes() {
            assert!((d.get(&b, *k) - b.eval(*k, x0).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn repeated_dimples_at_one_point_match_single() {
        let b = unit_basis(4);
        let x0 = [0.12, 0.34];
        let one = dimple_coeffs(&[event(x0)], &b).unwrap();
        let many = dimple_coeffs(&vec![event(x0); 10], &b).unwrap();
        for (a, c) in one.values().iter().zip(many.values()) {
            assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn empty_event_list_is_an_error() {
        let b = unit_basis(2);
        assert!(matches!(dimple_coeffs(&[], &b), Err(Error::NoDimples)));
    }

    // Dimples drawn from the target density should score better (lower)
    // than dimples drawn uniformly, for a non-uniform target. Majority
    // vote over 20 repetitions.
    #[test]
    fn dimples_from_target_beat_uniform_dimples() {
        let b = unit_basis(6);
        let density = DensityMap::from_fn(64, 64, [1.0, 1.0], |x| {
            (-((x[0] - 0.3).powi(2) + (x[1] - 0.6).powi(2)) / 0.02).exp()
        })
        .unwrap();
        let phi = transform_density(&b, &density).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut wins = 0;
        for _ in 0..20 {
            let from_target: Vec<DimpleEvent> = (0..1000)
                .map(|_| {
                    // rejection-sample the density
                    loop {
                        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                        let r = rng.gen_range(0.0..1.0);
                        let peak = density.values().iter().cloned().fold(0.0, f64::max);
                        let c = ((1.0 - x[1]) * 64.0) as usize;
                        let col = (x[0] * 64.0) as usize;
                        let v = density.get(c.min(63), col.min(63));
                        if r * peak < v {
                            return event(x);
                        }
                    }
                })
                .collect();
            let uniform: Vec<DimpleEvent> = (0..1000)
                .map(|_| event([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]))
                .collect();
            let e_target =
                ergodic_metric(&dimple_coeffs(&from_target, &b).unwrap(), &phi, &b).unwrap();
            let e_uniform =
                ergodic_metric(&dimple_coeffs(&uniform, &b).unwrap(), &phi, &b).unwrap();
            if e_target < e_uniform {
                wins += 1;
            }
        }
        assert!(wins > 10, "target-drawn dimples won only {wins}/20 rounds");
    }

    // An empirical measure placed exactly on the quadrature points with
    // multiplicity proportional to the density reproduces the transform.
    #[test]
    fn matching_empirical_measure_scores_near_zero() {
        let b = unit_basis(5);
        let d = DensityMap::from_grid(2, 2, [1.0, 1.0], vec![2.0, 1.0, 1.0, 0.0]).unwrap();
        let phi = transform_density(&b, &d).unwrap();
        let mut events = Vec::new();
        for (r, c, n) in [(0usize, 0usize, 2usize), (0, 1, 1), (1, 0, 1)] {
            for _ in 0..n {
                events.push(event(d.cell_center(r, c)));
            }
        }
        let dk = dimple_coeffs(&events, &b).unwrap();
        let e = ergodic_metric(&dk, &phi, &b).unwrap();
        assert!(e < 1e-3, "metric {e}");
    }
}
