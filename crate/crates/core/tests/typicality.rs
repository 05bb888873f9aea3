mod common;

use common::*;
use proptest::prelude::*;
use qbc_core::random::{haar_unitary, random_density, stream_rng};
use qbc_core::tensor::{CMatrix, DensityOperator, Layout};
use qbc_core::typicality::{epsilon_schedule, gentle_measurement_check, typical_projector, typical_set};

fn binomial_oracle(p: f64, n: u64, eps: f64) -> (f64, f64) {
    let h = binary_entropy(p);
    let (mut size, mut mass) = (0.0, 0.0);
    for k in 0..=n {
        // k ones, each with probability p.
        let lp = -(k as f64 * p.log2() + (n - k) as f64 * (1.0 - p).log2()) / n as f64;
        if (lp - h).abs() <= eps {
            size += choose(n, k);
            mass += choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
    }
    (size, mass)
}

fn qubit(p: f64) -> DensityOperator {
    DensityOperator::diagonal(&[p, 1.0 - p], Layout::single("A", 2).unwrap()).unwrap()
}

#[test]
fn deterministic_source() {
    let (rep, set) = typical_set(&[1.0, 0.0], 8, 0.1).unwrap();
    assert_eq!(rep.size, 1.0);
    assert!((rep.probability_mass - 1.0).abs() < 1e-15);
    assert!(set.contains(&[0; 8]));
    assert!(!set.contains(&[0, 0, 0, 0, 0, 0, 0, 1]));
}

#[test]
fn uniform_bit_is_all_typical() {
    for n in [1, 5, 13] {
        let (rep, _) = typical_set(&[0.5, 0.5], n, 1e-9).unwrap();
        assert_eq!(rep.size, 2f64.powi(n as i32));
        assert!((rep.probability_mass - 1.0).abs() < 1e-12);
    }
}

#[test]
fn biased_bit_matches_binomial_oracle() {
    let (rep, _) = typical_set(&[0.1, 0.9], 20, 0.1).unwrap();
    let (size, mass) = binomial_oracle(0.9, 20, 0.1);
    assert_eq!(rep.size, size);
    assert!((rep.probability_mass - mass).abs() < 1e-12);
}

#[test]
fn membership_agrees_with_counts() {
    let (_, set) = typical_set(&[0.1, 0.9], 10, 0.1).unwrap();
    let h = binary_entropy(0.9);
    for mask in 0u32..1024 {
        let seq: Vec<usize> = (0..10).map(|i| ((mask >> i) & 1) as usize).collect();
        let ones = seq.iter().filter(|&&x| x == 1).count() as f64;
        let lp = -(ones * 0.9f64.log2() + (10.0 - ones) * 0.1f64.log2()) / 10.0;
        assert_eq!(set.contains(&seq), (lp - h).abs() <= 0.1, "{seq:?}");
    }
    assert!(!set.contains(&[0; 9]));
    assert!(!set.contains(&[2; 10]));
}

#[test]
fn typical_set_errors() {
    assert!(typical_set(&[0.5, 0.6], 4, 0.1).is_err());
    assert!(typical_set(&[], 4, 0.1).is_err());
    assert!(typical_set(&[0.5, 0.5], 0, 0.1).unwrap_err().is_infeasible());
    assert!(typical_set(&[0.5, 0.5], 65, 0.1).unwrap_err().is_infeasible());
    assert!(typical_set(&[0.5, 0.5], 4, f64::NAN).is_err());
}

#[test]
fn pure_state_projector() {
    let mut r = rng(1);
    let u = haar_unitary(2, &mut r);
    let pure = DensityOperator::diagonal(&[1.0, 0.0], Layout::single("A", 2).unwrap()).unwrap();
    let rho = DensityOperator::new(&u * pure.matrix() * u.adjoint(), pure.layout().clone()).unwrap();
    let proj = typical_projector(&rho, 4, 0.1).unwrap();
    assert_eq!(proj.rank, 1);
    assert!((proj.mass - 1.0).abs() < 1e-12);
    let mut full = rho.matrix().clone();
    for _ in 1..4 {
        full = kron(&full, rho.matrix());
    }
    assert!((proj.to_matrix() - full).camax() < 1e-10);
}

#[test]
fn maximally_mixed_projector_is_identity() {
    let rho = DensityOperator::maximally_mixed(Layout::single("A", 2).unwrap());
    let proj = typical_projector(&rho, 5, 0.05).unwrap();
    assert_eq!(proj.rank, 32);
    assert!((proj.to_matrix() - CMatrix::identity(32, 32)).camax() < 1e-12);
}

#[test]
fn projector_mass_equals_classical_mass() {
    let proj = typical_projector(&qubit(0.9), 10, 0.1).unwrap();
    let (rep, _) = typical_set(&[0.9, 0.1], 10, 0.1).unwrap();
    let (size, mass) = binomial_oracle(0.9, 10, 0.1);
    assert!((proj.mass - rep.probability_mass).abs() < 1e-12);
    assert!((proj.mass - mass).abs() < 1e-12);
    assert_eq!(proj.rank as f64, size);
}

#[test]
fn projector_is_an_orthogonal_projection() {
    let rho = random_density(Layout::single("A", 2).unwrap(), 2, &mut rng(2)).unwrap();
    let pi = typical_projector(&rho, 4, 0.2).unwrap().to_matrix();
    assert!((&pi * &pi - &pi).camax() < 1e-12);
    assert!((pi.adjoint() - &pi).camax() < 1e-14);
}

#[test]
fn projector_errors() {
    assert!(typical_projector(&qubit(0.9), 13, 0.1).unwrap_err().is_infeasible());
    assert!(typical_projector(&qubit(0.9), 0, 0.1).unwrap_err().is_infeasible());
}

#[test]
fn gentle_measurement_examples() {
    let pure = qubit(1.0);
    assert!(gentle_measurement_check(&pure, 6, 0.1).unwrap().distance < 1e-12);
    let mixed = DensityOperator::maximally_mixed(Layout::single("A", 2).unwrap());
    assert!(gentle_measurement_check(&mixed, 6, 0.1).unwrap().distance < 1e-12);
    let rep = gentle_measurement_check(&qubit(0.9), 10, 0.1).unwrap();
    assert!(rep.distance <= rep.bound + 1e-6);
    // Diagonal case: distance = 2(1 − mass).
    assert!((rep.distance - 2.0 * (1.0 - rep.mass)).abs() < 1e-10, "{rep:?}");
    assert!(!rep.dense);
}

#[test]
fn gentle_measurement_dense_path_matches_diagonal_formula() {
    let rep = gentle_measurement_check(&qubit(0.8), 8, 0.15).unwrap();
    assert!(rep.dense);
    assert!((rep.distance - 2.0 * (1.0 - rep.mass)).abs() < 1e-9);
}

#[test]
fn property_one_mass() {
    for p in [0.7, 0.8, 0.9] {
        for n in 12..=20 {
            let (rep, _) = typical_set(&[p, 1.0 - p], n, epsilon_schedule(n)).unwrap();
            assert!(rep.probability_mass >= 1.0 - epsilon_schedule(n), "p = {p}, n = {n}: {rep:?}");
        }
    }
}

#[test]
fn property_two_size() {
    for p in [0.7, 0.8, 0.9] {
        let mut n0 = None;
        for n in 1..=20 {
            let (rep, _) = typical_set(&[p, 1.0 - p], n, epsilon_schedule(n)).unwrap();
            match (rep.size_within_bound, n0) {
                (true, None) => n0 = Some(n),
                (false, Some(_)) => n0 = None,
                _ => {}
            }
        }
        let n0 = n0.expect("bound holds from some n on");
        println!("p = {p}: size bound holds for all n ≥ {n0}");
    }
}

#[test]
fn ternary_source() {
    let p = [0.5, 0.3, 0.2];
    let (rep, set) = typical_set(&p, 9, 0.2).unwrap();
    let h = shannon(&p);
    let (mut size, mut mass) = (0.0, 0.0);
    for idx in 0..3usize.pow(9) {
        let seq: Vec<usize> = (0..9).map(|k| (idx / 3usize.pow(k)) % 3).collect();
        let prob: f64 = seq.iter().map(|&x| p[x]).product();
        if (-prob.log2() / 9.0 - h).abs() <= 0.2 {
            size += 1.0;
            mass += prob;
            assert!(set.contains(&seq));
        }
    }
    assert_eq!(rep.size, size);
    assert!((rep.probability_mass - mass).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quantum_and_classical_statistics_agree(seed in any::<u64>(), n in 1usize..9, eps in 0.01f64..0.5) {
        let rho = random_density(Layout::single("A", 2).unwrap(), 2, &mut stream_rng(seed, 0)).unwrap();
        let spectrum = qbc_core::tensor::hermitian_eigenvalues(rho.matrix());
        let proj = typical_projector(&rho, n, eps).unwrap();
        let (rep, _) = typical_set(&spectrum, n, eps).unwrap();
        prop_assert_eq!(proj.rank as f64, rep.size);
        prop_assert!((proj.mass - rep.probability_mass).abs() < 1e-10);
    }

    #[test]
    fn gentle_measurement_bound(seed in any::<u64>(), n in 1usize..8) {
        let rho = random_density(Layout::single("A", 2).unwrap(), 2, &mut stream_rng(seed, 1)).unwrap();
        if let Ok(rep) = gentle_measurement_check(&rho, n, epsilon_schedule(n)) {
            prop_assert!(rep.distance <= rep.bound + 1e-6);
        }
    }

    #[test]
    fn mass_is_a_probability(p in 0.0f64..=1.0, n in 1usize..30, eps in 0.0f64..1.0) {
        let (rep, _) = typical_set(&[p, 1.0 - p], n, eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&rep.probability_mass));
    }
}
