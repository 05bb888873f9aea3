mod common;

use common::*;
use proptest::prelude::*;
use qbc_core::random::{haar_unitary, random_density, random_pure_state, stream_rng};
use qbc_core::tensor::{
    max_entangled, pure_trace_distance, purify, trace_distance, trace_norm, uhlmann_isometry, CMatrix, CVector,
    DensityOperator, Isometry, LabeledState, Layout, PureState,
};

fn qubit(label: &str) -> Layout {
    Layout::single(label, 2).unwrap()
}

fn spectrum_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() < tol)
}

#[test]
fn tensor_of_basis_states() {
    let s = PureState::basis(qubit("A"), 0).unwrap().tensor(&PureState::basis(qubit("B"), 1).unwrap()).unwrap();
    assert_eq!(s.layout().dims(), vec![2, 2]);
    let expect = [0.0, 1.0, 0.0, 0.0];
    for (z, e) in s.amplitudes().iter().zip(expect) {
        assert_eq!(*z, c(e));
    }
}

#[test]
fn tensor_with_maximally_mixed_has_unit_trace() {
    let rho = random_density(Layout::single("A", 3).unwrap(), 2, &mut rng(1)).unwrap();
    let t = rho.tensor(&DensityOperator::maximally_mixed(Layout::single("B", 4).unwrap())).unwrap();
    assert!((t.trace() - 1.0).abs() < 1e-12);
}

#[test]
fn product_purity_is_multiplicative() {
    let mut r = rng(2);
    for _ in 0..10 {
        let a = random_density(qubit("A"), 2, &mut r).unwrap();
        let b = random_density(qubit("B"), 2, &mut r).unwrap();
        let ab = a.tensor(&b).unwrap();
        let direct = |m: &CMatrix| (m * m).trace().re;
        let got = direct(ab.matrix());
        assert!((got - direct(a.matrix()) * direct(b.matrix())).abs() < 1e-12);
        assert!((got - direct(&kron(a.matrix(), b.matrix()))).abs() < 1e-12);
    }
}

#[test]
fn partial_trace_of_standard_pair_is_maximally_mixed() {
    let rho = max_entangled(2, ("A", "B")).unwrap().to_density();
    let m = rho.partial_trace(&["A"]).unwrap();
    assert!((m.matrix() - CMatrix::identity(2, 2).scale(0.5)).camax() < 1e-15);
}

#[test]
fn partial_trace_of_product() {
    let mut r = rng(3);
    let a = random_density(Layout::single("A", 3).unwrap(), 3, &mut r).unwrap();
    let b = random_density(qubit("B"), 2, &mut r).unwrap();
    let back = a.tensor(&b).unwrap().partial_trace(&["A"]).unwrap();
    assert!((back.matrix() - a.matrix()).camax() < 1e-14);
}

#[test]
fn three_qubit_marginal_entropies_agree_with_dense_oracle() {
    let psi = random_pure_state(Layout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap(), &mut rng(4)).unwrap();
    let full = outer(psi.amplitudes().as_slice());
    let rho_a = naive_partial_trace(&full, &[2, 2, 2], &[0]);
    let rho_bc = naive_partial_trace(&full, &[2, 2, 2], &[1, 2]);
    assert!((psi.reduced(&["A"]).unwrap().matrix() - &rho_a).camax() < 1e-14);
    assert!((psi.reduced(&["B", "C"]).unwrap().matrix() - &rho_bc).camax() < 1e-14);
    assert!((oracle_entropy(&rho_a) - oracle_entropy(&rho_bc)).abs() < 1e-10);
}

#[test]
fn identity_isometry_leaves_state_alone() {
    let psi = random_pure_state(Layout::new([("A", 3), ("B", 2)]).unwrap(), &mut rng(5)).unwrap();
    let out = psi.apply(&Isometry::identity(Layout::single("A", 3).unwrap())).unwrap();
    assert_eq!(out, psi);
}

#[test]
fn pauli_x_flips_zero() {
    let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let op = Isometry::unitary(x, qubit("A")).unwrap();
    let out = PureState::basis(qubit("A"), 0).unwrap().apply(&op).unwrap();
    assert_eq!(out, PureState::basis(qubit("A"), 1).unwrap());
}

#[test]
fn conjugation_preserves_spectrum() {
    let mut r = rng(6);
    let rho = random_density(Layout::single("A", 4).unwrap(), 3, &mut r).unwrap();
    let u = Isometry::unitary(haar_unitary(4, &mut r), Layout::single("A", 4).unwrap()).unwrap();
    let out = rho.apply(&u).unwrap();
    assert!(spectrum_close(&jacobi_eigenvalues(rho.matrix()), &jacobi_eigenvalues(out.matrix()), 1e-12));
}

#[test]
fn max_entangled_dimension_one_is_scalar() {
    let s = max_entangled(1, ("S", "T")).unwrap();
    assert_eq!(s.amplitudes().len(), 1);
    assert_eq!(s.amplitudes()[0], c(1.0));
}

#[test]
fn max_entangled_mutual_information_is_twice_log_d() {
    for d in 1..=5 {
        let s = max_entangled(d, ("S", "T")).unwrap();
        let full = outer(s.amplitudes().as_slice());
        let hs = oracle_entropy(&naive_partial_trace(&full, &[d, d], &[0]));
        let ht = oracle_entropy(&naive_partial_trace(&full, &[d, d], &[1]));
        let hst = oracle_entropy(&full);
        assert!((hs + ht - hst - 2.0 * (d as f64).log2()).abs() < 1e-10, "d = {d}");
    }
}

#[test]
fn trace_norm_examples() {
    let rho = random_density(Layout::single("A", 3).unwrap(), 3, &mut rng(7)).unwrap();
    assert!(trace_distance(&rho, &rho).unwrap() < 1e-15);
    let l = qubit("A");
    let zero = PureState::basis(l.clone(), 0).unwrap().to_density();
    let one = PureState::basis(l.clone(), 1).unwrap().to_density();
    assert!((trace_distance(&zero, &one).unwrap() - 2.0).abs() < 1e-12);
    for (p, q) in [(0.1, 0.7), (0.5, 0.5), (0.9, 0.2), (0.0, 1.0)] {
        let a = DensityOperator::diagonal(&[p, 1.0 - p], l.clone()).unwrap();
        let b = DensityOperator::diagonal(&[q, 1.0 - q], l.clone()).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 2.0 * f64::abs(p - q)).abs() < 1e-12);
    }
}

#[test]
fn purification_of_pure_state_is_unentangled() {
    let psi = random_pure_state(Layout::single("A", 3).unwrap(), &mut rng(8)).unwrap();
    let p = purify(&psi.to_density(), "R").unwrap();
    let full = outer(p.amplitudes().as_slice());
    assert!(oracle_entropy(&naive_partial_trace(&full, &[3, 3], &[0])) < 1e-8);
}

#[test]
fn purification_of_maximally_mixed_qubit_is_standard_pair() {
    let p = purify(&DensityOperator::maximally_mixed(qubit("A")), "R").unwrap();
    let phi = max_entangled(2, ("A", "R")).unwrap();
    assert!((p.amplitudes() - phi.amplitudes()).camax() < 1e-12);
}

#[test]
fn purification_round_trip_rank_three() {
    let rho = random_density(Layout::single("A", 4).unwrap(), 3, &mut rng(9)).unwrap();
    let p = purify(&rho, "R").unwrap();
    assert!((p.reduced(&["A"]).unwrap().matrix() - rho.matrix()).camax() < 1e-10);
}

fn uhlmann_distance(psi: &PureState, phi: &PureState) -> f64 {
    let u = uhlmann_isometry(psi, phi, &["A"]).unwrap();
    let mapped = phi.apply(&u).unwrap().permute(&psi.layout().labels().collect::<Vec<_>>()).unwrap();
    pure_trace_distance(psi.amplitudes(), mapped.amplitudes())
}

#[test]
fn uhlmann_same_state() {
    let psi = random_pure_state(Layout::new([("A", 2), ("B", 3)]).unwrap(), &mut rng(10)).unwrap();
    assert!(uhlmann_distance(&psi, &psi) < 1e-7);
}

#[test]
fn uhlmann_recovers_known_isometry() {
    let mut r = rng(11);
    let psi = random_pure_state(Layout::new([("A", 2), ("B", 3)]).unwrap(), &mut r).unwrap();
    let v = Isometry::new(
        haar_unitary(3, &mut r),
        Layout::single("B", 3).unwrap(),
        Layout::single("B'", 3).unwrap(),
    )
    .unwrap();
    let phi = psi.apply(&v).unwrap();
    assert!(uhlmann_distance(&psi, &phi) < 1e-7);
}

#[test]
fn uhlmann_under_mixing_perturbation() {
    let mut r = rng(12);
    let eps_mix = 1e-2;
    let psi = random_pure_state(Layout::new([("A", 2), ("B", 2)]).unwrap(), &mut r).unwrap();
    let rho = psi.reduced(&["A"]).unwrap();
    let mixed = rho.matrix().scale(1.0 - eps_mix) + CMatrix::identity(2, 2).scale(eps_mix / 2.0);
    let sigma = DensityOperator::new(mixed, qubit("A")).unwrap();
    let eps = trace_distance(&rho, &sigma).unwrap();
    let phi = purify(&sigma, "B'").unwrap();
    assert!(uhlmann_distance(&psi, &phi) <= 2.0 * eps.sqrt() + 1e-12);
}

#[test]
fn uhlmann_needs_room() {
    let psi = random_pure_state(Layout::new([("A", 3), ("B", 2)]).unwrap(), &mut rng(13)).unwrap();
    let phi = purify(&psi.reduced(&["A"]).unwrap(), "B'").unwrap();
    assert!(uhlmann_isometry(&psi, &phi, &["A"]).unwrap_err().is_infeasible());
}

#[test]
fn pure_and_mixed_reductions_agree() {
    let psi = random_pure_state(Layout::new([("A", 2), ("B", 3), ("C", 2)]).unwrap(), &mut rng(14)).unwrap();
    let mixed: LabeledState = psi.to_density().into();
    let a = LabeledState::from(psi).reduced(&["C", "A"]).unwrap();
    let b = mixed.reduced(&["C", "A"]).unwrap();
    assert!((a.matrix() - b.matrix()).camax() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_inverts_tensor(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
        let mut r = stream_rng(seed, 1);
        let a = random_density(Layout::single("A", da).unwrap(), da, &mut r).unwrap();
        let b = random_density(Layout::single("B", db).unwrap(), db, &mut r).unwrap();
        let ab = a.tensor(&b).unwrap();
        prop_assert!((ab.partial_trace(&["A"]).unwrap().matrix() - a.matrix()).camax() < 1e-10);
        prop_assert!((ab.partial_trace(&["B"]).unwrap().matrix() - b.matrix()).camax() < 1e-10);
    }

    #[test]
    fn isometries_preserve_trace_and_positivity(seed in any::<u64>(), din in 1usize..4, extra in 0usize..3) {
        let mut r = stream_rng(seed, 2);
        let dout = din + extra;
        let u = haar_unitary(dout, &mut r);
        let v = u.columns(0, din).into_owned();
        let op = Isometry::new(v, Layout::single("A", din).unwrap(), Layout::single("A'", dout).unwrap()).unwrap();
        let rho = random_density(Layout::new([("A", din), ("B", 2)]).unwrap(), 2, &mut r).unwrap();
        let out = rho.apply(&op).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
        prop_assert!(jacobi_eigenvalues(out.matrix())[0] > -1e-10);
    }

    #[test]
    fn trace_norm_is_a_metric(seed in any::<u64>(), d in 1usize..5) {
        let mut r = stream_rng(seed, 3);
        let l = Layout::single("A", d).unwrap();
        let x = random_density(l.clone(), d, &mut r).unwrap();
        let y = random_density(l.clone(), 1, &mut r).unwrap();
        let z = random_density(l, 2, &mut r).unwrap();
        let dxy = trace_distance(&x, &y).unwrap();
        prop_assert!((dxy - trace_distance(&y, &x).unwrap()).abs() < 1e-9);
        prop_assert!(dxy <= trace_distance(&x, &z).unwrap() + trace_distance(&z, &y).unwrap() + 1e-9);
        prop_assert!((dxy - oracle_trace_norm(&(x.matrix() - y.matrix()))).abs() < 1e-9);
    }

    #[test]
    fn max_entangled_marginals_are_maximally_mixed(d in 1usize..9) {
        let s = max_entangled(d, ("S", "T")).unwrap();
        let id = CMatrix::identity(d, d).unscale(d as f64);
        prop_assert!((s.reduced(&["S"]).unwrap().matrix() - &id).camax() < 1e-12);
        prop_assert!((s.reduced(&["T"]).unwrap().matrix() - &id).camax() < 1e-12);
    }

    #[test]
    fn trace_norm_matches_oracle(seed in any::<u64>(), d in 1usize..6) {
        let mut r = stream_rng(seed, 4);
        let g = CMatrix::from_fn(d, d, |_, _| c(0.0)) + haar_unitary(d, &mut r);
        let h = (&g + g.adjoint()).scale(0.5);
        prop_assert!((trace_norm(&h).unwrap() - oracle_trace_norm(&h)).abs() < 1e-9);
    }

    #[test]
    fn inner_products_are_conjugate_linear(seed in any::<u64>()) {
        let mut r = stream_rng(seed, 5);
        let l = Layout::new([("A", 2), ("B", 2)]).unwrap();
        let a = random_pure_state(l.clone(), &mut r).unwrap();
        let b = random_pure_state(l, &mut r).unwrap();
        let ab = a.inner(&b).unwrap();
        prop_assert!((ab - b.inner(&a).unwrap().conj()).norm() < 1e-12);
        let v: CVector = a.amplitudes().clone();
        prop_assert!((v.dotc(b.amplitudes()) - ab).norm() < 1e-12);
    }
}
