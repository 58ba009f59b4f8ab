mod common;

use common::*;
use hetreg::metrics::{ari, coefficient_rmse, contingency, identification, match_labels, nmi, pmre, stability};
use hetreg::sim::GroundTruth;
use hetreg::{Error, Partition};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

fn truth(labels: &[usize], betas: Array2<f64>) -> GroundTruth {
    let supports = betas.mapv(|b| b != 0.0);
    GroundTruth { partition: partition(labels), betas, supports }
}

#[test]
fn pair_metrics_match_direct_computation_exhaustively() {
    for n in 1..=6 {
        let all = partitions(n, 3);
        for a in &all {
            for b in &all {
                let (pa, pb) = (partition(a), partition(b));
                assert!((ari(&pa, &pb).unwrap() - ari_pairs(a, b)).abs() < 1e-12, "{a:?} {b:?}");
                assert!((nmi(&pa, &pb).unwrap() - nmi_direct(a, b).clamp(0.0, 1.0)).abs() < 1e-12, "{a:?} {b:?}");
                let idx: Vec<usize> = (0..n).collect();
                assert!((stability(&pa, &pb, &idx).unwrap() - stability_direct(a, b)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn partition_counts() {
    // Stirling numbers of the second kind summed over 1..=3 groups.
    assert_eq!(partitions(4, 3).len(), 1 + 7 + 6);
    assert_eq!(partitions(8, 3).len(), 1 + 127 + 966);
}

#[test]
fn identical_and_relabelled_partitions() {
    let a = partition(&[0, 0, 1, 1, 2, 2]);
    let b = partition(&[2, 2, 0, 0, 1, 1]);
    assert_eq!(ari(&a, &b).unwrap(), 1.0);
    assert!((nmi(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(match_labels(&a, &b).unwrap(), vec![Some(2), Some(0), Some(1)]);
}

#[test]
fn contingency_counts() {
    let a = partition(&[0, 0, 1, 1]);
    let b = partition(&[0, 1, 1, 1]);
    assert_eq!(contingency(&a, &b).unwrap(), array![[1, 1], [0, 2]]);
    assert!(ari(&a, &partition(&[0, 1, 0])).is_err());
}

#[test]
fn matching_with_unequal_group_counts() {
    let est = partition(&[0, 0, 0, 1, 1, 1]);
    let tru = partition(&[0, 0, 1, 1, 2, 2]);
    let perm = match_labels(&est, &tru).unwrap();
    assert_eq!(perm.iter().filter(|m| m.is_some()).count(), 2);
    let est3 = partition(&[0, 1, 2, 2, 2, 2]);
    let tru2 = partition(&[0, 0, 1, 1, 1, 1]);
    let perm = match_labels(&est3, &tru2).unwrap();
    assert_eq!(perm[2], Some(1));
}

#[test]
fn mcc_matches_direct_on_random_supports() {
    let mut r = rng(1);
    for _ in 0..200 {
        let p = r.random_range(1..15);
        let est: Vec<bool> = (0..p).map(|_| r.random_bool(0.4)).collect();
        let tru: Vec<bool> = (0..p).map(|_| r.random_bool(0.4)).collect();
        let eb = Array2::from_shape_fn((1, p), |(_, j)| if est[j] { 1.0 } else { 0.0 });
        let tb = Array2::from_shape_fn((1, p), |(_, j)| if tru[j] { -2.0 } else { 0.0 });
        let labels = vec![0; 4];
        let rep = identification(&partition(&labels), eb.view(), &truth(&labels, tb)).unwrap();
        assert!((rep.mcc - mcc_direct(&est, &tru)).abs() < 1e-12);
        let tp = est.iter().zip(&tru).filter(|(e, t)| **e && **t).count();
        assert_eq!(rep.true_positives, tp);
    }
}

#[test]
fn unmatched_subgroups_count_against_estimate() {
    let labels = [0, 0, 1, 1];
    let tb = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let est = array![[1.0, 0.0, 0.0]];
    let rep = identification(&partition(&[0, 0, 0, 0]), est.view(), &truth(&labels, tb)).unwrap();
    assert_eq!((rep.true_positives, rep.false_negatives, rep.false_positives), (1, 1, 0));
    assert_eq!(rep.tpr, 0.5);
}

#[test]
fn rmse_matches_loop() {
    let mut r = rng(2);
    for _ in 0..50 {
        let n = r.random_range(1..30);
        let p = r.random_range(1..8);
        let ke = r.random_range(1..4);
        let kt = r.random_range(1..4);
        let el: Vec<usize> = (0..n).map(|_| r.random_range(0..ke)).collect();
        let tl: Vec<usize> = (0..n).map(|_| r.random_range(0..kt)).collect();
        let eb = Array2::from_shape_fn((ke, p), |_| r.random_range(-2.0..2.0));
        let tb = Array2::from_shape_fn((kt, p), |_| r.random_range(-2.0..2.0));
        let ep = Partition::new(el.clone(), ke).unwrap();
        let gt = GroundTruth {
            partition: Partition::new(tl.clone(), kt).unwrap(),
            supports: tb.mapv(|b| b != 0.0),
            betas: tb.clone(),
        };
        let got = coefficient_rmse(&ep, eb.view(), &gt).unwrap();
        assert!((got - rmse_loop(&el, eb.view(), &tl, tb.view())).abs() < 1e-12);
    }
}

#[test]
fn pmre_skips_zero_responses() {
    let res = pmre(array![2.0, 0.0, -4.0].view(), array![1.0, 5.0, -5.0].view()).unwrap();
    assert!((res.value - 0.375).abs() < 1e-15);
    assert_eq!(res.excluded, 1);
    assert!(matches!(pmre(array![0.0].view(), array![1.0].view()), Err(Error::UndefinedMetric(_))));
}

#[test]
fn stability_on_subsample() {
    let full = partition(&[0, 0, 1, 1, 2]);
    let sub = partition(&[0, 0, 0]);
    // Samples 1, 2, 4 of the full partition are all in different groups.
    let s = stability(&full, &sub, &[1, 2, 4]).unwrap();
    assert!((s - 6.0 / 9.0).abs() < 1e-15);
    assert!(stability(&full, &sub, &[1, 1, 4]).is_err());
    assert!(stability(&full, &sub, &[1, 2, 9]).is_err());
}

proptest! {
    #[test]
    fn ari_and_nmi_are_symmetric_and_bounded(
        a in proptest::collection::vec(0usize..4, 2..30),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let b: Vec<usize> = a.iter().map(|_| r.random_range(0..4)).collect();
        let (pa, pb) = (partition(&a), partition(&b));
        let ab = ari(&pa, &pb).unwrap();
        prop_assert!((ab - ari(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        let m = nmi(&pa, &pb).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!((m - nmi(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&pa, &pa).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stability_is_a_bounded_distance(
        a in proptest::collection::vec(0usize..3, 1..20),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let b: Vec<usize> = a.iter().map(|_| r.random_range(0..3)).collect();
        let idx: Vec<usize> = (0..a.len()).collect();
        let s = stability(&partition(&a), &partition(&b), &idx).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(stability(&partition(&a), &partition(&a), &idx).unwrap(), 0.0);
    }
}
