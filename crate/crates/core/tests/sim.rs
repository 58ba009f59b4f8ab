mod common;

use common::*;
use hetreg::sim::{
    draw_error, gen_clusters, gen_dataset, gen_truth, subgroup_sizes, Balance, CustomDesign, ErrorBranch, ErrorLaw,
    Scenario, ScenarioSpec, P_HIGH,
};
use proptest::prelude::*;

#[test]
fn listings_match_golden_transcription() {
    let bad = golden_mismatches();
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn design_has_ar1_correlation() {
    let r = lag1_correlation(20_000, 6, 1);
    assert!((r - 0.5).abs() < 0.02, "{r}");
}

#[test]
fn mixture_takes_normal_branch_seventy_percent() {
    let f = normal_branch_frequency(50_000, 2);
    assert!((f - 0.7).abs() < 0.01, "{f}");
}

#[test]
fn gaussian_and_cauchy_laws_use_one_branch() {
    let mut r = rng(3);
    assert!((0..100).all(|_| draw_error(ErrorLaw::Gauss, &mut r).1 == ErrorBranch::Normal));
    assert!((0..100).all(|_| draw_error(ErrorLaw::T1, &mut r).1 == ErrorBranch::Cauchy));
}

#[test]
fn scenario_clusters_cover_all_genes() {
    for s in [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5, Scenario::S6] {
        let cs = gen_clusters(&s).unwrap();
        assert_eq!(cs.p(), P_HIGH);
        let mut covered = vec![false; P_HIGH];
        for l in 0..cs.n_clusters() {
            for &j in cs.cluster(l) {
                covered[j] = true;
            }
        }
        assert!(covered.iter().all(|&c| c), "{s}");
    }
    assert_eq!(gen_clusters(&Scenario::S2).unwrap().n_clusters(), 39);
}

#[test]
fn subgroup_size_rules() {
    assert_eq!(subgroup_sizes(300, 2, Balance::Balanced), vec![150, 150]);
    assert_eq!(subgroup_sizes(300, 2, Balance::Unbalanced), vec![210, 90]);
    assert_eq!(subgroup_sizes(301, 3, Balance::ThreeEqual), vec![101, 100, 100]);
}

#[test]
fn datasets_are_reproducible_and_consistent() {
    let spec = ScenarioSpec::new(Scenario::S1, 120, Balance::Unbalanced, ErrorLaw::Mix, 9);
    let (d1, t1) = gen_dataset(&spec).unwrap();
    let (d2, t2) = gen_dataset(&spec).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(t1, t2);
    assert_eq!(t1.partition.sizes(), vec![84, 36]);
    assert_eq!((d1.n(), d1.p()), (120, P_HIGH));
    let other = gen_dataset(&ScenarioSpec { seed: 10, ..spec }).unwrap().0;
    assert_ne!(d1, other);
}

#[test]
fn noiseless_data_follow_the_truth() {
    let spec = ScenarioSpec { noise_scale: 0.0, ..ScenarioSpec::new(Scenario::LowDim(20), 50, Balance::Balanced, ErrorLaw::T1, 4) };
    let (d, t) = gen_dataset(&spec).unwrap();
    for i in 0..50 {
        let g = t.partition.labels()[i];
        let want: f64 = (0..20).map(|j| d.x()[[i, j]] * t.betas[[g, j]]).sum();
        assert!((d.y()[i] - want).abs() < 1e-12);
    }
}

#[test]
fn custom_designs() {
    let c = Scenario::Custom(CustomDesign { p: 3, clusters: vec![vec![0, 1], vec![1, 2]], betas: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]] });
    assert_eq!(gen_truth(&c, Balance::Balanced).unwrap().dim(), (2, 3));
    assert!(gen_truth(&c, Balance::ThreeEqual).is_err());
    assert_eq!(gen_clusters(&c).unwrap().n_clusters(), 2);
}

#[test]
fn names_round_trip() {
    for s in ["s1", "s2", "s3", "s4", "s5", "s6", "lowdim10", "lowdim50"] {
        let parsed: Scenario = s.parse().unwrap();
        assert_eq!(parsed.to_string().to_lowercase(), s);
    }
    assert!("s7".parse::<Scenario>().is_err());
    assert!("lowdim11".parse::<Scenario>().map(|s| gen_clusters(&s)).map_or(true, |r| r.is_err()));
    assert!("mix".parse::<ErrorLaw>().is_ok());
    assert!("three".parse::<Balance>().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn labels_have_prescribed_sizes(n in 3usize..200, seed in any::<u64>(), three in any::<bool>()) {
        let balance = if three { Balance::ThreeEqual } else { Balance::Unbalanced };
        let spec = ScenarioSpec::new(Scenario::LowDim(10), n, balance, ErrorLaw::Gauss, seed);
        let spec = ScenarioSpec { scenario: if three { Scenario::S1 } else { Scenario::LowDim(10) }, ..spec };
        let spec = if three { spec } else { ScenarioSpec { balance: Balance::Balanced, ..spec } };
        let (_, t) = gen_dataset(&spec).unwrap();
        prop_assert_eq!(t.partition.sizes(), subgroup_sizes(n, t.k(), spec.balance));
    }
}
