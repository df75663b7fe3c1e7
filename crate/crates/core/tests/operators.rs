mod common;

use common::*;
use mla_core::game::{pre, StateId};
use mla_core::mpre::{ghat_aux, mpre, mprex, region_summaries, HMode};
use mla_core::partition::RegionValuation;
use mla_core::partition::BoundRole;
use proptest::prelude::*;
use rand::Rng;

const LAW_CASES: u32 = 1000;

fn modes() -> impl Strategy<Value = HMode> {
    prop_oneof![Just(HMode::Max), Just(HMode::Min)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(LAW_CASES))]

    #[test]
    fn pre_is_monotone(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = rng(seed);
        let g = random_game(&mut rng, n, &ALL_KINDS, 4);
        let v = random_valuation(&mut rng, n, 1.0);
        let w: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..1.0)).collect();
        let (a, b) = (pre(&g, &v).unwrap(), pre(&g, &w).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn mpre_is_monotone(seed in any::<u64>(), n in 1usize..12, h in modes()) {
        let mut rng = rng(seed);
        let g = random_game(&mut rng, n, &ALL_KINDS, 4);
        let tree = random_tree(&mut rng, &g);
        let v = random_valuation(&mut rng, n, 1.0);
        let w: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..1.0)).collect();
        let a = mpre(&g, h, &v, &tree).unwrap();
        let b = mpre(&g, h, &w, &tree).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn mpre_keeps_valuations_bounded(seed in any::<u64>(), n in 1usize..12, h in modes(), q in 0.0f64..10.0) {
        let mut rng = rng(seed);
        let g = random_game(&mut rng, n, &ALL_KINDS, 4);
        let tree = random_tree(&mut rng, &g);
        let v = random_valuation(&mut rng, n, q);
        let out = mpre(&g, h, &v, &tree).unwrap();
        prop_assert!(out.iter().all(|x| x.abs() <= q * (1.0 + 1e-12)));
    }

    #[test]
    fn mpre_brackets_pre(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = rng(seed);
        let g = random_game(&mut rng, n, &ALL_KINDS, 4);
        let tree = random_tree(&mut rng, &g);
        let v = random_valuation(&mut rng, n, 1.0);
        let p = pre(&g, &v).unwrap();
        let hi = mpre(&g, HMode::Max, &v, &tree).unwrap();
        let lo = mpre(&g, HMode::Min, &v, &tree).unwrap();
        for s in 0..n {
            prop_assert!(lo[s] <= p[s] + 1e-12 && p[s] <= hi[s] + 1e-12, "state {}", s);
        }
    }

    #[test]
    fn magnified_step_equals_mpre_on_summaries(seed in any::<u64>(), n in 1usize..12, h in modes()) {
        let mut rng = rng(seed);
        let g = random_game(&mut rng, n, &ALL_KINDS, 4);
        let tree = random_tree(&mut rng, &g);
        let v = random_valuation(&mut rng, n, 1.0);
        let full = mpre(&g, h, &v, &tree).unwrap();
        let u = RegionValuation::new(BoundRole::Upper, region_summaries(&tree, h, &v));
        for x in tree.regions() {
            let states = tree.states_of(x).unwrap();
            let v_x: Vec<f64> = states.iter().map(|&s| v[s as usize]).collect();
            let local = mprex(&g, x, &v_x, &tree, &u).unwrap();
            for (i, &s) in states.iter().enumerate() {
                prop_assert!((local[i] - full[s as usize]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn ghat_reads_local_values_inside_and_summaries_outside() {
    let mut rng = rng(40);
    let g = random_game(&mut rng, 8, &ALL_KINDS, 3);
    let tree = mla_core::partition::initial_partition(&g, 1).unwrap();
    let v = random_valuation(&mut rng, 8, 1.0);
    let u = RegionValuation::new(BoundRole::Lower, region_summaries(&tree, HMode::Min, &v));
    for s in 0..8 {
        let xs = tree.region_index_of(s);
        let v_x: Vec<f64> = tree.states_at(xs).iter().map(|&q| v[q as usize]).collect();
        for t in 0..8 {
            let got = ghat_aux(&tree, StateId(s), &v_x, &u, StateId(t)).unwrap();
            let want = if tree.region_index_of(t) == xs { v[t] } else { u.values()[tree.region_index_of(t)] };
            assert_eq!(got, want);
        }
    }
}

#[test]
fn ghat_rejects_short_local_valuations() {
    let mut rng = rng(41);
    let g = random_game(&mut rng, 4, &ALL_KINDS, 2);
    let tree = mla_core::partition::initial_partition(&g, 0).unwrap();
    let u = RegionValuation::constant(BoundRole::Upper, 1, 0.0);
    assert!(ghat_aux(&tree, StateId(0), &[0.0], &u, StateId(3)).is_err());
}
