mod common;

use std::collections::BTreeSet;

use common::*;
use kng::metrics::{connected_components, pro_curve, pro_score, rocauc_slices};
use kng::rng::Xoshiro256;
use kng::{AnomalyMap, KngError, MaskTensor};

#[test]
fn rocauc_examples() {
    let auc = |s: &[f64], l: &[bool]| rocauc_slices(s, l).unwrap();
    assert_eq!(auc(&[2.0, 3.0, 0.0, 1.0], &[true, true, false, false]), 1.0);
    assert_eq!(auc(&[1.0; 6], &[true, false, true, false, false, true]), 0.5);
    assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]), 0.75);
    assert!(matches!(
        rocauc_slices(&[1.0, 2.0], &[true, true]),
        Err(KngError::UndefinedMetric(_))
    ));
}

#[test]
fn rocauc_matches_pair_enumeration() {
    let mut rng = Xoshiro256::seed_from(200);
    for _ in 0..200 {
        let n = 2 + rng.below(60) as usize;
        let levels = 1 + rng.below(8);
        let scores: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 * 0.5).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.below(3) == 0).collect();
        labels[0] = true;
        labels[1] = false;
        let got = rocauc_slices(&scores, &labels).unwrap();
        assert!((got - pair_auc(&scores, &labels)).abs() < 1e-12);
    }
}

fn as_sets(comps: &[Vec<usize>], w: usize) -> Vec<BTreeSet<(usize, usize)>> {
    comps.iter().map(|c| c.iter().map(|&p| (p / w, p % w)).collect()).collect()
}

#[test]
fn components_match_flood_fill() {
    let mut rng = Xoshiro256::seed_from(201);
    for density in [0.1, 0.3, 0.5, 0.7] {
        let mask = random_mask(&mut rng, 16, 16, density);
        assert_eq!(as_sets(&connected_components(&mask), 16), flood_fill(&mask));
    }
    let diag = MaskTensor::new(2, 2, vec![1, 0, 0, 1]).unwrap();
    assert_eq!(connected_components(&diag).len(), 1);
    assert!(connected_components(&MaskTensor::zeros(4, 4)).is_empty());
}

#[test]
fn pro_small_example_matches_brute_force() {
    // Two components; eight distinct score values.
    let mask = MaskTensor::new(4, 4, vec![1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1]).unwrap();
    let values = [8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
    let scores: Vec<f64> = (0..16).map(|i| values[(i * 5) % 8]).collect();
    let map = AnomalyMap::new(4, 4, scores.clone()).unwrap();
    for limit in [0.1, 0.3, 0.5, 1.0] {
        let got = pro_score(std::slice::from_ref(&map), std::slice::from_ref(&mask), limit).unwrap();
        assert!((got - pro_brute(std::slice::from_ref(&scores), std::slice::from_ref(&mask), limit)).abs() < 1e-9);
    }
}

#[test]
fn pro_random_maps_match_brute_force() {
    let mut rng = Xoshiro256::seed_from(202);
    let mut checked = 0;
    while checked < 40 {
        let n_img = 1 + rng.below(3) as usize;
        let (h, w) = (2 + rng.below(7) as usize, 2 + rng.below(7) as usize);
        let masks: Vec<MaskTensor> = (0..n_img).map(|_| random_mask(&mut rng, h, w, 0.3)).collect();
        let total_pos: usize = masks.iter().map(|m| m.anomalous_pixels()).sum();
        if total_pos == 0 || total_pos == n_img * h * w {
            continue;
        }
        let levels = 2 + rng.below(20);
        let raw: Vec<Vec<f64>> = (0..n_img)
            .map(|_| (0..h * w).map(|_| rng.below(levels) as f64).collect())
            .collect();
        let maps: Vec<AnomalyMap> = raw.iter().map(|s| AnomalyMap::new(h, w, s.clone()).unwrap()).collect();
        let limit = 0.05 + 0.95 * rng.unit_f64();
        let got = pro_score(&maps, &masks, limit).unwrap();
        assert!((got - pro_brute(&raw, &masks, limit)).abs() < 1e-9);
        checked += 1;
    }
}

#[test]
fn pro_extremes() {
    let mask = MaskTensor::new(3, 3, vec![0, 0, 0, 0, 1, 1, 0, 0, 0]).unwrap();
    let perfect = AnomalyMap::new(3, 3, mask.data().iter().map(|&v| v as f64 * 3.0).collect()).unwrap();
    assert_eq!(pro_score(&[perfect], std::slice::from_ref(&mask), 0.3).unwrap(), 1.0);
    let flat = AnomalyMap::constant(3, 3, 2.0);
    assert_eq!(pro_score(std::slice::from_ref(&flat), &[mask], 0.3).unwrap(), 0.0);
    assert!(matches!(
        pro_score(&[flat], &[MaskTensor::zeros(3, 3)], 0.3),
        Err(KngError::UndefinedMetric(_))
    ));
}

#[test]
fn pro_area_grows_with_limit() {
    let mut rng = Xoshiro256::seed_from(203);
    let mask = random_mask(&mut rng, 8, 8, 0.3);
    let map = AnomalyMap::new(8, 8, (0..64).map(|_| rng.unit_f64()).collect()).unwrap();
    let curve = pro_curve(std::slice::from_ref(&map), std::slice::from_ref(&mask)).unwrap();
    assert!(curve.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].overlap <= w[1].overlap));
    let mut last = 0.0;
    for i in 1..=20 {
        let limit = i as f64 / 20.0;
        let area = pro_score(std::slice::from_ref(&map), std::slice::from_ref(&mask), limit).unwrap() * limit;
        assert!(area >= last - 1e-15);
        last = area;
    }
}
