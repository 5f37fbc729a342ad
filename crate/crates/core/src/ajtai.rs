//! Median-bit hierarchical matching.
//!
//! Each of `n = 4^k` points receives a `2k`-bit label. Bits at odd positions
//! (1st, 3rd, ...) split the current group at the median of the first
//! coordinate, bits at even positions at the median of the second coordinate;
//! every split acts on the points sharing the label prefix built so far. Two
//! point sets are then matched by identical labels.
//!
//! Labels depend only on per-axis ranks, so any strictly increasing
//! coordinate transform leaves them unchanged.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assignment::{matched_cost, Matching};
use crate::error::{Error, Result};
use crate::geometry::{Metric, PointSet};

/// Median bits of `a`: the upper half by value gets 1. Equal values are
/// ordered by index, so lower indices receive 0 first.
pub fn median_bits(a: &[f64]) -> Result<Vec<u8>> {
    if a.is_empty() || a.len() % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "median bits need an even, nonzero length, got {}",
            a.len()
        )));
    }
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| rank_order(a[i], i, a[j], j));
    let mut bits = vec![0u8; a.len()];
    for &i in &idx[a.len() / 2..] {
        bits[i] = 1;
    }
    Ok(bits)
}

#[inline]
fn rank_order(va: f64, ia: usize, vb: f64, ib: usize) -> Ordering {
    va.total_cmp(&vb).then(ia.cmp(&ib))
}

/// Returns `k` when `n = 4^k`.
pub fn level_for(n: usize) -> Option<usize> {
    if n == 0 || !n.is_power_of_two() || n.trailing_zeros() % 2 != 0 {
        None
    } else {
        Some(n.trailing_zeros() as usize / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLabeling {
    /// Bit 1 of the sequence is the most significant of the `2k` used bits.
    pub labels: Vec<u64>,
    pub k: usize,
}

impl BitLabeling {
    pub fn bit_len(&self) -> usize {
        2 * self.k
    }

    /// Bits of point `i`, position 1 first.
    pub fn bits(&self, i: usize) -> Vec<u8> {
        let len = self.bit_len();
        (0..len).map(|p| ((self.labels[i] >> (len - 1 - p)) & 1) as u8).collect()
    }

    pub fn label_string(&self, i: usize) -> String {
        self.bits(i).iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }

    /// CSV `idx,label` with the label written as a 0/1 string.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["idx", "label"])?;
        for i in 0..self.labels.len() {
            wtr.write_record([i.to_string(), self.label_string(i)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn build_labels(ps: &PointSet, k: usize) -> Result<BitLabeling> {
    let n = ps.len();
    if level_for(n) != Some(k) {
        return Err(Error::InvalidInput(format!(
            "labeling with k = {k} needs 4^{k} points, got {n}"
        )));
    }
    let pts = ps.points();
    let bit_len = 2 * k;
    let mut labels = vec![0u64; n];
    let mut order: Vec<usize> = (0..n).collect();

    for step in 0..bit_len {
        let axis = step % 2;
        let size = n >> step;
        let half = size / 2;
        let shift = bit_len - 1 - step;
        for group in order.chunks_mut(size) {
            group.select_nth_unstable_by(half, |&i, &j| {
                rank_order(pts[i].coord(axis), i, pts[j].coord(axis), j)
            });
            for &i in &group[half..] {
                labels[i] |= 1 << shift;
            }
        }
    }
    Ok(BitLabeling { labels, k })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AjtaiResult {
    pub matching: Matching,
    pub total_cost: f64,
}

impl AjtaiResult {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.matching.to_json();
        v["algorithm"] = "ajtai".into();
        v
    }
}

/// Pairs the points of `left` and `right` carrying the same label. The cost
/// is always squared plane distance, whatever metric the sets carry.
pub fn match_ajtai(left: &PointSet, right: &PointSet, k: usize) -> Result<AjtaiResult> {
    if left.len() != right.len() {
        return Err(Error::InvalidInput(format!(
            "size mismatch: {} left vs {} right points",
            left.len(),
            right.len()
        )));
    }
    let ll = build_labels(left, k)?;
    let rl = build_labels(right, k)?;
    let mut by_label = vec![0usize; right.len()];
    for (j, &label) in rl.labels.iter().enumerate() {
        by_label[label as usize] = j;
    }
    let permutation: Vec<usize> = ll.labels.iter().map(|&label| by_label[label as usize]).collect();
    let metric = Metric::EuclideanSquared;
    let total_cost = matched_cost(left.points(), right.points(), &permutation, metric);
    let matching = Matching {
        permutation,
        total_cost,
        duals_a: vec![],
        duals_b: vec![],
        optimal: false,
        metric,
    };
    Ok(AjtaiResult { matching, total_cost })
}

/// `(c/(2^k+1), d/(2^k+1))` where `c` sums the odd-position bits of `b` and
/// `d` the even-position bits.
pub fn label_expectation(b: &[u8], k: usize) -> Result<(f64, f64)> {
    if b.len() != 2 * k {
        return Err(Error::InvalidInput(format!("expected {} bits, got {}", 2 * k, b.len())));
    }
    let c: u32 = b.iter().step_by(2).map(|&v| v as u32).sum();
    let d: u32 = b.iter().skip(1).step_by(2).map(|&v| v as u32).sum();
    let denom = (1u64 << k) as f64 + 1.0;
    Ok((c as f64 / denom, d as f64 / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{improve_two_swap, solve_exact};
    use crate::geometry::{marginal_quantile_transform, sample, Point2, QuantileDirection, SampleKind};
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    fn satisfies_definition(a: &[f64], b: &[u8]) -> bool {
        let ones = b.iter().filter(|&&v| v == 1).count();
        if ones * 2 != a.len() {
            return false;
        }
        let max_zero = a
            .iter()
            .zip(b)
            .filter(|(_, &v)| v == 0)
            .map(|(x, _)| *x)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_one = a
            .iter()
            .zip(b)
            .filter(|(_, &v)| v == 1)
            .map(|(x, _)| *x)
            .fold(f64::INFINITY, f64::min);
        max_zero <= min_one
    }

    #[test]
    fn median_bits_examples() {
        assert_eq!(median_bits(&[3.0, 1.0, 4.0, 2.0]).unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(median_bits(&[1.0, 2.0]).unwrap(), vec![0, 1]);
        let tied = median_bits(&[5.0; 4]).unwrap();
        assert_eq!(tied, vec![0, 0, 1, 1]);
        assert!(satisfies_definition(&[5.0; 4], &tied));
        assert!(median_bits(&[1.0, 2.0, 3.0]).is_err());
        assert!(median_bits(&[]).is_err());
    }

    #[test]
    fn level_detection() {
        assert_eq!(level_for(1), Some(0));
        assert_eq!(level_for(4), Some(1));
        assert_eq!(level_for(1024), Some(5));
        assert_eq!(level_for(8), None);
        assert_eq!(level_for(0), None);
    }

    #[test]
    fn four_corner_labels() {
        let pts = [(0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9)];
        let ps = PointSet::new(
            pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
            Metric::EuclideanSquared,
        )
        .unwrap();
        let lab = build_labels(&ps, 1).unwrap();
        let s: Vec<String> = (0..4).map(|i| lab.label_string(i)).collect();
        assert_eq!(s, ["00", "10", "01", "11"]);
        let mut buf = Vec::new();
        lab.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "idx,label\n0,00\n1,10\n2,01\n3,11\n");
    }

    #[test]
    fn wrong_size_is_rejected() {
        let ps = sample(SampleKind::UniformSquare, 8, &mut stream(1, Purpose::Misc, 0)).unwrap();
        assert!(build_labels(&ps, 1).is_err());
        let a = sample(SampleKind::UniformSquare, 16, &mut stream(1, Purpose::Misc, 1)).unwrap();
        let b = sample(SampleKind::UniformSquare, 4, &mut stream(1, Purpose::Misc, 2)).unwrap();
        assert!(match_ajtai(&a, &b, 2).is_err());
    }

    #[test]
    fn self_match_is_identity() {
        let ps = sample(SampleKind::UniformSquare, 256, &mut stream(2, Purpose::Misc, 0)).unwrap();
        let r = match_ajtai(&ps, &ps, 4).unwrap();
        assert_eq!(r.matching.permutation, (0..256).collect::<Vec<_>>());
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(r.to_json()["algorithm"], "ajtai");
    }

    #[test]
    fn label_expectation_examples() {
        assert_eq!(label_expectation(&[1, 0], 1).unwrap(), (1.0 / 3.0, 0.0));
        assert_eq!(label_expectation(&[0, 0, 0, 0], 2).unwrap(), (0.0, 0.0));
        assert!(label_expectation(&[1, 0, 1], 2).is_err());
    }

    #[test]
    fn improved_ajtai_lands_between_ajtai_and_exact() {
        let (mut aj, mut imp, mut ex) = (0.0, 0.0, 0.0);
        for rep in 0..100 {
            let mut rng = stream(3, Purpose::Misc, rep);
            let l = sample(SampleKind::UniformSquare, 64, &mut rng).unwrap();
            let r = sample(SampleKind::UniformSquare, 64, &mut rng).unwrap();
            let a = match_ajtai(&l, &r, 3).unwrap();
            let i = improve_two_swap(&l, &r, &a.matching).unwrap();
            let e = solve_exact(&l, &r).unwrap();
            assert!(a.total_cost >= e.total_cost - 1e-12);
            assert!(i.total_cost <= a.total_cost + 1e-12 && i.total_cost >= e.total_cost - 1e-12);
            aj += a.total_cost;
            imp += i.total_cost;
            ex += e.total_cost;
        }
        assert!(aj > imp && imp > ex, "{aj} {imp} {ex}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn median_bits_satisfy_definition(a in proptest::collection::vec(-5i32..5, 1..20usize)) {
            let mut a: Vec<f64> = a.into_iter().map(f64::from).collect();
            if a.len() % 2 == 1 {
                a.pop();
            }
            prop_assume!(!a.is_empty());
            let b = median_bits(&a).unwrap();
            prop_assert!(satisfies_definition(&a, &b));
        }

        #[test]
        fn labels_are_a_bijection_with_balanced_prefixes(seed in any::<u64>(), k in 0usize..5) {
            let n = 1usize << (2 * k);
            let ps = sample(SampleKind::UniformSquare, n, &mut stream(seed, Purpose::Misc, 9)).unwrap();
            let lab = build_labels(&ps, k).unwrap();
            let mut seen = vec![false; n];
            for &l in &lab.labels {
                prop_assert!(!seen[l as usize]);
                seen[l as usize] = true;
            }
            for p in 0..=2 * k {
                let mut counts = vec![0usize; 1 << p];
                for &l in &lab.labels {
                    counts[(l >> (2 * k - p)) as usize] += 1;
                }
                prop_assert!(counts.iter().all(|&c| c == n >> p));
            }
        }

        #[test]
        fn labels_and_matching_survive_quantile_transform(seed in any::<u64>(), k in 1usize..4) {
            let n = 1usize << (2 * k);
            let mut rng = stream(seed, Purpose::Misc, 10);
            let l = sample(SampleKind::StandardNormalPlane, n, &mut rng).unwrap();
            let r = sample(SampleKind::StandardNormalPlane, n, &mut rng).unwrap();
            let lu = marginal_quantile_transform(&l, QuantileDirection::NormalToUniform).unwrap();
            let ru = marginal_quantile_transform(&r, QuantileDirection::NormalToUniform).unwrap();
            prop_assert_eq!(build_labels(&l, k).unwrap(), build_labels(&lu, k).unwrap());
            let a = match_ajtai(&l, &r, k).unwrap();
            let b = match_ajtai(&lu, &ru, k).unwrap();
            prop_assert_eq!(a.matching.permutation, b.matching.permutation);
        }
    }
}
