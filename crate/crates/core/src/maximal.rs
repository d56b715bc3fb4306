//! Dyadic maximal operators and the local mean oscillation `ω_λ`.
//!
//! Every supremum runs over the dyadic intervals of `[0, 1)` that contain the
//! point.

use crate::dyadic::{
    interval_sums, node_count, pushdown_max, weak_l1_of_values, DyadicInterval, Signal,
};
use crate::error::{invalid, Error, Result};
use crate::hardy::Weight;

#[derive(Clone, Copy, Debug)]
pub enum MaximalKind<'a> {
    /// `⨍_I |f|`.
    Hl,
    /// `(⨍_I |f|^p)^{1/p}`.
    Lp(f64),
    /// `ω(I)^{-1} ∫_I |f| ω`.
    Weighted(&'a Weight),
    /// `(ω(I)^{-1} ∫_I |f|^r ω)^{1/r}`.
    WeightedLr(f64, &'a Weight),
    /// `|I|^{-1} ‖f 1_I‖_{1,∞}`.
    Weak,
    /// `⨍_I |f - ⨍_I f|`.
    Sharp,
}

/// Per-interval values of the local functional, heap ordered.
pub fn local_functional(f: &Signal, kind: MaximalKind<'_>) -> Result<Vec<f64>> {
    let depth = f.depth();
    let check_weight = |w: &Weight| {
        if w.depth() != depth {
            Err(Error::SignalDepths(depth, w.depth()))
        } else {
            Ok(())
        }
    };
    let table = match kind {
        MaximalKind::Hl => averages(
            &f.values().iter().map(|v| v.abs()).collect::<Vec<_>>(),
            depth,
        ),
        MaximalKind::Lp(p) => {
            positive("p", p)?;
            let powered: Vec<f64> = f.values().iter().map(|v| v.abs().powf(p)).collect();
            averages(&powered, depth)
                .into_iter()
                .map(|a| a.powf(p.recip()))
                .collect()
        }
        MaximalKind::Weighted(w) => {
            check_weight(w)?;
            let weighted: Vec<f64> = f
                .values()
                .iter()
                .zip(w.values())
                .map(|(v, w)| v.abs() * w)
                .collect();
            let sums = interval_sums(&weighted, depth);
            sums.iter()
                .enumerate()
                .map(|(n, s)| s / w.mass_node(n))
                .collect()
        }
        MaximalKind::WeightedLr(r, w) => {
            positive("r", r)?;
            check_weight(w)?;
            let weighted: Vec<f64> = f
                .values()
                .iter()
                .zip(w.values())
                .map(|(v, w)| v.abs().powf(r) * w)
                .collect();
            let sums = interval_sums(&weighted, depth);
            sums.iter()
                .enumerate()
                .map(|(n, s)| (s / w.mass_node(n)).powf(r.recip()))
                .collect()
        }
        MaximalKind::Weak => weak_table(f),
        MaximalKind::Sharp => {
            let means = averages(f.values(), depth);
            (0..node_count(depth))
                .map(|n| {
                    let i = DyadicInterval::from_node(n);
                    let cells = &f.values()[i.cell_range(depth)];
                    cells.iter().map(|v| (v - means[n]).abs()).sum::<f64>() / cells.len() as f64
                })
                .collect()
        }
    };
    Ok(table)
}

pub fn maximal(f: &Signal, kind: MaximalKind<'_>) -> Result<Signal> {
    let table = local_functional(f, kind)?;
    Signal::new(pushdown_max(&table, f.depth()))
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(
            name,
            format!("exponent must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}

fn averages(values: &[f64], depth: u32) -> Vec<f64> {
    interval_sums(values, depth)
        .into_iter()
        .enumerate()
        .map(|(n, s)| s / DyadicInterval::from_node(n).len())
        .collect()
}

/// Weak quasinorms per interval, merging sorted children bottom-up.
fn weak_table(f: &Signal) -> Vec<f64> {
    let depth = f.depth();
    let h = f.cell_measure();
    let mut table = vec![0.0; node_count(depth)];
    let mut level: Vec<Vec<f64>> = f.values().iter().map(|v| vec![v.abs()]).collect();
    for d in (0..=depth).rev() {
        for (i, sorted) in level.iter().enumerate() {
            let node = (1usize << d) - 1 + i;
            table[node] = weak_l1_of_values(sorted.iter().copied(), h)
                / DyadicInterval::from_node(node).len();
        }
        if d > 0 {
            level = level
                .chunks(2)
                .map(|pair| {
                    let mut merged = Vec::with_capacity(pair[0].len() * 2);
                    let (mut a, mut b) = (pair[0].iter().peekable(), pair[1].iter().peekable());
                    while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
                        if x >= y {
                            merged.push(x);
                            a.next();
                        } else {
                            merged.push(y);
                            b.next();
                        }
                    }
                    merged.extend(a);
                    merged.extend(b);
                    merged
                })
                .collect();
        }
    }
    table
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(
            "lambda",
            format!("must lie in (0, 1), got {lambda}"),
        ));
    }
    Ok(())
}

/// Rank (1-based, from the top) read by `φ^*(λ|I|)` among `cells` equal cells.
pub(crate) fn quantile_rank(lambda: f64, cells: usize) -> usize {
    ((lambda * cells as f64).floor() as usize + 1).min(cells)
}

/// `ω_λ(f; I) = inf_c ((f - c) 1_I)^*(λ|I|)`.
///
/// `((f - c)1_I)^*(λ|I|)` is the `k`-th largest `|f - c|` with
/// `k = ⌊λ m⌋ + 1`, so the infimum is half the shortest window covering
/// `m - k + 1` consecutive sorted values.
pub fn local_mean_oscillation(f: &Signal, interval: DyadicInterval, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    f.check_interval(interval)?;
    let mut sorted = f.values()[interval.cell_range(f.depth())].to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(omega_sorted(&sorted, lambda))
}

pub(crate) fn omega_sorted(sorted: &[f64], lambda: f64) -> f64 {
    let m = sorted.len();
    let w = m - quantile_rank(lambda, m) + 1;
    (0..=m - w)
        .map(|i| {
            let (lo, hi) = (sorted[i], sorted[i + w - 1]);
            let c = (lo + hi) / 2.0;
            (c - lo).abs().max((hi - c).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Medians of sorted data: the closed interval `[lower, upper]`.
pub(crate) fn median_interval(sorted: &[f64]) -> (f64, f64) {
    let m = sorted.len();
    if m % 2 == 1 {
        (sorted[m / 2], sorted[m / 2])
    } else {
        (sorted[m / 2 - 1], sorted[m / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{decreasing_rearrangement, weak_l1_quasinorm, CellSet};
    use proptest::prelude::*;

    fn iv(d: u32, i: u64) -> DyadicInterval {
        DyadicInterval::new(d, i)
    }

    fn signal(depth: u32) -> impl Strategy<Value = Signal> {
        prop::collection::vec(-10.0f64..10.0, 1usize << depth).prop_map(|v| Signal::new(v).unwrap())
    }

    /// Scan `c` over all values and pairwise midpoints of the data.
    fn omega_oracle(f: &Signal, interval: DyadicInterval, lambda: f64) -> f64 {
        let vals = &f.values()[interval.cell_range(f.depth())];
        let mut candidates: Vec<f64> = vals.to_vec();
        for a in vals {
            for b in vals {
                candidates.push((a + b) / 2.0);
            }
        }
        candidates
            .into_iter()
            .map(|c| {
                let shifted = f.map(|v| v - c);
                decreasing_rearrangement(&shifted, interval)
                    .unwrap()
                    .eval(lambda * interval.len())
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn hl_examples() {
        let one = maximal(&Signal::constant(4, 1.0), MaximalKind::Hl).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        let q = Signal::indicator(4, iv(2, 0));
        let m = maximal(&q, MaximalKind::Hl).unwrap();
        assert_eq!(m.values()[12], 0.25);
        assert_eq!(m.values()[0], 1.0);
    }

    #[test]
    fn sharp_of_constant_vanishes() {
        let m = maximal(&Signal::constant(4, -2.0), MaximalKind::Sharp).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_exponents() {
        let f = Signal::constant(3, 1.0);
        assert!(maximal(&f, MaximalKind::Lp(0.0)).is_err());
        let w = Weight::constant(3, 1.0);
        assert!(maximal(&f, MaximalKind::WeightedLr(-1.0, &w)).is_err());
        assert!(local_mean_oscillation(&f, DyadicInterval::ROOT, 1.0).is_err());
        assert!(local_mean_oscillation(&f, DyadicInterval::ROOT, 0.0).is_err());
    }

    #[test]
    fn omega_examples() {
        assert_eq!(
            local_mean_oscillation(&Signal::constant(4, 3.0), DyadicInterval::ROOT, 0.125).unwrap(),
            0.0
        );
        let half = Signal::indicator(4, iv(1, 0));
        let w = local_mean_oscillation(&half, DyadicInterval::ROOT, 0.25).unwrap();
        assert_eq!(w, omega_oracle(&half, DyadicInterval::ROOT, 0.25));
        assert_eq!(w, 0.5);
        let h = Signal::haar_tilde(4, DyadicInterval::ROOT).unwrap();
        assert_eq!(
            local_mean_oscillation(&h, DyadicInterval::ROOT, 0.125).unwrap(),
            1.0
        );
    }

    #[test]
    fn midpoints_of_neighbours_are_not_enough() {
        // Values {0, 1, 3, 3} with k = 1: the optimal centre 1.5 is the midpoint of 0 and 3.
        let f = Signal::new(vec![0.0, 1.0, 3.0, 3.0]).unwrap();
        let w = local_mean_oscillation(&f, DyadicInterval::ROOT, 0.125).unwrap();
        assert_eq!(w, 1.5);
        assert_eq!(w, omega_oracle(&f, DyadicInterval::ROOT, 0.125));
    }

    proptest! {
        #[test]
        fn omega_matches_oracle(f in signal(4), lambda in 0.01f64..0.99, d in 0u32..3, i in 0u64..4) {
            let interval = DyadicInterval::new(d, i % (1 << d));
            prop_assert_eq!(local_mean_oscillation(&f, interval, lambda).unwrap(), omega_oracle(&f, interval, lambda));
        }

        #[test]
        fn omega_nonincreasing_in_lambda(f in signal(5), a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let root = DyadicInterval::ROOT;
            prop_assert!(local_mean_oscillation(&f, root, hi).unwrap() <= local_mean_oscillation(&f, root, lo).unwrap());
        }

        #[test]
        fn hl_weak_type_constant_one(f in signal(6)) {
            let m = maximal(&f, MaximalKind::Hl).unwrap();
            let l1 = f.abs().integral();
            let mut levels: Vec<f64> = m.values().to_vec();
            levels.sort_unstable_by(f64::total_cmp);
            levels.dedup();
            for lambda in levels.into_iter().chain([0.0]) {
                let count = m.values().iter().filter(|&&v| v > lambda).count();
                prop_assert!(lambda * count as f64 * f.cell_measure() <= l1 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn sharp_below_twice_hl(f in signal(6)) {
            let s = maximal(&f, MaximalKind::Sharp).unwrap();
            let m = maximal(&f, MaximalKind::Hl).unwrap();
            for (a, b) in s.values().iter().zip(m.values()) {
                prop_assert!(*a <= 2.0 * b * (1.0 + 1e-12));
            }
        }

        #[test]
        fn weak_maximal_dominates_local_quasinorm(f in signal(5), d in 0u32..5, i in 0u64..16) {
            let interval = DyadicInterval::new(d, i % (1 << d));
            let m = maximal(&f, MaximalKind::Weak).unwrap();
            let local = weak_l1_quasinorm(&f, &CellSet::from_interval(interval, 5)).unwrap() / interval.len();
            for c in interval.cell_range(5) {
                prop_assert!(local <= m.values()[c] * (1.0 + 1e-12));
            }
        }

        #[test]
        fn weighted_doob(f in signal(6), w in prop::collection::vec(0.01f64..100.0, 64), q in 1.2f64..4.0) {
            let w = Weight::new(w).unwrap();
            let m = maximal(&f, MaximalKind::Weighted(&w)).unwrap();
            let lhs = crate::dyadic::lp_norm(&m, q, None, Some(&w)).unwrap();
            let rhs = crate::dyadic::lp_norm(&f, q, None, Some(&w)).unwrap();
            prop_assert!(lhs <= q / (q - 1.0) * rhs * (1.0 + 1e-9));
        }

        #[test]
        fn median_vs_mean_oscillation(f in signal(4)) {
            let root = DyadicInterval::ROOT;
            let osc = crate::dyadic::oscillation(&f, root).unwrap();
            let best = f.values().iter().map(|&c| f.values().iter().map(|v| (v - c).abs()).sum::<f64>() / 16.0)
                .fold(f64::INFINITY, f64::min);
            prop_assert!(osc <= 2.0 * best * (1.0 + 1e-12));
            prop_assert!(best <= osc * (1.0 + 1e-12));
        }
    }
}
