//! Median-centred oscillation decomposition.
//!
//! Starting from `Q0` with a median `m(Q0)`, each stopping interval `L` marks
//! the exceptional set `E_L = {x ∈ L : |φ(x) - m(L)| > 2 ω_λ(φ; L)}`, whose
//! measure is at most `λ|L|`. The children of `L` are the maximal dyadic
//! `P ⊊ L` with `|E_L ∩ P| > |P|/4`, and `m(P)` is the median of `P` closest to
//! `m(L)`. For `λ ≤ 1/8` this gives a child budget of `4λ ≤ 1/2` and the
//! pointwise bound `|φ - m(Q0)| ≤ 2 Σ_L ω_λ(φ; L) 1_L`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, Signal, REL_SLACK};
use crate::error::{invalid, Result};
use crate::maximal::{median_interval, omega_sorted};
use crate::sparse::SparseCollection;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LernerRecord {
    #[serde(rename = "Q")]
    pub q: DyadicInterval,
    pub median: f64,
    pub omega: f64,
    pub exceptional_measure: f64,
    pub children: Vec<DyadicInterval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LernerDecomposition {
    pub root: DyadicInterval,
    pub lambda: f64,
    pub root_median: f64,
    pub records: Vec<LernerRecord>,
    pub collection: SparseCollection,
    pub max_child_share: f64,
    pub sparse_at_half: bool,
    /// `max_x |φ(x) - m(Q0)| / Σ_L ω_λ(φ; L) 1_L(x)`; absent if some cell has a
    /// nonzero left side over a vanishing sum.
    pub realized_constant: Option<f64>,
    /// The pointwise bound holds with `K = 2` on every cell of `Q0`.
    pub bound_holds: bool,
}

/// The constant the construction guarantees for `λ ≤ 1/8`.
pub const LERNER_CONSTANT: f64 = 2.0;

pub fn lerner_decompose(
    phi: &Signal,
    root: DyadicInterval,
    lambda: f64,
) -> Result<LernerDecomposition> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(invalid(
            "lambda",
            format!("must lie in (0, 1/2), got {lambda}"),
        ));
    }
    phi.check_interval(root)?;
    let depth = phi.depth();
    let values = phi.values();
    let sorted_on = |q: DyadicInterval| {
        let mut s = values[q.cell_range(depth)].to_vec();
        s.sort_unstable_by(f64::total_cmp);
        s
    };

    let (lo, hi) = median_interval(&sorted_on(root));
    let root_median = lo + (hi - lo) / 2.0;
    let mut records = Vec::new();
    let mut queue = VecDeque::from([(root, root_median)]);
    while let Some((l, median)) = queue.pop_front() {
        let sorted = sorted_on(l);
        let omega = omega_sorted(&sorted, lambda);
        let range = l.cell_range(depth);
        let exceptional: Vec<bool> = values[range.clone()]
            .iter()
            .map(|v| (v - median).abs() > 2.0 * omega)
            .collect();
        let count = exceptional.iter().filter(|&&e| e).count();
        let children = if count == 0 {
            Vec::new()
        } else {
            stopping_children(l, depth, &exceptional)
        };
        for &p in &children {
            let (plo, phi_) = median_interval(&sorted_on(p));
            queue.push_back((p, median.clamp(plo, phi_)));
        }
        records.push(LernerRecord {
            q: l,
            median,
            omega,
            exceptional_measure: count as f64 * phi.cell_measure(),
            children,
        });
    }

    let mut collection = SparseCollection::new(records.iter().map(|r| r.q));
    let sparse_at_half = collection.certify(0.5)?;
    let max_child_share = collection.max_child_share();

    let mut sum = vec![0.0f64; 1 << depth];
    for r in &records {
        for c in r.q.cell_range(depth) {
            sum[c] += r.omega;
        }
    }
    let mut realized = Some(0.0f64);
    let mut bound_holds = true;
    for c in root.cell_range(depth) {
        let lhs = (values[c] - root_median).abs();
        if lhs > LERNER_CONSTANT * sum[c] * (1.0 + REL_SLACK) {
            bound_holds = false;
        }
        realized = match (realized, crate::domination::certificate::ratio(lhs, sum[c])) {
            (Some(k), Some(v)) => Some(k.max(v)),
            _ => None,
        };
    }
    Ok(LernerDecomposition {
        root,
        lambda,
        root_median,
        records,
        collection,
        max_child_share,
        sparse_at_half,
        realized_constant: realized,
        bound_holds,
    })
}

/// Maximal `P ⊊ L` with `4|E ∩ P| > |P|`; `exceptional` is indexed by the cells of `L`.
fn stopping_children(l: DyadicInterval, depth: u32, exceptional: &[bool]) -> Vec<DyadicInterval> {
    let levels = depth - l.depth();
    // counts[k][j]: exceptional cells in the j-th subinterval of L at relative depth k.
    let mut counts: Vec<Vec<usize>> = vec![exceptional.iter().map(|&e| e as usize).collect()];
    for _ in 0..levels {
        let finer = counts.last().expect("nonempty");
        counts.push(finer.chunks(2).map(|p| p[0] + p[1]).collect());
    }
    counts.reverse();
    let mut out = Vec::new();
    let mut stack: Vec<(u32, usize)> = if levels > 0 {
        vec![(1, 0), (1, 1)]
    } else {
        Vec::new()
    };
    while let Some((k, j)) = stack.pop() {
        let cells = 1usize << (levels - k);
        let e = counts[k as usize][j];
        if e == 0 {
            continue;
        }
        if 4 * e > cells {
            out.push(DyadicInterval::new(
                l.depth() + k,
                (l.index() << k) + j as u64,
            ));
        } else {
            stack.push((k + 1, 2 * j));
            stack.push((k + 1, 2 * j + 1));
        }
    }
    out.sort();
    out
}
