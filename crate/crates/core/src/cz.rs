//! Calderón–Zygmund decomposition of `|f|` and the weak-(1,1) test built on
//! major subsets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{
    dyadic_length, interval_sums, node_count, CellSet, DyadicInterval, Signal, REL_SLACK,
};
use crate::error::{invalid, Result};
use crate::haar::{apply_multiplier, HaarMultiplier};
use crate::maximal::{maximal, MaximalKind};
use crate::sparse::{sparse_operator, SparseCollection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub cube: DyadicInterval,
    /// `⨍_{Q_i} |f|`.
    pub average: f64,
    /// `b_i = |f| - ⨍_{Q_i}|f|` on the cells of `Q_i`.
    pub values: Vec<f64>,
}

impl BadPart {
    pub fn to_signal(&self, depth: u32) -> Signal {
        let mut s = Signal::zeros(depth);
        s.values_mut()[self.cube.cell_range(depth)].copy_from_slice(&self.values);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub alpha: f64,
    pub good: Signal,
    pub bad: Vec<BadPart>,
    /// `α ≤ ⨍_{[0,1)}|f|`, so `[0, 1)` itself is the only bad cube.
    pub root_case: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzChecks {
    /// `|f| = g + Σ b_i` holds with no rounding on every cell.
    pub reconstruction_exact: bool,
    pub max_reconstruction_error: f64,
    pub max_bad_integral: f64,
    pub good_sup_ok: bool,
    pub good_l1_ok: bool,
    pub measure_ok: bool,
    /// Bad cubes are disjoint and are exactly the maximal intervals of `{M f > α}`.
    pub maximal_ok: bool,
}

impl CzChecks {
    pub fn passed(&self) -> bool {
        self.max_reconstruction_error <= 1e-12
            && self.good_sup_ok
            && self.good_l1_ok
            && self.measure_ok
            && self.maximal_ok
    }

    /// Every identity holds with zero rounding error.
    pub fn exact(&self) -> bool {
        self.passed() && self.reconstruction_exact && self.max_bad_integral == 0.0
    }
}

impl CzDecomposition {
    pub fn bad_cubes(&self) -> Vec<DyadicInterval> {
        self.bad.iter().map(|b| b.cube).collect()
    }

    pub fn check(&self, f: &Signal) -> CzChecks {
        let depth = f.depth();
        let h = dyadic_length(depth);
        let abs = f.abs();
        let mut total = self.good.values().to_vec();
        let mut max_bad_integral = 0.0f64;
        for b in &self.bad {
            for (t, v) in total[b.cube.cell_range(depth)].iter_mut().zip(&b.values) {
                *t += v;
            }
            max_bad_integral = max_bad_integral.max((b.values.iter().sum::<f64>() * h).abs());
        }
        let reconstruction_exact = total.iter().zip(abs.values()).all(|(x, y)| x == y);
        let max_reconstruction_error = total
            .iter()
            .zip(abs.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let l1 = abs.integral();
        let slack = 1.0 + REL_SLACK;
        let good_sup_ok = self.root_case || self.good.max_abs() <= 2.0 * self.alpha;
        let good_l1_ok = self.good.abs().integral() <= l1 * slack;
        let bad_measure: f64 = self.bad.iter().map(|b| b.cube.len()).sum();
        let measure_ok = self.root_case || bad_measure * self.alpha <= l1 * slack;

        let maximal_ok = if self.root_case {
            self.bad_cubes() == vec![DyadicInterval::ROOT]
        } else {
            let mf = maximal(f, MaximalKind::Hl).expect("HL needs no parameters");
            let level =
                CellSet::from_cells(depth, (0..f.len()).filter(|&c| mf.values()[c] > self.alpha));
            let union = CellSet::from_cells(
                depth,
                self.bad.iter().flat_map(|b| b.cube.cell_range(depth)),
            );
            let cells: usize = self
                .bad
                .iter()
                .map(|b| b.cube.cell_range(depth).len())
                .sum();
            let parents_ok = self.bad.iter().all(|b| {
                b.average > self.alpha
                    && b.cube.parent().is_none_or(|p| {
                        let r = p.cell_range(depth);
                        abs.values()[r.clone()].iter().sum::<f64>() / r.len() as f64 <= self.alpha
                    })
            });
            level == union && cells == union.cell_count() && parents_ok
        };
        CzChecks {
            reconstruction_exact,
            max_reconstruction_error,
            max_bad_integral,
            good_sup_ok,
            good_l1_ok,
            measure_ok,
            maximal_ok,
        }
    }
}

/// Decomposes `|f| = g + Σ_i b_i` at level `α` on the maximal dyadic cubes
/// where `⨍_Q |f| > α`.
pub fn cz_decompose(f: &Signal, alpha: f64) -> Result<CzDecomposition> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(
            "alpha",
            format!("must be positive and finite, got {alpha}"),
        ));
    }
    let depth = f.depth();
    let abs = f.abs();
    let sums = interval_sums(abs.values(), depth);
    let avg = |i: DyadicInterval| sums[i.node()] / i.len();
    let root_case = avg(DyadicInterval::ROOT) >= alpha;
    let cubes = if root_case {
        vec![DyadicInterval::ROOT]
    } else {
        let mut out = Vec::new();
        let mut stack = vec![DyadicInterval::ROOT];
        while let Some(q) = stack.pop() {
            if avg(q) > alpha {
                out.push(q);
            } else if q.depth() < depth {
                stack.extend(q.children());
            }
        }
        out.sort();
        out
    };
    let mut good = abs.clone();
    let mut bad = Vec::with_capacity(cubes.len());
    for q in cubes {
        let r = q.cell_range(depth);
        let average = abs.values()[r.clone()].iter().sum::<f64>() / r.len() as f64;
        let values = abs.values()[r.clone()]
            .iter()
            .map(|v| v - average)
            .collect();
        good.values_mut()[r].fill(average);
        bad.push(BadPart {
            cube: q,
            average,
            values,
        });
    }
    Ok(CzDecomposition {
        alpha,
        good,
        bad,
        root_case,
    })
}

/// `Σ_i Σ_{Q∈S, Q⊆Q_i} (⨍_Q b_i)(⨍_Q |h|)|Q|`; vanishes when `h` avoids every bad cube.
pub fn annihilation_sum(cz: &CzDecomposition, s: &SparseCollection, h: &Signal) -> f64 {
    let depth = h.depth();
    let h_sums = interval_sums(h.abs().values(), depth);
    let mut total = 0.0;
    for b in &cz.bad {
        let b_sums = interval_sums(b.to_signal(depth).values(), depth);
        for &q in s
            .intervals()
            .iter()
            .filter(|&&q| b.cube.contains(q) && q.depth() <= depth)
        {
            total += (b_sums[q.node()] / q.len()) * (h_sums[q.node()] / q.len()) * q.len();
        }
    }
    total
}

/// Operators tested for weak type (1,1).
#[derive(Clone, Copy, Debug)]
pub enum Weak11Operator<'a> {
    Identity,
    Sparse(&'a SparseCollection),
    /// A Haar multiplier is diagonal with real entries, so it is its own adjoint.
    Multiplier(&'a HaarMultiplier),
}

impl Weak11Operator<'_> {
    pub fn apply(&self, f: &Signal) -> Result<Signal> {
        match self {
            Weak11Operator::Identity => Ok(f.clone()),
            Weak11Operator::Sparse(s) => sparse_operator(s, f),
            Weak11Operator::Multiplier(t) => apply_multiplier(t, f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Dyadic,
    Union,
    Level,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstSet {
    pub kind: SetKind,
    pub measure: f64,
    pub major_measure: f64,
    /// `∫_{E'} |op f|` for `f` normalized in `L¹`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weak11Report {
    pub k: f64,
    /// `‖f‖₁` before normalization.
    pub l1_norm: f64,
    /// Jump levels `λ` of `|op f|` that were scanned, normalized input.
    pub alpha_levels: Vec<f64>,
    /// `λ |{|op f| ≥ λ}|` at each scanned level.
    pub weak_constants: Vec<f64>,
    /// `‖op f‖_{1,∞} / ‖f‖₁`, exact.
    pub exact_weak: f64,
    /// `sup_E ∫_{E'} |op f|` over the tested sets.
    pub report: f64,
    pub worst_e: Option<WorstSet>,
    pub sets_checked: usize,
    /// `2|E'| ≥ |E|` for every tested set.
    pub major_ok: bool,
    /// `exact_weak ≤ 2 · report`.
    pub consistent: bool,
}

impl Weak11Report {
    pub fn passed(&self) -> bool {
        self.major_ok && self.consistent
    }
}

const MAX_LEVELS: usize = 128;
const RANDOM_SETS: usize = 32;

/// Tests `op` for weak type (1,1) at `f` through `E' = {x ∈ E : M f(x) < K/|E|}`
/// over all dyadic intervals, random unions of them and the level sets of `|op f|`.
pub fn weak11_certify<R: Rng + ?Sized>(
    op: Weak11Operator<'_>,
    f: &Signal,
    k: f64,
    rng: &mut R,
) -> Result<Weak11Report> {
    if !(k > 1.0 && k.is_finite()) {
        return Err(invalid(
            "K",
            format!("must be finite and greater than 1, got {k}"),
        ));
    }
    let depth = f.depth();
    let n = f.len();
    let h = dyadic_length(depth);
    let l1_norm = f.abs().integral();
    let f = if l1_norm > 0.0 {
        f.scale(l1_norm.recip())
    } else {
        f.clone()
    };
    let u: Vec<f64> = op.apply(&f)?.values().iter().map(|v| v.abs()).collect();
    let mf = maximal(&f, MaximalKind::Hl)?;

    let mut report = 0.0f64;
    let mut worst_e = None;
    let mut major_ok = true;
    let mut sets_checked = 0;
    let mut test = |cells: &mut dyn Iterator<Item = usize>, kind: SetKind| {
        let cells: Vec<usize> = cells.collect();
        if cells.is_empty() {
            return;
        }
        let measure = cells.len() as f64 * h;
        let threshold = k / measure;
        let (mut major, mut value) = (0usize, 0.0f64);
        for &c in &cells {
            if mf.values()[c] < threshold {
                major += 1;
                value += u[c] * h;
            }
        }
        sets_checked += 1;
        major_ok &= 2 * major >= cells.len();
        if value > report || worst_e.is_none() {
            report = report.max(value);
            worst_e = Some(WorstSet {
                kind,
                measure,
                major_measure: major as f64 * h,
                value,
            });
        }
    };

    for node in 0..node_count(depth) {
        test(
            &mut DyadicInterval::from_node(node).cell_range(depth),
            SetKind::Dyadic,
        );
    }
    for _ in 0..RANDOM_SETS {
        let pieces = rng.random_range(1..=8);
        let mut mask = vec![false; n];
        for _ in 0..pieces {
            let d = rng.random_range(1..=depth);
            let i = DyadicInterval::new(d, rng.random_range(0..1u64 << d));
            mask[i.cell_range(depth)].fill(true);
        }
        test(&mut (0..n).filter(|&c| mask[c]), SetKind::Union);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]));
    // (level, cells with |u| ≥ level) at every jump of the distribution.
    let mut jumps: Vec<(f64, usize)> = Vec::new();
    let mut j = 0;
    while j < n && u[order[j]] > 0.0 {
        let level = u[order[j]];
        while j < n && u[order[j]] == level {
            j += 1;
        }
        jumps.push((level, j));
    }
    let weak_at = |&(level, count): &(f64, usize)| level * count as f64 * h;
    let best = jumps
        .iter()
        .enumerate()
        .max_by(|a, b| weak_at(a.1).total_cmp(&weak_at(b.1)))
        .map(|(i, _)| i);
    let exact_weak = best.map_or(0.0, |i| weak_at(&jumps[i]));
    let stride = jumps.len().div_ceil(MAX_LEVELS).max(1);
    let mut scanned: Vec<usize> = (0..jumps.len()).step_by(stride).collect();
    if let Some(i) = best {
        if !scanned.contains(&i) {
            scanned.push(i);
            scanned.sort_unstable();
        }
    }
    for &i in &scanned {
        test(&mut order[..jumps[i].1].iter().copied(), SetKind::Level);
    }
    let consistent = exact_weak <= 2.0 * report * (1.0 + REL_SLACK);
    Ok(Weak11Report {
        k,
        l1_norm,
        alpha_levels: scanned.iter().map(|&i| jumps[i].0).collect(),
        weak_constants: scanned.iter().map(|&i| weak_at(&jumps[i])).collect(),
        exact_weak,
        report,
        worst_e,
        sets_checked,
        major_ok,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::weak_l1_quasinorm;
    use crate::generate::{random_sparse_collection, SignalKind};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spike_on_a_quarter() {
        let f = Signal::indicator(5, DyadicInterval::new(2, 0)).scale(4.0);
        let cz = cz_decompose(&f, 2.0).unwrap();
        assert_eq!(cz.bad_cubes(), vec![DyadicInterval::new(2, 0)]);
        assert_eq!(cz.good, f);
        assert!(cz.bad[0].values.iter().all(|&v| v == 0.0));
        assert!(cz.check(&f).exact());
    }

    #[test]
    fn constant_below_level() {
        let f = Signal::constant(4, 1.5);
        let cz = cz_decompose(&f, 2.0).unwrap();
        assert!(cz.bad.is_empty());
        assert_eq!(cz.good, f);
        assert!(cz.check(&f).exact());
    }

    #[test]
    fn root_case() {
        let f = Signal::new(vec![1.0, 3.0, 0.0, 4.0]).unwrap();
        let cz = cz_decompose(&f, 2.0).unwrap();
        assert!(cz.root_case);
        assert_eq!(cz.bad_cubes(), vec![DyadicInterval::ROOT]);
        assert_eq!(cz.good, Signal::constant(2, 2.0));
        assert!(cz.check(&f).exact());
        assert!(cz_decompose(&f, 0.0).is_err());
    }

    #[test]
    fn annihilation_vanishes_off_bad_cubes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let f = SignalKind::Quantized.generate(8, &mut rng).unwrap();
            let cz = cz_decompose(&f, 1.5).unwrap();
            let s = random_sparse_collection(8, &mut rng);
            let mut h = SignalKind::GaussianNoise.generate(8, &mut rng).unwrap();
            for b in &cz.bad {
                h.values_mut()[b.cube.cell_range(8)].fill(0.0);
            }
            assert_eq!(annihilation_sum(&cz, &s, &h), 0.0);
        }
    }

    #[test]
    fn identity_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = SignalKind::GaussianNoise
            .generate(7, &mut rng)
            .unwrap()
            .abs();
        let r = weak11_certify(Weak11Operator::Identity, &f, 4.0, &mut rng).unwrap();
        assert!(r.passed(), "{r:?}");
        let exact = weak_l1_quasinorm(&f.scale(r.l1_norm.recip()), &CellSet::full(7)).unwrap();
        assert_eq!(r.exact_weak, exact);
        assert!(r.exact_weak <= 1.0 + 1e-12);
        assert!(r.report <= 1.0 + 1e-12);
    }

    #[test]
    fn zero_signal_report() {
        let r = weak11_certify(
            Weak11Operator::Identity,
            &Signal::zeros(4),
            4.0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(r.exact_weak, 0.0);
        assert!(r.passed());
        assert!(weak11_certify(
            Weak11Operator::Identity,
            &Signal::zeros(4),
            1.0,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    fn quantized(depth: u32) -> impl Strategy<Value = Signal> {
        prop::collection::vec(-4096i32..4096, 1usize << depth)
            .prop_map(|v| Signal::new(v.into_iter().map(|x| x as f64 / 256.0).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn cz_invariants_exact(f in quantized(7), alpha in 0.25f64..20.0) {
            let alpha = (alpha * 64.0).round() / 64.0;
            let cz = cz_decompose(&f, alpha).unwrap();
            let checks = cz.check(&f);
            prop_assert!(checks.exact(), "{:?}", checks);
        }

        #[test]
        fn cz_invariants_general(v in prop::collection::vec(-10.0f64..10.0, 128), alpha in 0.1f64..20.0) {
            let f = Signal::new(v).unwrap();
            let checks = cz_decompose(&f, alpha).unwrap().check(&f);
            prop_assert!(checks.passed(), "{:?}", checks);
        }

        #[test]
        fn sparse_operators_pass(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sparse_collection(7, &mut rng);
            let f = SignalKind::GaussianNoise.generate(7, &mut rng).unwrap();
            let r = weak11_certify(Weak11Operator::Sparse(&s), &f, 4.0, &mut rng).unwrap();
            prop_assert!(r.passed(), "{:?}", r);
            let t = crate::generate::random_multiplier(7, 0.5, &mut rng);
            let r = weak11_certify(Weak11Operator::Multiplier(&t), &f, 4.0, &mut rng).unwrap();
            prop_assert!(r.passed(), "{:?}", r);
        }
    }
}
