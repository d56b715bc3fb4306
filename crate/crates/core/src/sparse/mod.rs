//! Sparse collections, Carleson packing, sparse operators and forms.

mod flow;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dyadic::{node_count, pushdown, CellSet, DyadicInterval, LocalizedAverages, Signal};
use crate::error::{invalid, Error, Result};
use crate::maximal::{local_functional, MaximalKind};

pub use flow::fractional_eta;

/// A finite family of dyadic intervals with its child structure.
///
/// `children(Q)` are the maximal members strictly inside `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseCollection {
    intervals: Vec<DyadicInterval>,
    #[serde(skip)]
    parents: Vec<Option<usize>>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    major_subsets: Option<Vec<CellSet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    carleson: Option<f64>,
}

impl SparseCollection {
    /// Duplicates are merged; order is coarse to fine.
    pub fn new(intervals: impl IntoIterator<Item = DyadicInterval>) -> Self {
        let mut intervals: Vec<DyadicInterval> = intervals.into_iter().collect();
        intervals.sort();
        intervals.dedup();
        let mut s = SparseCollection {
            intervals,
            parents: Vec::new(),
            children: Vec::new(),
            major_subsets: None,
            eta: None,
            carleson: None,
        };
        s.link();
        s
    }

    fn link(&mut self) {
        let position: HashMap<DyadicInterval, usize> = self
            .intervals
            .iter()
            .enumerate()
            .map(|(k, &i)| (i, k))
            .collect();
        self.parents = self
            .intervals
            .iter()
            .map(|&i| {
                let mut a = i.parent();
                while let Some(p) = a {
                    if let Some(&k) = position.get(&p) {
                        return Some(k);
                    }
                    a = p.parent();
                }
                None
            })
            .collect();
        self.children = vec![Vec::new(); self.intervals.len()];
        for (k, p) in self.parents.iter().enumerate() {
            if let Some(p) = p {
                self.children[*p].push(k);
            }
        }
    }

    /// Restores the derived child structure after deserialization.
    pub fn relink(mut self) -> Self {
        self.link();
        self
    }

    pub fn intervals(&self) -> &[DyadicInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, interval: DyadicInterval) -> bool {
        self.intervals.binary_search(&interval).is_ok()
    }

    pub fn max_depth(&self) -> u32 {
        self.intervals.iter().map(|i| i.depth()).max().unwrap_or(0)
    }

    pub fn children_of(&self, interval: DyadicInterval) -> Vec<DyadicInterval> {
        match self.intervals.binary_search(&interval) {
            Ok(k) => self.children[k]
                .iter()
                .map(|&c| self.intervals[c])
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    /// Members with no strict ancestor in the collection.
    pub fn maximal(&self) -> Vec<DyadicInterval> {
        self.intervals
            .iter()
            .zip(&self.parents)
            .filter(|(_, p)| p.is_none())
            .map(|(&i, _)| i)
            .collect()
    }

    /// `max_Q Σ_{P∈ch(Q)} |P| / |Q|`.
    pub fn max_child_share(&self) -> f64 {
        self.intervals
            .iter()
            .zip(&self.children)
            .map(|(q, ch)| ch.iter().map(|&c| self.intervals[c].len()).sum::<f64>() / q.len())
            .fold(0.0, f64::max)
    }

    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    pub fn carleson(&self) -> Option<f64> {
        self.carleson
    }

    pub fn major_subsets(&self) -> Option<&[CellSet]> {
        self.major_subsets.as_deref()
    }

    /// Rows `depth,index`; a non-numeric first row is a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse_err = |reason: String| Error::Parse {
                line: n + 1,
                reason,
            };
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected 2 fields, found {}",
                    fields.len()
                )));
            }
            let depth = match fields[0].parse::<u32>() {
                Ok(d) => d,
                Err(_) if n == 0 => continue,
                Err(e) => return Err(parse_err(format!("depth `{}`: {e}", fields[0]))),
            };
            let index = fields[1]
                .parse::<u64>()
                .map_err(|e| parse_err(format!("index `{}`: {e}", fields[1])))?;
            intervals
                .push(DyadicInterval::try_new(depth, index).map_err(|e| parse_err(e.to_string()))?);
        }
        Ok(SparseCollection::new(intervals))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,index\n");
        for i in &self.intervals {
            out.push_str(&format!("{},{}\n", i.depth(), i.index()));
        }
        out
    }

    /// Packing sums `Σ_{P∈S, P⊆Q} |P|` for every member.
    fn packing(&self) -> Vec<f64> {
        let mut pack: Vec<f64> = self.intervals.iter().map(|i| i.len()).collect();
        for k in (0..self.intervals.len()).rev() {
            if let Some(p) = self.parents[k] {
                pack[p] += pack[k];
            }
        }
        pack
    }

    /// Checks the child budget and records the child-complement major subsets.
    pub fn certify(&mut self, eta: f64) -> Result<bool> {
        let check = certify_sparse(self, eta)?;
        if check.certified {
            self.eta = Some(eta);
            self.major_subsets = Some(check.major_subsets);
        }
        self.carleson = Some(carleson_constant(self));
        Ok(check.certified)
    }
}

/// `max_{Q∈S} |Q|^{-1} Σ_{P∈S, P⊆Q} |P|`; zero for the empty collection.
pub fn carleson_constant(s: &SparseCollection) -> f64 {
    s.packing()
        .iter()
        .zip(&s.intervals)
        .map(|(p, q)| p / q.len())
        .fold(0.0, f64::max)
}

/// Outcome of the child-complement construction `E_Q = Q ∖ ∪ ch(Q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityCheck {
    pub certified: bool,
    pub eta: f64,
    /// `min_Q |E_Q| / |Q|`.
    pub min_ratio: f64,
    pub major_subsets: Vec<CellSet>,
}

pub fn certify_sparse(s: &SparseCollection, eta: f64) -> Result<SparsityCheck> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", format!("must lie in (0, 1], got {eta}")));
    }
    let depth = s.max_depth();
    let mut min_ratio = 1.0f64;
    let mut major_subsets = Vec::with_capacity(s.len());
    for (k, &q) in s.intervals.iter().enumerate() {
        let covered: f64 = s.children[k].iter().map(|&c| s.intervals[c].len()).sum();
        min_ratio = min_ratio.min((q.len() - covered) / q.len());
        let full = CellSet::from_interval(q, depth);
        let mut mask = full.to_mask();
        for &c in &s.children[k] {
            for cell in s.intervals[c].cell_range(depth) {
                mask[cell] = false;
            }
        }
        major_subsets.push(CellSet::from_mask(&mask));
    }
    if s.is_empty() {
        min_ratio = 1.0;
    }
    Ok(SparsityCheck {
        certified: min_ratio >= eta,
        eta,
        min_ratio,
        major_subsets,
    })
}

/// Sparse versus Carleson comparison for one collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub carleson: f64,
    /// Largest `η` certified by the child-complement construction.
    pub greedy_eta: f64,
    /// Largest `η` admitting fractional disjoint major subsets (small instances only).
    pub fractional_eta: Option<f64>,
    pub eta_times_carleson: f64,
    /// The fractional oracle certifies strictly more than the greedy construction.
    pub gap: bool,
    pub method: String,
}

/// Maximal depth for which the flow oracle runs.
pub const FLOW_ORACLE_MAX_DEPTH: u32 = 8;

pub fn sparse_vs_carleson(s: &SparseCollection) -> Result<CarlesonReport> {
    let carleson = carleson_constant(s);
    let greedy_eta = if s.is_empty() {
        1.0
    } else {
        1.0 - s.max_child_share()
    };
    let fractional =
        (s.max_depth() <= FLOW_ORACLE_MAX_DEPTH && !s.is_empty()).then(|| fractional_eta(s));
    let best = fractional.unwrap_or(greedy_eta).max(greedy_eta);
    Ok(CarlesonReport {
        carleson,
        greedy_eta,
        fractional_eta: fractional,
        eta_times_carleson: best * carleson,
        gap: fractional.is_some_and(|f| f > greedy_eta + 1e-9),
        method: if fractional.is_some() {
            "max-flow".into()
        } else {
            "child-complement".into()
        },
    })
}

/// `T_S f = Σ_{Q∈S} (⨍_Q f) 1_Q`.
pub fn sparse_operator(s: &SparseCollection, f: &Signal) -> Result<Signal> {
    let depth = f.depth();
    if let Some(&i) = s.intervals.iter().find(|i| i.depth() > depth) {
        return Err(Error::DepthMismatch { interval: i, depth });
    }
    let sums = crate::dyadic::interval_sums(f.values(), depth);
    let mut weights = vec![0.0; node_count(depth)];
    for &q in &s.intervals {
        weights[q.node()] = sums[q.node()] / q.len();
    }
    Signal::new(pushdown(&weights, depth))
}

/// `Σ_Q (⨍_Q |f|^p)^{1/p} (⨍_Q |g|^q)^{1/q} |Q|`.
///
/// With `chi = Some(M)` every average is taken against `χ_Q^M`.
pub fn sparse_form(
    s: &SparseCollection,
    f: &Signal,
    g: &Signal,
    p: f64,
    q: f64,
    chi: Option<u32>,
) -> Result<f64> {
    crate::haar::check_exponent("p", p)?;
    crate::haar::check_exponent("q", q)?;
    f.check_same_depth(g)?;
    if let Some(&i) = s.intervals.iter().find(|i| i.depth() > f.depth()) {
        return Err(Error::DepthMismatch {
            interval: i,
            depth: f.depth(),
        });
    }
    let table = |h: &Signal, r: f64| -> Result<Vec<f64>> {
        Ok(match chi {
            Some(m) => {
                let t = LocalizedAverages::new(&h.map(|v| v.abs().powf(r)), m);
                s.intervals
                    .iter()
                    .map(|&i| t.get(i).powf(r.recip()))
                    .collect()
            }
            None => {
                let t = local_functional(h, MaximalKind::Lp(r))?;
                s.intervals.iter().map(|&i| t[i.node()]).collect()
            }
        })
    };
    let (a, b) = (table(f, p)?, table(g, q)?);
    Ok(s.intervals
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(i, (x, y))| x * y * i.len())
        .sum())
}

/// Dyadic BMO norm of `φ = Σ_{I∈collection} ε_I h̃_I` at signal depth `depth`.
///
/// Intervals missing from `signs` get `ε_I = 1`.
pub fn bmo_norm(
    signs: &BTreeMap<DyadicInterval, f64>,
    collection: &[DyadicInterval],
    depth: u32,
) -> Result<f64> {
    let phi = tilde_haar_sum(signs, collection, depth)?;
    Ok(local_functional(&phi, MaximalKind::Sharp)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// `Σ_{I∈collection} ε_I h̃_I` as a depth-`depth` signal.
pub fn tilde_haar_sum(
    signs: &BTreeMap<DyadicInterval, f64>,
    collection: &[DyadicInterval],
    depth: u32,
) -> Result<Signal> {
    let mut weights = vec![0.0; node_count(depth)];
    for &i in collection {
        if i.depth() >= depth {
            return Err(Error::NoHaarMode { interval: i, depth });
        }
        let e = signs.get(&i).copied().unwrap_or(1.0);
        weights[i.left().node()] += e;
        weights[i.right().node()] -= e;
    }
    Signal::new(pushdown(&weights, depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(d: u32, i: u64) -> DyadicInterval {
        DyadicInterval::new(d, i)
    }

    fn full(depth: u32) -> SparseCollection {
        SparseCollection::new(DyadicInterval::all(depth))
    }

    #[test]
    fn carleson_examples() {
        assert_eq!(
            carleson_constant(&SparseCollection::new([iv(1, 0), iv(1, 1)])),
            1.0
        );
        assert_eq!(carleson_constant(&full(2)), 3.0);
        for j in 0..7 {
            assert_eq!(carleson_constant(&full(j)), (j + 1) as f64);
        }
        assert_eq!(carleson_constant(&SparseCollection::new([])), 0.0);
    }

    #[test]
    fn certify_examples() {
        let mut disjoint = SparseCollection::new([iv(2, 0), iv(2, 3)]);
        assert!(disjoint.certify(1.0).unwrap());
        assert_eq!(
            disjoint.major_subsets().unwrap()[0],
            CellSet::from_interval(iv(2, 0), 2)
        );
        let mut f2 = full(2);
        assert!(!f2.certify(0.5).unwrap());
        let check = certify_sparse(&f2, 0.5).unwrap();
        assert!(check.major_subsets[0].is_empty());
        assert!(certify_sparse(&f2, 0.0).is_err());
    }

    #[test]
    fn carleson_report_examples() {
        let r = sparse_vs_carleson(&SparseCollection::new([iv(1, 0), iv(1, 1)])).unwrap();
        assert_eq!((r.carleson, r.greedy_eta), (1.0, 1.0));
        assert!((r.fractional_eta.unwrap() - 1.0).abs() < 1e-9);
        let r = sparse_vs_carleson(&full(2)).unwrap();
        assert_eq!(r.carleson, 3.0);
        assert_eq!(r.greedy_eta, 0.0);
        assert!((r.fractional_eta.unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.gap);
    }

    #[test]
    fn operator_examples() {
        let one = Signal::constant(3, 1.0);
        let t = sparse_operator(&SparseCollection::new([DyadicInterval::ROOT]), &one).unwrap();
        assert!(t.values().iter().all(|&v| v == 1.0));
        let s = SparseCollection::new([DyadicInterval::ROOT, iv(1, 0)]);
        let half = Signal::indicator(3, iv(1, 0));
        let t = sparse_operator(&s, &half).unwrap();
        assert_eq!(t.values(), &[1.5, 1.5, 1.5, 1.5, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn form_examples() {
        let one = Signal::constant(3, 1.0);
        let root = SparseCollection::new([DyadicInterval::ROOT]);
        assert_eq!(sparse_form(&root, &one, &one, 1.0, 1.0, None).unwrap(), 1.0);
        let s = SparseCollection::new([DyadicInterval::ROOT, iv(1, 0)]);
        let half = Signal::indicator(3, iv(1, 0));
        assert_eq!(sparse_form(&s, &half, &half, 1.0, 1.0, None).unwrap(), 0.75);
        assert!(sparse_form(&s, &half, &half, 0.0, 1.0, None).is_err());
    }

    #[test]
    fn bmo_examples() {
        let signs = BTreeMap::new();
        assert_eq!(bmo_norm(&signs, &[iv(2, 1)], 4).unwrap(), 1.0);
        assert_eq!(bmo_norm(&signs, &[], 4).unwrap(), 0.0);
        assert!(bmo_norm(&signs, &[iv(4, 0)], 4).is_err());
        let mut prev = 0.0;
        for d in 0..4 {
            let b = bmo_norm(&signs, &DyadicInterval::all(d).collect::<Vec<_>>(), 6).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = SparseCollection::new([iv(0, 0), iv(3, 5), iv(1, 1)]);
        assert_eq!(SparseCollection::parse_csv(&s.to_csv()).unwrap(), s);
        assert!(SparseCollection::parse_csv("1,2").is_err());
    }

    fn collection(depth: u32) -> impl Strategy<Value = SparseCollection> {
        prop::collection::vec(any::<bool>(), node_count(depth)).prop_map(|mask| {
            SparseCollection::new(
                mask.iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(|(n, _)| DyadicInterval::from_node(n)),
            )
        })
    }

    proptest! {
        #[test]
        fn sub_collections_keep_carleson(s in collection(5), drop in prop::collection::vec(any::<bool>(), 63)) {
            let sub = SparseCollection::new(s.intervals().iter().zip(drop).filter(|(_, d)| !d).map(|(&i, _)| i));
            prop_assert!(carleson_constant(&sub) <= carleson_constant(&s));
        }

        #[test]
        fn operator_is_self_adjoint(s in collection(4), f in prop::collection::vec(-5.0f64..5.0, 16),
                                    g in prop::collection::vec(-5.0f64..5.0, 16)) {
            let (f, g) = (Signal::new(f).unwrap(), Signal::new(g).unwrap());
            let a = sparse_operator(&s, &f).unwrap().inner(&g).unwrap();
            let b = f.inner(&sparse_operator(&s, &g).unwrap()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn operator_pairing_is_form(s in collection(4), f in prop::collection::vec(0.0f64..5.0, 16),
                                    g in prop::collection::vec(0.0f64..5.0, 16)) {
            let (f, g) = (Signal::new(f).unwrap(), Signal::new(g).unwrap());
            let a = sparse_operator(&s, &f).unwrap().inner(&g).unwrap();
            let b = sparse_form(&s, &f, &g, 1.0, 1.0, None).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn form_monotone_in_exponents(s in collection(4), f in prop::collection::vec(-5.0f64..5.0, 16),
                                      p in 0.3f64..3.0, dp in 0.0f64..2.0) {
            let f = Signal::new(f).unwrap();
            let lo = sparse_form(&s, &f, &f, p, p, None).unwrap();
            let hi = sparse_form(&s, &f, &f, p + dp, p + dp, None).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn bmo_squared_matches_carleson(s in collection(5), signs in prop::collection::vec(any::<bool>(), 63)) {
            let s = SparseCollection::new(s.intervals().iter().copied().filter(|i| i.depth() < 5));
            prop_assume!(!s.is_empty());
            let signs: BTreeMap<_, _> = s.intervals().iter().zip(signs)
                .map(|(&i, b)| (i, if b { 1.0 } else { -1.0 })).collect();
            let bmo = bmo_norm(&signs, s.intervals(), 6).unwrap();
            let lambda = carleson_constant(&s);
            prop_assert!(bmo * bmo <= lambda * (1.0 + 1e-12));
            prop_assert!(lambda <= 16.0 * bmo * bmo);
        }

        #[test]
        fn fractional_eta_is_inverse_carleson(s in collection(4)) {
            prop_assume!(!s.is_empty());
            let r = sparse_vs_carleson(&s).unwrap();
            let eta = r.fractional_eta.unwrap();
            prop_assert!((eta * r.carleson - 1.0).abs() < 1e-6, "eta {} carleson {}", eta, r.carleson);
            prop_assert!(eta + 1e-9 >= r.greedy_eta);
        }
    }
}
