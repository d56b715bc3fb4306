//! Weights, weighted Hardy and CMO norms, and the sparse atomic decomposition.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domination::engine::{self, Schedule};
use crate::domination::{Norm, Reference, SquareRule, SquareTest, StoppingParams};
use crate::dyadic::{dyadic_length, interval_sums, node_count, pushdown, DyadicInterval, Signal};
use crate::error::{invalid, Error, Result};
use crate::haar::{haar_transform, tilde_coefficients, HaarCoefficients, HaarMultiplier};
use crate::sparse::SparseCollection;

/// A strictly positive density on the cells of depth `J`, with `ω(I)` cached
/// for every dyadic interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    depth: u32,
    values: Vec<f64>,
    masses: Vec<f64>,
}

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        if let Some((cell, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositiveWeight { cell, value });
        }
        let depth = n.trailing_zeros();
        let masses = interval_sums(&values, depth);
        Ok(Weight {
            depth,
            values,
            masses,
        })
    }

    pub fn constant(depth: u32, c: f64) -> Self {
        Weight::new(vec![c; 1 << depth]).expect("positive constant weight")
    }

    pub fn from_signal(s: &Signal) -> Result<Self> {
        Weight::new(s.values().to_vec())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Weight::from_signal(&Signal::parse(text)?)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ω(I) = ∫_I ω`.
    pub fn mass(&self, interval: DyadicInterval) -> f64 {
        self.masses[interval.node()]
    }

    pub(crate) fn mass_node(&self, node: usize) -> f64 {
        self.masses[node]
    }

    /// `ω^{1-p'} = ω^{-1/(p-1)}`.
    pub fn dual(&self, p: f64) -> Result<Weight> {
        check_above_one("p", p)?;
        Weight::new(
            self.values
                .iter()
                .map(|w| w.powf(-1.0 / (p - 1.0)))
                .collect(),
        )
    }

    fn check_depth(&self, depth: u32) -> Result<()> {
        if self.depth != depth {
            return Err(Error::SignalDepths(depth, self.depth));
        }
        Ok(())
    }
}

fn check_above_one(name: &'static str, v: f64) -> Result<()> {
    if !(v > 1.0 && v.is_finite()) {
        return Err(invalid(
            name,
            format!("must be finite and greater than 1, got {v}"),
        ));
    }
    Ok(())
}

fn check_hardy_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Dyadic `[ω]_{A_p} = sup_Q (⨍_Q ω)(⨍_Q ω^{-1/(p-1)})^{p-1}`.
pub fn ap_characteristic(w: &Weight, p: f64) -> Result<f64> {
    check_above_one("p", p)?;
    let sigma = interval_sums(
        &w.values
            .iter()
            .map(|v| v.powf(-1.0 / (p - 1.0)))
            .collect::<Vec<_>>(),
        w.depth,
    );
    Ok((0..node_count(w.depth))
        .map(|n| {
            let len = DyadicInterval::from_node(n).len();
            w.masses[n] / len * (sigma[n] / len).powf(p - 1.0)
        })
        .fold(0.0, f64::max))
}

/// Dyadic `[ω]_{RH_q} = sup_Q (⨍_Q ω^q)^{1/q} / ⨍_Q ω`.
pub fn rh_characteristic(w: &Weight, q: f64) -> Result<f64> {
    check_above_one("q", q)?;
    let powered = interval_sums(
        &w.values.iter().map(|v| v.powf(q)).collect::<Vec<_>>(),
        w.depth,
    );
    Ok((0..node_count(w.depth))
        .map(|n| {
            let len = DyadicInterval::from_node(n).len();
            (powered[n] / len).powf(q.recip()) / (w.masses[n] / len)
        })
        .fold(0.0, f64::max))
}

/// `S f` squared on every cell, from the weights `a_I² / |I|`.
fn square_function_sq(weights: &[f64], depth: u32) -> Vec<f64> {
    let mut nodes = weights.to_vec();
    nodes.resize(node_count(depth), 0.0);
    pushdown(&nodes, depth)
}

fn lp_of_square(s_sq: &[f64], p: f64, w: &Weight) -> f64 {
    let total: f64 = s_sq
        .iter()
        .zip(&w.values)
        .map(|(s, wc)| s.powf(p / 2.0) * wc)
        .sum();
    (total * dyadic_length(w.depth)).powf(p.recip())
}

fn square_weights(coeffs: &HaarCoefficients) -> Vec<f64> {
    coeffs.iter().map(|(i, a)| a * a / i.len()).collect()
}

/// `‖S f‖_{L^p(ω)}` with `S f = (Σ_I |a_I(f)|² 1_I / |I|)^{1/2}`.
pub fn hardy_norm(f: &Signal, p: f64, w: &Weight) -> Result<f64> {
    check_hardy_exponent(p)?;
    w.check_depth(f.depth())?;
    let sq = square_function_sq(&square_weights(&haar_transform(f)), f.depth());
    Ok(lp_of_square(&sq, p, w))
}

/// `sup_{I0} ω(I0)^{-1/p} (ω(I0) Σ_{I⊆I0} |a_I(g)|² |I| / ω(I))^{1/2}`.
pub fn cmo_norm(g: &Signal, p: f64, w: &Weight) -> Result<f64> {
    check_hardy_exponent(p)?;
    w.check_depth(g.depth())?;
    let coeffs = haar_transform(g);
    let n = coeffs.as_slice().len();
    let mut sub: Vec<f64> = coeffs
        .iter()
        .map(|(i, a)| a * a * i.len() / w.mass(i))
        .collect();
    for node in (0..n).rev() {
        let (l, r) = (2 * node + 1, 2 * node + 2);
        if r < n {
            sub[node] += sub[l] + sub[r];
        }
    }
    Ok(sub
        .iter()
        .enumerate()
        .map(|(node, s)| {
            let m = w.masses[node];
            m.powf(-p.recip()) * (m * s).sqrt()
        })
        .fold(0.0, f64::max))
}

/// Outcome of comparing `S(Tf)` with `S(f)` for a contraction multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    /// `S(Tf) ≤ S(f)` on every cell, with no tolerance.
    pub pointwise: bool,
    pub hardy_f: f64,
    pub hardy_tf: f64,
}

impl Uniformity {
    pub fn holds(&self) -> bool {
        self.pointwise && self.hardy_tf <= self.hardy_f
    }
}

/// Compares the square functions of `f` and `Tf` cell by cell, computing
/// `Tf` in coefficient space so both sides share one rounding pattern.
pub fn hardy_uniformity(t: &HaarMultiplier, f: &Signal, p: f64, w: &Weight) -> Result<Uniformity> {
    check_hardy_exponent(p)?;
    w.check_depth(f.depth())?;
    let a = haar_transform(f);
    let ta = t.apply_coefficients(&a)?;
    let sf = square_function_sq(&square_weights(&a), f.depth());
    let stf = square_function_sq(&square_weights(&ta), f.depth());
    Ok(Uniformity {
        pointwise: stf.iter().zip(&sf).all(|(x, y)| x <= y),
        hardy_f: lp_of_square(&sf, p, w),
        hardy_tf: lp_of_square(&stf, p, w),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "Q")]
    pub q: DyadicInterval,
    #[serde(rename = "c_Q")]
    pub c_q: f64,
    /// `𝓘_Q`, the Haar modes carried by this atom.
    pub modes: Vec<DyadicInterval>,
    pub atom: Signal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub p: f64,
    pub r: f64,
    #[serde(rename = "C")]
    pub stopping_constant: f64,
    pub retries: u32,
    /// `∫ f`, removed before decomposing.
    pub removed_mean: f64,
    pub collection: SparseCollection,
    pub atoms: Vec<Atom>,
    /// `‖S f‖_{L^p}`.
    pub square_norm: f64,
    /// `Σ_Q c_Q^p`.
    pub lp_budget: f64,
    /// `Σ_Q c_Q^p / ‖S f‖_p^p`.
    pub budget_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomChecks {
    pub reconstruction_error: f64,
    /// Every atom vanishes outside `Q`.
    pub support: bool,
    /// Every mode of every atom lies inside its `Q` and no atom carries a constant.
    pub cancellation: bool,
    /// Largest `|∫ a_Q|`, for information.
    pub max_atom_integral: f64,
    /// Largest `‖a_Q‖₂ / |Q|^{1/2-1/p}`.
    pub max_norm_ratio: f64,
    pub sparse_at_half: bool,
}

impl AtomChecks {
    pub fn passed(&self) -> bool {
        self.reconstruction_error < 1e-12
            && self.support
            && self.cancellation
            && self.max_norm_ratio <= 1.0 + 1e-12
            && self.sparse_at_half
    }
}

#[derive(Serialize)]
struct AtomDumpEntry<'a> {
    #[serde(rename = "Q")]
    q: DyadicInterval,
    #[serde(rename = "c_Q")]
    c_q: f64,
    atom_values: &'a [f64],
}

impl AtomicDecomposition {
    /// `∫f + Σ_Q c_Q a_Q`.
    pub fn reconstruct(&self, depth: u32) -> Signal {
        let mut out = vec![self.removed_mean; 1 << depth];
        for a in &self.atoms {
            for (o, v) in out.iter_mut().zip(a.atom.values()) {
                *o += a.c_q * v;
            }
        }
        Signal::new(out).expect("power-of-two length")
    }

    pub fn check(&self, f: &Signal) -> AtomChecks {
        let depth = f.depth();
        let rec = self.reconstruct(depth);
        let reconstruction_error = rec
            .values()
            .iter()
            .zip(f.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let mut support = true;
        let mut cancellation = true;
        let mut max_atom_integral = 0.0f64;
        let mut max_norm_ratio = 0.0f64;
        for a in &self.atoms {
            let range = a.q.cell_range(depth);
            support &= a
                .atom
                .values()
                .iter()
                .enumerate()
                .all(|(c, &v)| range.contains(&c) || v == 0.0);
            cancellation &= a
                .modes
                .iter()
                .all(|&i| a.q.contains(i) && i.depth() < depth);
            max_atom_integral = max_atom_integral.max(a.atom.integral().abs());
            let norm = a.atom.values().iter().map(|v| v * v).sum::<f64>().sqrt()
                * dyadic_length(depth).sqrt();
            max_norm_ratio = max_norm_ratio.max(norm / a.q.len().powf(0.5 - self.p.recip()));
        }
        AtomChecks {
            reconstruction_error,
            support,
            cancellation,
            max_atom_integral,
            max_norm_ratio,
            sparse_at_half: self.collection.max_child_share() <= 0.5,
        }
    }

    /// JSON array of `{Q, c_Q, atom_values}`.
    pub fn dump_json(&self) -> Result<String> {
        let entries: Vec<AtomDumpEntry<'_>> = self
            .atoms
            .iter()
            .map(|a| AtomDumpEntry {
                q: a.q,
                c_q: a.c_q,
                atom_values: a.atom.values(),
            })
            .collect();
        Ok(serde_json::to_string(&entries)?)
    }
}

/// Sparse decomposition `f - ∫f = Σ_Q c_Q a_Q` into `L²` atoms with
/// `‖a_Q‖₂ ≤ |Q|^{1/2-1/p}`, stopping on `L^r` averages of restricted square
/// functions.
pub fn atomic_decompose(
    f: &Signal,
    p: f64,
    r: f64,
    params: &StoppingParams,
) -> Result<AtomicDecomposition> {
    check_hardy_exponent(p)?;
    if !(r > 0.0 && r < p) {
        return Err(invalid(
            "r",
            format!("must lie in (0, p) = (0, {p}), got {r}"),
        ));
    }
    let depth = f.depth();
    let d = tilde_coefficients(f);
    let removed_mean = f.integral();
    let family: Vec<DyadicInterval> = d
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(n, _)| DyadicInterval::from_node(n))
        .collect();
    let weights: Vec<f64> = d.iter().map(|v| v * v).collect();
    let s_sq = square_function_sq(&weights, depth);
    let square_norm = lp_of_square(&s_sq, p, &Weight::constant(depth, 1.0));

    let (nodes, c, retries) = if family.is_empty() {
        (Vec::new(), params.c, 0)
    } else {
        let mut rule = SquareRule {
            depth,
            tests: vec![SquareTest::from_weights(
                weights,
                Norm::Lp(r),
                Reference::SelfAtQ0,
            )],
            weight: None,
            ratios: HashMap::new(),
        };
        let out = engine::run(
            &family,
            depth,
            &mut rule,
            Schedule {
                c: params.c,
                max_retries: params.max_retries,
            },
        )?;
        (out.nodes, out.c, out.retries)
    };

    let mut atoms = Vec::with_capacity(nodes.len());
    for node in nodes {
        let q = node.q;
        let energy: f64 = node
            .subfamily
            .iter()
            .map(|&i| d[i.node()] * d[i.node()] * i.len())
            .sum();
        let c_q = q.len().powf(p.recip()) * (energy / q.len()).sqrt();
        if c_q == 0.0 {
            continue;
        }
        let mut steps = vec![0.0; node_count(depth)];
        for &i in &node.subfamily {
            steps[i.left().node()] += d[i.node()];
            steps[i.right().node()] -= d[i.node()];
        }
        let values: Vec<f64> = pushdown(&steps, depth)
            .into_iter()
            .map(|v| v / c_q)
            .collect();
        atoms.push(Atom {
            q,
            c_q,
            modes: node.subfamily,
            atom: Signal::new(values)?,
        });
    }
    let mut collection = SparseCollection::new(atoms.iter().map(|a| a.q));
    collection.certify(0.5)?;
    let lp_budget: f64 = atoms.iter().map(|a| a.c_q.powf(p)).sum();
    Ok(AtomicDecomposition {
        p,
        r,
        stopping_constant: c,
        retries,
        removed_mean,
        collection,
        atoms,
        square_norm,
        lp_budget,
        budget_constant: crate::domination::certificate::ratio(lp_budget, square_norm.powf(p)),
    })
}
