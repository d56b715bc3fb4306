//! Stopping-time sparse domination of Haar multiplier forms.
//!
//! Each `dominate_*` function runs one stopping time over the family of the
//! multiplier, then evaluates both sides of the sparse bound on the result.
//! The returned certificate records everything needed to re-check it.

pub mod certificate;
pub(crate) mod engine;
pub mod lerner;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dyadic::{weak_l1_of_values, DyadicInterval, LocalizedAverages, Signal, DEFAULT_CHI_M};
use crate::error::{invalid, Error, Result};
use crate::haar::{
    check_exponent, haar_transform, subtree_pushdown_by, tilde_size_table, HaarCoefficients,
    HaarMultiplier,
};
use crate::hardy::{cmo_norm, hardy_norm, Weight};
use crate::maximal::{local_functional, MaximalKind};
use crate::sparse::carleson_constant;

pub use certificate::{DominationCertificate, Exponents, Mode, PairingBound, QRecord};
pub use lerner::{lerner_decompose, LernerDecomposition, LernerRecord};

use certificate::ratio;
use engine::{ChildRule, Outcome, Rule, Schedule, Stock};

pub const DEFAULT_STOPPING_C: f64 = 4.0;
pub const DEFAULT_LAMBDA: f64 = 0.125;
pub const DEFAULT_ETA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingParams {
    /// Initial stopping constant `C ≥ 1`; doubled on every failed sparsity check.
    pub c: f64,
    pub max_retries: u32,
    /// Exponent `M` of the localization weight.
    pub chi_m: u32,
}

impl Default for StoppingParams {
    fn default() -> Self {
        StoppingParams {
            c: DEFAULT_STOPPING_C,
            max_retries: 24,
            chi_m: DEFAULT_CHI_M,
        }
    }
}

impl StoppingParams {
    pub fn with_c(c: f64) -> Self {
        StoppingParams {
            c,
            ..Default::default()
        }
    }

    fn schedule(&self) -> Schedule {
        Schedule {
            c: self.c,
            max_retries: self.max_retries,
        }
    }
}

struct AvgRule {
    af: LocalizedAverages,
    ag: LocalizedAverages,
}

impl AvgRule {
    fn within(&self, q0: DyadicInterval, i: DyadicInterval, c: f64) -> bool {
        self.af.get(i) <= c * self.af.get(q0) && self.ag.get(i) <= c * self.ag.get(q0)
    }
}

impl Rule for AvgRule {
    fn child_rule(&self) -> ChildRule {
        ChildRule::Dyadic
    }

    fn select(
        &mut self,
        q0: DyadicInterval,
        _: &Stock,
        members: &[DyadicInterval],
        c: f64,
    ) -> Vec<DyadicInterval> {
        members
            .iter()
            .copied()
            .filter(|&i| self.within(q0, i, c))
            .collect()
    }

    fn violates(&self, q0: DyadicInterval, q: DyadicInterval, c: f64) -> bool {
        !self.within(q0, q, c)
    }
}

/// How a restricted square function is measured on an interval `I'`.
#[derive(Clone, Copy)]
pub(crate) enum Norm<'a> {
    /// `(|I'|^{-1} ∫_{I'} S^p)^{1/p}`.
    Lp(f64),
    /// `(ω(I')^{-1} ∫_{I'} S^p ω)^{1/p}`.
    WeightedLp(f64, &'a Weight),
    /// `|I'|^{-1} ‖S 1_{I'}‖_{1,∞}`.
    Weak,
}

/// Stopping reference at `Q0`.
pub(crate) enum Reference {
    /// The same functional evaluated at `Q0`.
    SelfAtQ0,
    /// A fixed per-interval table, heap ordered.
    Table(Vec<f64>),
}

pub(crate) struct SquareTest<'a> {
    /// `|a_I|² / |I|` for every Haar mode.
    weights: Vec<f64>,
    norm: Norm<'a>,
    reference: Reference,
}

impl<'a> SquareTest<'a> {
    pub(crate) fn new(coeffs: &HaarCoefficients, norm: Norm<'a>, reference: Reference) -> Self {
        let weights = coeffs.iter().map(|(i, a)| a * a / i.len()).collect();
        SquareTest {
            weights,
            norm,
            reference,
        }
    }

    pub(crate) fn from_weights(weights: Vec<f64>, norm: Norm<'a>, reference: Reference) -> Self {
        SquareTest {
            weights,
            norm,
            reference,
        }
    }

    /// The functional of `(Σ_{I⊆root, include(I)} w_I 1_I)^{1/2}` on `root`.
    pub(crate) fn eval(
        &self,
        root: DyadicInterval,
        depth: u32,
        include: impl Fn(usize) -> bool,
    ) -> f64 {
        let local =
            subtree_pushdown_by(
                root,
                depth,
                |n| if include(n) { self.weights[n] } else { 0.0 },
            );
        let h = crate::dyadic::dyadic_length(depth);
        match self.norm {
            Norm::Lp(p) => {
                let total: f64 = local.iter().map(|s| s.powf(p / 2.0)).sum();
                (total * h / root.len()).powf(p.recip())
            }
            Norm::WeightedLp(p, w) => {
                let cells = root.cell_range(depth);
                let total: f64 = local
                    .iter()
                    .zip(&w.values()[cells])
                    .map(|(s, wc)| s.powf(p / 2.0) * wc)
                    .sum();
                (total * h / w.mass(root)).powf(p.recip())
            }
            Norm::Weak => weak_l1_of_values(local.iter().map(|s| s.sqrt()), h) / root.len(),
        }
    }

    fn threshold(&self, q0: DyadicInterval, depth: u32, stock: &Stock, c: f64) -> f64 {
        c * match &self.reference {
            Reference::SelfAtQ0 => self.eval(q0, depth, |n| stock.contains_node(n)),
            Reference::Table(t) => t[q0.node()],
        }
    }
}

pub(crate) struct SquareRule<'a> {
    pub(crate) depth: u32,
    pub(crate) tests: Vec<SquareTest<'a>>,
    pub(crate) weight: Option<&'a Weight>,
    /// Largest `value(I') / reference(Q0)` over the selected `I'`, per `Q0`.
    pub(crate) ratios: HashMap<DyadicInterval, f64>,
}

impl Rule for SquareRule<'_> {
    fn child_rule(&self) -> ChildRule {
        ChildRule::MaximalStock
    }

    fn select(
        &mut self,
        q0: DyadicInterval,
        stock: &Stock,
        members: &[DyadicInterval],
        c: f64,
    ) -> Vec<DyadicInterval> {
        let thresholds: Vec<f64> = self
            .tests
            .iter()
            .map(|t| t.threshold(q0, self.depth, stock, c))
            .collect();
        let mut worst = 0.0f64;
        let mut selected = Vec::new();
        for &i in members {
            let mut ok = true;
            let mut local_worst = 0.0f64;
            for (t, &th) in self.tests.iter().zip(&thresholds) {
                let v = t.eval(i, self.depth, |n| stock.contains_node(n));
                if v > th {
                    ok = false;
                    break;
                }
                local_worst = local_worst.max(ratio(v * c, th).unwrap_or(0.0));
            }
            if ok {
                worst = worst.max(local_worst);
                selected.push(i);
            }
        }
        self.ratios.insert(q0, worst);
        selected
    }

    fn measure(&self, q: DyadicInterval) -> f64 {
        match self.weight {
            Some(w) => w.mass(q),
            None => q.len(),
        }
    }
}

/// Per-`Q` quantities a mode supplies to the certificate.
struct Terms {
    rhs_term: f64,
    measure: f64,
    local_constant: Option<f64>,
    size_ratio: Option<f64>,
}

struct Context<'a> {
    t: &'a HaarMultiplier,
    a: HaarCoefficients,
    b: HaarCoefficients,
    family_mask: Vec<bool>,
}

impl<'a> Context<'a> {
    fn new(t: &'a HaarMultiplier, f: &Signal, g: &Signal) -> Result<Self> {
        f.check_same_depth(g)?;
        t.check_depth(f.depth())?;
        let a = haar_transform(f);
        let b = haar_transform(g);
        let mut family_mask = vec![false; a.as_slice().len()];
        for &(i, _) in t.entries() {
            family_mask[i.node()] = true;
        }
        Ok(Context {
            t,
            a,
            b,
            family_mask,
        })
    }

    fn depth(&self) -> u32 {
        self.a.depth()
    }

    fn family(&self) -> Vec<DyadicInterval> {
        self.t.family()
    }

    fn form_over(&self, intervals: &[DyadicInterval]) -> f64 {
        intervals
            .iter()
            .map(|&i| self.t.epsilon(i).unwrap_or(0.0) * self.a.get(i) * self.b.get(i))
            .sum()
    }

    fn build(
        &self,
        mode: Mode,
        outcome: Outcome,
        params: &StoppingParams,
        exponents: Exponents,
        mut terms: impl FnMut(&engine::Node, f64) -> Terms,
    ) -> DominationCertificate {
        let form: f64 = self
            .t
            .entries()
            .iter()
            .map(|&(i, e)| e * self.a.get(i) * self.b.get(i))
            .sum();
        let mut per_q = Vec::with_capacity(outcome.nodes.len());
        for node in &outcome.nodes {
            let local_form = self.form_over(&node.subfamily);
            let t = terms(node, local_form);
            per_q.push(QRecord {
                q: node.q,
                parent: node.parent,
                children: node.children.clone(),
                subfamily: node.subfamily.clone(),
                local_form,
                rhs_term: t.rhs_term,
                measure: t.measure,
                local_constant: t.local_constant,
                size_ratio: t.size_ratio,
            });
        }
        let rhs: f64 = per_q.iter().map(|r| r.rhs_term).sum();
        let lhs = form.abs();
        let carleson = carleson_constant(&crate::sparse::SparseCollection::new(
            per_q.iter().map(|r| r.q),
        ));
        DominationCertificate {
            mode,
            stopping_constant: outcome.c,
            initial_constant: params.c,
            retries: outcome.retries,
            eta: DEFAULT_ETA,
            carleson,
            exponents,
            form,
            lhs,
            rhs,
            realized_constant: ratio(lhs, rhs),
            n_intervals: self.t.len(),
            pairing: None,
            per_q,
        }
    }
}

/// Sparse bound with `χ_Q^M`-localized `L¹` averages.
pub fn dominate_avg(
    t: &HaarMultiplier,
    f: &Signal,
    g: &Signal,
    params: &StoppingParams,
) -> Result<DominationCertificate> {
    let ctx = Context::new(t, f, g)?;
    if params.chi_m == 0 {
        return Err(invalid(
            "chi_m",
            "the localization exponent must be at least 1",
        ));
    }
    let mut rule = AvgRule {
        af: LocalizedAverages::new(f, params.chi_m),
        ag: LocalizedAverages::new(g, params.chi_m),
    };
    let outcome = engine::run(&ctx.family(), ctx.depth(), &mut rule, params.schedule())?;
    let exponents = Exponents {
        chi_m: Some(params.chi_m),
        ..Default::default()
    };
    Ok(
        ctx.build(Mode::Avg, outcome, params, exponents, |node, local| {
            let (af, ag) = (rule.af.get(node.q), rule.ag.get(node.q));
            let (local_constant, size_ratio) = if node.subfamily.is_empty() {
                (None, None)
            } else {
                let ts_f = tilde_size_table(&rule.af, &node.subfamily);
                let ts_g = tilde_size_table(&rule.ag, &node.subfamily);
                let size = match (ratio(ts_f, af), ratio(ts_g, ag)) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    _ => None,
                };
                (ratio(local.abs(), ts_f * ts_g * node.q.len()), size)
            };
            Terms {
                rhs_term: af * ag * node.q.len(),
                measure: node.q.len(),
                local_constant,
                size_ratio,
            }
        }),
    )
}

fn square_family_terms(
    ctx: &Context<'_>,
    tests: &[SquareTest<'_>],
    node: &engine::Node,
    local: f64,
    measure: f64,
    size_ratio: Option<f64>,
) -> Terms {
    let depth = ctx.depth();
    let whole = |t: &SquareTest<'_>| t.eval(node.q, depth, |n| ctx.family_mask[n]);
    let rhs_term = whole(&tests[0]) * whole(&tests[1]) * measure;
    let local_constant = if node.subfamily.is_empty() {
        None
    } else {
        let mut mask = vec![false; ctx.family_mask.len()];
        for &i in &node.subfamily {
            mask[i.node()] = true;
        }
        let restricted = |t: &SquareTest<'_>| t.eval(node.q, depth, |n| mask[n]);
        ratio(
            local.abs(),
            restricted(&tests[0]) * restricted(&tests[1]) * measure,
        )
    };
    Terms {
        rhs_term,
        measure,
        local_constant,
        size_ratio,
    }
}

/// Sparse bound with `L^p`/`L^q` averages of localized square functions.
pub fn dominate_square(
    t: &HaarMultiplier,
    f: &Signal,
    g: &Signal,
    p: f64,
    q: f64,
    params: &StoppingParams,
) -> Result<DominationCertificate> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let ctx = Context::new(t, f, g)?;
    let mut rule = SquareRule {
        depth: ctx.depth(),
        tests: vec![
            SquareTest::new(&ctx.a, Norm::Lp(p), Reference::SelfAtQ0),
            SquareTest::new(&ctx.b, Norm::Lp(q), Reference::SelfAtQ0),
        ],
        weight: None,
        ratios: HashMap::new(),
    };
    let outcome = engine::run(&ctx.family(), ctx.depth(), &mut rule, params.schedule())?;
    let exponents = Exponents {
        p: Some(p),
        q: Some(q),
        ..Default::default()
    };
    Ok(
        ctx.build(Mode::Square, outcome, params, exponents, |node, local| {
            let ratio = rule.ratios.get(&node.q).copied();
            square_family_terms(&ctx, &rule.tests, node, local, node.q.len(), ratio)
        }),
    )
}

/// `ω`-sparse bound with `L^r(ω)` averages of localized square functions, plus
/// the pairing bound against `‖f‖_{H^p_ω} ‖g‖_{CMO^p_ω}`.
pub fn dominate_weighted(
    t: &HaarMultiplier,
    f: &Signal,
    g: &Signal,
    p: f64,
    r: f64,
    weight: &Weight,
    params: &StoppingParams,
) -> Result<DominationCertificate> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    if !(r > 0.0 && r < p) {
        return Err(invalid(
            "r",
            format!("must lie in (0, p) = (0, {p}), got {r}"),
        ));
    }
    if weight.depth() != f.depth() {
        return Err(Error::SignalDepths(f.depth(), weight.depth()));
    }
    let ctx = Context::new(t, f, g)?;
    let mut rule = SquareRule {
        depth: ctx.depth(),
        tests: vec![
            SquareTest::new(&ctx.a, Norm::WeightedLp(r, weight), Reference::SelfAtQ0),
            SquareTest::new(&ctx.b, Norm::WeightedLp(r, weight), Reference::SelfAtQ0),
        ],
        weight: Some(weight),
        ratios: HashMap::new(),
    };
    let outcome = engine::run(&ctx.family(), ctx.depth(), &mut rule, params.schedule())?;
    let exponents = Exponents {
        p: Some(p),
        r: Some(r),
        ..Default::default()
    };
    let mut cert = ctx.build(Mode::Weighted, outcome, params, exponents, |node, local| {
        let ratio = rule.ratios.get(&node.q).copied();
        square_family_terms(&ctx, &rule.tests, node, local, weight.mass(node.q), ratio)
    });
    let hardy_norm_f = hardy_norm(f, p, weight)?;
    let cmo_norm_g = cmo_norm(g, p, weight)?;
    cert.pairing = Some(PairingBound {
        p,
        hardy_norm_f,
        cmo_norm_g,
        constant: ratio(cert.lhs, hardy_norm_f * cmo_norm_g),
    });
    Ok(cert)
}

/// Sparse bound by products of mean oscillations, stopping on weak-`L¹` norms
/// of localized square functions.
pub fn dominate_oscillation(
    t: &HaarMultiplier,
    f: &Signal,
    g: &Signal,
    params: &StoppingParams,
) -> Result<DominationCertificate> {
    let ctx = Context::new(t, f, g)?;
    let osc_f = local_functional(f, MaximalKind::Sharp)?;
    let osc_g = local_functional(g, MaximalKind::Sharp)?;
    let mut rule = SquareRule {
        depth: ctx.depth(),
        tests: vec![
            SquareTest::new(&ctx.a, Norm::Weak, Reference::Table(osc_f.clone())),
            SquareTest::new(&ctx.b, Norm::Weak, Reference::Table(osc_g.clone())),
        ],
        weight: None,
        ratios: HashMap::new(),
    };
    let outcome = engine::run(&ctx.family(), ctx.depth(), &mut rule, params.schedule())?;
    Ok(ctx.build(
        Mode::Osc,
        outcome,
        params,
        Exponents::default(),
        |node, local| {
            let n = node.q.node();
            let denom = osc_f[n] * osc_g[n] * node.q.len();
            Terms {
                rhs_term: denom,
                measure: node.q.len(),
                local_constant: if node.subfamily.is_empty() {
                    None
                } else {
                    ratio(local.abs(), denom)
                },
                size_ratio: rule.ratios.get(&node.q).copied(),
            }
        },
    ))
}
