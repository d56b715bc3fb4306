use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, REL_SLACK};
use crate::sparse::{carleson_constant, SparseCollection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Avg,
    Square,
    Weighted,
    Osc,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Avg => "avg",
            Mode::Square => "square",
            Mode::Weighted => "weighted",
            Mode::Osc => "osc",
        })
    }
}

/// One stopping interval `Q` with its selected family `𝓘_Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QRecord {
    #[serde(rename = "Q")]
    pub q: DyadicInterval,
    pub parent: Option<DyadicInterval>,
    pub children: Vec<DyadicInterval>,
    pub subfamily: Vec<DyadicInterval>,
    /// `Λ_{𝓘_Q}(f, g)`, signed.
    pub local_form: f64,
    /// Contribution of `Q` to the sparse right-hand side.
    pub rhs_term: f64,
    /// `|Q|`, or `ω(Q)` for the weighted mode.
    pub measure: f64,
    /// `|Λ_{𝓘_Q}|` over the mode's local size product; absent when `𝓘_Q` is empty
    /// or the product vanishes.
    pub local_constant: Option<f64>,
    /// Size of `𝓘_Q` relative to the stopping reference at `Q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_m: Option<u32>,
}

/// `|Λ_𝓘(f, g)| ≤ C′ ‖f‖_{H^p_ω} ‖g‖_{CMO^p_ω}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingBound {
    pub p: f64,
    pub hardy_norm_f: f64,
    pub cmo_norm_g: f64,
    pub constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationCertificate {
    pub mode: Mode,
    #[serde(rename = "C")]
    pub stopping_constant: f64,
    pub initial_constant: f64,
    pub retries: u32,
    pub eta: f64,
    pub carleson: f64,
    pub exponents: Exponents,
    /// `Λ_𝓘(f, g)` summed over the whole family.
    pub form: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; zero when both vanish, absent when only `rhs` does.
    pub realized_constant: Option<f64>,
    pub n_intervals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<PairingBound>,
    pub per_q: Vec<QRecord>,
}

pub(crate) fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else if num == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

impl DominationCertificate {
    pub fn collection(&self) -> SparseCollection {
        SparseCollection::new(self.per_q.iter().map(|r| r.q))
    }

    /// `(Q, 𝓘_Q)` pairs.
    pub fn subfamilies(&self) -> impl Iterator<Item = (DyadicInterval, &[DyadicInterval])> {
        self.per_q.iter().map(|r| (r.q, r.subfamily.as_slice()))
    }

    /// Largest per-`Q` localization constant.
    pub fn max_local_constant(&self) -> Option<f64> {
        self.per_q
            .iter()
            .filter_map(|r| r.local_constant)
            .reduce(f64::max)
    }

    pub fn max_size_ratio(&self) -> Option<f64> {
        self.per_q
            .iter()
            .filter_map(|r| r.size_ratio)
            .reduce(f64::max)
    }

    /// Largest `Σ_{P∈ch(Q)} m(P) / m(Q)` for the recorded measure.
    pub fn max_child_share(&self) -> f64 {
        let measure: BTreeMap<DyadicInterval, f64> =
            self.per_q.iter().map(|r| (r.q, r.measure)).collect();
        self.per_q
            .iter()
            .map(|r| {
                let spent: f64 = r
                    .children
                    .iter()
                    .map(|c| measure.get(c).copied().unwrap_or(f64::INFINITY))
                    .sum();
                spent / r.measure
            })
            .fold(0.0, f64::max)
    }

    /// Every `I` in `family` lies in exactly one `𝓘_Q`, and nothing else does.
    pub fn check_partition(&self, family: &[DyadicInterval]) -> bool {
        let expected: BTreeSet<DyadicInterval> = family.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for r in &self.per_q {
            for &i in &r.subfamily {
                if !seen.insert(i) {
                    return false;
                }
            }
        }
        seen == expected
    }

    /// Re-checks every structural claim; returns the list of violations.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let records: BTreeMap<DyadicInterval, &QRecord> =
            self.per_q.iter().map(|r| (r.q, r)).collect();
        if records.len() != self.per_q.len() {
            errors.push("a stopping interval appears twice".to_string());
        }
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for r in &self.per_q {
            for &i in &r.subfamily {
                count += 1;
                if !r.q.contains(i) {
                    errors.push(format!(
                        "{i} is selected for {} but not contained in it",
                        r.q
                    ));
                }
                if !seen.insert(i) {
                    errors.push(format!("{i} is selected twice"));
                }
            }
            let mut spent = 0.0;
            for (k, &c) in r.children.iter().enumerate() {
                if !r.q.strictly_contains(c) {
                    errors.push(format!("child {c} is not strictly inside {}", r.q));
                }
                if r.children[..k].iter().any(|&d| !d.is_disjoint(c)) {
                    errors.push(format!("children of {} overlap at {c}", r.q));
                }
                match records.get(&c) {
                    Some(child) if child.parent == Some(r.q) => spent += child.measure,
                    _ => errors.push(format!("child {c} of {} has no matching record", r.q)),
                }
            }
            if spent > r.measure / 2.0 {
                errors.push(format!(
                    "children of {} use {spent} of measure {}",
                    r.q, r.measure
                ));
            }
            if let Some(p) = r.parent {
                if !records.get(&p).is_some_and(|pr| pr.children.contains(&r.q)) {
                    errors.push(format!("{} names parent {p} which does not list it", r.q));
                }
            }
        }
        if count != self.n_intervals {
            errors.push(format!(
                "{count} intervals selected, {} in the family",
                self.n_intervals
            ));
        }
        let local: f64 = self.per_q.iter().map(|r| r.local_form).sum();
        let scale: f64 =
            self.per_q.iter().map(|r| r.local_form.abs()).sum::<f64>() + f64::MIN_POSITIVE;
        if (local - self.form).abs() > 1e-12 * scale.max(self.form.abs()) + 1e-300 {
            errors.push(format!(
                "local forms sum to {local}, the family form is {}",
                self.form
            ));
        }
        if self.lhs != self.form.abs() {
            errors.push(format!(
                "lhs {} differs from |form| {}",
                self.lhs,
                self.form.abs()
            ));
        }
        let rhs: f64 = self.per_q.iter().map(|r| r.rhs_term).sum();
        if (rhs - self.rhs).abs() > 1e-12 * self.rhs.abs().max(f64::MIN_POSITIVE) {
            errors.push(format!("rhs terms sum to {rhs}, recorded {}", self.rhs));
        }
        match self.realized_constant {
            Some(k) if self.lhs <= k * self.rhs * (1.0 + REL_SLACK) || self.lhs == 0.0 => {}
            Some(k) => errors.push(format!("lhs {} exceeds {k} x rhs {}", self.lhs, self.rhs)),
            None => errors.push(format!("rhs vanishes while lhs = {}", self.lhs)),
        }
        let carleson = carleson_constant(&self.collection());
        if carleson != self.carleson {
            errors.push(format!(
                "recorded Carleson constant {} differs from {carleson}",
                self.carleson
            ));
        }
        errors
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}
