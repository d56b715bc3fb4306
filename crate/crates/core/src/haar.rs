//! Haar system on `[0, 1)`: transforms, multipliers, square functions and
//! the size quantities that control localized bilinear forms.

use serde::{Deserialize, Serialize};

use crate::dyadic::{
    chi_kernel, dyadic_length, interval_sums, node_count, oscillation, DyadicInterval,
    LocalizedAverages, Signal,
};
use crate::error::{invalid, Error, Result};

/// `⟨f, h_I⟩` for every interval of depth `< J`, in heap order, plus `∫ f`.
///
/// Stored densely: at depth `J` there are exactly `2^J - 1` Haar modes and
/// the stopping times query arbitrary sub-families of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarCoefficients {
    depth: u32,
    mean: f64,
    coeffs: Vec<f64>,
}

impl HaarCoefficients {
    pub fn zeros(depth: u32) -> Self {
        HaarCoefficients {
            depth,
            mean: 0.0,
            coeffs: vec![0.0; node_count(depth) - (1 << depth)],
        }
    }

    /// Signal depth `J`; modes live on intervals of depth `0..J`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn set_mean(&mut self, mean: f64) {
        self.mean = mean;
    }

    /// Zero for intervals that carry no mode.
    #[inline]
    pub fn get(&self, interval: DyadicInterval) -> f64 {
        self.coeffs
            .get(interval.node())
            .copied()
            .filter(|_| interval.depth() < self.depth)
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, interval: DyadicInterval, value: f64) -> Result<()> {
        if interval.depth() >= self.depth {
            return Err(Error::NoHaarMode {
                interval,
                depth: self.depth,
            });
        }
        self.coeffs[interval.node()] = value;
        Ok(())
    }

    /// Heap-ordered coefficient table.
    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicInterval, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, &a)| (DyadicInterval::from_node(n), a))
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (DyadicInterval, f64)> + '_ {
        self.iter().filter(|(_, a)| *a != 0.0)
    }

    /// `Σ_I a_I²`, the squared L² norm of the mean-zero part.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }
}

/// `T f = Σ_{I ∈ 𝓘} ε_I ⟨f, h_I⟩ h_I` with `|ε_I| ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarMultiplier {
    entries: Vec<(DyadicInterval, f64)>,
}

impl HaarMultiplier {
    /// Duplicate intervals keep the last coefficient.
    pub fn new(entries: impl IntoIterator<Item = (DyadicInterval, f64)>) -> Result<Self> {
        let mut entries: Vec<(DyadicInterval, f64)> = entries.into_iter().collect();
        for &(interval, value) in &entries {
            if !(value.abs() <= 1.0) {
                return Err(Error::CoefficientBound { interval, value });
            }
        }
        entries.reverse();
        entries.sort_by_key(|e| e.0.node());
        entries.dedup_by_key(|e| e.0);
        Ok(HaarMultiplier { entries })
    }

    /// Every mode of depth `< depth` with the same coefficient.
    pub fn uniform(depth: u32, epsilon: f64) -> Result<Self> {
        HaarMultiplier::new(
            DyadicInterval::all(depth.saturating_sub(1))
                .filter(|_| depth > 0)
                .map(|i| (i, epsilon)),
        )
    }

    pub fn identity(depth: u32) -> Self {
        HaarMultiplier::uniform(depth, 1.0).expect("unit coefficients")
    }

    pub fn entries(&self) -> &[(DyadicInterval, f64)] {
        &self.entries
    }

    pub fn family(&self) -> Vec<DyadicInterval> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn epsilon(&self, interval: DyadicInterval) -> Option<f64> {
        self.entries
            .binary_search_by_key(&interval.node(), |e| e.0.node())
            .ok()
            .map(|k| self.entries[k].1)
    }

    pub fn max_abs_epsilon(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.1.abs()))
    }

    pub fn check_depth(&self, depth: u32) -> Result<()> {
        match self.entries.iter().find(|e| e.0.depth() >= depth) {
            Some(&(interval, _)) => Err(Error::NoHaarMode { interval, depth }),
            None => Ok(()),
        }
    }

    /// Heap-ordered `ε_I`, zero off the family.
    pub fn dense(&self, depth: u32) -> Result<Vec<f64>> {
        self.check_depth(depth)?;
        let mut eps = vec![0.0; node_count(depth) - (1 << depth)];
        for &(i, e) in &self.entries {
            eps[i.node()] = e;
        }
        Ok(eps)
    }

    /// Coefficients of `T f` given those of `f`, computed as `ε_I a_I(f)`.
    pub fn apply_coefficients(&self, coeffs: &HaarCoefficients) -> Result<HaarCoefficients> {
        let eps = self.dense(coeffs.depth())?;
        let mut out = HaarCoefficients::zeros(coeffs.depth());
        for (node, (o, a)) in out.coeffs.iter_mut().zip(&coeffs.coeffs).enumerate() {
            *o = eps[node] * a;
        }
        Ok(out)
    }

    /// Rows `depth,index,epsilon`; a non-numeric first row is a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
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
            if fields.len() != 3 {
                if n == 0 {
                    continue;
                }
                return Err(parse_err(format!(
                    "expected 3 fields, found {}",
                    fields.len()
                )));
            }
            let depth = fields[0].parse::<u32>();
            if depth.is_err() && entries.is_empty() && n == 0 {
                continue;
            }
            let depth = depth.map_err(|e| parse_err(format!("depth `{}`: {e}", fields[0])))?;
            let index = fields[1]
                .parse::<u64>()
                .map_err(|e| parse_err(format!("index `{}`: {e}", fields[1])))?;
            let eps = fields[2]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("coefficient `{}`: {e}", fields[2])))?;
            let interval =
                DyadicInterval::try_new(depth, index).map_err(|e| parse_err(e.to_string()))?;
            entries.push((interval, eps));
        }
        HaarMultiplier::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,index,epsilon\n");
        for (i, e) in &self.entries {
            out.push_str(&format!("{},{},{}\n", i.depth(), i.index(), e));
        }
        out
    }
}

/// `a_I = ⟨f, h_I⟩` with `h_I = |I|^{-1/2}(1_{I_left} - 1_{I_right})`, in O(N).
pub fn haar_transform(f: &Signal) -> HaarCoefficients {
    let depth = f.depth();
    let sums = interval_sums(f.values(), depth);
    let mut out = HaarCoefficients::zeros(depth);
    for (node, a) in out.coeffs.iter_mut().enumerate() {
        let i = DyadicInterval::from_node(node);
        *a = (sums[i.left().node()] - sums[i.right().node()]) / i.len().sqrt();
    }
    out.mean = sums[0];
    out
}

/// `d_I = (∫_{I_left} f - ∫_{I_right} f) / |I|`, so that `a_I h_I = d_I h̃_I`.
///
/// Exact whenever the cell values are dyadic rationals of moderate size.
pub(crate) fn tilde_coefficients(f: &Signal) -> Vec<f64> {
    let depth = f.depth();
    let sums = interval_sums(f.values(), depth);
    (0..node_count(depth) - (1 << depth))
        .map(|node| {
            let i = DyadicInterval::from_node(node);
            (sums[i.left().node()] - sums[i.right().node()]) / i.len()
        })
        .collect()
}

/// `∫f + Σ_I a_I h_I`.
pub fn inverse_transform(coeffs: &HaarCoefficients) -> Signal {
    let mut s = inverse_mean_zero(coeffs);
    for v in s.values_mut() {
        *v += coeffs.mean;
    }
    s
}

/// `Σ_I a_I h_I` without the constant mode.
pub(crate) fn inverse_mean_zero(coeffs: &HaarCoefficients) -> Signal {
    let depth = coeffs.depth;
    let mut acc = vec![0.0; node_count(depth)];
    for node in 0..coeffs.coeffs.len() {
        let i = DyadicInterval::from_node(node);
        let step = coeffs.coeffs[node] / i.len().sqrt();
        acc[i.left().node()] = acc[node] + step;
        acc[i.right().node()] = acc[node] - step;
    }
    let base = (1usize << depth) - 1;
    Signal::new(acc.split_off(base)).expect("power-of-two length")
}

pub fn apply_multiplier(t: &HaarMultiplier, f: &Signal) -> Result<Signal> {
    Ok(inverse_mean_zero(
        &t.apply_coefficients(&haar_transform(f))?,
    ))
}

/// `Λ_𝓘(f, g) = Σ_{I∈𝓘} ε_I a_I(f) a_I(g)`.
pub fn bilinear_form(t: &HaarMultiplier, f: &Signal, g: &Signal) -> Result<f64> {
    f.check_same_depth(g)?;
    t.check_depth(f.depth())?;
    let (a, b) = (haar_transform(f), haar_transform(g));
    Ok(form_from_coefficients(t.entries().iter().copied(), &a, &b))
}

pub(crate) fn form_from_coefficients(
    entries: impl Iterator<Item = (DyadicInterval, f64)>,
    a: &HaarCoefficients,
    b: &HaarCoefficients,
) -> f64 {
    entries.map(|(i, e)| e * a.get(i) * b.get(i)).sum()
}

/// `Σ_I w_I 1_I` on the cells of `root`, summing only intervals inside `root`.
///
/// `weights` is heap ordered over depths `< depth`. The result has one entry
/// per depth-`depth` cell of `root`.
pub(crate) fn subtree_pushdown(weights: &[f64], root: DyadicInterval, depth: u32) -> Vec<f64> {
    subtree_pushdown_by(root, depth, |node| weights[node])
}

/// As [`subtree_pushdown`] with the weight of each node given by `weight`.
pub(crate) fn subtree_pushdown_by(
    root: DyadicInterval,
    depth: u32,
    weight: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let levels = depth - root.depth();
    let mut acc = vec![0.0f64; 1];
    for k in 0..levels {
        let d = root.depth() + k;
        let first = (root.index() << k) as usize;
        let base = (1usize << d) - 1 + first;
        let mut next = Vec::with_capacity(acc.len() * 2);
        for (j, &v) in acc.iter().enumerate() {
            let w = v + weight(base + j);
            next.push(w);
            next.push(w);
        }
        acc = next;
    }
    acc
}

/// `S_{I0}(f)(x) = (Σ_{I⊆I0, I∈restrict} |a_I|² 1_I(x)/|I|)^{1/2}` on every cell.
pub fn localized_square_function(
    f: &Signal,
    root: DyadicInterval,
    restrict: Option<&[DyadicInterval]>,
) -> Result<Signal> {
    f.check_interval(root)?;
    let coeffs = haar_transform(f);
    let mut weights = vec![0.0; coeffs.coeffs.len()];
    match restrict {
        Some(family) => {
            for &i in family {
                if i.depth() < f.depth() && root.contains(i) {
                    weights[i.node()] = coeffs.get(i).powi(2) / i.len();
                }
            }
        }
        None => {
            for (node, w) in weights.iter_mut().enumerate() {
                *w = coeffs.coeffs[node].powi(2) / DyadicInterval::from_node(node).len();
            }
        }
    }
    let local = subtree_pushdown(&weights, root, f.depth());
    let mut out = Signal::zeros(f.depth());
    let range = root.cell_range(f.depth());
    for (v, s) in out.values_mut()[range].iter_mut().zip(local) {
        *v = s.sqrt();
    }
    Ok(out)
}

/// Per-interval `Σ_{J⊆I} a_J²` for every interval of depth `< J`.
pub(crate) fn subtree_energy(coeffs: &HaarCoefficients) -> Vec<f64> {
    let n = coeffs.coeffs.len();
    let mut e: Vec<f64> = coeffs.coeffs.iter().map(|a| a * a).collect();
    for node in (0..n).rev() {
        let (l, r) = (2 * node + 1, 2 * node + 2);
        if r < n {
            e[node] += e[l] + e[r];
        }
    }
    e
}

/// `sup_{I⊆I0} (|I|^{-1} Σ_{J⊆I} |a_J|²)^{1/2}`.
pub fn size(f: &Signal, root: DyadicInterval) -> Result<f64> {
    f.check_interval(root)?;
    if root.depth() >= f.depth() {
        return Ok(0.0);
    }
    let energy = subtree_energy(&haar_transform(f));
    Ok(root
        .descendants(f.depth() - 1)
        .map(|i| energy[i.node()] / i.len())
        .fold(0.0f64, f64::max)
        .sqrt())
}

/// `sup_{J∈family} |J|^{-1} ∫ |f| χ_J^M`.
pub fn tilde_size(f: &Signal, family: &[DyadicInterval], exponent: u32) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut best = 0.0f64;
    for &j in family {
        best = best.max(crate::dyadic::localized_average(f, j, exponent)?);
    }
    Ok(best)
}

/// `tilde_size` read from a precomputed table.
pub(crate) fn tilde_size_table(table: &LocalizedAverages, family: &[DyadicInterval]) -> f64 {
    family.iter().map(|&j| table.get(j)).fold(0.0, f64::max)
}

/// `(Σ_{I⊆I0} |a_I|², ‖f χ_{I0}^M‖₂²)`.
pub fn energy_check(f: &Signal, root: DyadicInterval, exponent: u32) -> Result<(f64, f64)> {
    f.check_interval(root)?;
    let lhs = if root.depth() < f.depth() {
        subtree_energy(&haar_transform(f))[root.node()]
    } else {
        0.0
    };
    let kernel = chi_kernel(root.depth(), f.depth(), 2 * exponent);
    let r = root.cell_range(f.depth());
    let v = f.values();
    let mut rhs: f64 = r.clone().map(|c| v[c] * v[c]).sum();
    for (delta, c) in (0..r.start).rev().enumerate() {
        rhs += kernel[delta] * v[c] * v[c];
    }
    for (delta, c) in (r.end..v.len()).enumerate() {
        rhs += kernel[delta] * v[c] * v[c];
    }
    Ok((lhs, rhs * f.cell_measure()))
}

/// The two mean-oscillation suprema over `I ⊆ I0` compared by John–Nirenberg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnNirenberg {
    /// `sup |I|^{-1/2} ‖(f - ⨍_I f) 1_I‖₂`.
    pub l2: f64,
    /// `sup |I|^{-1} ‖(f - ⨍_I f) 1_I‖₁`.
    pub l1: f64,
}

impl JohnNirenberg {
    pub fn ratio(&self) -> f64 {
        if self.l1 == 0.0 {
            1.0
        } else {
            self.l2 / self.l1
        }
    }
}

pub fn john_nirenberg(f: &Signal, root: DyadicInterval) -> Result<JohnNirenberg> {
    f.check_interval(root)?;
    let mut l2 = 0.0f64;
    let mut l1 = 0.0f64;
    for i in root.descendants(f.depth()) {
        let cells = &f.values()[i.cell_range(f.depth())];
        let mean = cells.iter().sum::<f64>() / cells.len() as f64;
        let var = cells.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cells.len() as f64;
        l2 = l2.max(var.sqrt());
        l1 = l1.max(oscillation(f, i)?);
    }
    Ok(JohnNirenberg { l2, l1 })
}

pub(crate) fn check_exponent(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(invalid(
            name,
            format!("must be positive and finite, got {value}"),
        ));
    }
    Ok(())
}

/// Value of `h_I` on a cell: `±|I|^{-1/2}` inside `I`, zero outside.
pub fn haar_value(interval: DyadicInterval, cell: usize, grid_depth: u32) -> f64 {
    if interval.depth() >= grid_depth || !interval.contains_cell(cell, grid_depth) {
        return 0.0;
    }
    let sign = if interval.left().contains_cell(cell, grid_depth) {
        1.0
    } else {
        -1.0
    };
    sign / dyadic_length(interval.depth()).sqrt()
}
