//! Finite dyadic geometry on `[0, 1)`.
//!
//! Signals are piecewise constant on the `2^J` cells of depth `J`, so every
//! integral below is a finite sum over cells and carries no quadrature error.
//! Dyadic intervals are addressed by `(depth, index)` and stored in heap
//! order (`node = 2^depth - 1 + index`) whenever a table over all intervals
//! is needed.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hardy::Weight;

/// Default exponent of the localization weight `χ_I^M`.
pub const DEFAULT_CHI_M: u32 = 8;

/// Relative slack used when certifying an inequality computed in floating point.
pub const REL_SLACK: f64 = 1e-9;

/// `2^{-k}` as an exact double.
#[inline]
pub fn dyadic_length(k: u32) -> f64 {
    f64::powi(2.0, -(k as i32))
}

/// Number of heap-ordered nodes for intervals of depth `0..=depth`.
#[inline]
pub fn node_count(depth: u32) -> usize {
    (1usize << (depth + 1)) - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u32, u64)", into = "(u32, u64)")]
pub struct DyadicInterval {
    depth: u32,
    index: u64,
}

impl From<(u32, u64)> for DyadicInterval {
    fn from((depth, index): (u32, u64)) -> Self {
        DyadicInterval { depth, index }
    }
}

impl From<DyadicInterval> for (u32, u64) {
    fn from(i: DyadicInterval) -> Self {
        (i.depth, i.index)
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = 1u64 << self.depth.min(63);
        write!(f, "[{}/{}, {}/{})", self.index, n, self.index + 1, n)
    }
}

impl DyadicInterval {
    pub const ROOT: DyadicInterval = DyadicInterval { depth: 0, index: 0 };

    /// Panics if `index >= 2^depth`.
    pub fn new(depth: u32, index: u64) -> Self {
        assert!(
            depth < 63 && index < (1u64 << depth),
            "no dyadic interval ({depth}, {index})"
        );
        DyadicInterval { depth, index }
    }

    pub fn try_new(depth: u32, index: u64) -> Result<Self> {
        if depth >= 63 || index >= (1u64 << depth) {
            return Err(invalid(
                "interval",
                format!("no dyadic interval at depth {depth} with index {index}"),
            ));
        }
        Ok(DyadicInterval { depth, index })
    }

    #[inline]
    pub fn depth(self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn index(self) -> u64 {
        self.index
    }

    /// `ℓ(I) = |I| = 2^{-depth}`.
    #[inline]
    pub fn len(self) -> f64 {
        dyadic_length(self.depth)
    }

    pub fn start(self) -> f64 {
        self.index as f64 * self.len()
    }

    pub fn end(self) -> f64 {
        (self.index + 1) as f64 * self.len()
    }

    pub fn parent(self) -> Option<Self> {
        (self.depth > 0).then(|| DyadicInterval {
            depth: self.depth - 1,
            index: self.index >> 1,
        })
    }

    pub fn left(self) -> Self {
        DyadicInterval {
            depth: self.depth + 1,
            index: self.index << 1,
        }
    }

    pub fn right(self) -> Self {
        DyadicInterval {
            depth: self.depth + 1,
            index: (self.index << 1) | 1,
        }
    }

    pub fn children(self) -> [Self; 2] {
        [self.left(), self.right()]
    }

    /// The ancestor at `depth` (itself when the depths agree).
    pub fn ancestor_at(self, depth: u32) -> Option<Self> {
        (depth <= self.depth).then(|| DyadicInterval {
            depth,
            index: self.index >> (self.depth - depth),
        })
    }

    /// Non-strict inclusion `other ⊆ self`.
    #[inline]
    pub fn contains(self, other: Self) -> bool {
        other.depth >= self.depth && (other.index >> (other.depth - self.depth)) == self.index
    }

    #[inline]
    pub fn strictly_contains(self, other: Self) -> bool {
        other.depth > self.depth && self.contains(other)
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    /// Heap-order position of this interval in a table over all depths.
    #[inline]
    pub fn node(self) -> usize {
        (1usize << self.depth) - 1 + self.index as usize
    }

    pub fn from_node(node: usize) -> Self {
        let depth = usize::BITS - 1 - (node + 1).leading_zeros();
        DyadicInterval {
            depth,
            index: (node + 1 - (1usize << depth)) as u64,
        }
    }

    /// Cells of depth `grid_depth` covered by this interval.
    #[inline]
    pub fn cell_range(self, grid_depth: u32) -> Range<usize> {
        debug_assert!(self.depth <= grid_depth);
        let shift = grid_depth - self.depth;
        let start = (self.index as usize) << shift;
        start..start + (1usize << shift)
    }

    #[inline]
    pub fn contains_cell(self, cell: usize, grid_depth: u32) -> bool {
        self.depth <= grid_depth && (cell >> (grid_depth - self.depth)) as u64 == self.index
    }

    /// The depth-`grid_depth` cell as an interval.
    pub fn cell(cell: usize, grid_depth: u32) -> Self {
        DyadicInterval::new(grid_depth, cell as u64)
    }

    /// All intervals of depth `0..=max_depth` in heap order.
    pub fn all(max_depth: u32) -> impl Iterator<Item = DyadicInterval> {
        (0..node_count(max_depth)).map(DyadicInterval::from_node)
    }

    /// Intervals `J ⊆ self` with `depth(J) <= max_depth`, coarse to fine.
    pub fn descendants(self, max_depth: u32) -> impl Iterator<Item = DyadicInterval> {
        let depth = self.depth;
        let index = self.index;
        (depth..=max_depth.max(depth))
            .filter(move |&d| d <= max_depth)
            .flat_map(move |d| {
                let shift = d - depth;
                let first = index << shift;
                (first..first + (1u64 << shift)).map(move |i| DyadicInterval { depth: d, index: i })
            })
    }
}

/// Translation parameter of a dyadic grid on the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shift {
    Zero,
    Third,
}

impl Shift {
    pub fn alpha(self) -> f64 {
        match self {
            Shift::Zero => 0.0,
            Shift::Third => 1.0 / 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub depth: u32,
    pub shift: Shift,
}

impl DyadicGrid {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 || depth > 30 {
            return Err(invalid(
                "depth",
                format!("grid depth must lie in [1, 30], got {depth}"),
            ));
        }
        Ok(DyadicGrid {
            depth,
            shift: Shift::Zero,
        })
    }

    pub fn shifted(depth: u32, shift: Shift) -> Result<Self> {
        Ok(DyadicGrid {
            shift,
            ..DyadicGrid::new(depth)?
        })
    }

    pub fn cells(&self) -> usize {
        1usize << self.depth
    }
}

/// Interval `2^{-k}([0,1) + m + (-1)^k α)` of a translated grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedInterval {
    pub shift: Shift,
    pub level: u32,
    pub m: i64,
}

impl ShiftedInterval {
    fn offset(shift: Shift, level: u32) -> f64 {
        if level.is_multiple_of(2) {
            shift.alpha()
        } else {
            -shift.alpha()
        }
    }

    pub fn start(&self) -> f64 {
        dyadic_length(self.level) * (self.m as f64 + Self::offset(self.shift, self.level))
    }

    pub fn end(&self) -> f64 {
        self.start() + dyadic_length(self.level)
    }

    pub fn len(&self) -> f64 {
        dyadic_length(self.level)
    }
}

/// Smallest interval of `𝔻^0 ∪ 𝔻^{1/3}` containing `[a, b)`.
///
/// Any interval admits such a cover with `ℓ(Q^α) ≤ 6 ℓ(Q)`.
pub fn covering_interval(a: f64, b: f64) -> Result<ShiftedInterval> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid(
            "interval",
            format!("[{a}, {b}) is not a proper interval"),
        ));
    }
    let finest = ((b - a).log2().floor().abs() as u32)
        .saturating_add(2)
        .min(52);
    let mut best: Option<ShiftedInterval> = None;
    for level in (0..=finest).rev() {
        for shift in [Shift::Zero, Shift::Third] {
            let scale = f64::powi(2.0, level as i32);
            let m = (a * scale - ShiftedInterval::offset(shift, level)).floor() as i64;
            let candidate = ShiftedInterval { shift, level, m };
            let eps = 1e-12 * candidate.len();
            if candidate.start() <= a + eps
                && candidate.end() + eps >= b
                && best.is_none_or(|q| candidate.len() < q.len())
            {
                best = Some(candidate);
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.ok_or_else(|| invalid("interval", "no covering interval found"))
}

/// A real function piecewise constant on the cells of depth `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    depth: u32,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        if let Some((cell, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(
                "signal",
                format!("cell {cell} holds the non-finite value {v}"),
            ));
        }
        Ok(Signal {
            depth: n.trailing_zeros(),
            values,
        })
    }

    pub fn zeros(depth: u32) -> Self {
        Signal {
            depth,
            values: vec![0.0; 1 << depth],
        }
    }

    pub fn constant(depth: u32, c: f64) -> Self {
        Signal {
            depth,
            values: vec![c; 1 << depth],
        }
    }

    /// `f(x)` sampled at cell centers.
    pub fn from_fn(depth: u32, mut f: impl FnMut(f64) -> f64) -> Self {
        let h = dyadic_length(depth);
        Signal {
            depth,
            values: (0..1usize << depth)
                .map(|c| f((c as f64 + 0.5) * h))
                .collect(),
        }
    }

    pub fn indicator(depth: u32, interval: DyadicInterval) -> Self {
        let mut s = Signal::zeros(depth);
        if interval.depth() <= depth {
            s.values[interval.cell_range(depth)].fill(1.0);
        }
        s
    }

    /// `h̃_I = 1_{I_left} - 1_{I_right}`, the L^∞-normalized Haar function.
    pub fn haar_tilde(depth: u32, interval: DyadicInterval) -> Result<Self> {
        if interval.depth() >= depth {
            return Err(Error::NoHaarMode { interval, depth });
        }
        let mut s = Signal::zeros(depth);
        s.values[interval.left().cell_range(depth)].fill(1.0);
        s.values[interval.right().cell_range(depth)].fill(-1.0);
        Ok(s)
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Measure `2^{-J}` of a single cell.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        dyadic_length(self.depth)
    }

    pub fn check_interval(&self, interval: DyadicInterval) -> Result<()> {
        if interval.depth() > self.depth {
            return Err(Error::DepthMismatch {
                interval,
                depth: self.depth,
            });
        }
        Ok(())
    }

    pub fn check_same_depth(&self, other: &Signal) -> Result<()> {
        if self.depth != other.depth {
            return Err(Error::SignalDepths(self.depth, other.depth));
        }
        Ok(())
    }

    pub fn integral_over(&self, interval: DyadicInterval) -> Result<f64> {
        self.check_interval(interval)?;
        Ok(self.values[interval.cell_range(self.depth)]
            .iter()
            .sum::<f64>()
            * self.cell_measure())
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_measure()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Signal {
        Signal {
            depth: self.depth,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Signal {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Signal {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Signal, f: impl Fn(f64, f64) -> f64) -> Result<Signal> {
        self.check_same_depth(other)?;
        Ok(Signal {
            depth: self.depth,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `⟨f, g⟩ = ∫ f g`.
    pub fn inner(&self, other: &Signal) -> Result<f64> {
        self.check_same_depth(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.cell_measure())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Parses one real per line, or a single comma-separated row.
    pub fn parse(text: &str) -> Result<Signal> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let fields: Vec<(usize, &str)> = if lines.len() == 1 && lines[0].1.contains(',') {
            lines[0]
                .1
                .split(',')
                .map(|s| (lines[0].0, s.trim()))
                .filter(|(_, s)| !s.is_empty())
                .collect()
        } else {
            lines
        };
        let values = fields
            .into_iter()
            .map(|(line, s)| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    reason: format!("`{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Signal::new(values)
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 12);
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }
}

/// A finite union of cell ranges at a fixed depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSet {
    depth: u32,
    ranges: Vec<Range<usize>>,
}

impl CellSet {
    pub fn empty(depth: u32) -> Self {
        CellSet {
            depth,
            ranges: Vec::new(),
        }
    }

    pub fn full(depth: u32) -> Self {
        CellSet {
            depth,
            ranges: vec![0..1 << depth],
        }
    }

    pub fn from_interval(interval: DyadicInterval, depth: u32) -> Self {
        CellSet {
            depth,
            ranges: vec![interval.cell_range(depth)],
        }
    }

    pub fn from_cells(depth: u32, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut cells: Vec<usize> = cells.into_iter().filter(|&c| c < 1 << depth).collect();
        cells.sort_unstable();
        cells.dedup();
        let mut ranges: Vec<Range<usize>> = Vec::new();
        for c in cells {
            match ranges.last_mut() {
                Some(r) if r.end == c => r.end = c + 1,
                _ => ranges.push(c..c + 1),
            }
        }
        CellSet { depth, ranges }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        let depth = mask.len().trailing_zeros();
        CellSet::from_cells(
            depth,
            mask.iter().enumerate().filter(|(_, &m)| m).map(|(c, _)| c),
        )
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn cell_count(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).sum()
    }

    /// Lebesgue measure `|E|`.
    pub fn measure(&self) -> f64 {
        self.cell_count() as f64 * dyadic_length(self.depth)
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranges.iter().flat_map(|r| r.clone())
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.ranges.iter().any(|r| r.contains(&cell))
    }

    /// `self ∖ other`.
    pub fn difference(&self, other: &CellSet) -> CellSet {
        let mut mask = self.to_mask();
        for c in other.cells() {
            if c < mask.len() {
                mask[c] = false;
            }
        }
        CellSet::from_mask(&mask)
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        let mask = self.to_mask();
        other.cells().all(|c| c >= mask.len() || !mask[c])
    }

    pub fn is_subset_of_interval(&self, interval: DyadicInterval) -> bool {
        let r = interval.cell_range(self.depth);
        self.ranges
            .iter()
            .all(|s| s.start >= r.start && s.end <= r.end)
    }

    pub fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; 1 << self.depth];
        for c in self.cells() {
            mask[c] = true;
        }
        mask
    }
}

/// `⨍_I f`.
pub fn average(f: &Signal, interval: DyadicInterval) -> Result<f64> {
    Ok(f.integral_over(interval)? / interval.len())
}

/// `osc_I(f) = ⨍_I |f - ⨍_I f|`.
pub fn oscillation(f: &Signal, interval: DyadicInterval) -> Result<f64> {
    let mean = average(f, interval)?;
    let cells = &f.values()[interval.cell_range(f.depth())];
    Ok(cells.iter().map(|v| (v - mean).abs()).sum::<f64>() / cells.len() as f64)
}

/// `χ_I(x)^M` at the center `x` of `cell`, with `χ_I(x) = (1 + d(x, I)/ℓ(I))^{-1}`.
pub fn localization_weight(
    interval: DyadicInterval,
    cell: usize,
    exponent: u32,
    grid_depth: u32,
) -> f64 {
    let h = dyadic_length(grid_depth);
    let x = (cell as f64 + 0.5) * h;
    let dist = (interval.start() - x).max(x - interval.end()).max(0.0);
    (1.0 + dist / interval.len()).recip().powi(exponent as i32)
}

/// `|I|^{-1} ∫ |f| χ_I^M`.
pub fn localized_average(f: &Signal, interval: DyadicInterval, exponent: u32) -> Result<f64> {
    f.check_interval(interval)?;
    let kernel = chi_kernel(interval.depth(), f.depth(), exponent);
    Ok(localized_average_with(
        f.values(),
        interval,
        f.depth(),
        &kernel,
        true,
    ))
}

/// `kernel[δ] = χ^M` at a cell whose center lies `δ + 1/2` cells outside an
/// interval of depth `depth`.
pub(crate) fn chi_kernel(depth: u32, grid_depth: u32, exponent: u32) -> Vec<f64> {
    let width = (1usize << (grid_depth - depth)) as f64;
    (0..1usize << grid_depth)
        .map(|delta| {
            (1.0 + (delta as f64 + 0.5) / width)
                .recip()
                .powi(exponent as i32)
        })
        .collect()
}

fn localized_average_with(
    values: &[f64],
    interval: DyadicInterval,
    grid_depth: u32,
    kernel: &[f64],
    absolute: bool,
) -> f64 {
    let r = interval.cell_range(grid_depth);
    let v = |c: usize| if absolute { values[c].abs() } else { values[c] };
    let mut total: f64 = r.clone().map(v).sum();
    for (delta, c) in (0..r.start).rev().enumerate() {
        total += kernel[delta] * v(c);
    }
    for (delta, c) in (r.end..values.len()).enumerate() {
        total += kernel[delta] * v(c);
    }
    total * dyadic_length(grid_depth) / interval.len()
}

/// `|I|^{-1} ∫ |f| χ_I^M` for every interval of depth `0..=J`, heap ordered.
#[derive(Clone, Debug)]
pub struct LocalizedAverages {
    depth: u32,
    exponent: u32,
    table: Vec<f64>,
}

impl LocalizedAverages {
    pub fn new(f: &Signal, exponent: u32) -> Self {
        let depth = f.depth();
        let mut table = vec![0.0; node_count(depth)];
        for d in 0..=depth {
            let kernel = chi_kernel(d, depth, exponent);
            for i in 0..1u64 << d {
                let interval = DyadicInterval { depth: d, index: i };
                table[interval.node()] =
                    localized_average_with(f.values(), interval, depth, &kernel, true);
            }
        }
        LocalizedAverages {
            depth,
            exponent,
            table,
        }
    }

    pub fn get(&self, interval: DyadicInterval) -> f64 {
        self.table[interval.node()]
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
}

/// Decreasing rearrangement of a step function: values in nonincreasing order
/// with the measure each one occupies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rearrangement {
    steps: Vec<(f64, f64)>,
}

impl Rearrangement {
    /// Rearrangement of `|v|` for cells of common measure `cell_measure`.
    pub fn from_values(values: impl IntoIterator<Item = f64>, cell_measure: f64) -> Self {
        let mut v: Vec<f64> = values.into_iter().map(f64::abs).collect();
        v.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut steps: Vec<(f64, f64)> = Vec::new();
        for x in v {
            match steps.last_mut() {
                Some((value, measure)) if *value == x => *measure += cell_measure,
                _ => steps.push((x, cell_measure)),
            }
        }
        Rearrangement { steps }
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn total_measure(&self) -> f64 {
        self.steps.iter().map(|s| s.1).sum()
    }

    /// `φ^*(t)`, right-continuous and nonincreasing; zero beyond the support.
    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &(value, measure) in &self.steps {
            acc += measure;
            if t < acc {
                return value;
            }
        }
        0.0
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.steps
            .iter()
            .map(|&(v, m)| v.powf(p) * m)
            .sum::<f64>()
            .powf(p.recip())
    }
}

/// Decreasing rearrangement of `|f| 1_I`, restricted to `I`.
pub fn decreasing_rearrangement(f: &Signal, interval: DyadicInterval) -> Result<Rearrangement> {
    f.check_interval(interval)?;
    Ok(Rearrangement::from_values(
        f.values()[interval.cell_range(f.depth())].iter().copied(),
        f.cell_measure(),
    ))
}

/// `sup_λ λ |{x ∈ E : |v(x)| > λ}|` for cells of measure `cell_measure`.
///
/// The supremum is attained just below one of the finitely many values.
pub fn weak_l1_of_values(values: impl IntoIterator<Item = f64>, cell_measure: f64) -> f64 {
    let mut v: Vec<f64> = values.into_iter().map(f64::abs).collect();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut best = 0.0f64;
    let mut k = 0;
    while k < v.len() {
        let level = v[k];
        while k < v.len() && v[k] == level {
            k += 1;
        }
        best = best.max(level * k as f64 * cell_measure);
    }
    best
}

/// `‖f 1_E‖_{L^{1,∞}}`.
pub fn weak_l1_quasinorm(f: &Signal, set: &CellSet) -> Result<f64> {
    if set.depth() != f.depth() {
        return Err(Error::SignalDepths(f.depth(), set.depth()));
    }
    Ok(weak_l1_of_values(
        set.cells().map(|c| f.values()[c]),
        f.cell_measure(),
    ))
}

/// `(∫_I |f|^p ω)^{1/p}`; the whole of `[0,1)` when `interval` is `None`.
pub fn lp_norm(
    f: &Signal,
    p: f64,
    interval: Option<DyadicInterval>,
    weight: Option<&Weight>,
) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(
            "p",
            format!("exponent must be positive and finite, got {p}"),
        ));
    }
    let interval = interval.unwrap_or(DyadicInterval::ROOT);
    f.check_interval(interval)?;
    if let Some(w) = weight {
        if w.depth() != f.depth() {
            return Err(Error::SignalDepths(f.depth(), w.depth()));
        }
    }
    let range = interval.cell_range(f.depth());
    let total: f64 = match weight {
        Some(w) => range
            .map(|c| f.values()[c].abs().powf(p) * w.values()[c])
            .sum(),
        None => range.map(|c| f.values()[c].abs().powf(p)).sum(),
    };
    Ok((total * f.cell_measure()).powf(p.recip()))
}

/// Integrals `∫_I v` of cell data over every dyadic interval, heap ordered.
pub(crate) fn interval_sums(values: &[f64], depth: u32) -> Vec<f64> {
    let h = dyadic_length(depth);
    let mut table = vec![0.0; node_count(depth)];
    let base = (1usize << depth) - 1;
    for (c, v) in values.iter().enumerate() {
        table[base + c] = v * h;
    }
    for node in (0..base).rev() {
        table[node] = table[2 * node + 1] + table[2 * node + 2];
    }
    table
}

/// Per-cell sums of `node_weights` over every interval containing the cell.
pub(crate) fn pushdown(node_weights: &[f64], depth: u32) -> Vec<f64> {
    let mut acc = node_weights.to_vec();
    let base = (1usize << depth) - 1;
    for node in 1..acc.len() {
        acc[node] += acc[(node - 1) / 2];
    }
    acc.split_off(base)
}

/// Per-cell maximum of `node_values` over every interval containing the cell.
pub(crate) fn pushdown_max(node_values: &[f64], depth: u32) -> Vec<f64> {
    let mut acc = node_values.to_vec();
    let base = (1usize << depth) - 1;
    for node in 1..acc.len() {
        acc[node] = acc[node].max(acc[(node - 1) / 2]);
    }
    acc.split_off(base)
}
