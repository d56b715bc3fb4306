//! Reproducible random inputs: signals, weights, multipliers and sparse collections.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, Signal};
use crate::error::{invalid, Error, Result};
use crate::haar::HaarMultiplier;
use crate::hardy::{ap_characteristic, Weight};
use crate::sparse::SparseCollection;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SignalKind {
    GaussianNoise,
    /// `k` random Haar modes `h̃_I` with Gaussian amplitudes.
    SparseHaar(usize),
    /// A random step `a 1_{[0,t)} + b 1_{[t,1)}` at a random cell boundary.
    Step,
    SingleMode(DyadicInterval),
    /// Gaussian noise rounded to multiples of `2^{-10}`, so that every dyadic
    /// average is exact in floating point.
    Quantized,
}

impl SignalKind {
    pub fn generate<R: Rng + ?Sized>(self, depth: u32, rng: &mut R) -> Result<Signal> {
        if depth == 0 {
            return Err(invalid("depth", "signals need at least two cells"));
        }
        let n = 1usize << depth;
        match self {
            SignalKind::GaussianNoise => {
                Signal::new((0..n).map(|_| rng.sample(StandardNormal)).collect())
            }
            SignalKind::Quantized => Signal::new(
                (0..n)
                    .map(|_| (rng.sample::<f64, _>(StandardNormal) * 1024.0).round() / 1024.0)
                    .collect(),
            ),
            SignalKind::SparseHaar(k) => {
                if k == 0 {
                    return Err(invalid("k", "sparse_haar needs at least one mode"));
                }
                let mut f = Signal::zeros(depth);
                for _ in 0..k {
                    let d = rng.random_range(0..depth);
                    let i = DyadicInterval::new(d, rng.random_range(0..1u64 << d));
                    let amp: f64 = rng.sample(StandardNormal);
                    f = f.add(&Signal::haar_tilde(depth, i)?.scale(amp))?;
                }
                Ok(f)
            }
            SignalKind::Step => {
                let t = rng.random_range(1..n);
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                Signal::new((0..n).map(|c| if c < t { a } else { b }).collect())
            }
            SignalKind::SingleMode(i) => Signal::haar_tilde(depth, i),
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::GaussianNoise => f.write_str("gaussian_noise"),
            SignalKind::SparseHaar(k) => write!(f, "sparse_haar:{k}"),
            SignalKind::Step => f.write_str("step"),
            SignalKind::SingleMode(i) => write!(f, "single_mode:{},{}", i.depth(), i.index()),
            SignalKind::Quantized => f.write_str("quantized"),
        }
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    /// `gaussian_noise`, `sparse_haar:k`, `step`, `single_mode:depth,index`, `quantized`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let bad = |reason: &str| invalid("signal", format!("`{s}`: {reason}"));
        match (name.trim(), arg) {
            ("gaussian_noise", None) => Ok(SignalKind::GaussianNoise),
            ("step", None) => Ok(SignalKind::Step),
            ("quantized", None) => Ok(SignalKind::Quantized),
            ("sparse_haar", Some(k)) => k
                .trim()
                .parse()
                .map(SignalKind::SparseHaar)
                .map_err(|_| bad("expected a count")),
            ("single_mode", Some(iv)) => {
                let (d, i) = iv
                    .split_once(',')
                    .ok_or_else(|| bad("expected depth,index"))?;
                let d = d.trim().parse().map_err(|_| bad("bad depth"))?;
                let i = i.trim().parse().map_err(|_| bad("bad index"))?;
                Ok(SignalKind::SingleMode(DyadicInterval::try_new(d, i)?))
            }
            _ => Err(bad("unknown signal kind")),
        }
    }
}

impl TryFrom<String> for SignalKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SignalKind> for String {
    fn from(k: SignalKind) -> String {
        k.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum WeightKind {
    Constant,
    /// `1` on `[0, 1/2)` and `t` on `[1/2, 1)`.
    TwoLevel(f64),
    /// Each interval hands a random child the relative mass `δ`, the other `1`,
    /// keeping the parent average.
    DyadicDoubling(f64),
    /// `|x - x0|^a` at cell centers, with `x0` a random cell boundary.
    PowerLike(f64),
}

impl WeightKind {
    pub fn generate<R: Rng + ?Sized>(self, depth: u32, rng: &mut R) -> Result<Weight> {
        let n = 1usize << depth;
        match self {
            WeightKind::Constant => Ok(Weight::constant(depth, 1.0)),
            WeightKind::TwoLevel(t) => {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(invalid("t", format!("must be positive, got {t}")));
                }
                Weight::new((0..n).map(|c| if c < n / 2 { 1.0 } else { t }).collect())
            }
            WeightKind::DyadicDoubling(delta) => {
                if !(delta > 0.0 && delta <= 1.0) {
                    return Err(invalid("delta", format!("must lie in (0, 1], got {delta}")));
                }
                let light = 2.0 * delta / (1.0 + delta);
                let heavy = 2.0 / (1.0 + delta);
                let mut values = vec![1.0f64];
                for _ in 0..depth {
                    let mut next = Vec::with_capacity(values.len() * 2);
                    for v in values {
                        if rng.random::<bool>() {
                            next.extend([v * light, v * heavy]);
                        } else {
                            next.extend([v * heavy, v * light]);
                        }
                    }
                    values = next;
                }
                Weight::new(values)
            }
            WeightKind::PowerLike(a) => {
                if !(a > -1.0 && a < 1.0) {
                    return Err(invalid("a", format!("must lie in (-1, 1), got {a}")));
                }
                let x0 = rng.random_range(0..=n) as f64 / n as f64;
                let h = 1.0 / n as f64;
                Weight::new(
                    (0..n)
                        .map(|c| ((c as f64 + 0.5) * h - x0).abs().powf(a))
                        .collect(),
                )
            }
        }
    }

    fn with_param(self, v: f64) -> Self {
        match self {
            WeightKind::Constant => WeightKind::Constant,
            WeightKind::TwoLevel(_) => WeightKind::TwoLevel(v),
            WeightKind::DyadicDoubling(_) => WeightKind::DyadicDoubling(v),
            WeightKind::PowerLike(_) => WeightKind::PowerLike(v),
        }
    }
}

/// A weight of the given family whose dyadic `[ω]_{A_2}` is close to `target`.
///
/// The family parameter is found by bisection with the random choices held
/// fixed; returns the weight, the parameter and the realized characteristic.
pub fn weight_with_a2<R: Rng + ?Sized>(
    kind: WeightKind,
    target: f64,
    depth: u32,
    rng: &mut R,
) -> Result<(Weight, WeightKind, f64)> {
    if !(target >= 1.0 && target.is_finite()) {
        return Err(invalid(
            "target",
            format!("[ω]_A2 is at least 1, got {target}"),
        ));
    }
    let seed: u64 = rng.random();
    let build = |v: f64| -> Result<(Weight, f64)> {
        let mut local = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = kind.with_param(v).generate(depth, &mut local)?;
        let a2 = ap_characteristic(&w, 2.0)?;
        Ok((w, a2))
    };
    // Each family is monotone in its parameter on the bracket below, from A2 = 1 outward.
    let (mut lo, mut hi, increasing) = match kind {
        WeightKind::Constant => {
            let (w, a2) = build(1.0)?;
            return Ok((w, kind, a2));
        }
        WeightKind::TwoLevel(_) => (1.0, 1e8, true),
        WeightKind::DyadicDoubling(_) => (1e-12, 1.0, false),
        WeightKind::PowerLike(_) => (0.0, 0.999, true),
    };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (_, a2) = build(mid)?;
        if (a2 < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = 0.5 * (lo + hi);
    let (w, a2) = build(v)?;
    Ok((w, kind.with_param(v), a2))
}

/// A multiplier on a random family: each Haar mode is kept with probability
/// `density` and gets `ε_I` uniform in `[-1, 1]`.
pub fn random_multiplier<R: Rng + ?Sized>(depth: u32, density: f64, rng: &mut R) -> HaarMultiplier {
    let mut entries = Vec::new();
    for i in DyadicInterval::all(depth.saturating_sub(1)) {
        if rng.random::<f64>() < density {
            entries.push((i, rng.random_range(-1.0..=1.0)));
        }
    }
    HaarMultiplier::new(entries).expect("coefficients lie in [-1, 1]")
}

/// A random collection built top-down so every interval spends at most half
/// of its length on its children; intervals have depth at most `max_depth`.
pub fn random_sparse_collection<R: Rng + ?Sized>(max_depth: u32, rng: &mut R) -> SparseCollection {
    let mut out = vec![DyadicInterval::ROOT];
    let mut stack = vec![DyadicInterval::ROOT];
    while let Some(q) = stack.pop() {
        if q.depth() >= max_depth {
            continue;
        }
        // Candidate children: a random antichain of strict subintervals, drawn
        // until the budget |Q|/2 would be exceeded.
        let mut budget = q.len() / 2.0;
        let mut taken: Vec<DyadicInterval> = Vec::new();
        for _ in 0..8 {
            let k = rng.random_range(1..=(max_depth - q.depth()).min(6));
            let idx = rng.random_range(0..1u64 << k);
            let c = DyadicInterval::new(q.depth() + k, (q.index() << k) + idx);
            if c.len() <= budget
                && taken.iter().all(|t| t.is_disjoint(c))
                && rng.random::<f64>() < 0.7
            {
                budget -= c.len();
                taken.push(c);
            }
        }
        out.extend(&taken);
        stack.extend(taken);
    }
    SparseCollection::new(out)
}

/// A uniformly random sign `±1` for every interval of `family`.
pub fn random_signs<R: Rng + ?Sized>(
    family: &[DyadicInterval],
    rng: &mut R,
) -> Vec<(DyadicInterval, f64)> {
    family
        .iter()
        .map(|&i| (i, *[-1.0, 1.0].choose(rng).expect("nonempty")))
        .collect()
}
