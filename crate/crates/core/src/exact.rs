//! Exact rational evaluation of the basic functionals, used to cross-check
//! the floating-point paths. Every `f64` is a dyadic rational, so the inputs
//! convert without loss.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::dyadic::{DyadicInterval, Signal};
use crate::error::{invalid, Result};

/// Largest depth accepted by the oracle.
pub const MAX_EXACT_DEPTH: u32 = 12;

pub fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("signal values are finite")
}

fn cell_measure(depth: u32) -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(1u64) << depth)
}

fn check(f: &Signal) -> Result<()> {
    if f.depth() > MAX_EXACT_DEPTH {
        return Err(invalid(
            "depth",
            format!(
                "exact oracle supports depth ≤ {MAX_EXACT_DEPTH}, got {}",
                f.depth()
            ),
        ));
    }
    Ok(())
}

fn cells(f: &Signal, i: DyadicInterval) -> Result<Vec<BigRational>> {
    check(f)?;
    f.check_interval(i)?;
    Ok(f.values()[i.cell_range(f.depth())]
        .iter()
        .map(|&v| rational(v))
        .collect())
}

/// `⨍_I f`.
pub fn average(f: &Signal, i: DyadicInterval) -> Result<BigRational> {
    let v = cells(f, i)?;
    let n = BigRational::from_integer(BigInt::from(v.len()));
    Ok(v.into_iter().sum::<BigRational>() / n)
}

/// `⨍_I |f - ⨍_I f|`.
pub fn oscillation(f: &Signal, i: DyadicInterval) -> Result<BigRational> {
    let v = cells(f, i)?;
    let n = BigRational::from_integer(BigInt::from(v.len()));
    let mean = v.iter().cloned().sum::<BigRational>() / &n;
    Ok(v.iter().map(|x| (x - &mean).abs()).sum::<BigRational>() / n)
}

/// `∫_I |f|`.
pub fn l1_norm(f: &Signal, i: DyadicInterval) -> Result<BigRational> {
    let v = cells(f, i)?;
    Ok(v.iter().map(|x| x.abs()).sum::<BigRational>() * cell_measure(f.depth()))
}

/// `∫_I |f|²`.
pub fn l2_norm_squared(f: &Signal, i: DyadicInterval) -> Result<BigRational> {
    let v = cells(f, i)?;
    Ok(v.iter().map(|x| x * x).sum::<BigRational>() * cell_measure(f.depth()))
}

/// `‖f 1_I‖_{1,∞} = max_t t |{|f| ≥ t}|` over the values of `|f|` on `I`.
pub fn weak_l1(f: &Signal, i: DyadicInterval) -> Result<BigRational> {
    let mut v: Vec<BigRational> = cells(f, i)?.into_iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.cmp(a));
    let h = cell_measure(f.depth());
    let mut best = BigRational::zero();
    for (k, t) in v.iter().enumerate() {
        let candidate = t * BigRational::from_integer(BigInt::from(k + 1)) * &h;
        if candidate > best {
            best = candidate;
        }
    }
    Ok(best)
}

/// `d_I = (∫_{I_left} f - ∫_{I_right} f) / |I|`, the coefficient of `h̃_I`.
pub fn tilde_coefficient(f: &Signal, i: DyadicInterval) -> Result<BigRational> {
    let l = average(f, i.left())?;
    let r = average(f, i.right())?;
    Ok((l - r) / BigRational::from_integer(BigInt::from(2)))
}

/// `max_Q |Q|^{-1} Σ_{P⊆Q} |P|`, with lengths as exact powers of two.
pub fn carleson_constant(intervals: &[DyadicInterval]) -> BigRational {
    let len =
        |i: &DyadicInterval| BigRational::new(BigInt::from(1), BigInt::from(1u64) << i.depth());
    intervals
        .iter()
        .map(|q| {
            intervals
                .iter()
                .filter(|p| q.contains(**p))
                .map(len)
                .sum::<BigRational>()
                / len(q)
        })
        .max()
        .unwrap_or_else(BigRational::zero)
}
