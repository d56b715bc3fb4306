//! Sparse domination on finite dyadic signals.
//!
//! Every quantity is evaluated on functions that are piecewise constant on
//! the cells of a depth-`J` dyadic grid of `[0, 1)`, so integrals are finite
//! sums and each inequality produced by a stopping time can be re-checked
//! after the fact.

pub mod campaign;
pub mod cz;
pub mod domination;
pub mod dyadic;
pub mod error;
pub mod exact;
pub mod generate;
pub mod haar;
pub mod hardy;
pub mod maximal;
pub mod sparse;

pub use cz::{cz_decompose, weak11_certify, CzDecomposition, Weak11Operator, Weak11Report};
pub use domination::{
    dominate_avg, dominate_oscillation, dominate_square, dominate_weighted, lerner_decompose,
    DominationCertificate, LernerDecomposition, Mode, StoppingParams,
};
pub use dyadic::{
    average, decreasing_rearrangement, localization_weight, lp_norm, oscillation,
    weak_l1_quasinorm, CellSet, DyadicGrid, DyadicInterval, Rearrangement, Shift, Signal,
};
pub use error::{Error, Result};
pub use haar::{
    apply_multiplier, bilinear_form, energy_check, haar_transform, inverse_transform,
    localized_square_function, size, tilde_size, HaarCoefficients, HaarMultiplier,
};
pub use hardy::{
    ap_characteristic, atomic_decompose, cmo_norm, hardy_norm, rh_characteristic,
    AtomicDecomposition, Weight,
};
pub use maximal::{local_mean_oscillation, maximal, MaximalKind};
pub use sparse::{
    bmo_norm, carleson_constant, certify_sparse, sparse_form, sparse_operator, sparse_vs_carleson,
    SparseCollection,
};
