//! Conformal and Killing vector fields on Damek-Ricci spaces.

// `!(x <= tol)` rejects NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod coeffsys;
pub mod confsys;
pub mod fd;
pub mod linalg;
pub mod poly;
pub mod probe;
pub mod space;
pub mod spaceforms;
pub mod tensor;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator behind every sampled point: xoshiro256++ with its state
/// expanded from `seed` by SplitMix64.
pub fn seeded_rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}
