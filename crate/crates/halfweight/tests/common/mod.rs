#![allow(dead_code)]

use std::sync::OnceLock;

use halfweight::hecke::{self, EigenformBundle};
use halfweight::space::CuspSpace;

pub const ELL: u32 = 6;
pub const PRIMES: [u64; 5] = [3, 5, 7, 11, 13];
pub const N_MAX: usize = 20_000;

/// The ℓ = 6 cusp space at the default truncation.
pub fn space() -> &'static CuspSpace {
    static SPACE: OnceLock<CuspSpace> = OnceLock::new();
    SPACE.get_or_init(|| CuspSpace::new(ELL, N_MAX, true).expect("cusp space"))
}

/// Both eigenforms of the ℓ = 6 space.
pub fn bundles() -> &'static [EigenformBundle] {
    static B: OnceLock<Vec<EigenformBundle>> = OnceLock::new();
    B.get_or_init(|| hecke::extract_all(space(), &PRIMES).expect("eigenforms"))
}

pub fn bundle() -> &'static EigenformBundle {
    &bundles()[0]
}

/// The default eigenform with a table long enough for the analytic sums.
pub fn long_bundle() -> &'static EigenformBundle {
    static B: OnceLock<EigenformBundle> = OnceLock::new();
    B.get_or_init(|| hecke::extract_eigenform(ELL, &PRIMES, 200_000, true).expect("eigenform"))
}
