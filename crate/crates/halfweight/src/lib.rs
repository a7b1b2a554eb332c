//! Half-integral weight cusp forms on Γ0(4): q-expansions, Hecke and
//! Atkin–Lehner operators, Shimura lifts, twisted character sums and
//! twisted L-functions.

pub mod arith;
pub mod error;
pub mod ntt;
pub mod par;
pub mod qexp;
pub mod space;
pub mod hecke;
pub mod shimura;
pub mod charsum;
pub mod gamma;
pub mod kernel;
pub mod lfun;
pub mod selftest;

pub use error::{Error, Result};
