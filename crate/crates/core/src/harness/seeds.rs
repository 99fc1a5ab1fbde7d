//! Deterministic seed derivation.
//!
//! Initial conditions and evaluation sets depend only on the repetition, so
//! every method (and both noise modes) starts from the same estimate and
//! configuration and is scored on the same evaluation sets.

use crate::selection::Method;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b)
}

const INIT: u64 = 0x494E_4954;
const RUN: u64 = 0x5255_4E00;
const EVAL: u64 = 0x4556_414C;

fn method_code(m: Method) -> u64 {
    match m {
        Method::Random => 1,
        Method::Al => 2,
        Method::Ucsal => 3,
        Method::Ccsal => 4,
    }
}

/// Seed of the initial estimate and initial configuration of a repetition.
pub fn init_seed(master: u64, repetition: usize) -> u64 {
    mix(mix(master, INIT), repetition as u64)
}

/// Seed of a run's own streams (random selection, observation noise).
pub fn run_seed(master: u64, method: Method, repetition: usize) -> u64 {
    mix(mix(mix(master, RUN), method_code(method)), repetition as u64)
}

/// Seed of the evaluation set scored after `iteration`.
pub fn eval_seed(master: u64, repetition: usize, iteration: usize) -> u64 {
    mix(mix(mix(master, EVAL), repetition as u64), iteration as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(init_seed(1, 0), init_seed(1, 0));
        assert_ne!(init_seed(1, 0), init_seed(1, 1));
        assert_ne!(init_seed(1, 0), init_seed(2, 0));
        assert_ne!(run_seed(1, Method::Al, 0), run_seed(1, Method::Ucsal, 0));
        assert_ne!(eval_seed(1, 0, 1), eval_seed(1, 0, 2));
        // pinned so that output files stay comparable across builds
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
