//! Fixtures shared by the benchmarks.

use fracvep_core::{FractionalOrder, MaterialParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Newest-first strain increments, reproducible per `seed`.
pub fn random_increments(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1e-3..1e-3)).collect()
}

/// Monotone benchmark material with `beta_E = 0.5`.
pub fn monotone_params(beta_k: f64) -> MaterialParams {
    MaterialParams {
        e_pseudo: 50.0,
        beta_e: FractionalOrder::new(0.5).expect("valid order"),
        k_pseudo: 10.0,
        beta_k: FractionalOrder::new(beta_k).expect("valid order"),
        hardening: 0.0,
        yield_stress: 1.0,
        damage_strength: 1e-4,
        damage_exponent: 1.0,
    }
}
