//! Deterministic initial ensembles.
//!
//! Trajectory `i` draws its angle from a ChaCha8 stream selected by `i`
//! under a key derived from the seed, so the draw is a pure function of
//! `(seed, i)` and independent of how the ensemble is split across threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::params::{ComplexPhasePoint, EnsembleConfig};

/// Initial angle of trajectory `index`, uniform on `[-π, π]`.
pub fn initial_angle(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.random_range(-PI..=PI)
}

/// `n_traj` points with `p_r = p_i = θ_i = 0` and i.i.d. uniform `θ_r`.
pub fn sample_initial_ensemble(cfg: &EnsembleConfig) -> Vec<ComplexPhasePoint> {
    let seed = cfg.seed();
    (0..cfg.n_traj() as u64)
        .into_par_iter()
        .map(|i| ComplexPhasePoint::new(initial_angle(seed, i), 0.0, 0.0, 0.0))
        .collect()
}
