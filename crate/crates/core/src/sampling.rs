//! Seeded, splittable random sampling.
//!
//! Every random draw in the crate comes from a ChaCha stream identified by
//! `(seed, stream)`. Distinct consumers use distinct stream ids, so running
//! them in any order or in parallel does not change what each one sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{BoxDomain, Vec2, ZERO};

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler { rng }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    pub fn point_in(&mut self, domain: &BoxDomain) -> Vec2 {
        let mut x = ZERO;
        for i in 0..domain.dim {
            x[i] = self.uniform(domain.lo[i], domain.hi[i]);
        }
        x
    }

    /// Vector with components uniform in `[-range, range]`.
    pub fn vector(&mut self, dim: usize, range: f64) -> Vec2 {
        let mut v = ZERO;
        for c in v.iter_mut().take(dim) {
            *c = self.uniform(-range, range);
        }
        v
    }
}
