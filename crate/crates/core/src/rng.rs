//! Deterministic random streams.
//!
//! A single 64-bit seed drives every stochastic operation. Independent
//! sub-streams are derived from a text label, so a module's draws do not
//! depend on which other modules ran before it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// Create the root stream for `seed`.
pub fn make_rng(seed: u64) -> SimRng {
    SimRng {
        seed,
        inner: ChaCha8Rng::seed_from_u64(seed),
    }
}

/// 64-bit FNV-1a.
fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl SimRng {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sub-stream keyed by `label`. Uses a distinct ChaCha stream id on the
    /// same key, so derivation never consumes from `self`.
    pub fn derive(&self, label: &str) -> SimRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(fnv1a(label));
        SimRng {
            seed: self.seed,
            inner,
        }
    }

    /// Sub-stream keyed by `label` and an index (per-worker or per-stripe).
    pub fn derive_indexed(&self, label: &str, index: u64) -> SimRng {
        let mut inner =
            ChaCha8Rng::seed_from_u64(self.seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        inner.set_stream(fnv1a(label));
        SimRng {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Bernoulli trial. `p <= 0` never fires and `p >= 1` always fires without
    /// consuming a draw, so forced-failure runs are fully deterministic.
    pub fn chance(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.uniform() < p
        }
    }
}

impl rand::RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
