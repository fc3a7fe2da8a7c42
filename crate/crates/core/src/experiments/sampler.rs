use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Scenario};

/// Random parameter combinations for the validation studies: integer `N`
/// from `[n_lo, n_hi]`, `c1, c2 ~ U(c_lo, c_hi)`, `sigma ~ U(sigma_lo, sigma_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamSampler {
    pub n_lo: u32,
    pub n_hi: u32,
    pub c_lo: f64,
    pub c_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Remaining constants (`n_max`, speeds, `L`); `c1, c2, sigma` are overwritten.
    pub base: ModelParams,
}

impl Default for ParamSampler {
    fn default() -> Self {
        Self {
            n_lo: 50,
            n_hi: 150,
            c_lo: 1.0,
            c_hi: 6.0,
            sigma_lo: 0.2,
            sigma_hi: 1.2,
            base: ModelParams::default(),
        }
    }
}

impl ParamSampler {
    pub fn validate(&self) -> Result<()> {
        if self.n_lo == 0 || self.n_lo > self.n_hi || f64::from(self.n_hi) >= self.base.n_max {
            return Err(Error::param("sampler.n", format!(
                "need 0 < n_lo <= n_hi < n_max, got [{}, {}]", self.n_lo, self.n_hi
            )));
        }
        if !(self.c_lo > 0.0 && self.c_lo < self.c_hi) {
            return Err(Error::param("sampler.c", "need 0 < c_lo < c_hi"));
        }
        if !(self.sigma_lo >= 0.0 && self.sigma_lo < self.sigma_hi) {
            return Err(Error::param("sampler.sigma", "need 0 <= sigma_lo < sigma_hi"));
        }
        self.base.validate()
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Scenario> {
        let n = rng.random_range(self.n_lo..=self.n_hi);
        let params = ModelParams {
            c1: rng.random_range(self.c_lo..self.c_hi),
            c2: rng.random_range(self.c_lo..self.c_hi),
            sigma: rng.random_range(self.sigma_lo..self.sigma_hi),
            ..self.base
        };
        Scenario::new(params, f64::from(n))
    }

    /// Rejection-sample `count` scenarios satisfying `accept`.
    pub fn draw_accepted(
        &self,
        rng: &mut ChaCha8Rng,
        count: usize,
        max_attempts: usize,
        mut accept: impl FnMut(&Scenario) -> bool,
    ) -> Result<(Vec<Scenario>, usize)> {
        self.validate()?;
        let mut out = Vec::with_capacity(count);
        let mut rejected = 0;
        for _ in 0..max_attempts {
            if out.len() == count {
                break;
            }
            let s = self.draw(rng)?;
            if accept(&s) {
                out.push(s);
            } else {
                rejected += 1;
            }
        }
        if out.len() < count {
            return Err(Error::Runtime(format!(
                "only {} of {count} parameter combinations accepted after {max_attempts} draws",
                out.len()
            )));
        }
        Ok((out, rejected))
    }
}
