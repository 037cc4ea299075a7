use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BeamModelError {
    #[error("mixture weights must sum to 1, got {0}")]
    Weights(f64),
    #[error("z_rand must be positive so every column is normalizable")]
    ZeroRandom,
    #[error("invalid beam model parameter {name}: {value}")]
    Param { name: &'static str, value: f64 },
    #[error("need at least two range bins, got {0}")]
    Bins(usize),
}

/// Four-component beam mixture: hit, short, max, random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamModelParams {
    pub z_hit: f64,
    pub z_short: f64,
    pub z_max: f64,
    pub z_rand: f64,
    /// Std of the hit component (m).
    pub sigma_hit: f64,
    /// Rate of the short-reading exponential (1/m).
    pub lambda_short: f64,
    /// Exponent applied to the summed log-likelihood.
    pub squash: f64,
}

impl Default for BeamModelParams {
    fn default() -> Self {
        Self {
            z_hit: 0.75,
            z_short: 0.10,
            z_max: 0.07,
            z_rand: 0.08,
            sigma_hit: 0.10,
            lambda_short: 1.0,
            squash: 1.0 / 2.2,
        }
    }
}

impl BeamModelParams {
    pub fn validate(&self) -> Result<(), BeamModelError> {
        for (name, value) in [
            ("z_hit", self.z_hit),
            ("z_short", self.z_short),
            ("z_max", self.z_max),
            ("z_rand", self.z_rand),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(BeamModelError::Param { name, value });
            }
        }
        let sum = self.z_hit + self.z_short + self.z_max + self.z_rand;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BeamModelError::Weights(sum));
        }
        if self.z_rand <= 0.0 {
            return Err(BeamModelError::ZeroRandom);
        }
        for (name, value) in [
            ("sigma_hit", self.sigma_hit),
            ("lambda_short", self.lambda_short),
            ("squash", self.squash),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(BeamModelError::Param { name, value });
            }
        }
        Ok(())
    }
}

/// Discretized `p(measured bin | expected bin)`, stored column-major so a
/// fixed expected bin is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamModelTable {
    params: BeamModelParams,
    nbins: usize,
    bin_width: f64,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl BeamModelTable {
    /// Bins of width `bin_width` covering `[0, max_range]`; the last bin is the max-range bin.
    pub fn new(params: BeamModelParams, max_range: f64, bin_width: f64) -> Result<Self, BeamModelError> {
        params.validate()?;
        if !(bin_width > 0.0 && max_range > 0.0) {
            return Err(BeamModelError::Param {
                name: "bin_width",
                value: bin_width,
            });
        }
        let nbins = (max_range / bin_width).round() as usize + 1;
        if nbins < 2 {
            return Err(BeamModelError::Bins(nbins));
        }
        let mut probs = vec![0.0; nbins * nbins];
        let max_bin = nbins - 1;
        for e in 0..nbins {
            let re = e as f64 * bin_width;
            let col = &mut probs[e * nbins..(e + 1) * nbins];

            let hit: Vec<f64> = (0..nbins)
                .map(|m| {
                    let z = (m as f64 * bin_width - re) / params.sigma_hit;
                    (-0.5 * z * z).exp()
                })
                .collect();
            let hit_sum: f64 = hit.iter().sum();

            let short: Vec<f64> = (0..nbins)
                .map(|m| {
                    if m < e {
                        params.lambda_short * (-params.lambda_short * m as f64 * bin_width).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let short_sum: f64 = short.iter().sum();

            for m in 0..nbins {
                let mut p = params.z_rand / nbins as f64;
                if hit_sum > 0.0 {
                    p += params.z_hit * hit[m] / hit_sum;
                }
                if short_sum > 0.0 {
                    p += params.z_short * short[m] / short_sum;
                }
                if m == max_bin {
                    p += params.z_max;
                }
                col[m] = p;
            }
            let total: f64 = col.iter().sum();
            col.iter_mut().for_each(|p| *p /= total);
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self {
            params,
            nbins,
            bin_width,
            probs,
            log_probs,
        })
    }

    pub fn params(&self) -> &BeamModelParams {
        &self.params
    }

    pub fn nbins(&self) -> usize {
        self.nbins
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn squash(&self) -> f64 {
        self.params.squash
    }

    #[inline]
    pub fn bin(&self, range: f64) -> usize {
        let b = (range / self.bin_width).round();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.nbins - 1)
        }
    }

    pub fn prob(&self, measured_bin: usize, expected_bin: usize) -> f64 {
        self.probs[expected_bin * self.nbins + measured_bin]
    }

    #[inline]
    pub fn log_prob_bins(&self, measured_bin: usize, expected_bin: usize) -> f64 {
        self.log_probs[expected_bin * self.nbins + measured_bin]
    }

    #[inline]
    pub fn log_prob(&self, measured: f64, expected: f64) -> f64 {
        self.log_prob_bins(self.bin(measured), self.bin(expected))
    }

    pub fn column(&self, expected_bin: usize) -> &[f64] {
        &self.probs[expected_bin * self.nbins..(expected_bin + 1) * self.nbins]
    }

    pub fn min_log_prob(&self) -> f64 {
        self.log_probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
