//! Renewable energy arrivals: sampling and discretization into a scenario tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use thiserror::Error;

/// Default cap on the number of scenarios in a full product tree.
pub const DEFAULT_TREE_CAP: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum ReError {
    #[error("scenario tree of size {size} exceeds the cap of {cap}")]
    TreeTooLarge { size: f64, cap: usize },
    #[error("invalid renewable process: {0}")]
    Invalid(String),
}

/// Stochastic part of the arrival rate around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Uncertainty {
    None,
    /// Gamma variate rescaled to the cell mean.
    Gamma { shape: f64, scale: f64 },
    /// `(1 - x) * mean` or `(1 + x) * mean`, each with probability 1/2.
    TwoPoint { x: f64 },
}

/// Arrival-rate process: mean matrix indexed `[drone][slot]` (Watt) and its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReProcess {
    pub mean: Vec<Vec<f64>>,
    pub uncertainty: Uncertainty,
}

/// One discretized realization and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub phi: Vec<Vec<f64>>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    pub realizations: Vec<Realization>,
    /// True when built by sample-average approximation instead of a full product.
    pub sampled: bool,
}

impl ScenarioTree {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Single-scenario tree holding `phi` with probability 1.
    pub fn certain(phi: Vec<Vec<f64>>) -> Self {
        ScenarioTree { realizations: vec![Realization { phi, prob: 1.0 }], sampled: false }
    }

    /// Probability-weighted mean matrix.
    pub fn expectation(&self) -> Vec<Vec<f64>> {
        let first = &self.realizations[0].phi;
        let mut out = vec![vec![0.0; first.first().map_or(0, Vec::len)]; first.len()];
        for r in &self.realizations {
            for (row, src) in out.iter_mut().zip(&r.phi) {
                for (o, v) in row.iter_mut().zip(src) {
                    *o += r.prob * v;
                }
            }
        }
        out
    }
}

impl ReProcess {
    pub fn new(mean: Vec<Vec<f64>>, uncertainty: Uncertainty) -> Self {
        ReProcess { mean, uncertainty }
    }

    /// Constant mean for `drones x slots`.
    pub fn constant(value: f64, drones: usize, slots: usize, uncertainty: Uncertainty) -> Self {
        ReProcess { mean: vec![vec![value; slots]; drones], uncertainty }
    }

    pub fn with_uncertainty(&self, uncertainty: Uncertainty) -> Self {
        ReProcess { mean: self.mean.clone(), uncertainty }
    }

    pub fn validate(&self, drones: usize, slots: usize) -> Result<(), ReError> {
        if self.mean.len() != drones || self.mean.iter().any(|r| r.len() != slots) {
            return Err(ReError::Invalid(format!("mean matrix must be {drones} x {slots}")));
        }
        if self.mean.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(ReError::Invalid("mean arrival rates must be finite and >= 0".into()));
        }
        match self.uncertainty {
            Uncertainty::None => Ok(()),
            Uncertainty::Gamma { shape, scale } if shape > 0.0 && scale > 0.0 => Ok(()),
            Uncertainty::Gamma { .. } => Err(ReError::Invalid("gamma shape and scale must be > 0".into())),
            Uncertainty::TwoPoint { x } if (0.0..=1.0).contains(&x) => Ok(()),
            Uncertainty::TwoPoint { x } => Err(ReError::Invalid(format!("two-point spread must lie in [0, 1], got {x}"))),
        }
    }

    pub fn drones(&self) -> usize {
        self.mean.len()
    }

    pub fn slots(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    /// Draws the rate of drone `l` in slot `b` from a caller-owned generator.
    pub fn sample_with<R: Rng + ?Sized>(&self, l: usize, b: usize, rng: &mut R) -> f64 {
        let m = self.mean[l][b];
        match self.uncertainty {
            Uncertainty::None => m,
            Uncertainty::Gamma { shape, scale } => {
                let g = Gamma::new(shape, scale).expect("validated gamma parameters");
                m / (shape * scale) * g.sample(rng)
            }
            Uncertainty::TwoPoint { x } => {
                if rng.gen_bool(0.5) {
                    (1.0 + x) * m
                } else {
                    (1.0 - x) * m
                }
            }
        }
    }

    /// Deterministic draw for `(l, b)` on its own sub-stream of `seed`.
    pub fn sample(&self, l: usize, b: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((l as u64) << 32) | b as u64);
        self.sample_with(l, b, &mut rng)
    }

    /// Full `[drone][slot]` realization for `seed`.
    pub fn realization(&self, seed: u64) -> Vec<Vec<f64>> {
        (0..self.drones())
            .map(|l| (0..self.slots()).map(|b| self.sample(l, b, seed)).collect())
            .collect()
    }

    /// Per-cell discrete levels (relative to the mean) with their probabilities.
    fn unit_levels(&self, levels: usize) -> Result<Vec<(f64, f64)>, ReError> {
        if levels == 0 {
            return Err(ReError::Invalid("need at least one discretization level".into()));
        }
        if levels == 1 {
            return Ok(vec![(1.0, 1.0)]);
        }
        match self.uncertainty {
            Uncertainty::None => Ok(vec![(1.0, 1.0)]),
            Uncertainty::TwoPoint { x } => {
                if levels != 2 {
                    return Err(ReError::Invalid("two-point uncertainty discretizes to 2 levels".into()));
                }
                Ok(vec![(1.0 - x, 0.5), (1.0 + x, 0.5)])
            }
            Uncertainty::Gamma { shape, scale } => {
                // Equiprobable bins represented by their conditional means, so the
                // tree keeps the mean exactly.
                let base = GammaDist::new(shape, 1.0 / scale).map_err(|e| ReError::Invalid(e.to_string()))?;
                let upper = GammaDist::new(shape + 1.0, 1.0 / scale).map_err(|e| ReError::Invalid(e.to_string()))?;
                let n = levels as f64;
                let mean = shape * scale;
                let edges: Vec<f64> = (0..=levels)
                    .map(|k| match k {
                        0 => 0.0,
                        k if k == levels => f64::INFINITY,
                        k => base.inverse_cdf(k as f64 / n),
                    })
                    .collect();
                let cdf = |x: f64| if x.is_infinite() { 1.0 } else { upper.cdf(x) };
                Ok(edges
                    .windows(2)
                    .map(|w| (mean * (cdf(w[1]) - cdf(w[0])) * n / mean, 1.0 / n))
                    .collect())
            }
        }
    }

    /// Product scenario tree with `levels` values per (drone, slot) cell.
    pub fn discretize(&self, levels: usize, cap: usize) -> Result<ScenarioTree, ReError> {
        let unit = self.unit_levels(levels)?;
        let w = unit.len();
        let cells = self.drones() * self.slots();
        let size = (w as f64).powi(cells as i32);
        if size > cap as f64 {
            return Err(ReError::TreeTooLarge { size, cap });
        }
        let total = size as usize;
        let slots = self.slots();
        let mut realizations = Vec::with_capacity(total);
        for idx in 0..total {
            let mut phi = self.mean.clone();
            let mut prob = 1.0;
            let mut rest = idx;
            for c in 0..cells {
                let (factor, p) = unit[rest % w];
                rest /= w;
                let (l, b) = (c / slots, c % slots);
                phi[l][b] *= factor;
                prob *= p;
            }
            realizations.push(Realization { phi, prob });
        }
        Ok(ScenarioTree { realizations, sampled: false })
    }

    /// Sample-average approximation: `n` i.i.d. realizations with weight `1/n`.
    pub fn sampled_tree(&self, n: usize, seed: u64) -> ScenarioTree {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let realizations = (0..n.max(1))
            .map(|_| {
                let phi = (0..self.drones())
                    .map(|l| (0..self.slots()).map(|b| self.sample_with(l, b, &mut rng)).collect())
                    .collect();
                Realization { phi, prob: 1.0 / n.max(1) as f64 }
            })
            .collect();
        ScenarioTree { realizations, sampled: true }
    }

    /// Full tree when it fits under `cap`, otherwise a sampled tree of `fallback` scenarios.
    pub fn tree_or_sampled(&self, levels: usize, cap: usize, fallback: usize, seed: u64) -> Result<ScenarioTree, ReError> {
        match self.discretize(levels, cap) {
            Err(ReError::TreeTooLarge { .. }) => Ok(self.sampled_tree(fallback, seed)),
            other => other,
        }
    }
}
