//! Parallel path simulation.
//!
//! Paths are mutually independent by construction: path `i` consumes draws
//! `(seed, i, 0), (seed, i, 1), ...` from the counter-based streams in
//! [`crate::rng`], so its trajectory is a pure function of the plan. Work
//! is partitioned over paths and results are assembled in path-index
//! order, which makes ensembles bit-identical across runs and across
//! thread counts.
//!
//! A path whose state leaves f64 range is flagged and excluded from
//! downstream statistics; it is reported, never silently dropped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MarketModel, NoiseSpec};
use crate::strategy::{log_increment, Strategy};

/// Everything needed to reproduce an ensemble.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub model: MarketModel,
    pub strategy: Strategy,
    /// Number of periods simulated per path.
    pub horizon: u64,
    /// Number of independent paths.
    pub paths: usize,
    pub seed: u64,
    /// Times at which the running log-growth sum is recorded; strictly
    /// increasing, each in `[1, horizon]`.
    pub checkpoints: Vec<u64>,
    /// Also record the state at each checkpoint.
    pub record_states: bool,
}

impl SimulationPlan {
    /// Plan recording only the final time.
    pub fn to_horizon(
        model: MarketModel,
        strategy: Strategy,
        horizon: u64,
        paths: usize,
        seed: u64,
    ) -> Self {
        Self {
            model,
            strategy,
            horizon,
            paths,
            seed,
            checkpoints: vec![horizon],
            record_states: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidPlan("horizon must be at least 1".into()));
        }
        if self.paths == 0 {
            return Err(Error::InvalidPlan("need at least one path".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidPlan("need at least one checkpoint".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPlan("checkpoints must be strictly increasing".into()));
        }
        let last = *self.checkpoints.last().unwrap();
        if self.checkpoints[0] == 0 || last > self.horizon {
            return Err(Error::InvalidPlan(format!(
                "checkpoints must lie in [1, horizon]; got range [{}, {last}] with horizon {}",
                self.checkpoints[0], self.horizon
            )));
        }
        Ok(())
    }
}

/// Path that left f64 range, with the step where it happened and the last
/// finite state seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedPath {
    pub path: usize,
    pub step: u64,
    pub last_x: f64,
}

/// Simulated ensemble: per-checkpoint log-growth sums in path order.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    checkpoints: Vec<u64>,
    seed: u64,
    paths: usize,
    /// `s[c][i]`: sum of log increments of path `i` up to checkpoint `c`.
    /// NaN marks flagged paths from their failure step onward.
    s: Vec<Vec<f64>>,
    /// `x[c][i]` when states were recorded.
    x: Option<Vec<Vec<f64>>>,
    flagged: Vec<FlaggedPath>,
    clean_mask: Vec<bool>,
}

impl PathEnsemble {
    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    pub fn n_paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Log-growth sums at checkpoint index `c`, in path order.
    pub fn s_at(&self, c: usize) -> &[f64] {
        &self.s[c]
    }

    /// States at checkpoint index `c`, if recorded.
    pub fn x_at(&self, c: usize) -> Option<&[f64]> {
        self.x.as_ref().map(|m| m[c].as_slice())
    }

    /// Index of the last checkpoint (the ensemble's final time).
    pub fn final_checkpoint(&self) -> usize {
        self.checkpoints.len() - 1
    }

    pub fn flagged(&self) -> &[FlaggedPath] {
        &self.flagged
    }

    pub fn is_clean(&self, path: usize) -> bool {
        self.clean_mask[path]
    }

    pub fn n_clean(&self) -> usize {
        self.paths - self.flagged.len()
    }

    /// Values at checkpoint `c` restricted to clean paths, path order.
    pub fn clean_s_at(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.s[c]
            .iter()
            .zip(&self.clean_mask)
            .filter(|(_, clean)| **clean)
            .map(|(v, _)| *v)
    }

    /// Mean of `S_c / t_c` over clean paths.
    pub fn mean_growth_rate(&self, c: usize) -> f64 {
        let t = self.checkpoints[c] as f64;
        let mut sum = 0.0;
        let mut n = 0usize;
        for v in self.clean_s_at(c) {
            sum += v;
            n += 1;
        }
        sum / (n as f64) / t
    }
}

struct PathOut {
    s: Vec<f64>,
    x: Vec<f64>,
    flag: Option<(u64, f64)>,
}

fn run_path(plan: &SimulationPlan, i: usize) -> PathOut {
    let n_cp = plan.checkpoints.len();
    let mut out = PathOut {
        s: vec![f64::NAN; n_cp],
        x: if plan.record_states { vec![f64::NAN; n_cp] } else { Vec::new() },
        flag: None,
    };
    let mut x = plan.model.x0();
    let mut s = 0.0;
    let mut cp = 0usize;
    for t in 1..=plan.horizon {
        let pi = plan.strategy.allocate(&plan.model, x);
        let eps = plan.model.noise().draw(plan.seed, i as u64, t - 1);
        match plan.model.step(x, eps) {
            Ok(y) => {
                s += log_increment(pi, x, y);
                x = y;
            }
            Err(_) => {
                out.flag = Some((t, x));
                return out;
            }
        }
        if cp < n_cp && t == plan.checkpoints[cp] {
            if !s.is_finite() {
                out.flag = Some((t, x));
                return out;
            }
            out.s[cp] = s;
            if plan.record_states {
                out.x[cp] = x;
            }
            cp += 1;
        }
    }
    out
}

/// Simulate the plan into an ensemble.
///
/// Deterministic for a fixed plan: draws are indexed, not streamed, and
/// the per-path results are written back in path order.
pub fn simulate(plan: &SimulationPlan) -> Result<PathEnsemble> {
    plan.validate()?;
    let n_cp = plan.checkpoints.len();

    let results: Vec<PathOut> =
        (0..plan.paths).into_par_iter().map(|i| run_path(plan, i)).collect();

    let mut s = vec![vec![f64::NAN; plan.paths]; n_cp];
    let mut x = if plan.record_states {
        Some(vec![vec![f64::NAN; plan.paths]; n_cp])
    } else {
        None
    };
    let mut flagged = Vec::new();
    let mut clean_mask = vec![true; plan.paths];
    for (i, out) in results.into_iter().enumerate() {
        if let Some((step, last_x)) = out.flag {
            flagged.push(FlaggedPath { path: i, step, last_x });
            clean_mask[i] = false;
        }
        for c in 0..n_cp {
            s[c][i] = out.s.get(c).copied().unwrap_or(f64::NAN);
            if let Some(xm) = x.as_mut() {
                xm[c][i] = out.x.get(c).copied().unwrap_or(f64::NAN);
            }
        }
    }

    Ok(PathEnsemble {
        checkpoints: plan.checkpoints.clone(),
        seed: plan.seed,
        paths: plan.paths,
        s,
        x,
        flagged,
        clean_mask,
    })
}

/// View of one path's noise stream: draw `k` is a pure function of
/// `(seed, path, k)` and of nothing else.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream<'a> {
    noise: &'a NoiseSpec,
    seed: u64,
    path: u64,
}

impl<'a> NoiseStream<'a> {
    pub fn draw(&self, k: u64) -> f64 {
        self.noise.draw(self.seed, self.path, k)
    }

    /// The first `n` draws, in order.
    pub fn prefix(&self, n: u64) -> Vec<f64> {
        (0..n).map(|k| self.draw(k)).collect()
    }
}

/// Noise stream of path `path` under `seed` for this model's noise law.
pub fn stream_for_path(model: &MarketModel, seed: u64, path: u64) -> NoiseStream<'_> {
    NoiseStream { noise: model.noise(), seed, path }
}
