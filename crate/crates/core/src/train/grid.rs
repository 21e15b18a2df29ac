use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{derive_seed, train, RunHistory, TrainConfig};
use crate::autodiff::{ParameterSet, Real};
use crate::data::EncodedExample;
use crate::error::{Error, Result};
use crate::model::EntailModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lr: Vec<f64>,
    pub dropout: Vec<f64>,
    pub l2: Vec<f64>,
}

impl Grid {
    /// The default search: learning rate × dropout × ℓ2 strength, 36 points.
    pub fn standard() -> Self {
        Grid {
            lr: vec![1e-4, 3e-4, 1e-3],
            dropout: vec![0.0, 0.1, 0.2],
            l2: vec![0.0, 1e-4, 3e-4, 1e-3],
        }
    }

    pub fn single(lr: f64, dropout: f64, l2: f64) -> Self {
        Grid {
            lr: vec![lr],
            dropout: vec![dropout],
            l2: vec![l2],
        }
    }

    /// Every `(lr, dropout, l2)` combination, learning rate outermost.
    pub fn candidates(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.lr.len() * self.dropout.len() * self.l2.len());
        for &lr in &self.lr {
            for &dropout in &self.dropout {
                for &l2 in &self.l2 {
                    out.push((lr, dropout, l2));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub lr: f64,
    pub dropout: f64,
    pub l2: f64,
    pub seed: u64,
    pub best_dev_acc: f64,
    pub history: RunHistory,
}

/// Runs ranked by best dev accuracy; ties keep enumeration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub runs: Vec<GridRun>,
}

impl GridReport {
    pub fn best(&self) -> &GridRun {
        &self.runs[0]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lr,dropout,l2,best_dev_acc\n");
        for r in &self.runs {
            out.push_str(&format!("{},{},{},{}\n", r.lr, r.dropout, r.l2, r.best_dev_acc));
        }
        out
    }
}

/// Trains one model per grid point, each from its own seed, on a pool of `jobs`
/// threads. Returns the ranked report and the winning parameters.
pub fn grid_search<T: Real>(
    model: &EntailModel,
    train_set: &[EncodedExample],
    dev: &[EncodedExample],
    base: &TrainConfig,
    grid: &Grid,
    jobs: usize,
) -> Result<(GridReport, ParameterSet<T>)> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::Config("every grid axis needs at least one value".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut results: Vec<(GridRun, ParameterSet<T>)> = pool.install(|| {
        candidates
            .par_iter()
            .enumerate()
            .map(|(i, &(lr, dropout, l2))| {
                let seed = derive_seed(&[base.seed, i as u64]);
                let config = TrainConfig {
                    lr,
                    dropout,
                    l2,
                    seed,
                    ..base.clone()
                };
                let outcome = train(model, model.init_params(seed), train_set, dev, &config, |_| {})?;
                let run = GridRun {
                    lr,
                    dropout,
                    l2,
                    seed,
                    best_dev_acc: outcome.history.best_score(),
                    history: outcome.history,
                };
                Ok((run, outcome.best))
            })
            .collect::<Result<_>>()
    })?;
    results.sort_by(|a, b| b.0.best_dev_acc.total_cmp(&a.0.best_dev_acc));
    let best = results[0].1.clone();
    let runs = results.into_iter().map(|r| r.0).collect();
    Ok((GridReport { runs }, best))
}
