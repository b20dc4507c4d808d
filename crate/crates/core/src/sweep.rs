//! Parameter sweeps with independent replications.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::ConfigError;
use crate::metrics::{MetricsLedger, PointResults};
use crate::scenario::ScenarioConfig;
use crate::sim::{run, SimError};

/// Axis settings identifying a point, and its configuration.
pub type SweepPoint = (Vec<(String, String)>, ScenarioConfig);

/// A base scenario and the axes to vary over it. Points are the cartesian
/// product of the axes, first axis outermost.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub axes: Vec<(String, Vec<String>)>,
}

impl SweepSpec {
    pub fn single(base: ScenarioConfig) -> Self {
        SweepSpec {
            base,
            axes: Vec::new(),
        }
    }

    pub fn axis(mut self, key: &str, values: &[&str]) -> Self {
        self.axes.push((
            key.to_string(),
            values.iter().map(|v| v.to_string()).collect(),
        ));
        self
    }

    /// Every point's settings and validated configuration.
    pub fn points(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        let mut points = vec![(Vec::new(), self.base.clone())];
        for (key, values) in &self.axes {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for (params, cfg) in &points {
                for v in values {
                    let mut cfg = cfg.clone();
                    cfg.set(key, v)?;
                    let mut params = params.clone();
                    params.push((key.clone(), v.clone()));
                    next.push((params, cfg));
                }
            }
            points = next;
        }
        for (_, cfg) in &points {
            cfg.validate()?;
        }
        Ok(points)
    }
}

/// Runs every replication of every point. Replication `r` of a point uses
/// seed `cfg.seed + r`. `threads = 0` lets rayon pick; results do not
/// depend on the thread count.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<Vec<PointResults>, SimError> {
    run_sweep_with_progress(spec, threads, &|_, _| {})
}

/// [`run_sweep`] that calls `progress(done, total)` after each run.
pub fn run_sweep_with_progress(
    spec: &SweepSpec,
    threads: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<PointResults>, SimError> {
    let points = spec.points()?;
    let jobs: Vec<(usize, u32, ScenarioConfig)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, (_, cfg))| {
            (0..cfg.replications).map(move |r| {
                let mut c = cfg.clone();
                c.seed = cfg.seed + u64::from(r);
                (p, r, c)
            })
        })
        .collect();

    let total = jobs.len();
    let finished = AtomicUsize::new(0);
    let one = |(p, r, cfg): &(usize, u32, ScenarioConfig)| {
        let out = run(cfg)?;
        progress(finished.fetch_add(1, Ordering::Relaxed) + 1, total);
        Ok((*p, *r, cfg.seed, out.ledger))
    };
    let work = || -> Result<Vec<(usize, u32, u64, MetricsLedger)>, SimError> {
        jobs.par_iter().map(one).collect()
    };
    let mut done = if threads == 1 {
        jobs.iter().map(one).collect::<Result<Vec<_>, SimError>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(work)?
    };
    done.sort_by_key(|(p, r, _, _)| (*p, *r));

    let mut results: Vec<PointResults> = points
        .into_iter()
        .map(|(params, _)| PointResults {
            params,
            runs: Vec::new(),
        })
        .collect();
    for (p, r, seed, ledger) in done {
        results[p].runs.push((r, seed, ledger));
    }
    Ok(results)
}
