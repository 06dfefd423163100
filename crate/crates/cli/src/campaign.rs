//! Monte-Carlo campaigns over domains, patterns, drifts and estimators.
//!
//! Every replicate draws from its own generators, seeded from the master
//! seed and the replicate's coordinates in the grid, so results do not depend
//! on the number of workers or on which other cells are run.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;
use rayon::prelude::*;
use sbss_core::{apply_drift, mdi_of, mix, sample_locations, simulate_latent, DomainSpec, Pattern, WeightCache};

use crate::config::{CampaignConfig, Mixing};
use crate::error::{CliError, Result};
use crate::stats;

/// One estimator applied to one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub domain: f64,
    pub pattern: Pattern,
    pub drift: String,
    pub estimator: String,
    pub replicate: usize,
    pub mdi: Option<f64>,
    pub seconds: Option<f64>,
    pub error: Option<String>,
}

/// Aggregate of one (domain, pattern, drift, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub domain: f64,
    pub pattern: Pattern,
    pub drift: String,
    pub estimator: String,
    pub replicates: usize,
    pub failures: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    /// Total estimator time over the replicates, when timing is recorded.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub rows: Vec<ReplicateRow>,
    pub cells: Vec<CellSummary>,
}

impl CampaignResult {
    /// MDI per replicate of one cell, in replicate order.
    pub fn mdi_values(&self, domain: f64, pattern: Pattern, drift: &str, estimator: &str) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.domain == domain && r.pattern == pattern && r.drift == drift && r.estimator == estimator)
            .map(|r| r.mdi)
            .collect()
    }

    pub fn cell(&self, domain: f64, pattern: Pattern, drift: &str, estimator: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.domain == domain && c.pattern == pattern && c.drift == drift && c.estimator == estimator)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.mdi.is_none()).count()
    }
}

/// Stages of a replicate that draw random numbers.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Locations,
    Latent,
    Mixing,
    Drift(usize),
}

impl Stream {
    fn code(self) -> u64 {
        match self {
            Stream::Locations => 1,
            Stream::Latent => 2,
            Stream::Mixing => 3,
            Stream::Drift(k) => 16 + k as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the generator of one stage of one replicate.
pub fn stream_seed(master: u64, side: f64, pattern: Pattern, replicate: usize, stage: u64) -> u64 {
    let pattern_code = match pattern {
        Pattern::Uniform => 1,
        Pattern::Skew => 2,
    };
    [side.to_bits(), pattern_code, replicate as u64, stage]
        .into_iter()
        .fold(splitmix64(master), |h, part| splitmix64(h ^ splitmix64(part)))
}

fn rng_for(cfg: &CampaignConfig, side: f64, pattern: Pattern, replicate: usize, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(cfg.master_seed, side, pattern, replicate, stream.code()))
}

/// Standard normal mixing matrix with condition number below 100.
fn random_mixing(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sv = a.singular_values();
        if sv.max() < 100.0 * sv.min() {
            return a;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    side: f64,
    pattern: Pattern,
    replicate: usize,
}

fn run_unit(cfg: &CampaignConfig, unit: Unit) -> Vec<ReplicateRow> {
    let Unit { side, pattern, replicate } = unit;
    let row = |drift: &str, estimator: &str| ReplicateRow {
        domain: side,
        pattern,
        drift: drift.to_string(),
        estimator: estimator.to_string(),
        replicate,
        mdi: None,
        seconds: None,
        error: None,
    };
    let mut rows = Vec::with_capacity(cfg.drift.len() * cfg.estimators.len());
    let setup = (|| -> Result<_> {
        let spec = DomainSpec::new(side, pattern)?;
        let locs = sample_locations(&spec, &mut rng_for(cfg, side, pattern, replicate, Stream::Locations))?;
        let latent = simulate_latent(&locs, &cfg.cov_models, &mut rng_for(cfg, side, pattern, replicate, Stream::Latent))?;
        let p = latent.ncols();
        let a = match cfg.mixing {
            Mixing::Identity => DMatrix::identity(p, p),
            Mixing::Random => random_mixing(&mut rng_for(cfg, side, pattern, replicate, Stream::Mixing), p),
        };
        let mixed = mix(&latent, &a)?;
        Ok((locs, mixed, a))
    })();
    let (locs, mixed, a) = match setup {
        Ok(v) => v,
        Err(e) => {
            let reason = format!("simulation failed: {e}");
            for d in &cfg.drift {
                for est in &cfg.estimators {
                    rows.push(ReplicateRow { error: Some(reason.clone()), ..row(&d.label(), &est.label) });
                }
            }
            return rows;
        }
    };
    let mut cache = WeightCache::new();
    for (k, d) in cfg.drift.iter().enumerate() {
        let label = d.label();
        let sample = d.model().map_err(|e| e.to_string()).and_then(|model| {
            let mut rng = rng_for(cfg, side, pattern, replicate, Stream::Drift(k));
            apply_drift(&mixed, &locs, &model, side, &mut rng).map(|(s, _)| s).map_err(|e| e.to_string())
        });
        for est in &cfg.estimators {
            let mut r = row(&label, &est.label);
            match &sample {
                Err(e) => r.error = Some(format!("drift failed: {e}")),
                Ok(sample) => {
                    let start = Instant::now();
                    let fitted = est.estimator().map_err(|e| e.to_string()).and_then(|e| {
                        let res = e.fit(sample, &mut cache).map_err(|e| e.to_string())?;
                        mdi_of(&res.w, &a).map_err(|e| e.to_string())
                    });
                    if cfg.record_timing {
                        r.seconds = Some(start.elapsed().as_secs_f64());
                    }
                    match fitted {
                        Ok(m) => r.mdi = Some(m),
                        Err(e) => r.error = Some(e),
                    }
                }
            }
            rows.push(r);
        }
    }
    rows
}

/// Runs the whole grid on `jobs` worker threads.
pub fn run_campaign(cfg: &CampaignConfig, jobs: usize) -> Result<CampaignResult> {
    cfg.validate()?;
    let mut units = Vec::new();
    for &pattern in &cfg.pattern {
        for &side in &cfg.domains {
            for replicate in 0..cfg.replicates {
                units.push(Unit { side, pattern, replicate });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    // `collect` on an indexed parallel iterator keeps the input order
    let per_unit: Vec<Vec<ReplicateRow>> = pool.install(|| units.par_iter().map(|&u| run_unit(cfg, u)).collect());

    // order rows by (pattern, domain, drift, estimator, replicate)
    let drift_pos = |label: &str| cfg.drift.iter().position(|d| d.label() == label).unwrap_or(usize::MAX);
    let est_pos = |label: &str| cfg.estimators.iter().position(|e| e.label == label).unwrap_or(usize::MAX);
    let mut rows: Vec<ReplicateRow> = per_unit.into_iter().flatten().collect();
    let pat_pos = |p: Pattern| cfg.pattern.iter().position(|&q| q == p).unwrap_or(usize::MAX);
    let dom_pos = |s: f64| cfg.domains.iter().position(|&d| d == s).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (pat_pos(r.pattern), dom_pos(r.domain), drift_pos(&r.drift), est_pos(&r.estimator), r.replicate));

    let cells = rows
        .chunk_by(|a, b| a.pattern == b.pattern && a.domain == b.domain && a.drift == b.drift && a.estimator == b.estimator)
        .map(summarize)
        .collect();
    Ok(CampaignResult { rows, cells })
}

fn summarize(rows: &[ReplicateRow]) -> CellSummary {
    let first = &rows[0];
    let values: Vec<f64> = rows.iter().filter_map(|r| r.mdi).collect();
    let (mean, sd, se) = stats::mean_sd_se(&values);
    let seconds = if rows.iter().all(|r| r.seconds.is_some()) {
        Some(rows.iter().filter_map(|r| r.seconds).sum())
    } else {
        None
    };
    CellSummary {
        domain: first.domain,
        pattern: first.pattern,
        drift: first.drift.clone(),
        estimator: first.estimator.clone(),
        replicates: rows.len(),
        failures: rows.len() - values.len(),
        mean,
        sd,
        se,
        seconds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EstimatorConfig;
    use sbss_core::{CovModel, Method};

    fn small_config() -> CampaignConfig {
        let mut cfg = CampaignConfig::load(None, Some(crate::config::Preset::Desk)).unwrap();
        cfg.domains = vec![6.0, 8.0];
        cfg.replicates = 3;
        cfg
    }

    #[test]
    fn stream_seeds_differ_by_every_coordinate() {
        let base = stream_seed(1, 10.0, Pattern::Uniform, 0, 1);
        assert_ne!(base, stream_seed(2, 10.0, Pattern::Uniform, 0, 1));
        assert_ne!(base, stream_seed(1, 20.0, Pattern::Uniform, 0, 1));
        assert_ne!(base, stream_seed(1, 10.0, Pattern::Skew, 0, 1));
        assert_ne!(base, stream_seed(1, 10.0, Pattern::Uniform, 1, 1));
        assert_ne!(base, stream_seed(1, 10.0, Pattern::Uniform, 0, 2));
        assert_eq!(base, stream_seed(1, 10.0, Pattern::Uniform, 0, 1));
    }

    #[test]
    fn grid_shape_and_order() {
        let cfg = small_config();
        let res = run_campaign(&cfg, 1).unwrap();
        assert_eq!(res.rows.len(), 2 * 4 * 5 * 3);
        assert_eq!(res.cells.len(), 2 * 4 * 5);
        assert_eq!(res.rows[0].domain, 6.0);
        assert_eq!(res.rows[0].drift, "1");
        assert_eq!(res.rows[0].estimator, "LCov Ball");
        assert_eq!((res.rows[1].replicate, res.rows[3].estimator.as_str()), (1, "LCov Ring"));
        for c in &res.cells {
            assert_eq!(c.replicates, 3);
            assert!(c.failures > 0 || (0.0..=1.0).contains(&c.mean));
        }
        assert!(res.rows.iter().all(|r| r.seconds.is_none()));
    }

    #[test]
    fn independent_of_worker_count_and_grid() {
        let cfg = small_config();
        let one = run_campaign(&cfg, 1).unwrap();
        let three = run_campaign(&cfg, 3).unwrap();
        assert_eq!(one, three);
        // a cell does not depend on which other domains are run
        let mut only = cfg.clone();
        only.domains = vec![8.0];
        let part = run_campaign(&only, 2).unwrap();
        for est in ["LCov Ball", "FOBI"] {
            assert_eq!(part.mdi_values(8.0, Pattern::Uniform, "3", est), one.mdi_values(8.0, Pattern::Uniform, "3", est));
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = small_config();
        // rings beyond the domain diagonal have no pairs
        cfg.estimators.push(EstimatorConfig::new("far", Method::LdiffSd, &["ring:50:60"]));
        let res = run_campaign(&cfg, 2).unwrap();
        let cell = res.cell(6.0, Pattern::Uniform, "1", "far").unwrap();
        assert_eq!(cell.failures, 3);
        assert!(cell.mean.is_nan());
        let row = res.rows.iter().find(|r| r.estimator == "far").unwrap();
        assert!(row.error.as_deref().unwrap().contains("empty support"));
        assert_eq!(res.cell(6.0, Pattern::Uniform, "1", "LDiff Ball").unwrap().failures, 0);
    }

    #[test]
    fn random_mixing_gives_same_mdi_without_drift() {
        // with a drift, A z + m is not an affine image of z + m
        let mut cfg = small_config();
        cfg.domains = vec![8.0];
        cfg.drift = vec![crate::config::DriftEntry::Numbered(1)];
        cfg.cov_models = CovModel::matern_triplet();
        let ident = run_campaign(&cfg, 1).unwrap();
        cfg.mixing = Mixing::Random;
        let mixed = run_campaign(&cfg, 1).unwrap();
        for (a, b) in ident.rows.iter().zip(&mixed.rows) {
            if a.estimator == "LCov Ring" {
                continue; // joint diagonalization converges to a tolerance, not exactly
            }
            let (x, y) = (a.mdi.unwrap(), b.mdi.unwrap());
            assert!((x - y).abs() < 1e-6, "{} {}: {x} vs {y}", a.estimator, a.drift);
        }
    }
}
