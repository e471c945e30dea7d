//! Parameter sweeps: cartesian grids of configurations, each run for `R`
//! seeded realizations and reduced to mean and standard error.
//!
//! Cells are enumerated with `alpha` varying fastest, then `mu`, `beta`,
//! forgetting strategy, `epsilon` and recommendation mode. Realization `r`
//! of cell `c` is seeded with [`derive_seed`]`(base_seed, c, r)`, so a cell's
//! first `R` seeds do not depend on how many realizations are requested.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::run_realization;
use crate::error::{ConfigError, IoError};
use crate::metrics::{format_opt, RealizationResult};
use crate::model::{ForgetCutoff, ForgettingStrategy, PayoffMatrix, RecommendationMode, SimConfig};

/// Grid definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub mus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<u32>,
    pub strategies: Vec<ForgettingStrategy>,
    pub epsilons: Vec<f64>,
    pub modes: Vec<RecommendationMode>,
    pub realizations: u32,
    pub base_seed: u64,
    /// Applied to every cell.
    pub forget_cutoff: ForgetCutoff,
    pub n: usize,
    pub tau: u32,
    pub payoffs: PayoffMatrix,
}

/// `k / 10` for `k` in `range`, exact to the nearest double.
fn tenths(range: std::ops::RangeInclusive<u32>) -> Vec<f64> {
    range.map(|k| k as f64 / 10.0).collect()
}

impl Default for SweepSpec {
    /// μ ∈ {0.1..0.9} × α ∈ {0.0..0.9} × β ∈ {1,2,3} × {FC, FR, FD} at
    /// ε = 0.1, pooled recommendations, 30 realizations per cell.
    fn default() -> Self {
        Self {
            mus: tenths(1..=9),
            alphas: tenths(0..=9),
            betas: vec![1, 2, 3],
            strategies: ForgettingStrategy::ALL.to_vec(),
            epsilons: vec![0.1],
            modes: vec![RecommendationMode::Pooled],
            realizations: 30,
            base_seed: 0,
            forget_cutoff: ForgetCutoff::Neutral,
            n: 100,
            tau: 30,
            payoffs: PayoffMatrix::standard(),
        }
    }
}

/// Parameter values of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub n: usize,
    pub tau: u32,
    pub epsilon: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: u32,
    pub forgetting: ForgettingStrategy,
    pub mode: RecommendationMode,
}

impl CellParams {
    pub fn config(
        &self,
        payoffs: PayoffMatrix,
        forget_cutoff: ForgetCutoff,
        seed: u64,
    ) -> SimConfig {
        SimConfig {
            forget_cutoff,
            n: self.n,
            epsilon: self.epsilon,
            mu: self.mu,
            alpha: self.alpha,
            beta: self.beta,
            forgetting: self.forgetting,
            tau: self.tau,
            payoffs,
            recommendation_mode: self.mode,
            seed,
        }
    }
}

impl SweepSpec {
    pub fn cell_count(&self) -> usize {
        self.mus.len()
            * self.alphas.len()
            * self.betas.len()
            * self.strategies.len()
            * self.epsilons.len()
            * self.modes.len()
    }

    /// Cells in index order.
    pub fn cells(&self) -> Vec<CellParams> {
        let mut cells = Vec::with_capacity(self.cell_count());
        for &mode in &self.modes {
            for &epsilon in &self.epsilons {
                for &forgetting in &self.strategies {
                    for &beta in &self.betas {
                        for &mu in &self.mus {
                            for &alpha in &self.alphas {
                                cells.push(CellParams {
                                    n: self.n,
                                    tau: self.tau,
                                    epsilon,
                                    mu,
                                    alpha,
                                    beta,
                                    forgetting,
                                    mode,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Every list non-empty, `R >= 1`, every cell a valid configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let lists = [
            ("mus", self.mus.len()),
            ("alphas", self.alphas.len()),
            ("betas", self.betas.len()),
            ("strategies", self.strategies.len()),
            ("epsilons", self.epsilons.len()),
            ("modes", self.modes.len()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, len)| *len == 0) {
            return Err(ConfigError::Sweep(format!("{name} is empty")));
        }
        if self.realizations < 1 {
            return Err(ConfigError::out_of_range(
                "realizations",
                self.realizations,
                "realizations >= 1",
            ));
        }
        for cell in self.cells() {
            cell.config(self.payoffs, self.forget_cutoff, 0)
                .validate()?;
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `replicate` in cell `cell`:
/// `splitmix64(splitmix64(splitmix64(base) ^ cell) ^ replicate)`.
pub fn derive_seed(base_seed: u64, cell: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ cell) ^ replicate)
}

/// Mean and standard error of one metric across a cell's realizations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
}

impl Stat {
    /// Missing values are skipped. Standard error is the sample standard
    /// deviation over `sqrt(n)`, zero for a single value.
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        let n = xs.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Stat {
            mean: Some(mean),
            stderr: Some(stderr),
        }
    }
}

/// Metrics aggregated per cell, in CSV column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Phi,
    EtaCd,
    EtaDc,
    TC,
    TD,
    ActualCooperators,
    ActualDefectors,
    PerceivedCooperators,
    PerceivedDefectors,
    Undefined,
    PayoffCooperators,
    PayoffDefectors,
    PayoffAll,
    PayoffPerGame,
    GamesPlayed,
}

impl Metric {
    pub const ALL: [Metric; 15] = [
        Metric::Phi,
        Metric::EtaCd,
        Metric::EtaDc,
        Metric::TC,
        Metric::TD,
        Metric::ActualCooperators,
        Metric::ActualDefectors,
        Metric::PerceivedCooperators,
        Metric::PerceivedDefectors,
        Metric::Undefined,
        Metric::PayoffCooperators,
        Metric::PayoffDefectors,
        Metric::PayoffAll,
        Metric::PayoffPerGame,
        Metric::GamesPlayed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Phi => "phi",
            Metric::EtaCd => "eta_cd",
            Metric::EtaDc => "eta_dc",
            Metric::TC => "t_c",
            Metric::TD => "t_d",
            Metric::ActualCooperators => "actual_cooperators",
            Metric::ActualDefectors => "actual_defectors",
            Metric::PerceivedCooperators => "perceived_cooperators",
            Metric::PerceivedDefectors => "perceived_defectors",
            Metric::Undefined => "undefined",
            Metric::PayoffCooperators => "payoff_cooperators",
            Metric::PayoffDefectors => "payoff_defectors",
            Metric::PayoffAll => "payoff_all",
            Metric::PayoffPerGame => "payoff_per_game",
            Metric::GamesPlayed => "games_played",
        }
    }

    pub fn extract(self, r: &RealizationResult) -> Option<f64> {
        match self {
            Metric::Phi => r.phi,
            Metric::EtaCd => Some(r.eta_cd as f64),
            Metric::EtaDc => Some(r.eta_dc as f64),
            Metric::TC => Some(r.t_c),
            Metric::TD => Some(r.t_d),
            Metric::ActualCooperators => Some(r.census.actual_cooperators),
            Metric::ActualDefectors => Some(r.census.actual_defectors),
            Metric::PerceivedCooperators => Some(r.census.perceived_cooperators),
            Metric::PerceivedDefectors => Some(r.census.perceived_defectors),
            Metric::Undefined => Some(r.census.undefined),
            Metric::PayoffCooperators => r.mean_payoff_cooperators,
            Metric::PayoffDefectors => r.mean_payoff_defectors,
            Metric::PayoffAll => Some(r.mean_payoff_all),
            Metric::PayoffPerGame => r.payoff_per_game,
            Metric::GamesPlayed => Some(r.games_played as f64),
        }
    }
}

/// One aggregated cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub params: CellParams,
    /// Indexed like [`Metric::ALL`].
    pub stats: [Stat; Metric::ALL.len()],
    pub realizations: u32,
    /// Realizations whose payoff ratio was undefined.
    pub phi_excluded: u32,
}

impl ResultRow {
    pub fn aggregate(params: CellParams, results: &[RealizationResult]) -> Self {
        let stats = Metric::ALL.map(|m| Stat::from_values(results.iter().map(|r| m.extract(r))));
        Self {
            params,
            stats,
            realizations: results.len() as u32,
            phi_excluded: results.iter().filter(|r| r.phi.is_none()).count() as u32,
        }
    }

    pub fn stat(&self, metric: Metric) -> Stat {
        let idx = Metric::ALL.iter().position(|m| *m == metric).unwrap();
        self.stats[idx]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// First row whose parameters satisfy `pred`.
    pub fn find(&self, pred: impl Fn(&CellParams) -> bool) -> Option<&ResultRow> {
        self.rows.iter().find(|r| pred(&r.params))
    }
}

/// Runs every cell with the global rayon pool. `on_cell` is called once per
/// finished cell, in completion order.
pub fn run_sweep<F>(spec: &SweepSpec, on_cell: F) -> Result<ResultTable, ConfigError>
where
    F: Fn(usize, &ResultRow) + Sync,
{
    spec.validate()?;
    let cells = spec.cells();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(index, params)| {
            let results: Vec<RealizationResult> = (0..spec.realizations)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(spec.base_seed, index as u64, r as u64);
                    run_realization(&params.config(spec.payoffs, spec.forget_cutoff, seed))
                        .expect("cell configuration validated")
                })
                .collect();
            let row = ResultRow::aggregate(*params, &results);
            on_cell(index, &row);
            row
        })
        .collect();
    Ok(ResultTable { rows })
}

/// Runs a sweep on a dedicated pool of `jobs` threads.
pub fn run_sweep_with_jobs<F>(
    spec: &SweepSpec,
    jobs: usize,
    on_cell: F,
) -> Result<ResultTable, ConfigError>
where
    F: Fn(usize, &ResultRow) + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| run_sweep(spec, on_cell))
}

/// Column names of the result CSV.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = [
        "n", "tau", "epsilon", "mu", "alpha", "beta", "forget", "mode",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in Metric::ALL {
        cols.push(format!("{}_mean", m.name()));
        cols.push(format!("{}_stderr", m.name()));
    }
    cols.push("realizations".into());
    cols.push("phi_excluded".into());
    cols
}

fn row_record(row: &ResultRow) -> Vec<String> {
    let p = &row.params;
    let mut rec = vec![
        p.n.to_string(),
        p.tau.to_string(),
        format!("{:.6}", p.epsilon),
        format!("{:.6}", p.mu),
        format!("{:.6}", p.alpha),
        p.beta.to_string(),
        p.forgetting.code().to_string(),
        p.mode.code().to_string(),
    ];
    for s in &row.stats {
        rec.push(format_opt(s.mean));
        rec.push(format_opt(s.stderr));
    }
    rec.push(row.realizations.to_string());
    rec.push(row.phi_excluded.to_string());
    rec
}

/// Sidecar metadata written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub base_seed: u64,
    pub seed_derivation: String,
    pub cell_order: String,
    pub columns: Vec<String>,
    pub spec: SweepSpec,
}

impl Manifest {
    pub fn new(spec: &SweepSpec) -> Self {
        Self {
            version: concat!("dilemma-core ", env!("CARGO_PKG_VERSION")).to_string(),
            base_seed: spec.base_seed,
            seed_derivation:
                "splitmix64(splitmix64(splitmix64(base_seed) ^ cell_index) ^ replicate)".into(),
            cell_order: "mode > epsilon > forget > beta > mu > alpha (alpha fastest)".into(),
            columns: csv_header(),
            spec: spec.clone(),
        }
    }
}

/// Writes `path` through a temporary sibling, removing it on failure.
fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), IoError>,
) -> Result<(), IoError> {
    let io_err = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let file = File::create(&tmp).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        body(&mut out)?;
        out.flush().map_err(io_err)?;
        fs::rename(&tmp, path).map_err(io_err)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Writes the result CSV to `csv_path` and the JSON manifest to
/// `manifest_path`.
pub fn write_results(
    table: &ResultTable,
    spec: &SweepSpec,
    csv_path: &Path,
    manifest_path: &Path,
) -> Result<(), IoError> {
    write_atomically(csv_path, |out| {
        let csv_err = |source| IoError::Csv {
            path: csv_path.to_path_buf(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(csv_header()).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row_record(row)).map_err(csv_err)?;
        }
        w.flush().map_err(|source| IoError::Io {
            path: csv_path.to_path_buf(),
            source,
        })
    })?;
    let manifest = Manifest::new(spec);
    let result = write_atomically(manifest_path, |out| {
        serde_json::to_writer_pretty(&mut *out, &manifest).map_err(|source| IoError::Json {
            path: manifest_path.to_path_buf(),
            source,
        })?;
        writeln!(out).map_err(|source| IoError::Io {
            path: manifest_path.to_path_buf(),
            source,
        })
    });
    if result.is_err() {
        let _ = fs::remove_file(csv_path);
    }
    result
}

/// Reads a CSV written by [`write_results`].
pub fn read_results(path: &Path) -> Result<ResultTable, IoError> {
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header != csv_header() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected column header".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = idx + 2;
        let bad = |message: String| IoError::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64, IoError> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("column {} is not a number", csv_header()[i])))
        };
        let int = |i: usize| -> Result<u64, IoError> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("column {} is not an integer", csv_header()[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, IoError> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let params = CellParams {
            n: int(0)? as usize,
            tau: int(1)? as u32,
            epsilon: num(2)?,
            mu: num(3)?,
            alpha: num(4)?,
            beta: int(5)? as u32,
            forgetting: field(6).parse().map_err(|e| bad(format!("{e}")))?,
            mode: field(7).parse().map_err(|e| bad(format!("{e}")))?,
        };
        let mut stats = [Stat::default(); Metric::ALL.len()];
        for (k, stat) in stats.iter_mut().enumerate() {
            *stat = Stat {
                mean: opt(8 + 2 * k)?,
                stderr: opt(9 + 2 * k)?,
            };
        }
        let tail = 8 + 2 * Metric::ALL.len();
        rows.push(ResultRow {
            params,
            stats,
            realizations: int(tail)? as u32,
            phi_excluded: int(tail + 1)? as u32,
        });
    }
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_size() {
        assert_eq!(SweepSpec::default().cell_count(), 9 * 10 * 3 * 3);
        assert_eq!(SweepSpec::default().cells().len(), 810);
        assert_eq!(SweepSpec::default().alphas[3], 0.3);
    }

    #[test]
    fn cell_order_alpha_fastest() {
        let spec = SweepSpec {
            mus: vec![0.2, 0.4],
            alphas: vec![0.1, 0.3],
            betas: vec![1],
            strategies: vec![ForgettingStrategy::ForgetRandom],
            ..SweepSpec::default()
        };
        let cells = spec.cells();
        let pairs: Vec<_> = cells.iter().map(|c| (c.mu, c.alpha)).collect();
        assert_eq!(pairs, vec![(0.2, 0.1), (0.2, 0.3), (0.4, 0.1), (0.4, 0.3)]);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(1, 0, 0);
        assert_eq!(a, derive_seed(1, 0, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        // reference value of the SplitMix64 finalizer
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn stat_reduction() {
        let s = Stat::from_values([Some(2.0)]);
        assert_eq!(
            s,
            Stat {
                mean: Some(2.0),
                stderr: Some(0.0)
            }
        );
        let s = Stat::from_values([Some(1.0), None, Some(3.0)]);
        assert_eq!(s.mean, Some(2.0));
        // sample sd = sqrt(2), stderr = sqrt(2)/sqrt(2) = 1
        assert!((s.stderr.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(Stat::from_values([None, None]), Stat::default());
    }

    #[test]
    fn empty_lists_rejected() {
        let spec = SweepSpec {
            betas: vec![],
            ..SweepSpec::default()
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            realizations: 0,
            ..SweepSpec::default()
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            alphas: vec![1.0],
            ..SweepSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
