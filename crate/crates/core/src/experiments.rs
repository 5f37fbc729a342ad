//! Seeded, replicated experiment runners and their CSV/JSON outputs.
//!
//! Every replication draws from its own stream, so results are independent
//! of the worker count, and all rows are ordered by replication before they
//! are aggregated or written.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ajtai::{level_for, match_ajtai};
use crate::assignment::{improve_two_swap, solve_exact};
use crate::dyadic::{
    chain_vector, dyadic_chain, fit_ar_model, fit_mean_law, model_vs_data_wasserstein, simulate_ar, ARModel,
    DyadicRecord, MeanLawFit, MAX_LEVEL, MIN_AR_RECORDS,
};
use crate::error::{Error, Result};
use crate::geometry::{fmt17, marginal_quantile_transform, sample, Metric, QuantileDirection, SampleKind};
use crate::hazard::{fit_mle, pit_statistic, Cutpoints, HazardParams};
use crate::rng::{stream, Purpose};
use crate::stats;

pub mod price_map;

pub use price_map::{render_price_map, PriceMap, MIN_RESOLUTION};

/// Number of model-generated columns next to the data column of the
/// distribution-fit table.
pub const MODEL_COLUMNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "ajtai")]
    Ajtai,
    #[serde(rename = "ajtai+improve")]
    AjtaiImprove,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Ajtai => "ajtai",
            Algorithm::AjtaiImprove => "ajtai+improve",
        }
    }

    /// One-letter code used in correlation labels: H, A or B.
    pub fn code(&self) -> char {
        match self {
            Algorithm::Exact => 'H',
            Algorithm::Ajtai => 'A',
            Algorithm::AjtaiImprove => 'B',
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Algorithm::Exact),
            "ajtai" => Ok(Algorithm::Ajtai),
            "ajtai+improve" | "improved" => Ok(Algorithm::AjtaiImprove),
            other => Err(Error::InvalidInput(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub reps: usize,
    pub sizes: Vec<usize>,
    pub metric: Metric,
    pub algorithms: Vec<Algorithm>,
    pub sample_kinds: Vec<SampleKind>,
    pub out_dir: PathBuf,
    /// Deepest level of the dyadic experiments.
    pub k_max: usize,
    pub calibration_trials: usize,
    /// Price-map pixels per side.
    pub resolution: usize,
    /// Equal-width price buckets for the price-map pixel counts.
    pub buckets: usize,
    /// Factor applied to every σ in the shrunk model test.
    pub shrink: f64,
    /// Independent model-vs-model pairs in the model test.
    pub model_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            reps: 300,
            sizes: vec![1024],
            metric: Metric::EuclideanSquared,
            algorithms: vec![Algorithm::Exact, Algorithm::Ajtai, Algorithm::AjtaiImprove],
            sample_kinds: vec![SampleKind::UniformSquare],
            out_dir: PathBuf::from("out"),
            k_max: 10,
            calibration_trials: 5000,
            resolution: 512,
            buckets: 16,
            shrink: 0.975,
            model_repeats: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the fields every experiment relies on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad(format!("sizes must be a nonempty list of positive counts, got {:?}", self.sizes));
        }
        if self.k_max > MAX_LEVEL - 1 {
            return bad(format!("k_max must be at most {}, got {}", MAX_LEVEL - 1, self.k_max));
        }
        if self.buckets == 0 {
            return bad("buckets must be at least 1".into());
        }
        if self.resolution < MIN_RESOLUTION {
            return bad(format!("resolution must be at least {MIN_RESOLUTION}, got {}", self.resolution));
        }
        if !(self.shrink.is_finite() && self.shrink > 0.0) {
            return bad(format!("shrink must be positive, got {}", self.shrink));
        }
        if self.model_repeats < 2 {
            return bad("model_repeats must be at least 2".into());
        }
        Ok(())
    }

    /// Extra checks for [`run_matching_bench`].
    pub fn validate_bench(&self) -> Result<()> {
        self.validate()?;
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.algorithms.is_empty() || self.sample_kinds.is_empty() {
            return bad("bench needs at least one algorithm and one sample kind".into());
        }
        let median_bit = self.algorithms.iter().any(|a| *a != Algorithm::Exact);
        if median_bit {
            if let Some(n) = self.sizes.iter().find(|&&n| level_for(n).is_none()) {
                return bad(format!("ajtai needs sizes of the form 4^k, got {n}"));
            }
        }
        if self.metric == Metric::ToroidalSquared {
            if median_bit {
                return bad("ajtai matchings are defined for the plane metric only".into());
            }
            if self.sample_kinds.contains(&SampleKind::StandardNormalPlane) {
                return bad("normal samples cannot be used on the torus".into());
            }
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical JSON form, ignoring the output
    /// directory.
    pub fn config_hash(&self) -> String {
        let key = Self { out_dir: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_string(&key).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { version: version(), seed: self.seed, config_hash: self.config_hash() }
    }
}

/// Build version, `AKT_GIT_DESCRIBE` when set at compile time.
pub fn version() -> String {
    option_env!("AKT_GIT_DESCRIBE").map(str::to_string).unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    /// `#` comment lines written before every CSV header.
    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# version: {}", self.version)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# config: {}", self.config_hash)?;
        Ok(())
    }
}

fn csv_writer<W: Write>(mut w: W, prov: &Provenance) -> Result<csv::Writer<W>> {
    prov.write_header(&mut w)?;
    Ok(csv::Writer::from_writer(w))
}

fn opt17(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// matching bench

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub n: usize,
    pub kind: SampleKind,
    pub rep: u64,
    pub algorithm: Algorithm,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub n: usize,
    pub kind: SampleKind,
    pub algorithm: Algorithm,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    pub std_error: f64,
    pub skewness: f64,
}

/// Correlations across every (kind, algorithm) column at one size, computed
/// on shared samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCorrelation {
    pub n: usize,
    /// Kind letter (U or N) followed by the algorithm code, e.g. `UH`.
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl BenchCorrelation {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.matrix[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub samples: Vec<BenchSample>,
    pub summary: Vec<BenchSummary>,
    pub correlations: Vec<BenchCorrelation>,
}

fn kind_letter(kind: SampleKind) -> char {
    match kind {
        SampleKind::UniformSquare => 'U',
        SampleKind::StandardNormalPlane => 'N',
    }
}

fn bench_rep(cfg: &ExperimentConfig, size_idx: usize, n: usize, rep: u64) -> Result<Vec<BenchSample>> {
    let mut rng = stream(cfg.seed, Purpose::Sample, ((size_idx as u64) << 32) | rep);
    let left = sample(SampleKind::UniformSquare, n, &mut rng)?;
    let right = sample(SampleKind::UniformSquare, n, &mut rng)?;
    let mut out = Vec::new();
    for &kind in &cfg.sample_kinds {
        let (l, r) = match kind {
            SampleKind::UniformSquare => (left.with_metric(cfg.metric)?, right.with_metric(cfg.metric)?),
            SampleKind::StandardNormalPlane => (
                marginal_quantile_transform(&left, QuantileDirection::UniformToNormal)?,
                marginal_quantile_transform(&right, QuantileDirection::UniformToNormal)?,
            ),
        };
        let mut ajtai = None;
        for &algorithm in &cfg.algorithms {
            let cost = match algorithm {
                Algorithm::Exact => solve_exact(&l, &r)?.total_cost,
                Algorithm::Ajtai | Algorithm::AjtaiImprove => {
                    if ajtai.is_none() {
                        let k = level_for(n).expect("validated size");
                        ajtai = Some(match_ajtai(&l, &r, k)?);
                    }
                    let aj = ajtai.as_ref().expect("just set");
                    if algorithm == Algorithm::Ajtai {
                        aj.total_cost
                    } else {
                        improve_two_swap(&l, &r, &aj.matching)?.total_cost
                    }
                }
            };
            out.push(BenchSample { n, kind, rep, algorithm, cost });
        }
    }
    Ok(out)
}

/// Costs of every selected algorithm on shared samples. The normal variant
/// is the marginal quantile transform of the same uniforms.
pub fn run_matching_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate_bench()?;
    let mut samples = Vec::new();
    let mut summary = Vec::new();
    let mut correlations = Vec::new();
    for (size_idx, &n) in cfg.sizes.iter().enumerate() {
        let per_rep: Vec<Vec<BenchSample>> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| bench_rep(cfg, size_idx, n, rep))
            .collect::<Result<_>>()?;
        let mut labels = Vec::new();
        let mut columns = Vec::new();
        for &kind in &cfg.sample_kinds {
            for &algorithm in &cfg.algorithms {
                let col: Vec<f64> = per_rep
                    .iter()
                    .flat_map(|r| r.iter().filter(|s| s.kind == kind && s.algorithm == algorithm).map(|s| s.cost))
                    .collect();
                summary.push(BenchSummary {
                    n,
                    kind,
                    algorithm,
                    reps: col.len(),
                    mean: stats::mean(&col),
                    sd: stats::sd(&col),
                    std_error: stats::std_error(&col),
                    skewness: stats::skewness(&col),
                });
                labels.push(format!("{}{}", kind_letter(kind), algorithm.code()));
                columns.push(col);
            }
        }
        correlations.push(BenchCorrelation { n, labels, matrix: stats::correlation_matrix(&columns) });
        samples.extend(per_rep.into_iter().flatten());
    }
    Ok(BenchReport { samples, summary, correlations })
}

impl BenchReport {
    pub fn find(&self, n: usize, kind: SampleKind, algorithm: Algorithm) -> Option<&BenchSummary> {
        self.summary.iter().find(|s| s.n == n && s.kind == kind && s.algorithm == algorithm)
    }

    /// `n,kind,rep,algorithm,cost`
    pub fn write_samples_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<()> {
        let mut out = csv_writer(w, prov)?;
        out.write_record(["n", "kind", "rep", "algorithm", "cost"])?;
        for s in &self.samples {
            out.write_record([
                s.n.to_string(),
                s.kind.name().into(),
                s.rep.to_string(),
                s.algorithm.name().into(),
                fmt17(s.cost),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `n,kind,algorithm,reps,mean,sd,std_error,skewness`
    pub fn write_summary_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<()> {
        let mut out = csv_writer(w, prov)?;
        out.write_record(["n", "kind", "algorithm", "reps", "mean", "sd", "std_error", "skewness"])?;
        for s in &self.summary {
            out.write_record([
                s.n.to_string(),
                s.kind.name().into(),
                s.algorithm.name().into(),
                s.reps.to_string(),
                fmt17(s.mean),
                fmt17(s.sd),
                fmt17(s.std_error),
                fmt17(s.skewness),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Long format `n,row,col,correlation`.
    pub fn write_correlation_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<()> {
        let mut out = csv_writer(w, prov)?;
        out.write_record(["n", "row", "col", "correlation"])?;
        for c in &self.correlations {
            for (i, a) in c.labels.iter().enumerate() {
                for (j, b) in c.labels.iter().enumerate() {
                    out.write_record([c.n.to_string(), a.clone(), b.clone(), fmt17(c.matrix[i][j])])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// mean growth

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub metric: Metric,
    pub rows: Vec<GrowthRow>,
    pub fit: MeanLawFit,
}

/// Sizes 2⁰, 2¹, ..., 2^`max_exp`.
pub fn powers_of_two(max_exp: u32) -> Vec<usize> {
    (0..=max_exp).map(|e| 1usize << e).collect()
}

/// Mean exact cost per size under `cfg.metric`, then the log-law fit.
pub fn run_mean_growth(cfg: &ExperimentConfig) -> Result<GrowthReport> {
    cfg.validate()?;
    if let Some(n) = cfg.sizes.iter().find(|&&n| !n.is_power_of_two() || n > 1 << 11) {
        return Err(Error::InvalidInput(format!("mean growth uses powers of two up to 2048, got {n}")));
    }
    let mut rows = Vec::new();
    for (idx, &n) in cfg.sizes.iter().enumerate() {
        let costs: Vec<f64> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream(cfg.seed, Purpose::Growth, ((idx as u64) << 32) | rep);
                let l = sample(SampleKind::UniformSquare, n, &mut rng)?.with_metric(cfg.metric)?;
                let r = sample(SampleKind::UniformSquare, n, &mut rng)?.with_metric(cfg.metric)?;
                Ok(solve_exact(&l, &r)?.total_cost)
            })
            .collect::<Result<_>>()?;
        rows.push(GrowthRow {
            n,
            reps: costs.len(),
            mean: stats::mean(&costs),
            sd: stats::sd(&costs),
            std_error: stats::std_error(&costs),
        });
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean)).collect();
    let fit = fit_mean_law(&pairs)?;
    Ok(GrowthReport { metric: cfg.metric, rows, fit })
}

impl GrowthReport {
    /// `n,reps,mean,sd,std_error,fitted`
    pub fn write_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<()> {
        let mut out = csv_writer(w, prov)?;
        out.write_record(["n", "reps", "mean", "sd", "std_error", "fitted"])?;
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                r.reps.to_string(),
                fmt17(r.mean),
                fmt17(r.sd),
                fmt17(r.std_error),
                fmt17(self.fit.predict(r.n as f64)),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// dyadic data

/// Records of levels 0..=k_max for every replication, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicData {
    pub k_max: usize,
    pub metric: Metric,
    pub reps: Vec<Vec<DyadicRecord>>,
}

pub fn run_dyadic(cfg: &ExperimentConfig) -> Result<DyadicData> {
    cfg.validate()?;
    let reps = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| dyadic_chain(cfg.seed, rep, cfg.k_max, cfg.metric))
        .collect::<Result<_>>()?;
    Ok(DyadicData { k_max: cfg.k_max, metric: cfg.metric, reps })
}

impl DyadicData {
    /// All replications' records at level `k`.
    pub fn level(&self, k: usize) -> Vec<DyadicRecord> {
        self.reps.iter().filter_map(|r| r.get(k).copied()).collect()
    }

    /// Records at the given levels, pooled.
    pub fn levels(&self, ks: &[usize]) -> Vec<DyadicRecord> {
        ks.iter().flat_map(|&k| self.level(k)).collect()
    }

    /// One chain vector per replication.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.reps.iter().map(|r| chain_vector(r)).collect()
    }

    /// `rep,k,w1,...,w6,merged`
    pub fn write_csv<W: Write>(&self, mut w: W, prov: &Provenance) -> Result<()> {
        prov.write_header(&mut w)?;
        let flat: Vec<(u64, DyadicRecord)> =
            self.reps.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |rec| (i as u64, *rec))).collect();
        crate::dyadic::write_records_csv(w, &flat)
    }

    /// One AR model per level 0..=k_max.
    pub fn fit_models(&self) -> Result<Vec<ARModel>> {
        (0..=self.k_max).map(|k| fit_ar_model(&self.level(k))).collect()
    }
}

/// Writes chain vectors one per row: `rep,v1,...,vD`.
pub fn write_vectors_csv<W: Write>(w: W, vectors: &[Vec<f64>], prov: &Provenance) -> Result<()> {
    let mut out = csv_writer(w, prov)?;
    let dim = vectors.first().map_or(0, Vec::len);
    let mut head = vec!["rep".to_string()];
    head.extend((1..=dim).map(|i| format!("v{i}")));
    out.write_record(&head)?;
    for (i, v) in vectors.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(v.iter().map(|x| fmt17(*x)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn simulate_many(models: &[ARModel], seed: u64, set: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_ar(models, &mut stream(seed, Purpose::ModelSim, (set << 32) | i)))
        .collect()
}

// ---------------------------------------------------------------------------
// distribution fit

/// One row of the distribution-fit table. Row `k <= k_max` pools W1..W6 of
/// level `k`; row `k_max + 1` holds the merged cost of the last level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFitRow {
    pub k: usize,
    pub n_obs: usize,
    pub params: Option<HazardParams>,
    pub converged: bool,
    pub ks: Option<f64>,
    /// The same statistic on model-generated columns.
    pub model_ks: Vec<Option<f64>>,
    pub reject_05: Option<bool>,
    pub reject_01: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFitReport {
    pub rows: Vec<DistFitRow>,
    pub cutpoints: Option<Cutpoints>,
}

fn pooled_columns(vectors: &[Vec<f64>], k_max: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..=k_max)
        .map(|k| vectors.iter().flat_map(|v| v[6 * k..6 * k + 6].iter().copied()).collect())
        .collect();
    cols.push(vectors.iter().map(|v| v[6 * (k_max + 1)]).collect());
    cols
}

fn fit_ks(data: &[f64]) -> Result<(HazardParams, bool, f64)> {
    let fit = fit_mle(data)?;
    let pit = pit_statistic(data, fit.params)?;
    Ok((fit.params, fit.converged, pit.ks))
}

/// Fits the hazard family to each pooled level and records its PIT
/// Kolmogorov statistic. With at least 200 replications the same is done for
/// [`MODEL_COLUMNS`] samples from the fitted AR chain.
pub fn run_distribution_fit(data: &DyadicData, seed: u64, cutpoints: Option<Cutpoints>) -> Result<DistFitReport> {
    if data.reps.is_empty() {
        return Err(Error::EmptyInput("dyadic replications"));
    }
    let k_max = data.k_max;
    let data_cols = pooled_columns(&data.vectors(), k_max);
    let model_cols: Vec<Vec<Vec<f64>>> = if data.reps.len() >= MIN_AR_RECORDS {
        let models = data.fit_models()?;
        (0..MODEL_COLUMNS as u64)
            .map(|c| Ok(pooled_columns(&simulate_many(&models, seed, 1000 + c, data.reps.len())?, k_max)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let rows = data_cols
        .iter()
        .enumerate()
        .map(|(k, col)| {
            let model_ks = model_cols.iter().map(|m| fit_ks(&m[k]).ok().map(|r| r.2)).collect();
            match fit_ks(col) {
                Ok((params, converged, ks)) => DistFitRow {
                    k,
                    n_obs: col.len(),
                    params: Some(params),
                    converged,
                    ks: Some(ks),
                    model_ks,
                    reject_05: cutpoints.map(|c| ks > c.c05),
                    reject_01: cutpoints.map(|c| ks > c.c01),
                    error: None,
                },
                Err(e) => DistFitRow {
                    k,
                    n_obs: col.len(),
                    params: None,
                    converged: false,
                    ks: None,
                    model_ks,
                    reject_05: None,
                    reject_01: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(DistFitReport { rows, cutpoints })
}

impl DistFitReport {
    /// `k,n_obs,mu,sigma,lambda,converged,ks,r1..r5,reject_05,reject_01,error`
    pub fn write_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<()> {
        let mut out = csv_writer(w, prov)?;
        let mut head: Vec<String> =
            ["k", "n_obs", "mu", "sigma", "lambda", "converged", "ks"].iter().map(|s| s.to_string()).collect();
        head.extend((1..=MODEL_COLUMNS).map(|i| format!("r{i}")));
        head.extend(["reject_05", "reject_01", "error"].iter().map(|s| s.to_string()));
        out.write_record(&head)?;
        for r in &self.rows {
            let mut row = vec![
                r.k.to_string(),
                r.n_obs.to_string(),
                opt17(r.params.map(|p| p.mu)),
                opt17(r.params.map(|p| p.sigma)),
                opt17(r.params.map(|p| p.lambda)),
                r.converged.to_string(),
                opt17(r.ks),
            ];
            row.extend((0..MODEL_COLUMNS).map(|i| opt17(r.model_ks.get(i).copied().flatten())));
            row.push(r.reject_05.map(|b| b.to_string()).unwrap_or_default());
            row.push(r.reject_01.map(|b| b.to_string()).unwrap_or_default());
            row.push(r.error.clone().unwrap_or_default());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// full model test

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub factor: f64,
    pub data_vs_model: f64,
    pub model_vs_model: Vec<f64>,
    pub model_vs_model_mean: f64,
    pub model_vs_model_sd: f64,
    /// data_vs_model − model_vs_model_mean.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTestReport {
    pub reps: usize,
    pub dim: usize,
    pub models: Vec<ARModel>,
    pub unshrunk: ScaleResult,
    pub shrunk: ScaleResult,
}

fn scale_result(models: &[ARModel], data: &[Vec<f64>], seed: u64, factor: f64, repeats: usize) -> Result<ScaleResult> {
    let scaled: Vec<ARModel> = models.iter().map(|m| m.scaled(factor)).collect();
    let n = data.len();
    let first = simulate_many(&scaled, seed, 0, n)?;
    let data_vs_model = model_vs_data_wasserstein(&first, data)?;
    let model_vs_model = (0..repeats as u64)
        .map(|r| {
            let x = simulate_many(&scaled, seed, 2 * r + 1, n)?;
            let y = simulate_many(&scaled, seed, 2 * r + 2, n)?;
            model_vs_data_wasserstein(&x, &y)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = stats::mean(&model_vs_model);
    Ok(ScaleResult {
        factor,
        data_vs_model,
        model_vs_model_sd: stats::sd(&model_vs_model),
        model_vs_model_mean: mean,
        gap: data_vs_model - mean,
        model_vs_model,
    })
}

/// Fits one AR model per level, then compares data against model samples
/// and model samples against each other, at σ scale 1 and `cfg.shrink`.
/// Both scales reuse the same random streams.
pub fn run_full_model_test(data: &DyadicData, cfg: &ExperimentConfig) -> Result<ModelTestReport> {
    cfg.validate()?;
    if data.reps.len() < MIN_AR_RECORDS {
        return Err(Error::InvalidInput(format!(
            "model test needs at least {MIN_AR_RECORDS} replications, got {}",
            data.reps.len()
        )));
    }
    let models = data.fit_models()?;
    let vectors = data.vectors();
    let unshrunk = scale_result(&models, &vectors, cfg.seed, 1.0, cfg.model_repeats)?;
    let shrunk = scale_result(&models, &vectors, cfg.seed, cfg.shrink, cfg.model_repeats)?;
    Ok(ModelTestReport { reps: vectors.len(), dim: vectors[0].len(), models, unshrunk, shrunk })
}

impl ModelTestReport {
    /// `factor,kind,index,cost` with kind `data_vs_model` or `model_vs_model`.
    pub fn write_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<()> {
        let mut out = csv_writer(w, prov)?;
        out.write_record(["factor", "kind", "index", "cost"])?;
        for s in [&self.unshrunk, &self.shrunk] {
            out.write_record([fmt17(s.factor), "data_vs_model".into(), "0".into(), fmt17(s.data_vs_model)])?;
            for (i, c) in s.model_vs_model.iter().enumerate() {
                out.write_record([fmt17(s.factor), "model_vs_model".into(), i.to_string(), fmt17(*c)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
