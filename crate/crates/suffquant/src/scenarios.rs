//! Continuous two-sensor scenarios bridged into the discrete engine.
//!
//! Two generative families are covered. In the Gaussian family a hidden
//! location couples the sensors and each sensor's coordinate sum carries
//! the whole posterior; in the sensing family an on-off signal reaches
//! each sensor through an unknown circular complex gain and the envelope
//! carries the whole posterior. Samplers are chunked and bit-reproducible
//! per `(params, rows, seed)`. Designs quantize per-sensor scalars on
//! quantile bins by cyclic coordinate descent, scoring fused cells against
//! the unbinned parameter, so the empirical risk needs no parameter grid.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Alphabet, Axis, DiscreteModel};
use crate::quantizer::PbpoOpts;
use crate::rng::derive_seed;
use crate::sufficiency::{conditional_independence, CheckReport, Witness};
use crate::{Error, Result};

/// Rows drawn per independent generator stream.
pub const SAMPLE_CHUNK: usize = 65536;

/// Gaussian location model. The parameter is `theta ~ N(0,1)`, the hidden
/// location is `w = theta + z` with `z ~ N(0, rho)`, and sensor `i`
/// observes `x_ij = w + u_ij` with `u_ij ~ N(0, 1-rho)` independent
/// across sensors and coordinates. The attached statistic is the
/// coordinate sum per sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    /// Coordinates observed per sensor.
    pub n: usize,
    /// Share of observation variance carried by the hidden location,
    /// in `[0, 1)`.
    pub rho: f64,
}

impl GaussianParams {
    /// Validates and builds the parameter set.
    pub fn new(n: usize, rho: f64) -> Result<GaussianParams> {
        let p = GaussianParams { n, rho };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter(
                "at least one coordinate per sensor is required".into(),
            ));
        }
        if !self.rho.is_finite() || !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "coupling must lie in [0, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// One constellation symbol: `radius * exp(i * phase)` sent with
/// probability `prob` when the signal is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationPoint {
    /// Symbol magnitude.
    pub radius: f64,
    /// Symbol phase in radians.
    pub phase: f64,
    /// Selection probability under the active hypothesis.
    pub prob: f64,
}

/// Sensing model. The parameter is the hypothesis `theta in {0, 1}` with
/// `P(theta=1) = p_h1`. Under `theta=1` a constellation symbol `s` is
/// drawn once and sensor `k` observes `x_k = h_k s + n_k` with
/// independent circular complex Gaussian `h_k` (variance `sigma2_h`) and
/// `n_k` (variance `sigma2_n`); under `theta=0` the signal term is
/// absent. The hidden variable is the sent magnitude `theta * |s|` and
/// the attached statistic is the envelope `|x_k|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingParams {
    /// Number of sensors.
    pub sensors: usize,
    /// Symbols available under the active hypothesis.
    pub constellation: Vec<ConstellationPoint>,
    /// Prior probability of the active hypothesis, in `(0, 1)`.
    pub p_h1: f64,
    /// Per-sensor channel gain variance.
    pub sigma2_h: f64,
    /// Per-sensor noise variance.
    pub sigma2_n: f64,
}

impl SensingParams {
    /// Single-sensor unit-power QPSK with unit gain and noise variances
    /// and equal priors.
    pub fn qpsk() -> SensingParams {
        let constellation = (0..4)
            .map(|m| ConstellationPoint {
                radius: 1.0,
                phase: (2 * m + 1) as f64 * std::f64::consts::FRAC_PI_4,
                prob: 0.25,
            })
            .collect();
        SensingParams {
            sensors: 1,
            constellation,
            p_h1: 0.5,
            sigma2_h: 1.0,
            sigma2_n: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.sensors == 0 {
            return Err(Error::InvalidParameter("at least one sensor is required".into()));
        }
        if !self.p_h1.is_finite() || !(self.p_h1 > 0.0 && self.p_h1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "active-hypothesis prior must lie in (0, 1), got {}",
                self.p_h1
            )));
        }
        for (name, v) in [("gain", self.sigma2_h), ("noise", self.sigma2_n)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} variance must be positive, got {v}"
                )));
            }
        }
        if self.constellation.is_empty() {
            return Err(Error::InvalidParameter("constellation is empty".into()));
        }
        let mut total = 0.0;
        for c in &self.constellation {
            if !c.radius.is_finite() || c.radius < 0.0 || !c.phase.is_finite() {
                return Err(Error::InvalidParameter("constellation symbol is not finite".into()));
            }
            if !c.prob.is_finite() || c.prob < 0.0 {
                return Err(Error::InvalidParameter("symbol probability is negative".into()));
            }
            total += c.prob;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "symbol probabilities sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// One sensor's draws: `raw` holds `dim` coordinates per row (row-major)
/// and `stat` the attached scalar statistic per row.
#[derive(Debug, Clone)]
pub struct SensorSamples {
    /// Raw coordinates per row.
    pub dim: usize,
    /// Flattened raw draws, `rows * dim` long.
    pub raw: Vec<f64>,
    /// Attached statistic per row.
    pub stat: Vec<f64>,
}

impl SensorSamples {
    /// Raw coordinate `j` of `row`.
    pub fn raw_coord(&self, row: usize, j: usize) -> f64 {
        self.raw[row * self.dim + j]
    }
}

/// Monte Carlo draws from one scenario, with the parameter, the hidden
/// variable, and every sensor's raw and statistic columns aligned by row.
#[derive(Debug, Clone)]
pub struct SampleSet {
    /// Number of rows.
    pub n_rows: usize,
    /// Master seed the rows were drawn from.
    pub seed: u64,
    /// Parameter value per row.
    pub param: Vec<f64>,
    /// Hidden-variable value per row.
    pub hidden: Vec<f64>,
    /// Per-sensor draws.
    pub sensors: Vec<SensorSamples>,
}

/// Chunk boundaries covering `0..rows`.
fn chunk_ranges(rows: usize) -> Vec<(usize, usize)> {
    (0..rows.div_ceil(SAMPLE_CHUNK))
        .map(|c| {
            let start = c * SAMPLE_CHUNK;
            (start, SAMPLE_CHUNK.min(rows - start))
        })
        .collect()
}

struct SampleChunk {
    param: Vec<f64>,
    hidden: Vec<f64>,
    raw: Vec<Vec<f64>>,
    stat: Vec<Vec<f64>>,
}

fn assemble(rows: usize, seed: u64, dims: &[usize], chunks: Vec<SampleChunk>) -> SampleSet {
    let mut set = SampleSet {
        n_rows: rows,
        seed,
        param: Vec::with_capacity(rows),
        hidden: Vec::with_capacity(rows),
        sensors: dims
            .iter()
            .map(|&d| SensorSamples {
                dim: d,
                raw: Vec::with_capacity(rows * d),
                stat: Vec::with_capacity(rows),
            })
            .collect(),
    };
    for chunk in chunks {
        set.param.extend(chunk.param);
        set.hidden.extend(chunk.hidden);
        for (k, (raw, stat)) in chunk.raw.into_iter().zip(chunk.stat).enumerate() {
            set.sensors[k].raw.extend(raw);
            set.sensors[k].stat.extend(stat);
        }
    }
    set
}

/// Draws `rows` Gaussian-scenario rows. Chunks are generated on
/// independent streams seeded by `(seed, chunk index)`, so the output is
/// bit-identical for a given `(params, rows, seed)` regardless of thread
/// count. Per row the draw order is the parameter, the hidden excess,
/// then sensor 1's and sensor 2's coordinates.
pub fn gaussian_sample(params: &GaussianParams, rows: usize, seed: u64) -> Result<SampleSet> {
    params.check()?;
    if rows == 0 {
        return Err(Error::InvalidParameter("at least one row is required".into()));
    }
    let n = params.n;
    let sd_hidden = params.rho.sqrt();
    let sd_noise = (1.0 - params.rho).sqrt();
    let chunks: Vec<SampleChunk> = chunk_ranges(rows)
        .into_par_iter()
        .enumerate()
        .map(|(c, (_, len))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut out = SampleChunk {
                param: Vec::with_capacity(len),
                hidden: Vec::with_capacity(len),
                raw: vec![Vec::with_capacity(len * n), Vec::with_capacity(len * n)],
                stat: vec![Vec::with_capacity(len), Vec::with_capacity(len)],
            };
            for _ in 0..len {
                let theta: f64 = rng.sample(StandardNormal);
                let z: f64 = rng.sample(StandardNormal);
                let w = theta + sd_hidden * z;
                out.param.push(theta);
                out.hidden.push(w);
                for k in 0..2 {
                    let mut sum = 0.0;
                    for _ in 0..n {
                        let g: f64 = rng.sample(StandardNormal);
                        let x = w + sd_noise * g;
                        out.raw[k].push(x);
                        sum += x;
                    }
                    out.stat[k].push(sum);
                }
            }
            out
        })
        .collect();
    Ok(assemble(rows, seed, &[n, n], chunks))
}

/// Draws `rows` sensing-scenario rows; chunking as in
/// [`gaussian_sample`]. Per row the draw order is the hypothesis, the
/// symbol (drawn even when inactive, to keep streams aligned), then per
/// sensor the gain's and noise's real and imaginary parts. Raw
/// coordinates are `(re, im)` pairs.
pub fn sensing_sample(params: &SensingParams, rows: usize, seed: u64) -> Result<SampleSet> {
    params.check()?;
    if rows == 0 {
        return Err(Error::InvalidParameter("at least one row is required".into()));
    }
    let kc = params.sensors;
    let mut cum = Vec::with_capacity(params.constellation.len());
    let mut acc = 0.0;
    for c in &params.constellation {
        acc += c.prob;
        cum.push(acc);
    }
    let sd_gain = (params.sigma2_h / 2.0).sqrt();
    let sd_noise = (params.sigma2_n / 2.0).sqrt();
    let chunks: Vec<SampleChunk> = chunk_ranges(rows)
        .into_par_iter()
        .enumerate()
        .map(|(c, (_, len))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut out = SampleChunk {
                param: Vec::with_capacity(len),
                hidden: Vec::with_capacity(len),
                raw: vec![Vec::with_capacity(len * 2); kc],
                stat: vec![Vec::with_capacity(len); kc],
            };
            for _ in 0..len {
                let active = rng.gen::<f64>() < params.p_h1;
                let pick: f64 = rng.gen();
                let sym = cum.partition_point(|&edge| edge <= pick).min(cum.len() - 1);
                let s = &params.constellation[sym];
                let theta = if active { 1.0 } else { 0.0 };
                let (s_re, s_im) = (s.radius * s.phase.cos(), s.radius * s.phase.sin());
                out.param.push(theta);
                out.hidden.push(theta * s.radius);
                for k in 0..kc {
                    let g1: f64 = rng.sample(StandardNormal);
                    let g2: f64 = rng.sample(StandardNormal);
                    let g3: f64 = rng.sample(StandardNormal);
                    let g4: f64 = rng.sample(StandardNormal);
                    let (h_re, h_im) = (sd_gain * g1, sd_gain * g2);
                    let x_re = theta * (h_re * s_re - h_im * s_im) + sd_noise * g3;
                    let x_im = theta * (h_re * s_im + h_im * s_re) + sd_noise * g4;
                    out.raw[k].push(x_re);
                    out.raw[k].push(x_im);
                    out.stat[k].push(x_re.hypot(x_im));
                }
            }
            out
        })
        .collect();
    Ok(assemble(rows, seed, &vec![2; kc], chunks))
}

/// Posterior mean and variance of the hidden location given sensor 1's
/// coordinates. The posterior depends on the coordinates only through
/// their sum, so permuting `x1` leaves the output unchanged.
pub fn gaussian_posterior_w(params: &GaussianParams, x1: &[f64]) -> Result<(f64, f64)> {
    params.check()?;
    if x1.len() != params.n {
        return Err(Error::InvalidParameter(format!(
            "expected {} coordinates, got {}",
            params.n,
            x1.len()
        )));
    }
    let n = params.n as f64;
    let denom = n * (1.0 + params.rho) + (1.0 - params.rho);
    let sum: f64 = x1.iter().sum();
    Ok((
        (1.0 + params.rho) * sum / denom,
        (1.0 + params.rho) * (1.0 - params.rho) / denom,
    ))
}

/// Minimum mean squared error of the parameter given the pair of
/// observables with symmetric second moments: each has variance `var`,
/// they share covariance `cov`, and each covaries with the unit-variance
/// parameter by `c`.
fn mmse_from_moments(c: f64, var: f64, cov: f64) -> Result<f64> {
    if var <= 0.0 || var * var - cov * cov <= 0.0 {
        return Err(Error::SingularCovariance);
    }
    Ok(1.0 - 2.0 * c * c / (var + cov))
}

/// Clairvoyant squared-error risk of estimating the parameter from both
/// unquantized coordinate sums.
pub fn gaussian_mmse(params: &GaussianParams) -> Result<f64> {
    params.check()?;
    let n = params.n as f64;
    let var = n * n * (1.0 + params.rho) + n * (1.0 - params.rho);
    let cov = n * n * (1.0 + params.rho);
    mmse_from_moments(n, var, cov)
}

/// Clairvoyant squared-error risk of estimating the parameter from the
/// first raw coordinate of each sensor.
pub fn gaussian_mmse_single(params: &GaussianParams) -> Result<f64> {
    params.check()?;
    mmse_from_moments(1.0, 2.0, 1.0 + params.rho)
}

/// Chooses the per-sensor scalar fed into binning and design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatSelector {
    /// The statistic attached by the sampler.
    Attached,
    /// One raw coordinate; for sensing rows, 0 is the real part and 1
    /// the imaginary part.
    RawCoord(usize),
}

fn selected_column(samples: &SampleSet, sensor: usize, sel: StatSelector) -> Result<Vec<f64>> {
    let s = samples.sensors.get(sensor).ok_or_else(|| {
        Error::InvalidParameter(format!("sensor index {sensor} out of range"))
    })?;
    match sel {
        StatSelector::Attached => Ok(s.stat.clone()),
        StatSelector::RawCoord(j) => {
            if j >= s.dim {
                return Err(Error::InvalidParameter(format!(
                    "raw coordinate {j} out of range for a {}-coordinate sensor",
                    s.dim
                )));
            }
            Ok((0..samples.n_rows).map(|r| s.raw[r * s.dim + j]).collect())
        }
    }
}

/// Equal-mass bin edges: `bins - 1` interior quantiles of `values`.
fn quantile_edges(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::InvalidParameter("at least two bins are required".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in a statistic column".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok((1..bins).map(|j| sorted[j * sorted.len() / bins]).collect())
}

/// Bin index of `v`: the number of edges at or below it.
fn bin_of(v: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e <= v)
}

/// How the continuous parameter is discretized for posterior checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaBinning {
    /// Two bins split at 1/2, for hypothesis-valued parameters.
    Binary,
    /// Equal-mass bins.
    Quantile(usize),
}

fn theta_edges(param: &[f64], binning: ThetaBinning) -> Result<Vec<f64>> {
    match binning {
        ThetaBinning::Binary => Ok(vec![0.5]),
        ThetaBinning::Quantile(b) => quantile_edges(param, b),
    }
}

/// A sample set discretized into a joint pmf over the parameter bin and
/// the two sensor-statistic bins, with the edges that produced it.
#[derive(Debug, Clone)]
pub struct EmpiricalBinning {
    /// Empirical joint model; the parameter bin sits on the parameter
    /// axis and sensor bins on the observation axes.
    pub model: DiscreteModel,
    /// Interior parameter-bin edges.
    pub theta_edges: Vec<f64>,
    /// Interior statistic-bin edges per sensor.
    pub sensor_edges: Vec<Vec<f64>>,
    /// Rows the pmf was estimated from.
    pub n_samples: usize,
}

/// Discretizes a sample set onto quantile bins. With one sensor the
/// second observation axis is a singleton and `bins2` is ignored. Each
/// sensor axis marginal carries its quantile share of mass by
/// construction, and the joint inherits any cross-sensor coupling.
pub fn empirical_model(
    samples: &SampleSet,
    selectors: &[StatSelector],
    bins1: usize,
    bins2: usize,
    binning: ThetaBinning,
) -> Result<EmpiricalBinning> {
    let kc = samples.sensors.len();
    if selectors.len() != kc {
        return Err(Error::InvalidParameter(format!(
            "{} selectors for {kc} sensors",
            selectors.len()
        )));
    }
    if kc == 0 || kc > 2 {
        return Err(Error::InvalidParameter(
            "the discrete bridge supports one or two sensors".into(),
        ));
    }
    let b2 = if kc == 2 { bins2 } else { 1 };
    if bins1 < 2 || (kc == 2 && bins2 < 2) {
        return Err(Error::InvalidParameter("at least two bins per sensor are required".into()));
    }
    let required = 10 * bins1 * b2;
    if samples.n_rows < required {
        return Err(Error::InsufficientSamples {
            required,
            got: samples.n_rows,
        });
    }

    let t_edges = theta_edges(&samples.param, binning)?;
    let tb = t_edges.len() + 1;
    let mut sensor_edges = Vec::with_capacity(kc);
    let mut columns = Vec::with_capacity(kc);
    for (k, &sel) in selectors.iter().enumerate() {
        let col = selected_column(samples, k, sel)?;
        sensor_edges.push(quantile_edges(&col, if k == 0 { bins1 } else { bins2 })?);
        columns.push(col);
    }

    let mut counts = vec![0u64; tb * bins1 * b2];
    for r in 0..samples.n_rows {
        let t = bin_of(samples.param[r], &t_edges);
        let a = bin_of(columns[0][r], &sensor_edges[0]);
        let b = if kc == 2 { bin_of(columns[1][r], &sensor_edges[1]) } else { 0 };
        counts[(t * bins1 + a) * b2 + b] += 1;
    }
    let n = samples.n_rows as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();

    let theta_alpha = match binning {
        ThetaBinning::Binary => Alphabet::numbered(2),
        ThetaBinning::Quantile(_) => Alphabet::prefixed("t", tb),
    };
    let x2_alpha = if kc == 2 { Alphabet::prefixed("b", b2) } else { Alphabet::new(["*"])? };
    let model = DiscreteModel::from_joint(
        theta_alpha,
        None,
        Alphabet::prefixed("b", bins1),
        x2_alpha,
        probs,
    )?;
    Ok(EmpiricalBinning {
        model,
        theta_edges: t_edges,
        sensor_edges,
        n_samples: samples.n_rows,
    })
}

/// Fusion-center objective for empirical designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Mean squared error against the unbinned parameter; each fused
    /// cell estimates by its empirical mean.
    SquaredError,
    /// Error rate against a 0/1 parameter; each fused cell estimates by
    /// majority, ties deciding 0.
    ZeroOne,
}

/// Per-cell sufficient aggregates: row count, parameter sum, parameter
/// sum of squares.
#[derive(Debug, Clone, Copy, Default)]
struct Agg {
    n: f64,
    s1: f64,
    s2: f64,
}

impl Agg {
    fn push(&mut self, theta: f64) {
        self.n += 1.0;
        self.s1 += theta;
        self.s2 += theta * theta;
    }

    fn add(&mut self, o: &Agg) {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
    }

    fn sub(&mut self, o: &Agg) {
        self.n -= o.n;
        self.s1 -= o.s1;
        self.s2 -= o.s2;
    }

    /// Unnormalized cell loss under the cell-optimal estimate.
    fn loss(&self, obj: Objective) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        match obj {
            Objective::SquaredError => (self.s2 - self.s1 * self.s1 / self.n).max(0.0),
            Objective::ZeroOne => self.s1.min(self.n - self.s1),
        }
    }

    fn estimate(&self, obj: Objective) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        match obj {
            Objective::SquaredError => self.s1 / self.n,
            Objective::ZeroOne => {
                if self.s1 > self.n - self.s1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Joint-bin aggregates plus the index structure the descent sweeps over.
struct BinTable {
    dims: Vec<usize>,
    agg: Vec<Agg>,
    /// Joint-bin digits, `kc` per bin.
    digits: Vec<u16>,
    /// `members[k][b]`: joint bins whose sensor-`k` digit is `b`.
    members: Vec<Vec<Vec<u32>>>,
    n_rows: f64,
}

impl BinTable {
    fn new(dims: Vec<usize>, rowbin: &[u32], param: &[f64]) -> BinTable {
        let kc = dims.len();
        let total: usize = dims.iter().product();
        let mut agg = vec![Agg::default(); total];
        for (r, &jb) in rowbin.iter().enumerate() {
            agg[jb as usize].push(param[r]);
        }
        let mut digits = vec![0u16; total * kc];
        let mut members: Vec<Vec<Vec<u32>>> =
            dims.iter().map(|&b| vec![Vec::new(); b]).collect();
        for jb in 0..total {
            let mut rest = jb;
            for k in (0..kc).rev() {
                let d = rest % dims[k];
                rest /= dims[k];
                digits[jb * kc + k] = d as u16;
                members[k][d].push(jb as u32);
            }
        }
        BinTable {
            dims,
            agg,
            digits,
            members,
            n_rows: rowbin.len() as f64,
        }
    }
}

struct Descent {
    maps: Vec<Vec<usize>>,
    risk: f64,
    trace: Vec<f64>,
    sweeps: usize,
    converged: bool,
}

/// Cyclic coordinate descent over bin-to-level maps. Each pointwise
/// update re-scores every candidate level with the fused cells refit,
/// ties resolving to the lowest level, so risk never increases. Cells
/// are rebuilt from scratch after every sweep to cancel incremental
/// float drift.
fn run_descent(
    table: &BinTable,
    levels: &[usize],
    mut maps: Vec<Vec<usize>>,
    obj: Objective,
    opts: &PbpoOpts,
) -> Descent {
    let kc = levels.len();
    let mut strides = vec![1usize; kc];
    for k in (0..kc.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * levels[k + 1];
    }
    let cell_count: usize = levels.iter().product();

    let build = |maps: &[Vec<usize>]| -> Vec<Agg> {
        let mut cells = vec![Agg::default(); cell_count];
        for (jb, a) in table.agg.iter().enumerate() {
            if a.n > 0.0 {
                let mut cell = 0;
                for k in 0..kc {
                    cell += maps[k][table.digits[jb * kc + k] as usize] * strides[k];
                }
                cells[cell].add(a);
            }
        }
        cells
    };
    let risk_of = |cells: &[Agg]| -> f64 {
        cells.iter().map(|a| a.loss(obj)).sum::<f64>() / table.n_rows
    };

    let mut cells = build(&maps);
    let mut risk = risk_of(&cells);
    let mut trace = vec![risk];
    let mut sweeps = 0;
    let mut converged = false;
    let mut base_cells = vec![Agg::default(); cell_count];
    let mut scratch = vec![Agg::default(); cell_count];
    let mut base_idx: Vec<(usize, usize)> = Vec::new();

    while sweeps < opts.max_iter {
        for k in 0..kc {
            for b in 0..table.dims[k] {
                let cur = maps[k][b];
                base_cells.copy_from_slice(&cells);
                base_idx.clear();
                for &jb in &table.members[k][b] {
                    let jb = jb as usize;
                    if table.agg[jb].n <= 0.0 {
                        continue;
                    }
                    let mut rest = 0;
                    for j in 0..kc {
                        if j != k {
                            rest += maps[j][table.digits[jb * kc + j] as usize] * strides[j];
                        }
                    }
                    base_idx.push((jb, rest));
                    base_cells[rest + cur * strides[k]].sub(&table.agg[jb]);
                }
                let mut best_u = cur;
                let mut best_r = f64::INFINITY;
                for u in 0..levels[k] {
                    scratch.copy_from_slice(&base_cells);
                    for &(jb, rest) in &base_idx {
                        scratch[rest + u * strides[k]].add(&table.agg[jb]);
                    }
                    let r = risk_of(&scratch);
                    if r < best_r {
                        best_r = r;
                        best_u = u;
                    }
                }
                if best_u != cur {
                    for &(jb, rest) in &base_idx {
                        cells[rest + cur * strides[k]].sub(&table.agg[jb]);
                        cells[rest + best_u * strides[k]].add(&table.agg[jb]);
                    }
                    maps[k][b] = best_u;
                }
            }
        }
        sweeps += 1;
        cells = build(&maps);
        let new_risk = risk_of(&cells);
        trace.push(new_risk);
        let improved = risk - new_risk;
        risk = new_risk;
        if improved < opts.tol {
            converged = true;
            break;
        }
    }
    Descent {
        maps,
        risk,
        trace,
        sweeps,
        converged,
    }
}

fn quantile_maps(dims: &[usize], levels: &[usize]) -> Vec<Vec<usize>> {
    dims.iter()
        .zip(levels)
        .map(|(&b, &l)| (0..b).map(|i| (i * l / b).min(l - 1)).collect())
        .collect()
}

fn seeded_maps(dims: &[usize], levels: &[usize], seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dims.iter()
        .zip(levels)
        .map(|(&b, &l)| (0..b).map(|_| rng.gen_range(0..l)).collect())
        .collect()
}

/// One sensor's designed quantizer on the continuous scale.
#[derive(Debug, Clone, Serialize)]
pub struct SensorDesign {
    /// Interior quantile-bin edges.
    pub edges: Vec<f64>,
    /// Output levels available to this sensor.
    pub levels: usize,
    /// Bin-to-level map.
    pub map: Vec<usize>,
}

/// A designed multi-sensor quantizer with its fused estimates and
/// empirical risk.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalDesign {
    /// Objective the design minimizes.
    pub objective: Objective,
    /// Per-sensor quantizers.
    pub sensors: Vec<SensorDesign>,
    /// Fused-cell estimates, row-major over sensor levels.
    pub estimates: Vec<f64>,
    /// Empirical risk of the best restart.
    pub risk: f64,
    /// Monte Carlo standard error of the risk.
    pub se: f64,
    /// Risk after initialization and after each sweep, best restart.
    pub risk_trace: Vec<f64>,
    /// Sweeps the best restart ran.
    pub sweeps: usize,
    /// Whether the best restart converged before the sweep cap.
    pub converged: bool,
    /// Final risk of every restart in order.
    pub restart_risks: Vec<f64>,
    /// Index of the winning restart.
    pub best_restart: usize,
}

/// Designs per-sensor quantizers over quantile bins of the selected
/// scalars by multi-start coordinate descent. Restart 0 starts from
/// contiguous equal-count level groups; later restarts draw bin-to-level
/// maps from streams seeded by `(seed, restart)`. The reported risk is
/// exactly the empirical risk of applying the returned design to the
/// sample set.
#[allow(clippy::too_many_arguments)]
pub fn empirical_design(
    samples: &SampleSet,
    selectors: &[StatSelector],
    bins: &[usize],
    levels: &[usize],
    objective: Objective,
    restarts: usize,
    seed: u64,
    opts: &PbpoOpts,
) -> Result<EmpiricalDesign> {
    let kc = samples.sensors.len();
    if selectors.len() != kc || bins.len() != kc || levels.len() != kc {
        return Err(Error::InvalidParameter(format!(
            "selector, bin, and level counts must all equal the {kc} sensors"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    let mut bin_product: usize = 1;
    let mut cell_product: usize = 1;
    for (&b, &l) in bins.iter().zip(levels) {
        if b < 2 || b > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("bin count {b} out of range")));
        }
        if l == 0 {
            return Err(Error::InvalidParameter("at least one level per sensor is required".into()));
        }
        bin_product = bin_product.saturating_mul(b);
        cell_product = cell_product.saturating_mul(l);
    }
    if bin_product > 1 << 22 {
        return Err(Error::InvalidParameter(format!(
            "joint bin grid of {bin_product} cells is too large"
        )));
    }
    if cell_product > 4096 {
        return Err(Error::InvalidParameter(format!(
            "fused level grid of {cell_product} cells is too large"
        )));
    }
    let required = 10 * bin_product;
    if samples.n_rows < required {
        return Err(Error::InsufficientSamples {
            required,
            got: samples.n_rows,
        });
    }
    if objective == Objective::ZeroOne
        && samples.param.iter().any(|&t| t != 0.0 && t != 1.0)
    {
        return Err(Error::InvalidParameter(
            "the zero-one objective requires a 0/1 parameter".into(),
        ));
    }

    let mut edges = Vec::with_capacity(kc);
    let mut columns = Vec::with_capacity(kc);
    for (k, &sel) in selectors.iter().enumerate() {
        let col = selected_column(samples, k, sel)?;
        edges.push(quantile_edges(&col, bins[k])?);
        columns.push(col);
    }
    let mut bstrides = vec![1usize; kc];
    for k in (0..kc.saturating_sub(1)).rev() {
        bstrides[k] = bstrides[k + 1] * bins[k + 1];
    }
    let mut rowbin = vec![0u32; samples.n_rows];
    for k in 0..kc {
        for (r, &v) in columns[k].iter().enumerate() {
            rowbin[r] += (bin_of(v, &edges[k]) * bstrides[k]) as u32;
        }
    }
    let table = BinTable::new(bins.to_vec(), &rowbin, &samples.param);

    let runs: Vec<Descent> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let maps = if r == 0 {
                quantile_maps(bins, levels)
            } else {
                seeded_maps(bins, levels, derive_seed(seed, r as u64))
            };
            run_descent(&table, levels, maps, objective, opts)
        })
        .collect();
    let restart_risks: Vec<f64> = runs.iter().map(|d| d.risk).collect();
    let mut best = 0;
    for (i, &r) in restart_risks.iter().enumerate() {
        if r < restart_risks[best] {
            best = i;
        }
    }
    let won = &runs[best];

    let mut lstrides = vec![1usize; kc];
    for k in (0..kc.saturating_sub(1)).rev() {
        lstrides[k] = lstrides[k + 1] * levels[k + 1];
    }
    let mut cells = vec![Agg::default(); cell_product];
    let mut cellmap = vec![0u32; bin_product];
    for jb in 0..bin_product {
        let mut cell = 0;
        for k in 0..kc {
            cell += won.maps[k][table.digits[jb * kc + k] as usize] * lstrides[k];
        }
        cellmap[jb] = cell as u32;
        if table.agg[jb].n > 0.0 {
            cells[cell].add(&table.agg[jb]);
        }
    }
    let estimates: Vec<f64> = cells.iter().map(|a| a.estimate(objective)).collect();

    let n = samples.n_rows as f64;
    let se = match objective {
        Objective::ZeroOne => (won.risk * (1.0 - won.risk) / n).sqrt(),
        Objective::SquaredError => {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for (r, &jb) in rowbin.iter().enumerate() {
                let e = samples.param[r] - estimates[cellmap[jb as usize] as usize];
                let e2 = e * e;
                sum += e2;
                sumsq += e2 * e2;
            }
            let mean = sum / n;
            ((sumsq / n - mean * mean).max(0.0) / n).sqrt()
        }
    };

    Ok(EmpiricalDesign {
        objective,
        sensors: edges
            .into_iter()
            .zip(won.maps.iter())
            .zip(levels)
            .map(|((e, m), &l)| SensorDesign {
                edges: e,
                levels: l,
                map: m.clone(),
            })
            .collect(),
        estimates,
        risk: won.risk,
        se,
        risk_trace: won.trace.clone(),
        sweeps: won.sweeps,
        converged: won.converged,
        restart_risks,
        best_restart: best,
    })
}

/// Statistical sufficiency check: refining one selected statistic's
/// quantile bin by another selected scalar's bin must leave the binned
/// parameter posterior unchanged up to sampling noise. Deviations are
/// reported in units of the per-cell tolerance `5/sqrt(cell rows)`, so
/// the check holds when the largest normalized deviation is at most 1;
/// sparse cells get proportionally loose tolerances.
#[allow(clippy::too_many_arguments)]
pub fn sufficiency_witness(
    samples: &SampleSet,
    sensor: usize,
    stat: StatSelector,
    refine: StatSelector,
    stat_bins: usize,
    refine_bins: usize,
    binning: ThetaBinning,
) -> Result<CheckReport> {
    if stat_bins < 2 || refine_bins < 2 {
        return Err(Error::InvalidParameter("at least two bins per axis are required".into()));
    }
    let required = 10 * stat_bins * refine_bins;
    if samples.n_rows < required {
        return Err(Error::InsufficientSamples {
            required,
            got: samples.n_rows,
        });
    }
    let stat_col = selected_column(samples, sensor, stat)?;
    let refine_col = selected_column(samples, sensor, refine)?;
    let stat_edges = quantile_edges(&stat_col, stat_bins)?;
    let refine_edges = quantile_edges(&refine_col, refine_bins)?;
    let t_edges = theta_edges(&samples.param, binning)?;
    let tb = t_edges.len() + 1;

    let cells = stat_bins * refine_bins;
    let mut joint = vec![0.0f64; cells * tb];
    let mut cell_n = vec![0.0f64; cells];
    let mut stat_n = vec![0.0f64; stat_bins];
    let mut stat_t = vec![0.0f64; stat_bins * tb];
    for r in 0..samples.n_rows {
        let s = bin_of(stat_col[r], &stat_edges);
        let c = bin_of(refine_col[r], &refine_edges);
        let t = bin_of(samples.param[r], &t_edges);
        joint[(s * refine_bins + c) * tb + t] += 1.0;
        cell_n[s * refine_bins + c] += 1.0;
        stat_n[s] += 1.0;
        stat_t[s * tb + t] += 1.0;
    }

    let mut max_dev = 0.0;
    let mut witness = None;
    for s in 0..stat_bins {
        if stat_n[s] <= 0.0 {
            continue;
        }
        for c in 0..refine_bins {
            let nc = cell_n[s * refine_bins + c];
            if nc <= 0.0 {
                continue;
            }
            let tol = 5.0 / nc.sqrt();
            for t in 0..tb {
                let fine = joint[(s * refine_bins + c) * tb + t] / nc;
                let coarse = stat_t[s * tb + t] / stat_n[s];
                let dev = (fine - coarse).abs() / tol;
                if dev > max_dev {
                    max_dev = dev;
                    witness = Some(Witness {
                        assignment: vec![
                            ("theta_bin".into(), t.to_string()),
                            ("stat_bin".into(), s.to_string()),
                            ("refine_bin".into(), c.to_string()),
                        ],
                    });
                }
            }
        }
    }
    let holds = max_dev <= 1.0;
    Ok(CheckReport {
        holds,
        max_deviation: max_dev,
        witness: if holds { None } else { witness },
    })
}

/// Statistical hidden-independence check: conditioned on a quantile bin
/// of the hidden variable, the two sensors' attached-statistic bins must
/// be independent up to sampling noise. The empirical model over
/// `(hidden bin, statistic bins)` is handed to the discrete independence
/// check with tolerance `5/sqrt(rows per hidden bin)`.
pub fn hidden_ci_witness(
    samples: &SampleSet,
    hidden_bins: usize,
    stat_bins1: usize,
    stat_bins2: usize,
) -> Result<CheckReport> {
    if samples.sensors.len() < 2 {
        return Err(Error::InvalidParameter(
            "the hidden-independence check needs two sensors".into(),
        ));
    }
    if hidden_bins < 2 || stat_bins1 < 2 || stat_bins2 < 2 {
        return Err(Error::InvalidParameter("at least two bins per axis are required".into()));
    }
    let required = 10 * hidden_bins * stat_bins1 * stat_bins2;
    if samples.n_rows < required {
        return Err(Error::InsufficientSamples {
            required,
            got: samples.n_rows,
        });
    }
    let w_edges = quantile_edges(&samples.hidden, hidden_bins)?;
    let e1 = quantile_edges(&samples.sensors[0].stat, stat_bins1)?;
    let e2 = quantile_edges(&samples.sensors[1].stat, stat_bins2)?;
    let mut counts = vec![0u64; hidden_bins * stat_bins1 * stat_bins2];
    for r in 0..samples.n_rows {
        let w = bin_of(samples.hidden[r], &w_edges);
        let a = bin_of(samples.sensors[0].stat[r], &e1);
        let b = bin_of(samples.sensors[1].stat[r], &e2);
        counts[(w * stat_bins1 + a) * stat_bins2 + b] += 1;
    }
    let n = samples.n_rows as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let m = DiscreteModel::from_joint(
        Alphabet::prefixed("w", hidden_bins),
        None,
        Alphabet::prefixed("b", stat_bins1),
        Alphabet::prefixed("b", stat_bins2),
        probs,
    )?;
    let eps = 5.0 / (n / hidden_bins as f64).sqrt();
    conditional_independence(&m, &[Axis::X1], &[Axis::X2], &[Axis::Theta], eps)
}

/// Closed-form single-sensor threshold detector on the squared envelope:
/// declare the signal present when `|x|^2` exceeds the threshold. Under
/// either hypothesis `|x|^2` is a mixture of exponentials, so the error
/// curve is smooth and a coarse grid plus golden-section refinement
/// pins its minimum. Thresholds on `|x|` and `|x|^2` induce identical
/// detectors (the square is monotone on the envelope's range).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdReport {
    /// Decision threshold on the squared envelope.
    pub threshold: f64,
    /// Bayes error of the threshold detector.
    pub error_probability: f64,
}

/// Minimizes the closed-form threshold-detector error for one sensor.
pub fn closed_form_threshold(params: &SensingParams) -> Result<ThresholdReport> {
    params.check()?;
    let lam0 = params.sigma2_n;
    let terms: Vec<(f64, f64)> = params
        .constellation
        .iter()
        .map(|c| (c.prob, params.sigma2_h * c.radius * c.radius + params.sigma2_n))
        .collect();
    let p1 = params.p_h1;
    let pe = |t: f64| -> f64 {
        let miss: f64 = terms
            .iter()
            .map(|&(prob, lam)| prob * (1.0 - (-t / lam).exp()))
            .sum();
        (1.0 - p1) * (-t / lam0).exp() + p1 * miss
    };
    let lam_max = terms
        .iter()
        .map(|&(_, lam)| lam)
        .fold(lam0, f64::max);
    let t_max = 40.0 * lam_max;
    const GRID: usize = 4096;
    let mut best_i = 0;
    let mut best_pe = f64::INFINITY;
    for i in 0..=GRID {
        let v = pe(t_max * i as f64 / GRID as f64);
        if v < best_pe {
            best_pe = v;
            best_i = i;
        }
    }
    let mut lo = t_max * best_i.saturating_sub(1) as f64 / GRID as f64;
    let mut hi = t_max * (best_i + 1).min(GRID) as f64 / GRID as f64;
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (pe(a), pe(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = pe(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = pe(b);
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(ThresholdReport {
        threshold: t,
        error_probability: pe(t),
    })
}

/// One designed statistic in a comparison report.
#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    /// Which per-sensor scalar the branch quantized.
    pub statistic: String,
    /// The design and its empirical risk.
    #[serde(flatten)]
    pub design: EmpiricalDesign,
}

/// Gaussian-scenario comparison: the coordinate sums against the first
/// raw coordinate, with clairvoyant anchors and statistical witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianReport {
    /// Model parameters.
    pub params: GaussianParams,
    /// Rows drawn.
    pub n_samples: usize,
    /// Master seed.
    pub seed: u64,
    /// Quantile bins per sensor.
    pub bins: usize,
    /// Quantizer levels per sensor.
    pub levels: usize,
    /// Descent restarts per branch.
    pub restarts: usize,
    /// Clairvoyant risk given both unquantized sums.
    pub mmse_sufficient: f64,
    /// Clairvoyant risk given both unquantized first coordinates.
    pub mmse_alternative: f64,
    /// Coefficient of the hidden location's posterior mean on the sum.
    pub posterior_slope_formula: f64,
    /// Least-squares slope of the hidden location on the sum.
    pub posterior_slope_mc: f64,
    /// Design on the coordinate sums.
    pub sufficient: BranchReport,
    /// Design on the first raw coordinates.
    pub alternative: BranchReport,
    /// Refining the sum by the first coordinate leaves the posterior
    /// unchanged up to sampling noise.
    pub sufficiency_check: CheckReport,
    /// Sensor sums are independent given the hidden location's bin.
    pub hidden_ci_check: CheckReport,
}

/// Sensing-scenario comparison: the envelopes against the real parts,
/// with the closed-form threshold anchor for the single-sensor binary
/// design.
#[derive(Debug, Clone, Serialize)]
pub struct SensingReport {
    /// Model parameters.
    pub params: SensingParams,
    /// Rows drawn.
    pub n_samples: usize,
    /// Master seed.
    pub seed: u64,
    /// Quantile bins per sensor.
    pub bins: usize,
    /// Quantizer levels per sensor.
    pub levels: usize,
    /// Descent restarts per branch.
    pub restarts: usize,
    /// Design on the envelopes.
    pub sufficient: BranchReport,
    /// Design on the real parts.
    pub alternative: BranchReport,
    /// Closed-form threshold anchor, present for one sensor at two
    /// levels.
    pub closed_form: Option<ThresholdReport>,
    /// Refining the envelope by the real part leaves the posterior
    /// unchanged up to sampling noise.
    pub sufficiency_check: CheckReport,
    /// Envelope bins are independent given the sent magnitude's bin,
    /// present for two or more sensors.
    pub hidden_ci_check: Option<CheckReport>,
}

/// Writes per-row `(statistic, level)` pairs and the fused estimate for
/// one branch. The file lands atomically via a sibling temporary.
fn write_design_csv(
    samples: &SampleSet,
    selectors: &[StatSelector],
    design: &EmpiricalDesign,
    path: &Path,
) -> Result<()> {
    let kc = selectors.len();
    let mut columns = Vec::with_capacity(kc);
    for (k, &sel) in selectors.iter().enumerate() {
        columns.push(selected_column(samples, k, sel)?);
    }
    let mut lstrides = vec![1usize; kc];
    for k in (0..kc.saturating_sub(1)).rev() {
        lstrides[k] = lstrides[k + 1] * design.sensors[k + 1].levels;
    }
    let tmp = PathBuf::from(format!("{}.tmp", path.display()));
    {
        let mut out = BufWriter::new(std::fs::File::create(&tmp)?);
        for k in 0..kc {
            write!(out, "statistic_{},level_{},", k + 1, k + 1)?;
        }
        writeln!(out, "estimate")?;
        for r in 0..samples.n_rows {
            let mut cell = 0;
            for k in 0..kc {
                let v = columns[k][r];
                let u = design.sensors[k].map[bin_of(v, &design.sensors[k].edges)];
                cell += u * lstrides[k];
                write!(out, "{v},{u},")?;
            }
            writeln!(out, "{}", design.estimates[cell])?;
        }
        out.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Builds the Gaussian comparison report. Both branches share one sample
/// set; the designs run on independently derived seeds.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_report(
    params: &GaussianParams,
    n_samples: usize,
    bins: usize,
    levels: usize,
    restarts: usize,
    seed: u64,
    opts: &PbpoOpts,
    csv: Option<&Path>,
) -> Result<GaussianReport> {
    let samples = gaussian_sample(params, n_samples, seed)?;
    let suff_sel = [StatSelector::Attached, StatSelector::Attached];
    let alt_sel = [StatSelector::RawCoord(0), StatSelector::RawCoord(0)];
    let sufficient = empirical_design(
        &samples,
        &suff_sel,
        &[bins, bins],
        &[levels, levels],
        Objective::SquaredError,
        restarts,
        derive_seed(seed, 1),
        opts,
    )?;
    let alternative = empirical_design(
        &samples,
        &alt_sel,
        &[bins, bins],
        &[levels, levels],
        Objective::SquaredError,
        restarts,
        derive_seed(seed, 2),
        opts,
    )?;

    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..samples.n_rows {
        let t = samples.sensors[0].stat[r];
        num += samples.hidden[r] * t;
        den += t * t;
    }
    let n = params.n as f64;
    let slope_formula = (1.0 + params.rho) / (n * (1.0 + params.rho) + (1.0 - params.rho));

    let sufficiency_check = sufficiency_witness(
        &samples,
        0,
        StatSelector::Attached,
        StatSelector::RawCoord(0),
        bins.min(16),
        8,
        ThetaBinning::Quantile(4),
    )?;
    let hidden_ci_check = hidden_ci_witness(&samples, 32, 8, 8)?;

    if let Some(path) = csv {
        write_design_csv(&samples, &suff_sel, &sufficient, path)?;
    }
    Ok(GaussianReport {
        params: *params,
        n_samples,
        seed,
        bins,
        levels,
        restarts,
        mmse_sufficient: gaussian_mmse(params)?,
        mmse_alternative: gaussian_mmse_single(params)?,
        posterior_slope_formula: slope_formula,
        posterior_slope_mc: num / den,
        sufficient: BranchReport {
            statistic: "sums".into(),
            design: sufficient,
        },
        alternative: BranchReport {
            statistic: "first-coordinate".into(),
            design: alternative,
        },
        sufficiency_check,
        hidden_ci_check,
    })
}

/// Builds the sensing comparison report. Both branches share one sample
/// set; the closed-form threshold anchor is attached for the
/// single-sensor two-level design.
#[allow(clippy::too_many_arguments)]
pub fn sensing_report(
    params: &SensingParams,
    n_samples: usize,
    bins: usize,
    levels: usize,
    restarts: usize,
    seed: u64,
    opts: &PbpoOpts,
    csv: Option<&Path>,
) -> Result<SensingReport> {
    let samples = sensing_sample(params, n_samples, seed)?;
    let kc = params.sensors;
    let suff_sel = vec![StatSelector::Attached; kc];
    let alt_sel = vec![StatSelector::RawCoord(0); kc];
    let bins_all = vec![bins; kc];
    let levels_all = vec![levels; kc];
    let sufficient = empirical_design(
        &samples,
        &suff_sel,
        &bins_all,
        &levels_all,
        Objective::ZeroOne,
        restarts,
        derive_seed(seed, 1),
        opts,
    )?;
    let alternative = empirical_design(
        &samples,
        &alt_sel,
        &bins_all,
        &levels_all,
        Objective::ZeroOne,
        restarts,
        derive_seed(seed, 2),
        opts,
    )?;
    let closed_form = if kc == 1 && levels == 2 {
        Some(closed_form_threshold(params)?)
    } else {
        None
    };
    let sufficiency_check = sufficiency_witness(
        &samples,
        0,
        StatSelector::Attached,
        StatSelector::RawCoord(0),
        bins.min(16),
        8,
        ThetaBinning::Binary,
    )?;
    let hidden_ci_check = if kc >= 2 {
        Some(hidden_ci_witness(&samples, 8, 8, 8)?)
    } else {
        None
    };
    if let Some(path) = csv {
        write_design_csv(&samples, &suff_sel, &sufficient, path)?;
    }
    Ok(SensingReport {
        params: params.clone(),
        n_samples,
        seed,
        bins,
        levels,
        restarts,
        sufficient: BranchReport {
            statistic: "envelope".into(),
            design: sufficient,
        },
        alternative: BranchReport {
            statistic: "real-part".into(),
            design: alternative,
        },
        closed_form,
        sufficiency_check,
        hidden_ci_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation_rejects_degenerate_inputs() {
        assert!(matches!(GaussianParams::new(0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(GaussianParams::new(1, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(GaussianParams::new(1, -0.1), Err(Error::InvalidParameter(_))));
        let mut bad = SensingParams::qpsk();
        bad.constellation[0].prob = 0.5;
        assert!(matches!(bad.check(), Err(Error::InvalidParameter(_))));
        assert!(SensingParams::qpsk().check().is_ok());
    }

    #[test]
    fn posterior_matches_conjugate_anchors() {
        let p = GaussianParams::new(1, 0.0).unwrap();
        let (mean, var) = gaussian_posterior_w(&p, &[2.0]).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((var - 0.5).abs() < 1e-12);

        let p = GaussianParams::new(2, 0.5).unwrap();
        let (mean, _) = gaussian_posterior_w(&p, &[1.0, 2.0]).unwrap();
        assert!((mean - 4.5 / 3.5).abs() < 1e-12);
        let (permuted, _) = gaussian_posterior_w(&p, &[2.0, 1.0]).unwrap();
        assert_eq!(mean.to_bits(), permuted.to_bits());

        assert!(matches!(
            gaussian_posterior_w(&p, &[1.0]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn mmse_matches_anchors() {
        let p = GaussianParams::new(1, 0.0).unwrap();
        assert!((gaussian_mmse(&p).unwrap() - 1.0 / 3.0).abs() < 1e-12);

        let p = GaussianParams::new(4, 0.5).unwrap();
        assert!((gaussian_mmse(&p).unwrap() - 0.36).abs() < 1e-12);
        assert!((gaussian_mmse_single(&p).unwrap() - 3.0 / 7.0).abs() < 1e-12);

        let mut last = 1.0;
        for n in 1..=6 {
            let v = gaussian_mmse(&GaussianParams::new(n, 0.0).unwrap()).unwrap();
            assert!(v > 0.0 && v < last, "risk must fall with more coordinates");
            last = v;
        }
    }

    #[test]
    fn gaussian_sampler_is_reproducible_and_sums_match() {
        let p = GaussianParams::new(2, 0.3).unwrap();
        let a = gaussian_sample(&p, 2_000, 7).unwrap();
        let b = gaussian_sample(&p, 2_000, 7).unwrap();
        assert_eq!(a.param, b.param);
        assert_eq!(a.sensors[0].raw, b.sensors[0].raw);
        assert_eq!(a.sensors[1].stat, b.sensors[1].stat);
        for r in 0..a.n_rows {
            let sum = a.sensors[0].raw_coord(r, 0) + a.sensors[0].raw_coord(r, 1);
            assert!((sum - a.sensors[0].stat[r]).abs() < 1e-12);
        }
        let c = gaussian_sample(&p, 2_000, 8).unwrap();
        assert_ne!(a.param, c.param);
    }

    #[test]
    fn gaussian_sampler_moments_match_the_model() {
        let p = GaussianParams::new(3, 0.4).unwrap();
        let rows = 150_000;
        let s = gaussian_sample(&p, rows, 11).unwrap();
        let n = rows as f64;
        let var_t = 9.0 * 1.4 + 3.0 * 0.6;
        let mean: f64 = s.sensors[0].stat.iter().sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * (var_t / n).sqrt());
        let var: f64 = s.sensors[0].stat.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        assert!((var / var_t - 1.0).abs() < 0.05);

        let indep = gaussian_sample(&GaussianParams::new(1, 0.0).unwrap(), rows, 12).unwrap();
        let mut num = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for r in 0..rows {
            let e1 = indep.sensors[0].stat[r] - indep.param[r];
            let e2 = indep.sensors[1].stat[r] - indep.param[r];
            num += e1 * e2;
            d1 += e1 * e1;
            d2 += e2 * e2;
        }
        assert!((num / (d1 * d2).sqrt()).abs() < 4.0 / n.sqrt());
    }

    #[test]
    fn sensing_sampler_moments_match_the_model() {
        let p = SensingParams::qpsk();
        let rows = 150_000;
        let s = sensing_sample(&p, rows, 3).unwrap();
        let mut m0 = (0.0, 0.0);
        let mut m1 = (0.0, 0.0);
        for r in 0..rows {
            let e = s.sensors[0].stat[r] * s.sensors[0].stat[r];
            if s.param[r] == 0.0 {
                assert_eq!(s.hidden[r], 0.0);
                m0 = (m0.0 + e, m0.1 + 1.0);
            } else {
                assert_eq!(s.hidden[r], 1.0);
                m1 = (m1.0 + e, m1.1 + 1.0);
            }
        }
        assert!((m0.0 / m0.1 / 1.0 - 1.0).abs() < 0.05);
        assert!((m1.0 / m1.1 / 2.0 - 1.0).abs() < 0.05);

        let again = sensing_sample(&p, rows, 3).unwrap();
        assert_eq!(s.sensors[0].raw, again.sensors[0].raw);
    }

    #[test]
    fn empirical_model_carries_quantile_masses() {
        let p = GaussianParams::new(1, 0.0).unwrap();
        let rows = 60_000;
        let s = gaussian_sample(&p, rows, 5).unwrap();
        let sel = [StatSelector::Attached, StatSelector::Attached];
        let eb = empirical_model(&s, &sel, 2, 2, ThetaBinning::Quantile(2)).unwrap();
        assert!(eb.model.validate().pass);
        let tol = 3.0 / (rows as f64).sqrt();
        for axis in [Axis::X1, Axis::X2] {
            let marg = eb.model.marginal(&[axis]).unwrap();
            for &m in marg.probs() {
                assert!((m - 0.5).abs() <= tol, "quantile bin carried mass {m}");
            }
        }
        let total: f64 = eb.model.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);

        let tiny = gaussian_sample(&p, 30, 5).unwrap();
        assert!(matches!(
            empirical_model(&tiny, &sel, 2, 2, ThetaBinning::Quantile(2)),
            Err(Error::InsufficientSamples { required: 40, got: 30 })
        ));
    }

    #[test]
    fn empirical_design_sits_above_the_clairvoyant_floor() {
        let p = GaussianParams::new(1, 0.0).unwrap();
        let s = gaussian_sample(&p, 50_000, 0).unwrap();
        let sel = [StatSelector::Attached, StatSelector::Attached];
        let d = empirical_design(
            &s,
            &sel,
            &[16, 16],
            &[2, 2],
            Objective::SquaredError,
            4,
            0,
            &PbpoOpts::default(),
        )
        .unwrap();
        let floor = gaussian_mmse(&p).unwrap();
        assert!(d.risk > floor - 0.01, "risk {} under the floor {floor}", d.risk);
        assert!(d.risk < 1.0);
        assert!(d.converged);
        for w in d.risk_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let again = empirical_design(
            &s,
            &sel,
            &[16, 16],
            &[2, 2],
            Objective::SquaredError,
            4,
            0,
            &PbpoOpts::default(),
        )
        .unwrap();
        assert_eq!(d.risk.to_bits(), again.risk.to_bits());
        assert_eq!(d.sensors[0].map, again.sensors[0].map);
    }

    #[test]
    fn empirical_design_guards_its_inputs() {
        let p = GaussianParams::new(1, 0.0).unwrap();
        let s = gaussian_sample(&p, 500, 0).unwrap();
        let sel = [StatSelector::Attached, StatSelector::Attached];
        assert!(matches!(
            empirical_design(&s, &sel, &[16, 16], &[2, 2], Objective::SquaredError, 4, 0, &PbpoOpts::default()),
            Err(Error::InsufficientSamples { required: 2560, .. })
        ));
        assert!(matches!(
            empirical_design(&s, &sel, &[4, 4], &[2, 2], Objective::ZeroOne, 4, 0, &PbpoOpts::default()),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            empirical_design(&s, &sel[..1], &[4], &[2], Objective::SquaredError, 4, 0, &PbpoOpts::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn closed_form_threshold_matches_the_analytic_minimum() {
        let r = closed_form_threshold(&SensingParams::qpsk()).unwrap();
        // Value comparisons cannot localize a quadratically flat minimum
        // below ~sqrt(eps), so the threshold is looser than the error.
        assert!((r.threshold - 2.0 * std::f64::consts::LN_2).abs() < 1e-6);
        assert!((r.error_probability - 0.375).abs() < 1e-12);
    }

    #[test]
    fn empirical_design_recovers_the_sensing_threshold() {
        let p = SensingParams::qpsk();
        let s = sensing_sample(&p, 150_000, 0).unwrap();
        let d = empirical_design(
            &s,
            &[StatSelector::Attached],
            &[32],
            &[2],
            Objective::ZeroOne,
            6,
            0,
            &PbpoOpts::default(),
        )
        .unwrap();
        assert!((d.risk - 0.375).abs() < 0.015, "risk {}", d.risk);
        assert!(d.se > 0.0 && d.se < 0.005);
    }

    #[test]
    fn sufficiency_witness_accepts_sums_and_flags_projections() {
        let p = GaussianParams::new(2, 0.5).unwrap();
        let s = gaussian_sample(&p, 120_000, 1).unwrap();
        let good = sufficiency_witness(
            &s,
            0,
            StatSelector::Attached,
            StatSelector::RawCoord(0),
            16,
            8,
            ThetaBinning::Quantile(4),
        )
        .unwrap();
        assert!(good.holds, "normalized deviation {}", good.max_deviation);

        let bad = sufficiency_witness(
            &s,
            0,
            StatSelector::RawCoord(0),
            StatSelector::RawCoord(1),
            16,
            8,
            ThetaBinning::Quantile(4),
        )
        .unwrap();
        assert!(!bad.holds, "a one-coordinate projection must lose information");
        assert!(bad.witness.is_some());
    }

    #[test]
    fn hidden_ci_witness_accepts_the_gaussian_chain() {
        let p = GaussianParams::new(2, 0.5).unwrap();
        let s = gaussian_sample(&p, 120_000, 2).unwrap();
        let report = hidden_ci_witness(&s, 16, 6, 6).unwrap();
        assert!(report.holds, "deviation {}", report.max_deviation);

        let one = sensing_sample(&SensingParams::qpsk(), 1_000, 0).unwrap();
        assert!(matches!(
            hidden_ci_witness(&one, 4, 4, 4),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn gaussian_report_orders_risks_and_reproduces() {
        let p = GaussianParams::new(2, 0.5).unwrap();
        let csv = std::env::temp_dir().join(format!("suffquant-design-{}.csv", std::process::id()));
        let r = gaussian_report(&p, 60_000, 32, 2, 4, 0, &PbpoOpts::default(), Some(&csv)).unwrap();
        let combined = 3.0 * (r.sufficient.design.se + r.alternative.design.se);
        assert!(r.sufficient.design.risk <= r.alternative.design.risk + combined);
        assert!(r.sufficient.design.risk > r.mmse_sufficient - 0.01);
        assert!(r.alternative.design.risk > r.mmse_alternative - 0.01);
        assert!((r.posterior_slope_mc / r.posterior_slope_formula - 1.0).abs() < 0.02);
        assert!(r.sufficiency_check.holds);
        assert!(r.hidden_ci_check.holds);

        let text = std::fs::read_to_string(&csv).unwrap();
        std::fs::remove_file(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("statistic_1,level_1,statistic_2,level_2,estimate"));
        assert_eq!(lines.count(), 60_000);

        let again = gaussian_report(&p, 60_000, 32, 2, 4, 0, &PbpoOpts::default(), None).unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn sensing_report_attaches_the_closed_form_anchor() {
        let p = SensingParams::qpsk();
        let r = sensing_report(&p, 120_000, 32, 2, 4, 0, &PbpoOpts::default(), None).unwrap();
        let anchor = r.closed_form.expect("single sensor at two levels");
        assert!((anchor.error_probability - 0.375).abs() < 1e-12);
        assert!((r.sufficient.design.risk - 0.375).abs() < 0.015);
        assert!(
            r.sufficient.design.risk
                <= r.alternative.design.risk + 3.0 * (r.sufficient.design.se + r.alternative.design.se)
        );
        assert!(r.sufficiency_check.holds);
        assert!(r.hidden_ci_check.is_none());
    }
}
