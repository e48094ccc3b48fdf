//! Randomized verification suites for the reduction and design claims.
//!
//! Each suite draws models from seeded recipes, applies the claimed
//! reduction, and compares exact minimum risks or posterior checks. Model
//! generators plant proportional likelihood profiles: symbols in the same
//! planted class share their posterior exactly, so minimal statistics are
//! coarse and the suites exercise genuine reductions instead of passing
//! vacuously on identity statistics.
//!
//! Trials are independent and run in parallel; per-trial seeds derive from
//! the suite seed by counter, so reports are reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Alphabet, Axis, CostMatrix, DiscreteModel, Side, Statistic};
use crate::quantizer::{exhaustive_search, LabelingIter, SearchDomain};
use crate::rng::derive_seed;
use crate::sufficiency::{
    conditional_independence, factorization_check, hci_from_factorization, is_global_sufficient,
    minimal_sufficient, posterior_match, validate_hci, EPS_CHECK,
};
use crate::{Error, Result};

/// Tolerance for declaring two exact minimum risks equal.
pub const EPS_EQ: f64 = 1e-9;

/// Structural family a random model is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeKind {
    /// Unstructured joint over the named axes.
    Generic,
    /// Sensors conditionally independent given the parameter.
    Ci,
    /// Sensors conditionally independent given a hidden variable that
    /// carries all parameter dependence.
    Hci,
    /// Both sensors observe the same value.
    Degenerate,
}

/// A seeded request for one random model.
#[derive(Debug, Clone)]
pub struct ModelRecipe {
    /// Structural family.
    pub kind: RecipeKind,
    /// Parameter alphabet size.
    pub theta: usize,
    /// Hidden alphabet size; required for `Hci`, optional for `Generic`.
    pub w: Option<usize>,
    /// Sensor 1 alphabet size.
    pub x1: usize,
    /// Sensor 2 alphabet size; ignored by `Degenerate`, which copies x1.
    pub x2: usize,
    /// When true every admissible probability is bounded away from zero;
    /// otherwise entries may vanish.
    pub positive: bool,
    /// Generator seed.
    pub seed: u64,
}

fn unit(rng: &mut ChaCha8Rng, positive: bool) -> f64 {
    let u: f64 = rng.gen();
    if positive {
        0.01 + 0.99 * u
    } else if rng.gen::<f64>() < 0.15 {
        0.0
    } else {
        u
    }
}

fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| 0.05 + 0.95 * rng.gen::<f64>()).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

/// Draws a kernel whose children fall into `k` planted classes: within a
/// class, every child's likelihood column is proportional across parents,
/// so posteriors coincide exactly. Returns the kernel and class labels.
fn planted_kernel(
    rng: &mut ChaCha8Rng,
    parents: usize,
    children: usize,
    positive: bool,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let k = rng.gen_range(1..=children);
    let classes: Vec<usize> = (0..children).map(|_| rng.gen_range(0..k)).collect();
    let mut profiles = vec![vec![0.0; parents]; k];
    for p in &mut profiles {
        loop {
            for v in p.iter_mut() {
                *v = unit(rng, positive);
            }
            if p.iter().sum::<f64>() > 0.0 {
                break;
            }
        }
    }
    let weights: Vec<f64> = (0..children).map(|_| 0.05 + 0.95 * rng.gen::<f64>()).collect();
    let mut kernel = vec![vec![0.0; children]; parents];
    for t in 0..parents {
        let mut sum = 0.0;
        for x in 0..children {
            let v = profiles[classes[x]][t] * weights[x];
            kernel[t][x] = v;
            sum += v;
        }
        if sum <= 0.0 {
            // Some parent sees no mass at all; start over.
            return planted_kernel(rng, parents, children, positive);
        }
        for x in 0..children {
            kernel[t][x] /= sum;
        }
    }
    (kernel, classes)
}

fn plain_kernel(
    rng: &mut ChaCha8Rng,
    parents: usize,
    children: usize,
    positive: bool,
) -> Vec<Vec<f64>> {
    (0..parents)
        .map(|_| loop {
            let mut row: Vec<f64> = (0..children).map(|_| unit(rng, positive)).collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                for v in &mut row {
                    *v /= s;
                }
                break row;
            }
        })
        .collect()
}

/// Draws a model from a recipe. Same recipe, same model.
pub fn random_model(recipe: &ModelRecipe) -> Result<DiscreteModel> {
    let needs_x2 = recipe.kind != RecipeKind::Degenerate;
    if recipe.theta < 1 || recipe.x1 < 1 || (needs_x2 && recipe.x2 < 1) {
        return Err(Error::InvalidParameter(
            "alphabet sizes must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    match recipe.kind {
        RecipeKind::Generic => {
            let nt = recipe.theta;
            let nw = recipe.w.unwrap_or(0);
            let n1 = recipe.x1;
            let n2 = recipe.x2;
            let cells = nt * nw.max(1) * n1 * n2;
            let mut p: Vec<f64> = (0..cells).map(|_| unit(&mut rng, recipe.positive)).collect();
            let s: f64 = p.iter().sum();
            if s <= 0.0 {
                return Err(Error::DegenerateModel("drew an all-zero joint".into()));
            }
            for v in &mut p {
                *v /= s;
            }
            DiscreteModel::from_joint(
                Alphabet::numbered(nt),
                (nw > 0).then(|| Alphabet::prefixed("w", nw)),
                Alphabet::numbered(n1),
                Alphabet::numbered(n2),
                p,
            )
        }
        RecipeKind::Ci => {
            let prior = random_prior(&mut rng, recipe.theta);
            let (k1, _) = planted_kernel(&mut rng, recipe.theta, recipe.x1, recipe.positive);
            let (k2, _) = planted_kernel(&mut rng, recipe.theta, recipe.x2, recipe.positive);
            DiscreteModel::from_ci_factors(
                Alphabet::numbered(recipe.theta),
                &prior,
                Alphabet::numbered(recipe.x1),
                &k1,
                Alphabet::numbered(recipe.x2),
                &k2,
            )
        }
        RecipeKind::Hci => {
            let nw = recipe.w.ok_or(Error::MissingHiddenAxis)?;
            let prior = random_prior(&mut rng, recipe.theta);
            let kw = plain_kernel(&mut rng, recipe.theta, nw, recipe.positive);
            let (k1, _) = planted_kernel(&mut rng, nw, recipe.x1, recipe.positive);
            let (k2, _) = planted_kernel(&mut rng, nw, recipe.x2, recipe.positive);
            DiscreteModel::from_hci_factors(
                Alphabet::numbered(recipe.theta),
                &prior,
                Alphabet::prefixed("w", nw),
                &kw,
                Alphabet::numbered(recipe.x1),
                &k1,
                Alphabet::numbered(recipe.x2),
                &k2,
            )
        }
        RecipeKind::Degenerate => {
            let n = recipe.x1;
            let prior = random_prior(&mut rng, recipe.theta);
            let (k, _) = planted_kernel(&mut rng, recipe.theta, n, recipe.positive);
            let mut p = vec![0.0; recipe.theta * n * n];
            for (t, pt) in prior.iter().enumerate() {
                for a in 0..n {
                    p[(t * n + a) * n + a] = pt * k[t][a];
                }
            }
            DiscreteModel::from_joint(
                Alphabet::numbered(recipe.theta),
                None,
                Alphabet::numbered(n),
                Alphabet::numbered(n),
                p,
            )
        }
    }
}

/// One minimum-risk comparison: raw alphabets against reduced statistics.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRecord {
    /// Exact minimum risk over raw quantizers.
    pub r_raw: f64,
    /// Exact minimum risk over quantizers of the statistics.
    pub r_stat: f64,
    /// `r_stat - r_raw`.
    pub gap: f64,
    /// True when the gap is within [`EPS_EQ`].
    pub pass: bool,
}

/// Compares exact minimum risks with and without reducing to `(t1, t2)`.
pub fn verify_equivalence(
    m: &DiscreteModel,
    cost: &CostMatrix,
    t1: &Statistic,
    t2: &Statistic,
    l1: usize,
    l2: usize,
    budget: Option<u128>,
) -> Result<EquivalenceRecord> {
    let raw = exhaustive_search(m, cost, l1, l2, SearchDomain::Raw, budget)?;
    let stat = exhaustive_search(m, cost, l1, l2, SearchDomain::Statistics(t1, t2), budget)?;
    let gap = stat.min_risk - raw.min_risk;
    Ok(EquivalenceRecord {
        r_raw: raw.min_risk,
        r_stat: stat.min_risk,
        gap,
        pass: gap.abs() <= EPS_EQ,
    })
}

/// Identifier of one verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(missing_docs)]
pub enum SuiteId {
    CentralizedReduction,
    CiReduction,
    HiddenCiReduction,
    FactorizedReduction,
    LocalGlobalEquivalence,
    FactorizationAsHiddenCi,
    HiddenCiGlobalSufficiency,
    OneSidedCopy,
    NaiveReductionCounterexample,
    OptimalWithoutSufficiency,
    SharedObservation,
    IndependenceCalculus,
}

impl SuiteId {
    /// Every suite, in reporting order.
    pub const ALL: [SuiteId; 12] = [
        SuiteId::CentralizedReduction,
        SuiteId::CiReduction,
        SuiteId::HiddenCiReduction,
        SuiteId::FactorizedReduction,
        SuiteId::LocalGlobalEquivalence,
        SuiteId::FactorizationAsHiddenCi,
        SuiteId::HiddenCiGlobalSufficiency,
        SuiteId::OneSidedCopy,
        SuiteId::NaiveReductionCounterexample,
        SuiteId::OptimalWithoutSufficiency,
        SuiteId::SharedObservation,
        SuiteId::IndependenceCalculus,
    ];

    /// Stable identifier used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            SuiteId::CentralizedReduction => "centralized-reduction",
            SuiteId::CiReduction => "ci-reduction",
            SuiteId::HiddenCiReduction => "hidden-ci-reduction",
            SuiteId::FactorizedReduction => "factorized-reduction",
            SuiteId::LocalGlobalEquivalence => "local-global-equivalence",
            SuiteId::FactorizationAsHiddenCi => "factorization-as-hidden-ci",
            SuiteId::HiddenCiGlobalSufficiency => "hidden-ci-global-sufficiency",
            SuiteId::OneSidedCopy => "one-sided-copy",
            SuiteId::NaiveReductionCounterexample => "naive-reduction-counterexample",
            SuiteId::OptimalWithoutSufficiency => "optimal-without-sufficiency",
            SuiteId::SharedObservation => "shared-observation",
            SuiteId::IndependenceCalculus => "independence-calculus",
        }
    }

    /// Parses a suite name as used on the command line.
    pub fn parse(s: &str) -> Result<SuiteId> {
        SuiteId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = SuiteId::ALL.iter().map(|id| id.name()).collect();
                Error::InvalidParameter(format!(
                    "unknown suite {s:?}; expected one of {names:?}"
                ))
            })
    }
}

impl std::fmt::Display for SuiteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Upper bounds on drawn alphabet sizes (each draw is uniform from 2 up
/// to the bound; suites may pin individual axes).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SizeBounds {
    /// Largest parameter alphabet.
    pub theta_max: usize,
    /// Largest hidden alphabet.
    pub w_max: usize,
    /// Largest sensor-1 alphabet.
    pub x1_max: usize,
    /// Largest sensor-2 alphabet.
    pub x2_max: usize,
}

impl Default for SizeBounds {
    fn default() -> SizeBounds {
        SizeBounds {
            theta_max: 3,
            w_max: 3,
            x1_max: 6,
            x2_max: 5,
        }
    }
}

/// Configuration shared by all suites.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuiteConfig {
    /// Independent trials to run.
    pub trials: usize,
    /// Master seed; trial `i` derives its own stream from it.
    pub seed: u64,
    /// Alphabet size bounds.
    pub bounds: SizeBounds,
    /// Level caps `(l1, l2)` for risk comparisons.
    pub levels: (usize, usize),
    /// Draw strictly positive models. Suites whose claims require
    /// positivity enforce it regardless.
    pub positive: bool,
}

impl Default for SuiteConfig {
    fn default() -> SuiteConfig {
        SuiteConfig {
            trials: 120,
            seed: 0,
            bounds: SizeBounds::default(),
            levels: (2, 2),
            positive: true,
        }
    }
}

/// One failed trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialFailure {
    /// Trial index within the suite.
    pub trial: usize,
    /// The trial's derived seed, sufficient to reproduce it alone.
    pub seed: u64,
    /// The gap or deviation that broke the claim.
    pub gap: f64,
    /// Which check failed and how.
    pub message: String,
}

/// Aggregated outcome of one suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    /// Suite name.
    pub id: String,
    /// Trials run.
    pub trials: usize,
    /// Trials whose checks all held.
    pub passes: usize,
    /// Every failed trial with its reproduction seed.
    pub failures: Vec<TrialFailure>,
    /// Largest absolute risk gap or posterior deviation seen.
    pub max_gap: f64,
    /// Per-trial `(raw, reduced)` minimum risks, for suites that compare
    /// risks.
    pub risk_pairs: Vec<(f64, f64)>,
    /// For the optimality-without-sufficiency suite: trials whose optimal
    /// quantizer was not a sufficient statistic. The suite requires at
    /// least one such trial, otherwise it proved nothing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample_hits: Option<usize>,
    /// Overall verdict.
    pub passed: bool,
    /// The master seed the suite ran under.
    pub seed: u64,
}

impl SuiteReport {
    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        let extra = match self.counterexample_hits {
            Some(h) => format!("; {h} optimal-but-insufficient quantizers"),
            None => String::new(),
        };
        format!(
            "suite {}: {}/{} trials passed; max gap {:.3e}{}; verdict {}",
            self.id,
            self.passes,
            self.trials,
            self.max_gap,
            extra,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

struct TrialOutcome {
    pass: bool,
    gap: f64,
    message: Option<String>,
    risks: Option<(f64, f64)>,
    hit: bool,
}

impl TrialOutcome {
    fn ok(gap: f64, risks: Option<(f64, f64)>) -> TrialOutcome {
        TrialOutcome {
            pass: true,
            gap,
            message: None,
            risks,
            hit: false,
        }
    }

    fn fail(gap: f64, risks: Option<(f64, f64)>, message: String) -> TrialOutcome {
        TrialOutcome {
            pass: false,
            gap,
            message: Some(message),
            risks,
            hit: false,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, max: usize) -> usize {
    rng.gen_range(2..=max.max(2))
}

/// Runs one verification suite.
pub fn theorem_suite(id: SuiteId, cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("a suite needs at least one trial".into()));
    }
    if cfg.levels.0 == 0 || cfg.levels.1 == 0 {
        return Err(Error::InvalidParameter("level caps must be at least 1".into()));
    }
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(id, cfg, trial))
        .collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let mut risk_pairs = Vec::new();
    let mut max_gap = 0.0f64;
    let mut passes = 0;
    let mut hits = 0;
    for (trial, out) in outcomes.iter().enumerate() {
        max_gap = max_gap.max(out.gap.abs());
        if let Some(r) = out.risks {
            risk_pairs.push(r);
        }
        if out.hit {
            hits += 1;
        }
        if out.pass {
            passes += 1;
        } else {
            failures.push(TrialFailure {
                trial,
                seed: derive_seed(cfg.seed, trial as u64),
                gap: out.gap,
                message: out.message.clone().unwrap_or_default(),
            });
        }
    }
    let counterexample_hits = (id == SuiteId::OptimalWithoutSufficiency).then_some(hits);
    let passed = failures.is_empty() && counterexample_hits.is_none_or(|h| h >= 1);
    Ok(SuiteReport {
        id: id.name().into(),
        trials: cfg.trials,
        passes,
        failures,
        max_gap,
        risk_pairs,
        counterexample_hits,
        passed,
        seed: cfg.seed,
    })
}

/// Runs every suite in order.
pub fn all_suites(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    SuiteId::ALL.iter().map(|&id| theorem_suite(id, cfg)).collect()
}

fn run_trial(id: SuiteId, cfg: &SuiteConfig, trial: usize) -> Result<TrialOutcome> {
    let trial_seed = derive_seed(cfg.seed, trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    match id {
        SuiteId::CentralizedReduction => trial_centralized(cfg, &mut rng),
        SuiteId::CiReduction => trial_ci(cfg, &mut rng),
        SuiteId::HiddenCiReduction => trial_hidden_ci(cfg, &mut rng),
        SuiteId::FactorizedReduction => trial_factorized(cfg, &mut rng),
        SuiteId::LocalGlobalEquivalence => trial_local_global(cfg, &mut rng),
        SuiteId::FactorizationAsHiddenCi => trial_factorization_as_hci(cfg, &mut rng),
        SuiteId::HiddenCiGlobalSufficiency => trial_hci_global(cfg, &mut rng),
        SuiteId::OneSidedCopy => trial_one_sided_copy(cfg, &mut rng),
        SuiteId::NaiveReductionCounterexample => trial_naive_counterexample(cfg),
        SuiteId::OptimalWithoutSufficiency => trial_optimal_without_sufficiency(cfg, &mut rng),
        SuiteId::SharedObservation => trial_shared_observation(cfg, &mut rng),
        SuiteId::IndependenceCalculus => trial_independence_calculus(cfg, &mut rng),
    }
}

fn equivalence_outcome(
    m: &DiscreteModel,
    t1: &Statistic,
    t2: &Statistic,
    levels: (usize, usize),
    label: &str,
) -> Result<TrialOutcome> {
    let cost = CostMatrix::zero_one(m.theta());
    let rec = verify_equivalence(m, &cost, t1, t2, levels.0, levels.1, None)?;
    let risks = Some((rec.r_raw, rec.r_stat));
    Ok(if rec.pass {
        TrialOutcome::ok(rec.gap, risks)
    } else {
        TrialOutcome::fail(
            rec.gap,
            risks,
            format!(
                "{label}: reduced minimum risk {} exceeds raw minimum {} beyond tolerance",
                rec.r_stat, rec.r_raw
            ),
        )
    })
}

/// Single informative sensor: reducing it to its minimal sufficient
/// statistic must not change the exact minimum risk.
fn trial_centralized(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let recipe = ModelRecipe {
        kind: RecipeKind::Ci,
        theta: draw(rng, cfg.bounds.theta_max),
        w: None,
        x1: draw(rng, cfg.bounds.x1_max),
        x2: 1,
        positive: cfg.positive,
        seed: rng.gen(),
    };
    let m = random_model(&recipe)?;
    let t1 = minimal_sufficient(&m, Side::One, Axis::Theta, EPS_CHECK)?;
    let t2 = Statistic::identity(Side::Two, m.x2());
    equivalence_outcome(&m, &t1, &t2, (cfg.levels.0, 1), "centralized reduction")
}

/// Conditionally independent sensors: reducing both to their minimal
/// sufficient statistics must preserve the exact minimum risk.
fn trial_ci(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let recipe = ModelRecipe {
        kind: RecipeKind::Ci,
        theta: draw(rng, cfg.bounds.theta_max),
        w: None,
        x1: draw(rng, cfg.bounds.x1_max),
        x2: draw(rng, cfg.bounds.x2_max),
        positive: cfg.positive,
        seed: rng.gen(),
    };
    let m = random_model(&recipe)?;
    let t1 = minimal_sufficient(&m, Side::One, Axis::Theta, EPS_CHECK)?;
    let t2 = minimal_sufficient(&m, Side::Two, Axis::Theta, EPS_CHECK)?;
    equivalence_outcome(&m, &t1, &t2, cfg.levels, "conditional independence reduction")
}

fn hci_recipe(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> ModelRecipe {
    ModelRecipe {
        kind: RecipeKind::Hci,
        theta: draw(rng, cfg.bounds.theta_max),
        w: Some(draw(rng, cfg.bounds.w_max)),
        x1: draw(rng, cfg.bounds.x1_max),
        x2: draw(rng, cfg.bounds.x2_max),
        positive: cfg.positive,
        seed: rng.gen(),
    }
}

/// Hidden-variable chain: statistics sufficient for the hidden variable
/// are globally sufficient for the parameter and preserve the minimum.
fn trial_hidden_ci(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let m = random_model(&hci_recipe(cfg, rng))?;
    let t1 = minimal_sufficient(&m, Side::One, Axis::W, EPS_CHECK)?;
    let t2 = minimal_sufficient(&m, Side::Two, Axis::W, EPS_CHECK)?;
    let global = is_global_sufficient(&m, &t1, &t2, Axis::Theta, EPS_CHECK)?;
    if !global.holds {
        return Ok(TrialOutcome::fail(
            global.max_deviation,
            None,
            "statistics sufficient for the hidden variable failed global sufficiency".into(),
        ));
    }
    let mut out = equivalence_outcome(&m, &t1, &t2, cfg.levels, "hidden-variable reduction")?;
    out.gap = out.gap.max(global.max_deviation);
    Ok(out)
}

/// Builds a joint that splits as `g(x1) f(class(x1), theta, x2)` with a
/// non-injective class map, plus the class statistic.
fn planted_split(
    rng: &mut ChaCha8Rng,
    nt: usize,
    n1: usize,
    n2: usize,
    positive: bool,
) -> Result<(DiscreteModel, Statistic)> {
    let k = rng.gen_range(1..n1.max(2));
    let classes: Vec<usize> = loop {
        let c: Vec<usize> = (0..n1).map(|_| rng.gen_range(0..k)).collect();
        let mut used = vec![false; k];
        for &v in &c {
            used[v] = true;
        }
        if used.iter().all(|&u| u) {
            break c;
        }
    };
    let mut g: Vec<f64> = (0..n1).map(|_| 0.05 + 0.95 * rng.gen::<f64>()).collect();
    let gs: f64 = g.iter().sum();
    for v in &mut g {
        *v /= gs;
    }
    let f: Vec<Vec<f64>> = (0..k)
        .map(|_| loop {
            let mut row: Vec<f64> = (0..nt * n2).map(|_| unit(rng, positive)).collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                for v in &mut row {
                    *v /= s;
                }
                break row;
            }
        })
        .collect();
    let mut p = vec![0.0; nt * n1 * n2];
    for t in 0..nt {
        for a in 0..n1 {
            for b in 0..n2 {
                p[(t * n1 + a) * n2 + b] = g[a] * f[classes[a]][t * n2 + b];
            }
        }
    }
    let m = DiscreteModel::from_joint(
        Alphabet::numbered(nt),
        None,
        Alphabet::numbered(n1),
        Alphabet::numbered(n2),
        p,
    )?;
    let t1 = Statistic::from_levels(Side::One, m.x1(), &classes)?;
    Ok((m, t1))
}

/// Planted split form: the class statistic passes the factorization check
/// and quantizing it side by side with the raw second sensor is lossless.
fn trial_factorized(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let nt = draw(rng, cfg.bounds.theta_max);
    let n1 = draw(rng, cfg.bounds.x1_max).max(3);
    let n2 = draw(rng, cfg.bounds.x2_max);
    let (m, t1) = planted_split(rng, nt, n1, n2, cfg.positive)?;
    let (report, factors) = factorization_check(&m, &t1, EPS_CHECK)?;
    if !report.holds || factors.is_none() {
        return Ok(TrialOutcome::fail(
            report.max_deviation,
            None,
            "planted split form failed the factorization check".into(),
        ));
    }
    let t2 = Statistic::identity(Side::Two, m.x2());
    let mut out = equivalence_outcome(&m, &t1, &t2, cfg.levels, "split-form reduction")?;
    out.gap = out.gap.max(report.max_deviation);
    Ok(out)
}

/// On strictly positive conditionally independent models, a pair of
/// statistics is globally sufficient exactly when each is locally
/// sufficient. Checked over every canonical partition pair.
fn trial_local_global(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let recipe = ModelRecipe {
        kind: RecipeKind::Ci,
        theta: draw(rng, cfg.bounds.theta_max),
        w: None,
        x1: draw(rng, cfg.bounds.x1_max.min(5)),
        x2: draw(rng, cfg.bounds.x2_max.min(5)),
        // The claim's reverse direction needs strict positivity.
        positive: true,
        seed: rng.gen(),
    };
    let m = random_model(&recipe)?;
    let n1 = m.x1().len();
    let n2 = m.x2().len();
    let side1: Vec<Statistic> = LabelingIter::new(n1, n1)?
        .map(|lv| {
            let lv: Vec<usize> = lv.iter().map(|&v| v as usize).collect();
            Statistic::from_levels(Side::One, m.x1(), &lv)
        })
        .collect::<Result<_>>()?;
    let side2: Vec<Statistic> = LabelingIter::new(n2, n2)?
        .map(|lv| {
            let lv: Vec<usize> = lv.iter().map(|&v| v as usize).collect();
            Statistic::from_levels(Side::Two, m.x2(), &lv)
        })
        .collect::<Result<_>>()?;
    let local1: Vec<bool> = side1
        .iter()
        .map(|t| Ok(posterior_match(&m, t, Axis::Theta, EPS_CHECK)?.holds))
        .collect::<Result<_>>()?;
    let local2: Vec<bool> = side2
        .iter()
        .map(|t| Ok(posterior_match(&m, t, Axis::Theta, EPS_CHECK)?.holds))
        .collect::<Result<_>>()?;
    let mut max_dev = 0.0f64;
    for (i, t1) in side1.iter().enumerate() {
        for (j, t2) in side2.iter().enumerate() {
            let g = is_global_sufficient(&m, t1, t2, Axis::Theta, EPS_CHECK)?;
            max_dev = max_dev.max(g.max_deviation.min(1.0));
            if g.holds != (local1[i] && local2[j]) {
                return Ok(TrialOutcome::fail(
                    g.max_deviation,
                    None,
                    format!(
                        "partition pair ({i}, {j}): global sufficiency {} but locals are ({}, {})",
                        g.holds, local1[i], local2[j]
                    ),
                ));
            }
        }
    }
    Ok(TrialOutcome::ok(0.0, None))
}

/// The split form and the hidden-variable route agree: materializing
/// `w = (class(x1), x2)` yields valid chains, the class statistic stays
/// locally sufficient for the hidden variable, and risks match.
fn trial_factorization_as_hci(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let nt = draw(rng, cfg.bounds.theta_max);
    let n1 = draw(rng, cfg.bounds.x1_max).max(3);
    let n2 = draw(rng, cfg.bounds.x2_max);
    let (m, t1) = planted_split(rng, nt, n1, n2, cfg.positive)?;
    let h = hci_from_factorization(&m, &t1, EPS_CHECK)?;
    let outcome = validate_hci(&h, EPS_CHECK)?;
    if !outcome.is_valid() {
        let dev = outcome
            .chain_a()
            .max_deviation
            .max(outcome.chain_b().max_deviation);
        return Ok(TrialOutcome::fail(
            dev,
            None,
            "materialized hidden variable violates its own chains".into(),
        ));
    }
    let local = posterior_match(&h, &t1, Axis::W, EPS_CHECK)?;
    if !local.holds {
        return Ok(TrialOutcome::fail(
            local.max_deviation,
            None,
            "class statistic lost local sufficiency for the materialized hidden variable".into(),
        ));
    }
    let t2 = Statistic::identity(Side::Two, h.x2());
    let mut out = equivalence_outcome(&h, &t1, &t2, cfg.levels, "hidden-variable route")?;
    out.gap = out.gap.max(local.max_deviation);
    Ok(out)
}

/// Hidden-variable chain, sufficiency only: statistics sufficient for the
/// hidden variable are globally sufficient for the parameter.
fn trial_hci_global(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let m = random_model(&hci_recipe(cfg, rng))?;
    let t1 = minimal_sufficient(&m, Side::One, Axis::W, EPS_CHECK)?;
    let t2 = minimal_sufficient(&m, Side::Two, Axis::W, EPS_CHECK)?;
    let global = is_global_sufficient(&m, &t1, &t2, Axis::Theta, EPS_CHECK)?;
    Ok(if global.holds {
        TrialOutcome::ok(global.max_deviation, None)
    } else {
        TrialOutcome::fail(
            global.max_deviation,
            None,
            "hidden-variable sufficiency did not transfer to the parameter".into(),
        )
    })
}

/// Both sensors see the same value: keeping one sensor raw and collapsing
/// the other is globally sufficient even though the collapsed side alone
/// is not locally sufficient.
fn trial_one_sided_copy(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    // The collapsed side must actually carry information for the local
    // check to be non-vacuous; redraw until the copied sensor does.
    let mut m = None;
    for _ in 0..64 {
        let recipe = ModelRecipe {
            kind: RecipeKind::Degenerate,
            theta: draw(rng, cfg.bounds.theta_max),
            w: None,
            x1: draw(rng, cfg.bounds.x1_max),
            x2: 0,
            positive: cfg.positive,
            seed: rng.gen(),
        };
        let cand = random_model(&recipe)?;
        let minimal = minimal_sufficient(&cand, Side::Two, Axis::Theta, EPS_CHECK)?;
        if minimal.class_count() >= 2 {
            m = Some(cand);
            break;
        }
    }
    let m = m.ok_or_else(|| {
        Error::DegenerateModel("could not draw an informative shared observation".into())
    })?;
    let t1 = Statistic::identity(Side::One, m.x1());
    let t2 = Statistic::constant(Side::Two, m.x2());
    let global = is_global_sufficient(&m, &t1, &t2, Axis::Theta, EPS_CHECK)?;
    if !global.holds {
        return Ok(TrialOutcome::fail(
            global.max_deviation,
            None,
            "identity plus constant failed global sufficiency on a shared observation".into(),
        ));
    }
    let local = posterior_match(&m, &t2, Axis::Theta, EPS_CHECK)?;
    Ok(if local.holds {
        TrialOutcome::fail(
            local.max_deviation,
            None,
            "constant statistic was unexpectedly locally sufficient".into(),
        )
    } else {
        TrialOutcome::ok(global.max_deviation, None)
    })
}

/// Fixed counterexample: with two exact copies of a uniform four-valued
/// parameter, two binary quantizers recover it exactly, but reducing one
/// sensor to a sufficient statistic and the other to a constant (each a
/// lossless pair on its own side) forfeits half the mass.
fn trial_naive_counterexample(_cfg: &SuiteConfig) -> Result<TrialOutcome> {
    let mut p = vec![0.0; 64];
    for t in 0..4 {
        p[(t * 4 + t) * 4 + t] = 0.25;
    }
    let m = DiscreteModel::from_joint(
        Alphabet::numbered(4),
        None,
        Alphabet::numbered(4),
        Alphabet::numbered(4),
        p,
    )?;
    let cost = CostMatrix::zero_one(m.theta());
    let raw = exhaustive_search(&m, &cost, 2, 2, SearchDomain::Raw, None)?;
    let t1 = Statistic::identity(Side::One, m.x1());
    let t2 = Statistic::constant(Side::Two, m.x2());
    let reduced = exhaustive_search(&m, &cost, 2, 2, SearchDomain::Statistics(&t1, &t2), None)?;
    let dev = raw.min_risk.abs().max((reduced.min_risk - 0.5).abs());
    Ok(if dev <= 1e-12 {
        let mut out = TrialOutcome::ok(dev, Some((raw.min_risk, reduced.min_risk)));
        out.gap = reduced.min_risk - raw.min_risk;
        out
    } else {
        TrialOutcome::fail(
            dev,
            Some((raw.min_risk, reduced.min_risk)),
            format!(
                "expected raw 0 and reduced 0.5, got {} and {}",
                raw.min_risk, reduced.min_risk
            ),
        )
    })
}

/// The optimal quantizer, viewed as a statistic, always preserves the
/// minimum even when it is not sufficient. The suite must also observe at
/// least one optimal-but-insufficient quantizer overall.
fn trial_optimal_without_sufficiency(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let recipe = ModelRecipe {
        kind: RecipeKind::Ci,
        theta: draw(rng, cfg.bounds.theta_max),
        w: None,
        x1: draw(rng, cfg.bounds.x1_max).max(3),
        x2: draw(rng, cfg.bounds.x2_max),
        positive: cfg.positive,
        seed: rng.gen(),
    };
    let m = random_model(&recipe)?;
    let cost = CostMatrix::zero_one(m.theta());
    let raw = exhaustive_search(&m, &cost, cfg.levels.0, cfg.levels.1, SearchDomain::Raw, None)?;
    let t1 = raw.quantizer1.as_statistic();
    let t2 = Statistic::identity(Side::Two, m.x2());
    let reduced = exhaustive_search(
        &m,
        &cost,
        cfg.levels.0,
        cfg.levels.1,
        SearchDomain::Statistics(&t1, &t2),
        None,
    )?;
    let gap = reduced.min_risk - raw.min_risk;
    let sufficient = posterior_match(&m, &t1, Axis::Theta, EPS_CHECK)?.holds;
    let mut out = if gap.abs() <= EPS_EQ {
        TrialOutcome::ok(gap, Some((raw.min_risk, reduced.min_risk)))
    } else {
        TrialOutcome::fail(
            gap,
            Some((raw.min_risk, reduced.min_risk)),
            "quantizing through the optimal quantizer changed the minimum risk".into(),
        )
    };
    out.hit = !sufficient;
    Ok(out)
}

/// Both sensors see the same value: every pair of locally sufficient
/// reductions preserves the exact minimum, even though the model is not
/// conditionally independent. All sufficient partitions are enumerated,
/// so the sensor alphabet is kept small enough to cover every pair.
fn trial_shared_observation(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let recipe = ModelRecipe {
        kind: RecipeKind::Degenerate,
        theta: draw(rng, cfg.bounds.theta_max),
        w: None,
        x1: draw(rng, cfg.bounds.x1_max.min(4)),
        x2: 0,
        positive: cfg.positive,
        seed: rng.gen(),
    };
    let m = random_model(&recipe)?;
    let n = m.x1().len();
    let mut sufficient: Vec<Vec<usize>> = Vec::new();
    for lv in LabelingIter::new(n, n)? {
        let lv: Vec<usize> = lv.iter().map(|&v| v as usize).collect();
        let t = Statistic::from_levels(Side::One, m.x1(), &lv)?;
        if posterior_match(&m, &t, Axis::Theta, EPS_CHECK)?.holds {
            sufficient.push(lv);
        }
    }
    let mut max_gap = 0.0f64;
    let mut risks = None;
    for lv1 in &sufficient {
        for lv2 in &sufficient {
            let t1 = Statistic::from_levels(Side::One, m.x1(), lv1)?;
            let t2 = Statistic::from_levels(Side::Two, m.x2(), lv2)?;
            let cost = CostMatrix::zero_one(m.theta());
            let rec = verify_equivalence(&m, &cost, &t1, &t2, cfg.levels.0, cfg.levels.1, None)?;
            max_gap = max_gap.max(rec.gap.abs());
            risks = Some((rec.r_raw, rec.r_stat));
            if !rec.pass {
                return Ok(TrialOutcome::fail(
                    rec.gap,
                    risks,
                    format!(
                        "sufficient pair {lv1:?} / {lv2:?} changed the minimum from {} to {}",
                        rec.r_raw, rec.r_stat
                    ),
                ));
            }
        }
    }
    Ok(TrialOutcome::ok(max_gap, risks))
}

fn normalized_joint(rng: &mut ChaCha8Rng, cells: usize, positive: bool) -> Vec<f64> {
    loop {
        let mut p: Vec<f64> = (0..cells).map(|_| unit(rng, positive)).collect();
        let s: f64 = p.iter().sum();
        if s > 0.0 {
            for v in &mut p {
                *v /= s;
            }
            return p;
        }
    }
}

/// Conditional-independence calculus on four-axis models: symmetry,
/// decomposition, weak union, and contraction always; intersection on
/// strictly positive models (skipped when the configuration allows
/// zeros, since it can genuinely fail there).
fn trial_independence_calculus(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let nt = draw(rng, cfg.bounds.theta_max.min(4));
    let nw = draw(rng, cfg.bounds.w_max.min(4));
    let n1 = draw(rng, cfg.bounds.x1_max.min(4));
    let n2 = draw(rng, cfg.bounds.x2_max.min(4));
    let theta = Alphabet::numbered(nt);
    let w = Alphabet::prefixed("w", nw);
    let x1 = Alphabet::numbered(n1);
    let x2 = Alphabet::numbered(n2);
    let mut max_dev = 0.0f64;
    let mut check = |report: crate::sufficiency::CheckReport,
                     what: &str|
     -> std::result::Result<(), TrialOutcome> {
        max_dev = max_dev.max(report.max_deviation);
        if report.holds {
            Ok(())
        } else {
            Err(TrialOutcome::fail(
                report.max_deviation,
                None,
                format!("{what} failed"),
            ))
        }
    };

    // Symmetry on an unstructured joint: the verdict and the deviation
    // must not depend on argument order.
    let generic = DiscreteModel::from_joint(
        theta.clone(),
        Some(w.clone()),
        x1.clone(),
        x2.clone(),
        normalized_joint(rng, nt * nw * n1 * n2, cfg.positive),
    )?;
    let ab = conditional_independence(&generic, &[Axis::X1], &[Axis::X2], &[Axis::W], EPS_CHECK)?;
    let ba = conditional_independence(&generic, &[Axis::X2], &[Axis::X1], &[Axis::W], EPS_CHECK)?;
    if ab.holds != ba.holds || ab.max_deviation.to_bits() != ba.max_deviation.to_bits() {
        return Ok(TrialOutcome::fail(
            (ab.max_deviation - ba.max_deviation).abs(),
            None,
            "symmetry: swapping the two sides changed the verdict or deviation".into(),
        ));
    }

    // p(theta) k1(x1|theta) K(w,x2|theta): x1 independent of (w,x2) given
    // theta by construction.
    let prior = random_prior(rng, nt);
    let k1 = plain_kernel(rng, nt, n1, cfg.positive);
    let kjoint = plain_kernel(rng, nt, nw * n2, cfg.positive);
    let mut p = vec![0.0; nt * nw * n1 * n2];
    for t in 0..nt {
        for h in 0..nw {
            for a in 0..n1 {
                for b in 0..n2 {
                    p[((t * nw + h) * n1 + a) * n2 + b] =
                        prior[t] * k1[t][a] * kjoint[t][h * n2 + b];
                }
            }
        }
    }
    let dec = DiscreteModel::from_joint(theta.clone(), Some(w.clone()), x1.clone(), x2.clone(), p)?;
    let full = conditional_independence(&dec, &[Axis::X1], &[Axis::W, Axis::X2], &[Axis::Theta], EPS_CHECK)?;
    let r = check(full, "decomposition antecedent").err();
    if let Some(out) = r {
        return Ok(out);
    }
    for (b_set, name) in [
        (vec![Axis::X2], "decomposition (drop w)"),
        (vec![Axis::W], "decomposition (drop x2)"),
    ] {
        let rep = conditional_independence(&dec, &[Axis::X1], &b_set, &[Axis::Theta], EPS_CHECK)?;
        if let Some(out) = check(rep, name).err() {
            return Ok(out);
        }
    }
    for (given, name) in [
        (vec![Axis::Theta, Axis::W], "weak union (move w)"),
        (vec![Axis::Theta, Axis::X2], "weak union (move x2)"),
    ] {
        let b_set = if given.contains(&Axis::W) {
            vec![Axis::X2]
        } else {
            vec![Axis::W]
        };
        let rep = conditional_independence(&dec, &[Axis::X1], &b_set, &given, EPS_CHECK)?;
        if let Some(out) = check(rep, name).err() {
            return Ok(out);
        }
    }

    // p(theta) k1(x1|theta) kw(w|theta) k2(x2|theta,w): the two
    // antecedents of contraction hold by construction.
    let k1 = plain_kernel(rng, nt, n1, cfg.positive);
    let kw = plain_kernel(rng, nt, nw, cfg.positive);
    let k2 = plain_kernel(rng, nt * nw, n2, cfg.positive);
    let mut p = vec![0.0; nt * nw * n1 * n2];
    for t in 0..nt {
        for h in 0..nw {
            for a in 0..n1 {
                for b in 0..n2 {
                    p[((t * nw + h) * n1 + a) * n2 + b] =
                        prior[t] * k1[t][a] * kw[t][h] * k2[t * nw + h][b];
                }
            }
        }
    }
    let con = DiscreteModel::from_joint(theta.clone(), Some(w.clone()), x1.clone(), x2.clone(), p)?;
    let ante1 = conditional_independence(&con, &[Axis::X1], &[Axis::W], &[Axis::Theta], EPS_CHECK)?;
    let ante2 =
        conditional_independence(&con, &[Axis::X1], &[Axis::X2], &[Axis::Theta, Axis::W], EPS_CHECK)?;
    for (rep, name) in [(ante1, "contraction antecedent 1"), (ante2, "contraction antecedent 2")] {
        if let Some(out) = check(rep, name).err() {
            return Ok(out);
        }
    }
    let conc =
        conditional_independence(&con, &[Axis::X1], &[Axis::W, Axis::X2], &[Axis::Theta], EPS_CHECK)?;
    if let Some(out) = check(conc, "contraction conclusion").err() {
        return Ok(out);
    }

    // q(theta,w,x2) r(x1|theta), strictly positive: both intersection
    // antecedents hold, and positivity licenses the conclusion.
    if cfg.positive {
        let q = normalized_joint(rng, nt * nw * n2, true);
        let r1 = plain_kernel(rng, nt, n1, true);
        let mut p = vec![0.0; nt * nw * n1 * n2];
        for t in 0..nt {
            for h in 0..nw {
                for a in 0..n1 {
                    for b in 0..n2 {
                        p[((t * nw + h) * n1 + a) * n2 + b] =
                            q[(t * nw + h) * n2 + b] * r1[t][a];
                    }
                }
            }
        }
        let int = DiscreteModel::from_joint(theta, Some(w), x1, x2, p)?;
        let ante1 = conditional_independence(
            &int,
            &[Axis::X1],
            &[Axis::W],
            &[Axis::Theta, Axis::X2],
            EPS_CHECK,
        )?;
        let ante2 = conditional_independence(
            &int,
            &[Axis::X1],
            &[Axis::X2],
            &[Axis::Theta, Axis::W],
            EPS_CHECK,
        )?;
        let conc = conditional_independence(
            &int,
            &[Axis::X1],
            &[Axis::W, Axis::X2],
            &[Axis::Theta],
            EPS_CHECK,
        )?;
        for (rep, name) in [
            (ante1, "intersection antecedent 1"),
            (ante2, "intersection antecedent 2"),
            (conc, "intersection conclusion"),
        ] {
            if let Some(out) = check(rep, name).err() {
                return Ok(out);
            }
        }
    }

    Ok(TrialOutcome::ok(max_dev.min(1.0), None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_are_reproducible() {
        let recipe = ModelRecipe {
            kind: RecipeKind::Ci,
            theta: 3,
            w: None,
            x1: 5,
            x2: 4,
            positive: true,
            seed: 99,
        };
        let a = random_model(&recipe).unwrap();
        let b = random_model(&recipe).unwrap();
        assert_eq!(a.probs(), b.probs());
        assert!(a.validate().pass);
    }

    #[test]
    fn planted_classes_make_minimal_statistics_coarse() {
        // Across many seeds, some draw must yield a genuinely coarse yet
        // non-constant minimal statistic, otherwise suites test nothing.
        let mut coarse = 0;
        for seed in 0..40 {
            let recipe = ModelRecipe {
                kind: RecipeKind::Ci,
                theta: 3,
                w: None,
                x1: 6,
                x2: 2,
                positive: true,
                seed,
            };
            let m = random_model(&recipe).unwrap();
            let t = minimal_sufficient(&m, Side::One, Axis::Theta, EPS_CHECK).unwrap();
            if t.class_count() >= 2 && t.class_count() < 6 {
                coarse += 1;
            }
        }
        assert!(coarse >= 10, "only {coarse}/40 draws were coarse");
    }

    #[test]
    fn degenerate_recipe_copies_sensors() {
        let recipe = ModelRecipe {
            kind: RecipeKind::Degenerate,
            theta: 2,
            w: None,
            x1: 4,
            x2: 0,
            positive: true,
            seed: 5,
        };
        let m = random_model(&recipe).unwrap();
        assert_eq!(m.x2().len(), 4);
        for t in 0..2 {
            for a in 0..4 {
                for b in 0..4 {
                    if a != b {
                        assert_eq!(m.prob(t, None, a, b), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn hidden_recipe_satisfies_both_chains() {
        let recipe = ModelRecipe {
            kind: RecipeKind::Hci,
            theta: 2,
            w: Some(3),
            x1: 4,
            x2: 3,
            positive: true,
            seed: 11,
        };
        let m = random_model(&recipe).unwrap();
        assert!(validate_hci(&m, EPS_CHECK).unwrap().is_valid());
    }

    fn quick(trials: usize, seed: u64) -> SuiteConfig {
        SuiteConfig {
            trials,
            seed,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn centralized_suite_passes() {
        let r = theorem_suite(SuiteId::CentralizedReduction, &quick(40, 1)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
        assert_eq!(r.risk_pairs.len(), 40);
    }

    #[test]
    fn ci_suite_passes() {
        let r = theorem_suite(SuiteId::CiReduction, &quick(40, 2)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn hidden_ci_suite_passes() {
        let r = theorem_suite(SuiteId::HiddenCiReduction, &quick(40, 3)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn factorized_suite_passes() {
        let r = theorem_suite(SuiteId::FactorizedReduction, &quick(40, 4)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn local_global_suite_passes() {
        let r = theorem_suite(SuiteId::LocalGlobalEquivalence, &quick(15, 5)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn factorization_as_hci_suite_passes() {
        let r = theorem_suite(SuiteId::FactorizationAsHiddenCi, &quick(30, 6)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn hci_global_suite_passes() {
        let r = theorem_suite(SuiteId::HiddenCiGlobalSufficiency, &quick(40, 7)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn one_sided_copy_suite_passes() {
        let r = theorem_suite(SuiteId::OneSidedCopy, &quick(40, 8)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn naive_counterexample_suite_passes() {
        let r = theorem_suite(SuiteId::NaiveReductionCounterexample, &quick(2, 9)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
        assert_eq!(r.risk_pairs[0], (0.0, 0.5));
    }

    #[test]
    fn optimality_without_sufficiency_finds_counterexamples() {
        let r = theorem_suite(SuiteId::OptimalWithoutSufficiency, &quick(40, 10)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
        assert!(r.counterexample_hits.unwrap() >= 1);
    }

    #[test]
    fn shared_observation_suite_passes() {
        let r = theorem_suite(SuiteId::SharedObservation, &quick(25, 11)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn independence_calculus_suite_passes() {
        let r = theorem_suite(SuiteId::IndependenceCalculus, &quick(40, 12)).unwrap();
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn suites_are_deterministic() {
        let a = theorem_suite(SuiteId::CiReduction, &quick(10, 42)).unwrap();
        let b = theorem_suite(SuiteId::CiReduction, &quick(10, 42)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn suite_names_round_trip() {
        for id in SuiteId::ALL {
            assert_eq!(SuiteId::parse(id.name()).unwrap(), id);
        }
        assert!(SuiteId::parse("nope").is_err());
    }
}
