//! Quantizer design against a joint model and a distortion table.
//!
//! A quantizer is a deterministic map from one sensor's alphabet onto at
//! most `L` levels; a fusion estimator maps level pairs to estimates. Risk
//! is the expected distortion of the fused estimate. Two designers are
//! provided: exhaustive search over canonical labelings (exact, budgeted)
//! and cyclic coordinate descent (fast, locally optimal, restartable).
//!
//! Determinism contract: risks are accumulated in a fixed canonical order,
//! all argmin ties resolve to the lowest index, and parallel reductions
//! compare `(risk, index)` pairs so thread scheduling cannot change any
//! result.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::model::{Alphabet, Axis, CostMatrix, DiscreteModel, Side, Statistic};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Default cap on the number of quantizer pairs an exhaustive search
/// may evaluate.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Default risk-decrease threshold for declaring descent converged.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default cap on descent sweeps.
pub const DEFAULT_MAX_ITER: usize = 200;

/// Default number of descent restarts (one deterministic, the rest seeded).
pub const DEFAULT_RESTARTS: usize = 16;

/// A deterministic map from a sensor alphabet onto at most `levels` values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quantizer {
    side: Side,
    levels: usize,
    map: Vec<usize>,
    domain: Vec<String>,
}

impl Quantizer {
    /// Builds a quantizer, validating the map against the domain and cap.
    pub fn new(side: Side, levels: usize, map: Vec<usize>, domain: &Alphabet) -> Result<Quantizer> {
        if levels == 0 {
            return Err(Error::InvalidParameter("a quantizer needs at least one level".into()));
        }
        if map.len() != domain.len() {
            return Err(Error::AlphabetMismatch(format!(
                "quantizer map covers {} symbols, domain has {}",
                map.len(),
                domain.len()
            )));
        }
        if let Some(&bad) = map.iter().find(|&&u| u >= levels) {
            return Err(Error::InvalidParameter(format!(
                "quantizer output {bad} exceeds the level cap {levels}"
            )));
        }
        Ok(Quantizer {
            side,
            levels,
            map,
            domain: domain.labels().to_vec(),
        })
    }

    /// Views a statistic as a quantizer with as many levels as classes.
    pub fn from_statistic(t: &Statistic) -> Quantizer {
        Quantizer {
            side: t.side(),
            levels: t.class_count(),
            map: t.map().to_vec(),
            domain: t.domain_labels().to_vec(),
        }
    }

    /// The sensor this quantizer reduces.
    pub fn side(&self) -> Side {
        self.side
    }

    /// The level cap the quantizer was designed for.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Level index for domain symbol `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    /// Per-symbol level indices in domain order.
    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// Labels of the expected domain alphabet.
    pub fn domain_labels(&self) -> &[String] {
        &self.domain
    }

    /// Number of distinct levels actually attained.
    pub fn used_levels(&self) -> usize {
        let mut seen = vec![false; self.levels];
        for &u in &self.map {
            seen[u] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// The same partition with levels relabeled by first occurrence, so
    /// equal partitions compare equal.
    pub fn canonical(&self) -> Quantizer {
        let mut first: Vec<usize> = Vec::new();
        let map = self
            .map
            .iter()
            .map(|&u| match first.iter().position(|&f| f == u) {
                Some(i) => i,
                None => {
                    first.push(u);
                    first.len() - 1
                }
            })
            .collect();
        Quantizer {
            side: self.side,
            levels: self.levels,
            map,
            domain: self.domain.clone(),
        }
    }

    /// The quantizer as a statistic over the same domain.
    pub fn as_statistic(&self) -> Statistic {
        let domain = Alphabet::new(self.domain.clone()).expect("quantizer domains are alphabets");
        Statistic::from_levels(self.side, &domain, &self.map).expect("map lengths agree")
    }

    fn check_against(&self, alphabet: &Alphabet, what: &str) -> Result<()> {
        if self.domain != alphabet.labels() {
            return Err(Error::AlphabetMismatch(format!(
                "{what} quantizer domain does not match the model alphabet"
            )));
        }
        Ok(())
    }
}

impl Serialize for Quantizer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let levels: BTreeMap<&str, usize> = self
            .domain
            .iter()
            .map(String::as_str)
            .zip(self.map.iter().copied())
            .collect();
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("side", &self.side)?;
        m.serialize_entry("levels", &self.levels)?;
        m.serialize_entry("map", &levels)?;
        m.end()
    }
}

/// A fusion rule mapping level pairs `(u1, u2)` to estimate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Estimator {
    l1: usize,
    l2: usize,
    map: Vec<usize>,
    estimates: Vec<String>,
}

impl Estimator {
    /// Builds a fusion rule; `map` is row-major over `(u1, u2)`.
    pub fn new(l1: usize, l2: usize, map: Vec<usize>, estimates: Vec<String>) -> Result<Estimator> {
        if map.len() != l1 * l2 {
            return Err(Error::AlphabetMismatch(format!(
                "fusion map covers {} cells, expected {}",
                map.len(),
                l1 * l2
            )));
        }
        if let Some(&bad) = map.iter().find(|&&e| e >= estimates.len()) {
            return Err(Error::InvalidParameter(format!(
                "fusion output {bad} exceeds the estimate alphabet of size {}",
                estimates.len()
            )));
        }
        Ok(Estimator {
            l1,
            l2,
            map,
            estimates,
        })
    }

    /// Level counts `(l1, l2)` the rule expects.
    pub fn shape(&self) -> (usize, usize) {
        (self.l1, self.l2)
    }

    /// Estimate index for the level pair.
    pub fn apply(&self, u1: usize, u2: usize) -> usize {
        self.map[u1 * self.l2 + u2]
    }

    /// Estimate labels indexing the outputs.
    pub fn estimate_labels(&self) -> &[String] {
        &self.estimates
    }
}

impl Serialize for Estimator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<&str>> = (0..self.l1)
            .map(|u1| {
                (0..self.l2)
                    .map(|u2| self.estimates[self.apply(u1, u2)].as_str())
                    .collect()
            })
            .collect();
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("estimates", &self.estimates)?;
        m.serialize_entry("map", &rows)?;
        m.end()
    }
}

/// Flattens the model to `(theta, x1, x2)` probabilities, summing out any
/// hidden axis, and returns the sizes alongside.
fn observable_probs(m: &DiscreteModel) -> Result<(Vec<f64>, usize, usize, usize)> {
    let nt = m.theta().len();
    let n1 = m.x1().len();
    let n2 = m.x2().len();
    let probs = if m.has_w() {
        m.marginal(&[Axis::Theta, Axis::X1, Axis::X2])?.probs().to_vec()
    } else {
        m.probs().to_vec()
    };
    Ok((probs, nt, n1, n2))
}

fn cost_flat(cost: &CostMatrix) -> (Vec<f64>, usize) {
    let ne = cost.n_estimates();
    let nt = cost.theta_labels().len();
    let mut d = Vec::with_capacity(nt * ne);
    for k in 0..nt {
        for e in 0..ne {
            d.push(cost.get(k, e));
        }
    }
    (d, ne)
}

/// Accumulates cell posteriors: `cells[(u1 * l2 + u2) * nt + k]`.
fn cell_weights(
    probs: &[f64],
    nt: usize,
    n1: usize,
    n2: usize,
    q1: &[usize],
    q2: &[usize],
    l2: usize,
    cells: &mut [f64],
) {
    cells.fill(0.0);
    let mut idx = 0;
    for k in 0..nt {
        for a in 0..n1 {
            for b in 0..n2 {
                cells[(q1[a] * l2 + q2[b]) * nt + k] += probs[idx];
                idx += 1;
            }
        }
    }
}

/// Lowest-index argmin of the expected cost of one cell.
fn best_estimate(cell: &[f64], d: &[f64], ne: usize) -> (usize, f64) {
    let mut best_e = 0;
    let mut best_c = f64::INFINITY;
    for e in 0..ne {
        let mut c = 0.0;
        for (k, &w) in cell.iter().enumerate() {
            c += w * d[k * ne + e];
        }
        if c < best_c {
            best_c = c;
            best_e = e;
        }
    }
    (best_e, best_c)
}

fn bayes_map(
    probs: &[f64],
    nt: usize,
    n1: usize,
    n2: usize,
    q1: &[usize],
    q2: &[usize],
    l1: usize,
    l2: usize,
    d: &[f64],
    ne: usize,
    cells: &mut Vec<f64>,
) -> Vec<usize> {
    cells.resize(l1 * l2 * nt, 0.0);
    cell_weights(probs, nt, n1, n2, q1, q2, l2, cells);
    (0..l1 * l2)
        .map(|c| best_estimate(&cells[c * nt..(c + 1) * nt], d, ne).0)
        .collect()
}

/// Risk of the Bayes-optimal fusion for fixed quantizers, without
/// materializing the estimator.
fn bayes_risk(
    probs: &[f64],
    nt: usize,
    n1: usize,
    n2: usize,
    q1: &[usize],
    q2: &[usize],
    l1: usize,
    l2: usize,
    d: &[f64],
    ne: usize,
    cells: &mut Vec<f64>,
) -> f64 {
    cells.resize(l1 * l2 * nt, 0.0);
    cell_weights(probs, nt, n1, n2, q1, q2, l2, cells);
    (0..l1 * l2)
        .map(|c| best_estimate(&cells[c * nt..(c + 1) * nt], d, ne).1)
        .sum()
}

fn risk_of(
    probs: &[f64],
    nt: usize,
    n1: usize,
    n2: usize,
    q1: &[usize],
    q2: &[usize],
    l2: usize,
    h: &[usize],
    d: &[f64],
    ne: usize,
) -> f64 {
    let mut r = 0.0;
    let mut idx = 0;
    for k in 0..nt {
        for a in 0..n1 {
            for b in 0..n2 {
                r += probs[idx] * d[k * ne + h[q1[a] * l2 + q2[b]]];
                idx += 1;
            }
        }
    }
    r
}

/// Expected distortion of `(q1, q2, h)` against the model.
///
/// Summation runs in canonical `(theta, x1, x2)` order, so equal inputs
/// give bitwise-equal risks.
pub fn risk(
    m: &DiscreteModel,
    cost: &CostMatrix,
    q1: &Quantizer,
    q2: &Quantizer,
    h: &Estimator,
) -> Result<f64> {
    cost.check_for(m)?;
    q1.check_against(m.x1(), "side-1")?;
    q2.check_against(m.x2(), "side-2")?;
    if q1.side() != Side::One || q2.side() != Side::Two {
        return Err(Error::InvalidParameter(
            "risk takes a side-1 and a side-2 quantizer, in that order".into(),
        ));
    }
    if h.shape() != (q1.levels(), q2.levels()) {
        return Err(Error::AlphabetMismatch(format!(
            "fusion rule shape {:?} does not match quantizer levels ({}, {})",
            h.shape(),
            q1.levels(),
            q2.levels()
        )));
    }
    if h.estimate_labels() != cost.estimate_labels() {
        return Err(Error::AlphabetMismatch(
            "fusion estimates do not match the cost matrix estimates".into(),
        ));
    }
    let (probs, nt, n1, n2) = observable_probs(m)?;
    let (d, ne) = cost_flat(cost);
    Ok(risk_of(
        &probs,
        nt,
        n1,
        n2,
        q1.map(),
        q2.map(),
        q2.levels(),
        &h.map,
        &d,
        ne,
    ))
}

/// The Bayes-optimal fusion rule for fixed quantizers.
///
/// Each cell takes the lowest-index estimate minimizing its posterior
/// expected cost; zero-probability cells take estimate 0.
pub fn bayes_estimator(
    m: &DiscreteModel,
    cost: &CostMatrix,
    q1: &Quantizer,
    q2: &Quantizer,
) -> Result<Estimator> {
    cost.check_for(m)?;
    q1.check_against(m.x1(), "side-1")?;
    q2.check_against(m.x2(), "side-2")?;
    let (probs, nt, n1, n2) = observable_probs(m)?;
    let (d, ne) = cost_flat(cost);
    let mut cells = Vec::new();
    let map = bayes_map(
        &probs,
        nt,
        n1,
        n2,
        q1.map(),
        q2.map(),
        q1.levels(),
        q2.levels(),
        &d,
        ne,
        &mut cells,
    );
    Estimator::new(
        q1.levels(),
        q2.levels(),
        map,
        cost.estimate_labels().to_vec(),
    )
}

/// Pulls a quantizer on a statistic's values back to the raw alphabet.
pub fn compose(q: &Quantizer, t: &Statistic) -> Result<Quantizer> {
    if q.side() != t.side() {
        return Err(Error::InvalidParameter(format!(
            "cannot compose a side-{} quantizer with a side-{} statistic",
            q.side(),
            t.side()
        )));
    }
    if q.domain_labels() != t.codomain().labels() {
        return Err(Error::AlphabetMismatch(
            "quantizer domain does not match the statistic's value alphabet".into(),
        ));
    }
    Ok(Quantizer {
        side: q.side,
        levels: q.levels,
        map: t.map().iter().map(|&c| q.map[c]).collect(),
        domain: t.domain_labels().to_vec(),
    })
}

/// Lexicographic enumeration of canonical labelings of `n` symbols into at
/// most `max_levels` classes.
///
/// Each labeling is a restricted growth string: position 0 is class 0 and
/// every later position is at most one above the running maximum. Every
/// partition appears exactly once, first-occurrence labeled.
#[derive(Debug, Clone)]
pub struct LabelingIter {
    current: Vec<u8>,
    maxes: Vec<u8>,
    cap: u8,
    done: bool,
}

impl LabelingIter {
    /// Starts at the all-zero labeling.
    pub fn new(n: usize, max_levels: usize) -> Result<LabelingIter> {
        if n == 0 {
            return Err(Error::EmptySubset);
        }
        if max_levels == 0 || max_levels > 255 {
            return Err(Error::InvalidParameter(format!(
                "level cap must be between 1 and 255, got {max_levels}"
            )));
        }
        Ok(LabelingIter {
            current: vec![0; n],
            maxes: vec![0; n],
            cap: (max_levels - 1).min(254) as u8,
            done: false,
        })
    }
}

impl Iterator for LabelingIter {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let n = self.current.len();
        let mut advanced = false;
        for i in (1..n).rev() {
            let v = self.current[i];
            if v < self.cap && v <= self.maxes[i - 1] {
                self.current[i] = v + 1;
                self.maxes[i] = self.maxes[i - 1].max(v + 1);
                for j in i + 1..n {
                    self.current[j] = 0;
                    self.maxes[j] = self.maxes[i];
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

/// Number of canonical labelings of `n` symbols into at most `l` classes:
/// the sum of Stirling partition numbers `S(n, k)` for `k` up to `l`.
pub fn labeling_count(n: usize, l: usize) -> u128 {
    if n == 0 || l == 0 {
        return 0;
    }
    // s[k] = S(row, k), built by S(r, k) = k S(r-1, k) + S(r-1, k-1).
    let kmax = l.min(n);
    let mut s = vec![0u128; kmax + 1];
    s[1] = 1;
    for _row in 2..=n {
        for k in (1..=kmax).rev() {
            let carry = if k > 1 { s[k - 1] } else { 0 };
            s[k] = (k as u128).saturating_mul(s[k]).saturating_add(carry);
        }
    }
    s[1..].iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// What an exhaustive search quantizes.
#[derive(Debug, Clone, Copy)]
pub enum SearchDomain<'a> {
    /// The raw sensor alphabets.
    Raw,
    /// The value alphabets of two statistics (side 1 then side 2).
    Statistics(&'a Statistic, &'a Statistic),
}

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    /// Search domain: `"raw"` or `"statistics"`.
    pub domain: String,
    /// Level caps `(l1, l2)`.
    pub levels: (usize, usize),
    /// Smallest attainable risk.
    pub min_risk: f64,
    /// Lexicographically first optimal side-1 quantizer.
    pub quantizer1: Quantizer,
    /// Lexicographically first optimal side-2 quantizer.
    pub quantizer2: Quantizer,
    /// Bayes fusion rule for the optimal pair.
    pub estimator: Estimator,
    /// Number of quantizer pairs evaluated.
    pub candidates_evaluated: u64,
}

/// Exact minimum-risk design by enumeration of canonical labelings.
///
/// The candidate count `labeling_count(n1, l1) * labeling_count(n2, l2)`
/// must stay within `budget` (default [`DEFAULT_BUDGET`]). Of all optimal
/// pairs, the lexicographically first in side-1-major enumeration order is
/// returned, independent of thread scheduling.
pub fn exhaustive_search(
    m: &DiscreteModel,
    cost: &CostMatrix,
    l1: usize,
    l2: usize,
    domain: SearchDomain<'_>,
    budget: Option<u128>,
) -> Result<RiskReport> {
    cost.check_for(m)?;
    let budget = budget.unwrap_or(DEFAULT_BUDGET);
    let (work, domain_name, side1_domain, side2_domain) = match domain {
        SearchDomain::Raw => {
            let probs = observable_probs(m)?;
            (probs, "raw", m.x1().clone(), m.x2().clone())
        }
        SearchDomain::Statistics(t1, t2) => {
            if t1.side() != Side::One || t2.side() != Side::Two {
                return Err(Error::InvalidParameter(
                    "statistic search domain takes a side-1 and a side-2 statistic".into(),
                ));
            }
            let induced = m.induced(t1, t2)?;
            let probs = observable_probs(&induced)?;
            (probs, "statistics", t1.codomain().clone(), t2.codomain().clone())
        }
    };
    let (probs, nt, n1, n2) = work;

    let count1 = labeling_count(n1, l1);
    let count2 = labeling_count(n2, l2);
    let candidates = count1.saturating_mul(count2);
    if candidates > budget {
        return Err(Error::BudgetExceeded { candidates, budget });
    }

    let (d, ne) = cost_flat(cost);

    // Materialize the smaller side (at most sqrt(budget) labelings) and
    // stream the larger one in chunks.
    let side1_inner = count1 <= count2;
    let (inner_n, inner_l, outer_n, outer_l) = if side1_inner {
        (n1, l1, n2, l2)
    } else {
        (n2, l2, n1, l1)
    };
    let inner: Vec<Vec<u8>> = LabelingIter::new(inner_n, inner_l)?.collect();
    let mut outer_iter = LabelingIter::new(outer_n, outer_l)?.enumerate();

    // Best candidate ordered by (risk, side-1 index, side-2 index).
    struct Best {
        risk: f64,
        key: (u64, u64),
        q1: Vec<u8>,
        q2: Vec<u8>,
    }
    fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => {
                if (b.risk, b.key) < (a.risk, a.key) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
        }
    }

    const CHUNK: usize = 1024;
    let mut best: Option<Best> = None;
    let mut evaluated: u64 = 0;
    loop {
        let chunk: Vec<(usize, Vec<u8>)> = outer_iter.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        evaluated += (chunk.len() * inner.len()) as u64;
        let chunk_best = chunk
            .par_iter()
            .map_init(Vec::new, |cells, (oi, outer_map)| {
                let mut local: Option<Best> = None;
                for (ii, inner_map) in inner.iter().enumerate() {
                    let (q1u8, q2u8, key) = if side1_inner {
                        (inner_map, outer_map, (ii as u64, *oi as u64))
                    } else {
                        (outer_map, inner_map, (*oi as u64, ii as u64))
                    };
                    let q1: Vec<usize> = q1u8.iter().map(|&v| v as usize).collect();
                    let q2: Vec<usize> = q2u8.iter().map(|&v| v as usize).collect();
                    let r = bayes_risk(&probs, nt, n1, n2, &q1, &q2, l1, l2, &d, ne, cells);
                    let cand = Best {
                        risk: r,
                        key,
                        q1: q1u8.clone(),
                        q2: q2u8.clone(),
                    };
                    local = merge(local, Some(cand));
                }
                local
            })
            .reduce(|| None, merge);
        best = merge(best, chunk_best);
    }

    let best = best.ok_or_else(|| Error::DegenerateModel("search produced no candidates".into()))?;
    let q1 = Quantizer::new(
        Side::One,
        l1,
        best.q1.iter().map(|&v| v as usize).collect(),
        &side1_domain,
    )?;
    let q2 = Quantizer::new(
        Side::Two,
        l2,
        best.q2.iter().map(|&v| v as usize).collect(),
        &side2_domain,
    )?;
    let mut cells = Vec::new();
    let h_map = bayes_map(&probs, nt, n1, n2, q1.map(), q2.map(), l1, l2, &d, ne, &mut cells);
    let estimator = Estimator::new(l1, l2, h_map, cost.estimate_labels().to_vec())?;
    Ok(RiskReport {
        domain: domain_name.into(),
        levels: (l1, l2),
        min_risk: best.risk,
        quantizer1: q1,
        quantizer2: q2,
        estimator,
        candidates_evaluated: evaluated,
    })
}

/// Starting point for one descent run.
#[derive(Debug, Clone)]
pub enum PbpoInit {
    /// Contiguous index blocks: symbol `a` starts at level `a * l / n`.
    Quantile,
    /// Independent uniform levels drawn from a seeded generator.
    Seeded(u64),
    /// Explicit starting maps (side 1 then side 2).
    Explicit(Vec<usize>, Vec<usize>),
}

/// Tunables for descent.
#[derive(Debug, Clone, Copy)]
pub struct PbpoOpts {
    /// Stop once a sweep decreases risk by less than this.
    pub tol: f64,
    /// Hard cap on sweeps.
    pub max_iter: usize,
}

impl Default for PbpoOpts {
    fn default() -> PbpoOpts {
        PbpoOpts {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Outcome of one descent run.
#[derive(Debug, Clone, Serialize)]
pub struct DesignResult {
    /// Final side-1 quantizer.
    pub quantizer1: Quantizer,
    /// Final side-2 quantizer.
    pub quantizer2: Quantizer,
    /// Final fusion rule (Bayes response to the final quantizers).
    pub estimator: Estimator,
    /// Final risk.
    pub risk: f64,
    /// Risk after the initial fusion and after each sweep; non-increasing.
    pub risk_trace: Vec<f64>,
    /// Sweeps performed.
    pub sweeps: usize,
    /// True when the stop rule fired before the sweep cap.
    pub converged: bool,
}

fn quantile_map(n: usize, l: usize) -> Vec<usize> {
    (0..n).map(|a| (a * l / n).min(l - 1)).collect()
}

/// Cyclic coordinate descent: each sweep re-optimizes the side-1 map
/// pointwise, then the side-2 map, then refits the Bayes fusion rule.
///
/// Every coordinate update is an exact argmin with ties to the lowest
/// index, so the risk trace never increases. Stops when a sweep improves
/// risk by less than `opts.tol` or after `opts.max_iter` sweeps.
pub fn pbpo(
    m: &DiscreteModel,
    cost: &CostMatrix,
    l1: usize,
    l2: usize,
    init: PbpoInit,
    opts: PbpoOpts,
) -> Result<DesignResult> {
    cost.check_for(m)?;
    if l1 == 0 || l2 == 0 {
        return Err(Error::InvalidParameter("level caps must be at least 1".into()));
    }
    let (probs, nt, n1, n2) = observable_probs(m)?;
    let (d, ne) = cost_flat(cost);

    let (mut q1, mut q2) = match init {
        PbpoInit::Quantile => (quantile_map(n1, l1), quantile_map(n2, l2)),
        PbpoInit::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q1 = (0..n1).map(|_| rng.gen_range(0..l1)).collect();
            let q2 = (0..n2).map(|_| rng.gen_range(0..l2)).collect();
            (q1, q2)
        }
        PbpoInit::Explicit(q1, q2) => {
            if q1.len() != n1 || q2.len() != n2 {
                return Err(Error::AlphabetMismatch(
                    "explicit starting maps do not match the sensor alphabets".into(),
                ));
            }
            if q1.iter().any(|&u| u >= l1) || q2.iter().any(|&u| u >= l2) {
                return Err(Error::InvalidParameter(
                    "explicit starting maps exceed the level caps".into(),
                ));
            }
            (q1, q2)
        }
    };

    let mut cells = Vec::new();
    let mut h = bayes_map(&probs, nt, n1, n2, &q1, &q2, l1, l2, &d, ne, &mut cells);
    let mut trace = vec![risk_of(&probs, nt, n1, n2, &q1, &q2, l2, &h, &d, ne)];

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_iter {
        // Side 1 pointwise: cost of sending symbol a to level u.
        for a in 0..n1 {
            let mut best_u = 0;
            let mut best_c = f64::INFINITY;
            for u in 0..l1 {
                let mut c = 0.0;
                for k in 0..nt {
                    let row = (k * n1 + a) * n2;
                    for b in 0..n2 {
                        c += probs[row + b] * d[k * ne + h[u * l2 + q2[b]]];
                    }
                }
                if c < best_c {
                    best_c = c;
                    best_u = u;
                }
            }
            q1[a] = best_u;
        }
        // Side 2 pointwise.
        for b in 0..n2 {
            let mut best_v = 0;
            let mut best_c = f64::INFINITY;
            for v in 0..l2 {
                let mut c = 0.0;
                for k in 0..nt {
                    for a in 0..n1 {
                        c += probs[(k * n1 + a) * n2 + b] * d[k * ne + h[q1[a] * l2 + v]];
                    }
                }
                if c < best_c {
                    best_c = c;
                    best_v = v;
                }
            }
            q2[b] = best_v;
        }
        h = bayes_map(&probs, nt, n1, n2, &q1, &q2, l1, l2, &d, ne, &mut cells);
        let r = risk_of(&probs, nt, n1, n2, &q1, &q2, l2, &h, &d, ne);
        let prev = *trace.last().unwrap();
        trace.push(r);
        sweeps += 1;
        if prev - r < opts.tol {
            converged = true;
            break;
        }
    }

    let risk = *trace.last().unwrap();
    let quantizer1 = Quantizer::new(Side::One, l1, q1, m.x1())?;
    let quantizer2 = Quantizer::new(Side::Two, l2, q2, m.x2())?;
    let estimator = Estimator::new(l1, l2, h, cost.estimate_labels().to_vec())?;
    Ok(DesignResult {
        quantizer1,
        quantizer2,
        estimator,
        risk,
        risk_trace: trace,
        sweeps,
        converged,
    })
}

/// Outcome of a multi-start descent.
#[derive(Debug, Clone, Serialize)]
pub struct RestartOutcome {
    /// The run attaining the smallest risk (lowest restart index on ties).
    pub best: DesignResult,
    /// Index of the winning restart.
    pub best_restart: usize,
    /// Final risk of every restart in order.
    pub restart_risks: Vec<f64>,
}

/// Runs descent from a quantile start plus `restarts - 1` seeded starts.
///
/// Restart `r >= 1` uses a generator seeded by deriving stream `r` from
/// `seed`, so outcomes are reproducible and independent of thread order.
pub fn pbpo_restarts(
    m: &DiscreteModel,
    cost: &CostMatrix,
    l1: usize,
    l2: usize,
    restarts: usize,
    seed: u64,
    opts: PbpoOpts,
) -> Result<RestartOutcome> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    let runs: Vec<DesignResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                PbpoInit::Quantile
            } else {
                PbpoInit::Seeded(derive_seed(seed, r as u64))
            };
            pbpo(m, cost, l1, l2, init, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let restart_risks: Vec<f64> = runs.iter().map(|r| r.risk).collect();
    let best_restart = restart_risks
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).expect("risks are finite"))
        .map(|(i, _)| i)
        .unwrap();
    Ok(RestartOutcome {
        best: runs[best_restart].clone(),
        best_restart,
        restart_risks,
    })
}
