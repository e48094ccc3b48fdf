//! Finite joint probability models over a parameter `theta`, an optional
//! hidden variable `w`, and two sensor observations `x1`, `x2`.
//!
//! The joint tensor is stored flat in row-major order with the canonical
//! axis order `(theta, w, x1, x2)`: `theta` varies slowest, `x2` fastest.
//! Models without a hidden variable simply omit the `w` axis.
//!
//! Probability hygiene is fixed once here and reused everywhere:
//! construction clamps tiny negative noise (entries in `(CLAMP_FLOOR, 0)`)
//! to zero, rejects anything at or below [`CLAMP_FLOOR`], and requires rows
//! and totals to be normalized within [`EPS_MASS`]. Symbols with zero
//! probability are kept in their alphabets; checks quantify over
//! positive-mass events only.

pub mod io;

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::{Error, Result};

/// Absolute tolerance for normalization checks.
pub const EPS_MASS: f64 = 1e-9;

/// Entries in `(CLAMP_FLOOR, 0)` are clamped to zero at construction;
/// entries at or below it are rejected as negative probabilities.
pub const CLAMP_FLOOR: f64 = -1e-12;

/// One of the model's named axes, in canonical storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    /// The inference parameter.
    Theta,
    /// The optional hidden variable.
    W,
    /// Sensor 1's observation.
    X1,
    /// Sensor 2's observation.
    X2,
}

impl Axis {
    /// All axes in canonical order.
    pub const ALL: [Axis; 4] = [Axis::Theta, Axis::W, Axis::X1, Axis::X2];

    /// The name used in reports and witness assignments.
    pub fn name(self) -> &'static str {
        match self {
            Axis::Theta => "theta",
            Axis::W => "w",
            Axis::X1 => "x1",
            Axis::X2 => "x2",
        }
    }

    /// Parses an axis name as used on the command line.
    pub fn parse(s: &str) -> Result<Axis> {
        match s {
            "theta" => Ok(Axis::Theta),
            "w" => Ok(Axis::W),
            "x1" => Ok(Axis::X1),
            "x2" => Ok(Axis::X2),
            other => Err(Error::InvalidParameter(format!(
                "unknown axis {other:?} (expected theta, w, x1, or x2)"
            ))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which observation axis a statistic or quantizer lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Sensor 1.
    One,
    /// Sensor 2.
    Two,
    /// The hidden variable axis.
    W,
}

impl Side {
    /// The model axis this side refers to.
    pub fn axis(self) -> Axis {
        match self {
            Side::One => Axis::X1,
            Side::Two => Axis::X2,
            Side::W => Axis::W,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::One => f.write_str("1"),
            Side::Two => f.write_str("2"),
            Side::W => f.write_str("w"),
        }
    }
}

impl Serialize for Side {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Side::One => s.serialize_u64(1),
            Side::Two => s.serialize_u64(2),
            Side::W => s.serialize_str("w"),
        }
    }
}

/// An ordered, duplicate-free list of symbol labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    /// Builds an alphabet from labels, rejecting empty and duplicate entries.
    pub fn new<I, S>(labels: I) -> Result<Alphabet>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::AlphabetMismatch("alphabet is empty".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::AlphabetMismatch(format!("label {i} is empty")));
            }
            if labels[..i].contains(l) {
                return Err(Error::AlphabetMismatch(format!("duplicate label {l:?}")));
            }
        }
        Ok(Alphabet { labels })
    }

    /// `n` symbols labeled `"0"`, `"1"`, ... `"n-1"`.
    pub fn numbered(n: usize) -> Alphabet {
        Alphabet::prefixed("", n)
    }

    /// `n` symbols labeled `"{prefix}0"`, ... `"{prefix}{n-1}"`.
    pub fn prefixed(prefix: &str, n: usize) -> Alphabet {
        assert!(n > 0, "alphabet must have at least one symbol");
        Alphabet {
            labels: (0..n).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    /// Number of symbols.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// True when the alphabet has exactly one symbol.
    pub fn is_singleton(&self) -> bool {
        self.labels.len() == 1
    }

    /// Never true; kept for iterator-style call sites.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The label of symbol `i`.
    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// All labels in order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of `label`, if present.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Steps through the multi-index of a row-major tensor.
#[derive(Debug, Clone)]
pub(crate) struct Odometer {
    sizes: Vec<usize>,
    digits: Vec<usize>,
}

impl Odometer {
    pub(crate) fn new(sizes: &[usize]) -> Odometer {
        Odometer {
            sizes: sizes.to_vec(),
            digits: vec![0; sizes.len()],
        }
    }

    pub(crate) fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// Advances to the next cell; false once every cell has been visited.
    pub(crate) fn step(&mut self) -> bool {
        for k in (0..self.digits.len()).rev() {
            self.digits[k] += 1;
            if self.digits[k] < self.sizes[k] {
                return true;
            }
            self.digits[k] = 0;
        }
        false
    }
}

/// Row-major flat index for `digits` under `sizes`.
pub(crate) fn flat_index(sizes: &[usize], digits: &[usize]) -> usize {
    debug_assert_eq!(sizes.len(), digits.len());
    let mut idx = 0;
    for (d, s) in digits.iter().zip(sizes) {
        debug_assert!(d < s);
        idx = idx * s + d;
    }
    idx
}

/// A joint probability mass function over `(theta, [w,] x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    theta: Alphabet,
    w: Option<Alphabet>,
    x1: Alphabet,
    x2: Alphabet,
    p: Vec<f64>,
}

impl DiscreteModel {
    /// Builds a model from a flat joint tensor, validating probabilities.
    ///
    /// Entries in `(CLAMP_FLOOR, 0)` are clamped to zero; entries at or
    /// below `CLAMP_FLOOR` are rejected. The total mass must be 1 within
    /// [`EPS_MASS`].
    pub fn from_joint(
        theta: Alphabet,
        w: Option<Alphabet>,
        x1: Alphabet,
        x2: Alphabet,
        joint: Vec<f64>,
    ) -> Result<DiscreteModel> {
        let mut m = DiscreteModel::from_joint_unchecked(theta, w, x1, x2, joint);
        let sizes = m.sizes();
        for (i, v) in m.p.iter_mut().enumerate() {
            if !v.is_finite() || *v <= CLAMP_FLOOR {
                return Err(Error::NegativeProbability {
                    cell: cell_name(&sizes, i),
                    value: *v,
                });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = m.p.iter().sum();
        if (sum - 1.0).abs() > EPS_MASS {
            return Err(Error::RowNotNormalized {
                table: "joint".into(),
                row: 0,
                sum,
                eps: EPS_MASS,
            });
        }
        Ok(m)
    }

    /// Builds a model without validating probabilities.
    ///
    /// Intended for diagnostics via [`DiscreteModel::validate`] and for
    /// internal constructions whose mass is conserved by design. The tensor
    /// length must still match the alphabet sizes.
    pub fn from_joint_unchecked(
        theta: Alphabet,
        w: Option<Alphabet>,
        x1: Alphabet,
        x2: Alphabet,
        joint: Vec<f64>,
    ) -> DiscreteModel {
        let cells = theta.len() * w.as_ref().map_or(1, Alphabet::len) * x1.len() * x2.len();
        assert_eq!(
            joint.len(),
            cells,
            "joint tensor length {} does not match alphabet sizes ({} cells)",
            joint.len(),
            cells
        );
        DiscreteModel {
            theta,
            w,
            x1,
            x2,
            p: joint,
        }
    }

    /// Builds `p(theta) p(x1|theta) p(x2|theta)` from a prior and two kernels.
    ///
    /// `k1` has one row per `theta` symbol over `x1`; `k2` likewise over `x2`.
    pub fn from_ci_factors(
        theta: Alphabet,
        prior: &[f64],
        x1: Alphabet,
        k1: &[Vec<f64>],
        x2: Alphabet,
        k2: &[Vec<f64>],
    ) -> Result<DiscreteModel> {
        let prior = checked_row("prior", 0, prior, theta.len())?;
        let k1 = checked_kernel("x1|theta", k1, theta.len(), x1.len())?;
        let k2 = checked_kernel("x2|theta", k2, theta.len(), x2.len())?;
        let mut p = Vec::with_capacity(theta.len() * x1.len() * x2.len());
        for (t, pt) in prior.iter().enumerate() {
            for a in 0..x1.len() {
                for b in 0..x2.len() {
                    p.push(pt * k1[t][a] * k2[t][b]);
                }
            }
        }
        Ok(DiscreteModel::from_joint_unchecked(theta, None, x1, x2, p))
    }

    /// Builds `p(theta) p(w|theta) p(x1|w) p(x2|w)` with a hidden axis.
    #[allow(clippy::too_many_arguments)]
    pub fn from_hci_factors(
        theta: Alphabet,
        prior: &[f64],
        w: Alphabet,
        kw: &[Vec<f64>],
        x1: Alphabet,
        k1: &[Vec<f64>],
        x2: Alphabet,
        k2: &[Vec<f64>],
    ) -> Result<DiscreteModel> {
        let prior = checked_row("prior", 0, prior, theta.len())?;
        let kw = checked_kernel("w|theta", kw, theta.len(), w.len())?;
        let k1 = checked_kernel("x1|w", k1, w.len(), x1.len())?;
        let k2 = checked_kernel("x2|w", k2, w.len(), x2.len())?;
        let mut p = Vec::with_capacity(theta.len() * w.len() * x1.len() * x2.len());
        for (t, pt) in prior.iter().enumerate() {
            for h in 0..w.len() {
                let base = pt * kw[t][h];
                for a in 0..x1.len() {
                    for b in 0..x2.len() {
                        p.push(base * k1[h][a] * k2[h][b]);
                    }
                }
            }
        }
        Ok(DiscreteModel::from_joint_unchecked(
            theta,
            Some(w),
            x1,
            x2,
            p,
        ))
    }

    /// The parameter alphabet.
    pub fn theta(&self) -> &Alphabet {
        &self.theta
    }

    /// The hidden-variable alphabet, if the model has one.
    pub fn w(&self) -> Option<&Alphabet> {
        self.w.as_ref()
    }

    /// Sensor 1's alphabet.
    pub fn x1(&self) -> &Alphabet {
        &self.x1
    }

    /// Sensor 2's alphabet.
    pub fn x2(&self) -> &Alphabet {
        &self.x2
    }

    /// True when the model carries a hidden-variable axis.
    pub fn has_w(&self) -> bool {
        self.w.is_some()
    }

    /// The alphabet attached to `axis`, if present.
    pub fn axis_alphabet(&self, axis: Axis) -> Option<&Alphabet> {
        match axis {
            Axis::Theta => Some(&self.theta),
            Axis::W => self.w.as_ref(),
            Axis::X1 => Some(&self.x1),
            Axis::X2 => Some(&self.x2),
        }
    }

    /// Axes present, in canonical order.
    pub fn axes(&self) -> Vec<Axis> {
        let mut v = vec![Axis::Theta];
        if self.w.is_some() {
            v.push(Axis::W);
        }
        v.push(Axis::X1);
        v.push(Axis::X2);
        v
    }

    /// Sizes of the present axes, in canonical order.
    pub fn sizes(&self) -> Vec<usize> {
        self.axes()
            .iter()
            .map(|&a| self.axis_alphabet(a).unwrap().len())
            .collect()
    }

    /// The flat joint tensor in canonical row-major order.
    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// The probability of one cell. `w` must be given iff the model has a
    /// hidden axis.
    pub fn prob(&self, theta: usize, w: Option<usize>, x1: usize, x2: usize) -> f64 {
        let digits = match (&self.w, w) {
            (Some(_), Some(h)) => vec![theta, h, x1, x2],
            (None, None) => vec![theta, x1, x2],
            _ => panic!("hidden index must be supplied iff the model has a w axis"),
        };
        self.p[flat_index(&self.sizes(), &digits)]
    }

    /// Marginal distribution over `keep`, summing out every other axis.
    ///
    /// `keep` must be nonempty, duplicate-free, and name only axes the model
    /// has; the result's axes are in canonical order regardless of the
    /// order given.
    pub fn marginal(&self, keep: &[Axis]) -> Result<PmfTable> {
        let keep = self.canonical_subset(keep)?;
        if keep.is_empty() {
            return Err(Error::EmptySubset);
        }
        let axes = self.axes();
        let sizes = self.sizes();
        let out_sizes: Vec<usize> = keep
            .iter()
            .map(|a| self.axis_alphabet(*a).unwrap().len())
            .collect();
        let positions: Vec<usize> = keep
            .iter()
            .map(|a| axes.iter().position(|b| b == a).unwrap())
            .collect();
        let mut out = vec![0.0; out_sizes.iter().product()];
        let mut odo = Odometer::new(&sizes);
        let mut cell = 0;
        loop {
            let digits = odo.digits();
            let mut idx = 0;
            for (k, &pos) in positions.iter().enumerate() {
                idx = idx * out_sizes[k] + digits[pos];
            }
            out[idx] += self.p[cell];
            cell += 1;
            if !odo.step() {
                break;
            }
        }
        Ok(PmfTable::new(
            keep.iter()
                .map(|&a| (a, self.axis_alphabet(a).unwrap().labels().to_vec()))
                .collect(),
            out,
        ))
    }

    /// Conditional distribution of `target` given a partial assignment.
    ///
    /// `given` pins each listed axis to a symbol index; axes in neither
    /// `target` nor `given` are summed out. Conditioning on an event of
    /// zero probability is an error.
    pub fn conditional(&self, target: &[Axis], given: &[(Axis, usize)]) -> Result<PmfTable> {
        let target = self.canonical_subset(target)?;
        if target.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut seen: Vec<Axis> = Vec::new();
        for &(axis, idx) in given {
            let alphabet = self
                .axis_alphabet(axis)
                .ok_or_else(|| Error::AlphabetMismatch(format!("model has no {axis} axis")))?;
            if idx >= alphabet.len() {
                return Err(Error::AlphabetMismatch(format!(
                    "index {idx} out of range for axis {axis} of size {}",
                    alphabet.len()
                )));
            }
            if seen.contains(&axis) {
                return Err(Error::InvalidParameter(format!(
                    "axis {axis} assigned twice in conditioning event"
                )));
            }
            if target.contains(&axis) {
                return Err(Error::InvalidParameter(format!(
                    "axis {axis} appears in both target and conditioning event"
                )));
            }
            seen.push(axis);
        }

        let axes = self.axes();
        let sizes = self.sizes();
        let out_sizes: Vec<usize> = target
            .iter()
            .map(|a| self.axis_alphabet(*a).unwrap().len())
            .collect();
        let target_pos: Vec<usize> = target
            .iter()
            .map(|a| axes.iter().position(|b| b == a).unwrap())
            .collect();
        let pins: Vec<(usize, usize)> = given
            .iter()
            .map(|&(a, i)| (axes.iter().position(|b| *b == a).unwrap(), i))
            .collect();

        let mut out = vec![0.0; out_sizes.iter().product()];
        let mut total = 0.0;
        let mut odo = Odometer::new(&sizes);
        let mut cell = 0;
        loop {
            let digits = odo.digits();
            if pins.iter().all(|&(pos, val)| digits[pos] == val) {
                let mut idx = 0;
                for (k, &pos) in target_pos.iter().enumerate() {
                    idx = idx * out_sizes[k] + digits[pos];
                }
                out[idx] += self.p[cell];
                total += self.p[cell];
            }
            cell += 1;
            if !odo.step() {
                break;
            }
        }
        if total <= 0.0 {
            let desc = given
                .iter()
                .map(|&(a, i)| format!("{a}={}", self.axis_alphabet(a).unwrap().label(i)))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::NullConditioningEvent(desc));
        }
        for v in &mut out {
            *v /= total;
        }
        Ok(PmfTable::new(
            target
                .iter()
                .map(|&a| (a, self.axis_alphabet(a).unwrap().labels().to_vec()))
                .collect(),
            out,
        ))
    }

    /// Pushforward model over `(theta, T1(x1), T2(x2))`.
    ///
    /// The hidden axis, if any, is summed out; downstream risk computations
    /// never depend on it. Mass is conserved cell-group by cell-group.
    pub fn induced(&self, t1: &Statistic, t2: &Statistic) -> Result<DiscreteModel> {
        if t1.side() != Side::One {
            return Err(Error::AlphabetMismatch(
                "first statistic must live on side 1".into(),
            ));
        }
        if t2.side() != Side::Two {
            return Err(Error::AlphabetMismatch(
                "second statistic must live on side 2".into(),
            ));
        }
        t1.check_domain(&self.x1)?;
        t2.check_domain(&self.x2)?;

        let nt = self.theta.len();
        let n1 = self.x1.len();
        let n2 = self.x2.len();
        let m1 = t1.class_count();
        let m2 = t2.class_count();
        let mut out = vec![0.0; nt * m1 * m2];
        let wn = self.w.as_ref().map_or(1, Alphabet::len);
        let mut cell = 0;
        for t in 0..nt {
            for _h in 0..wn {
                for a in 0..n1 {
                    let ta = t1.apply(a);
                    for b in 0..n2 {
                        out[(t * m1 + ta) * m2 + t2.apply(b)] += self.p[cell];
                        cell += 1;
                    }
                }
            }
        }
        Ok(DiscreteModel::from_joint_unchecked(
            self.theta.clone(),
            None,
            t1.codomain().clone(),
            t2.codomain().clone(),
            out,
        ))
    }

    /// Diagnostics against the model invariants. Never mutates and never
    /// fails; read `pass` and `failures` for the verdict.
    pub fn validate(&self) -> ModelDiagnostics {
        let mut failures = Vec::new();
        let sizes = self.sizes();
        let mut min_entry = f64::INFINITY;
        let mut negative = 0usize;
        let mut total = 0.0;
        for (i, &v) in self.p.iter().enumerate() {
            if !v.is_finite() {
                failures.push(format!("non-finite probability {v} at {}", cell_name(&sizes, i)));
            }
            if v < min_entry {
                min_entry = v;
            }
            if v < 0.0 {
                negative += 1;
                if failures.len() < 16 {
                    failures.push(format!(
                        "negative probability {v:e} at {}",
                        cell_name(&sizes, i)
                    ));
                }
            }
            total += v;
        }
        let mass_error = (total - 1.0).abs();
        if mass_error > EPS_MASS {
            failures.push(format!(
                "total mass {total} deviates from 1 by {mass_error:e}"
            ));
        }
        let support = self
            .axes()
            .iter()
            .map(|&axis| {
                let table = self.marginal(&[axis]).expect("single-axis marginal");
                AxisSupport {
                    axis: axis.name().into(),
                    size: self.axis_alphabet(axis).unwrap().len(),
                    positive: table.probs().iter().filter(|&&p| p > 0.0).count(),
                }
            })
            .collect();
        ModelDiagnostics {
            total_mass: total,
            mass_error,
            min_entry,
            negative_entries: negative,
            support,
            pass: failures.is_empty(),
            failures,
        }
    }

    /// Canonicalizes an axis subset: validates presence, rejects
    /// duplicates, and returns the axes in canonical order.
    fn canonical_subset(&self, axes: &[Axis]) -> Result<Vec<Axis>> {
        let mut seen = Vec::new();
        for &a in axes {
            if self.axis_alphabet(a).is_none() {
                return Err(Error::AlphabetMismatch(format!("model has no {a} axis")));
            }
            if seen.contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "axis {a} listed more than once"
                )));
            }
            seen.push(a);
        }
        Ok(Axis::ALL
            .iter()
            .copied()
            .filter(|a| seen.contains(a))
            .collect())
    }
}

/// Names a joint cell for error messages, e.g. `(theta=0, x1=1, x2=0)`.
fn cell_name(sizes: &[usize], mut flat: usize) -> String {
    let mut digits = vec![0usize; sizes.len()];
    for k in (0..sizes.len()).rev() {
        digits[k] = flat % sizes[k];
        flat /= sizes[k];
    }
    let names: Vec<&str> = if sizes.len() == 4 {
        vec!["theta", "w", "x1", "x2"]
    } else {
        vec!["theta", "x1", "x2"]
    };
    let parts: Vec<String> = names
        .iter()
        .zip(&digits)
        .map(|(n, d)| format!("{n}={d}"))
        .collect();
    format!("({})", parts.join(", "))
}

fn checked_row(table: &str, row: usize, values: &[f64], len: usize) -> Result<Vec<f64>> {
    if values.len() != len {
        return Err(Error::AlphabetMismatch(format!(
            "{table} row {row} has {} entries, expected {len}",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(len);
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v <= CLAMP_FLOOR {
            return Err(Error::NegativeProbability {
                cell: format!("{table} row {row} column {i}"),
                value: v,
            });
        }
        out.push(if v < 0.0 { 0.0 } else { v });
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > EPS_MASS {
        return Err(Error::RowNotNormalized {
            table: table.into(),
            row,
            sum,
            eps: EPS_MASS,
        });
    }
    Ok(out)
}

fn checked_kernel(table: &str, rows: &[Vec<f64>], parents: usize, children: usize) -> Result<Vec<Vec<f64>>> {
    if rows.len() != parents {
        return Err(Error::AlphabetMismatch(format!(
            "{table} has {} rows, expected {parents}",
            rows.len()
        )));
    }
    rows.iter()
        .enumerate()
        .map(|(r, row)| checked_row(table, r, row, children))
        .collect()
}

/// A marginal or conditional distribution over a subset of model axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfTable {
    axes: Vec<String>,
    labels: Vec<Vec<String>>,
    probs: Vec<f64>,
    #[serde(skip)]
    axis_ids: Vec<Axis>,
    #[serde(skip)]
    sizes: Vec<usize>,
}

impl PmfTable {
    fn new(axes: Vec<(Axis, Vec<String>)>, probs: Vec<f64>) -> PmfTable {
        let sizes: Vec<usize> = axes.iter().map(|(_, l)| l.len()).collect();
        debug_assert_eq!(probs.len(), sizes.iter().product::<usize>());
        PmfTable {
            axis_ids: axes.iter().map(|(a, _)| *a).collect(),
            axes: axes.iter().map(|(a, _)| a.name().to_string()).collect(),
            labels: axes.into_iter().map(|(_, l)| l).collect(),
            sizes,
            probs,
        }
    }

    /// The axes covered by the table, in canonical order.
    pub fn axes(&self) -> &[Axis] {
        &self.axis_ids
    }

    /// Axis sizes in table order.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Symbol labels per axis.
    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    /// Flat probabilities in row-major order over [`PmfTable::axes`].
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of one cell addressed by per-axis indices.
    pub fn get(&self, digits: &[usize]) -> f64 {
        self.probs[flat_index(&self.sizes, digits)]
    }

    /// Total mass; 1 within [`EPS_MASS`] for marginals of valid models.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Position of `axis` in the table, if covered.
    pub fn axis_position(&self, axis: Axis) -> Option<usize> {
        self.axis_ids.iter().position(|a| *a == axis)
    }
}

/// A deterministic map from one observation alphabet onto a smaller one.
///
/// The codomain is canonical: its symbols are ordered by first occurrence
/// as the domain is scanned in alphabet order, so two statistics inducing
/// the same partition with the same value labels compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    side: Side,
    domain: Vec<String>,
    codomain: Alphabet,
    map: Vec<usize>,
}

impl Statistic {
    /// Builds a statistic from an explicit `domain label -> value label` map.
    ///
    /// The map must be total over `domain`. Value symbols are ordered by
    /// first occurrence.
    pub fn from_label_map(
        side: Side,
        domain: &Alphabet,
        map: &BTreeMap<String, String>,
    ) -> Result<Statistic> {
        for key in map.keys() {
            if domain.index_of(key).is_none() {
                return Err(Error::AlphabetMismatch(format!(
                    "statistic maps unknown symbol {key:?}"
                )));
            }
        }
        let mut values: Vec<String> = Vec::new();
        let mut levels = Vec::with_capacity(domain.len());
        for label in domain.labels() {
            let value = map.get(label).ok_or_else(|| {
                Error::AlphabetMismatch(format!("statistic is missing symbol {label:?}"))
            })?;
            let idx = match values.iter().position(|v| v == value) {
                Some(i) => i,
                None => {
                    values.push(value.clone());
                    values.len() - 1
                }
            };
            levels.push(idx);
        }
        Ok(Statistic {
            side,
            domain: domain.labels().to_vec(),
            codomain: Alphabet::new(values)?,
            map: levels,
        })
    }

    /// Builds a statistic from per-symbol class indices.
    ///
    /// Classes are relabeled by first occurrence and given synthetic value
    /// labels `"s0"`, `"s1"`, ...
    pub fn from_levels(side: Side, domain: &Alphabet, levels: &[usize]) -> Result<Statistic> {
        if levels.len() != domain.len() {
            return Err(Error::AlphabetMismatch(format!(
                "{} class assignments for a domain of {} symbols",
                levels.len(),
                domain.len()
            )));
        }
        let mut first_seen: Vec<usize> = Vec::new();
        let mut map = Vec::with_capacity(levels.len());
        for &lv in levels {
            let idx = match first_seen.iter().position(|&f| f == lv) {
                Some(i) => i,
                None => {
                    first_seen.push(lv);
                    first_seen.len() - 1
                }
            };
            map.push(idx);
        }
        let codomain = Alphabet::prefixed("s", first_seen.len());
        Ok(Statistic {
            side,
            domain: domain.labels().to_vec(),
            codomain,
            map,
        })
    }

    /// The identity statistic on `domain`.
    pub fn identity(side: Side, domain: &Alphabet) -> Statistic {
        Statistic {
            side,
            domain: domain.labels().to_vec(),
            codomain: domain.clone(),
            map: (0..domain.len()).collect(),
        }
    }

    /// The constant statistic, collapsing `domain` to a single value.
    pub fn constant(side: Side, domain: &Alphabet) -> Statistic {
        Statistic {
            side,
            domain: domain.labels().to_vec(),
            codomain: Alphabet::prefixed("s", 1),
            map: vec![0; domain.len()],
        }
    }

    /// Which observation axis the statistic reduces.
    pub fn side(&self) -> Side {
        self.side
    }

    /// Labels of the expected domain alphabet.
    pub fn domain_labels(&self) -> &[String] {
        &self.domain
    }

    /// The canonical codomain alphabet.
    pub fn codomain(&self) -> &Alphabet {
        &self.codomain
    }

    /// Number of attained values.
    pub fn class_count(&self) -> usize {
        self.codomain.len()
    }

    /// Value index for domain symbol `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    /// Per-symbol value indices in domain order.
    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// Domain symbol indices grouped by value.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.codomain.len()];
        for (i, &c) in self.map.iter().enumerate() {
            classes[c].push(i);
        }
        classes
    }

    /// Errors unless `alphabet` matches the statistic's domain labels.
    pub fn check_domain(&self, alphabet: &Alphabet) -> Result<()> {
        if self.domain != alphabet.labels() {
            return Err(Error::AlphabetMismatch(format!(
                "statistic domain {:?} does not match axis alphabet {:?}",
                self.domain,
                alphabet.labels()
            )));
        }
        Ok(())
    }

    /// The statistic as a `domain label -> value label` map.
    pub fn label_map(&self) -> BTreeMap<String, String> {
        self.domain
            .iter()
            .zip(&self.map)
            .map(|(d, &c)| (d.clone(), self.codomain.label(c).to_string()))
            .collect()
    }
}

impl Serialize for Statistic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("side", &self.side)?;
        m.serialize_entry("map", &self.label_map())?;
        m.end()
    }
}

/// A distortion table `d[theta, estimate]` with finite nonnegative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    theta: Vec<String>,
    estimates: Vec<String>,
    costs: Vec<f64>,
}

impl CostMatrix {
    /// Builds a cost matrix; one row per `theta` symbol.
    pub fn new(
        theta: Vec<String>,
        estimates: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<CostMatrix> {
        if rows.len() != theta.len() {
            return Err(Error::AlphabetMismatch(format!(
                "cost matrix has {} rows, expected {}",
                rows.len(),
                theta.len()
            )));
        }
        if estimates.is_empty() {
            return Err(Error::AlphabetMismatch("no estimate labels".into()));
        }
        let mut costs = Vec::with_capacity(theta.len() * estimates.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != estimates.len() {
                return Err(Error::AlphabetMismatch(format!(
                    "cost row {r} has {} entries, expected {}",
                    row.len(),
                    estimates.len()
                )));
            }
            for &v in row {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "cost entries must be finite and nonnegative, found {v}"
                    )));
                }
                costs.push(v);
            }
        }
        Ok(CostMatrix {
            theta,
            estimates,
            costs,
        })
    }

    /// Zero-one cost over `theta`: estimates are the parameter symbols,
    /// misclassification costs 1.
    pub fn zero_one(theta: &Alphabet) -> CostMatrix {
        let n = theta.len();
        let mut costs = vec![1.0; n * n];
        for i in 0..n {
            costs[i * n + i] = 0.0;
        }
        CostMatrix {
            theta: theta.labels().to_vec(),
            estimates: theta.labels().to_vec(),
            costs,
        }
    }

    /// The `theta` labels the rows are indexed by.
    pub fn theta_labels(&self) -> &[String] {
        &self.theta
    }

    /// Estimate labels indexing the columns.
    pub fn estimate_labels(&self) -> &[String] {
        &self.estimates
    }

    /// Number of estimate symbols.
    pub fn n_estimates(&self) -> usize {
        self.estimates.len()
    }

    /// `d[theta_index, estimate_index]`.
    pub fn get(&self, theta: usize, estimate: usize) -> f64 {
        self.costs[theta * self.estimates.len() + estimate]
    }

    /// Errors unless the rows align with `model`'s parameter alphabet.
    pub fn check_for(&self, model: &DiscreteModel) -> Result<()> {
        if self.theta != model.theta().labels() {
            return Err(Error::AlphabetMismatch(
                "cost matrix rows do not match the model's theta alphabet".into(),
            ));
        }
        Ok(())
    }
}

impl Serialize for CostMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self
            .theta
            .iter()
            .enumerate()
            .map(|(i, _)| self.costs[i * self.estimates.len()..(i + 1) * self.estimates.len()].to_vec())
            .collect();
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("estimates", &self.estimates)?;
        m.serialize_entry("matrix", &rows)?;
        m.end()
    }
}

/// Support count for one axis: how many symbols carry positive mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSupport {
    /// Axis name.
    pub axis: String,
    /// Alphabet size.
    pub size: usize,
    /// Symbols with positive marginal probability.
    pub positive: usize,
}

/// Outcome of [`DiscreteModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDiagnostics {
    /// Sum of all joint entries.
    pub total_mass: f64,
    /// Absolute deviation of the total mass from 1.
    pub mass_error: f64,
    /// Smallest joint entry.
    pub min_entry: f64,
    /// Number of strictly negative entries.
    pub negative_entries: usize,
    /// Per-axis support counts.
    pub support: Vec<AxisSupport>,
    /// True when every invariant holds.
    pub pass: bool,
    /// Human-readable descriptions of each violation.
    pub failures: Vec<String>,
}
