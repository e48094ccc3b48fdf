//! Sufficiency and conditional-independence checks on joint models.
//!
//! Every check quantifies over positive-probability events only, compares
//! posteriors in sup norm against a tolerance, and reports the
//! lexicographically first violating cell (canonical axis order, symbols in
//! alphabet order) when it fails. Deviations are exact for rational inputs
//! up to float rounding; the default tolerance [`EPS_CHECK`] absorbs that
//! rounding without masking real violations.

use serde::Serialize;

use crate::model::{flat_index, Alphabet, Axis, DiscreteModel, Odometer, Side, Statistic};
use crate::{Error, Result};

/// Default tolerance for posterior and independence comparisons.
pub const EPS_CHECK: f64 = 1e-9;

/// The cell at which a failed check deviates most, as axis/symbol pairs in
/// canonical axis order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// `(axis name, symbol label)` pairs.
    pub assignment: Vec<(String, String)>,
}

/// Outcome of a posterior or independence check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    /// True when the largest deviation is within tolerance.
    pub holds: bool,
    /// Largest absolute deviation found over positive-mass events.
    pub max_deviation: f64,
    /// Present exactly when the check fails: the first cell attaining the
    /// maximum deviation.
    pub witness: Option<Witness>,
}

impl CheckReport {
    fn from_scan(eps: f64, max_deviation: f64, witness: Option<Witness>) -> CheckReport {
        let holds = max_deviation <= eps;
        CheckReport {
            holds,
            max_deviation,
            witness: if holds { None } else { witness },
        }
    }
}

/// Outcome of [`validate_hci`]: both chain reports, split by verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HciOutcome {
    /// `x1 - w - x2` and `theta - w - (x1, x2)` both hold.
    Valid {
        /// Report for `x1` independent of `x2` given `w`.
        chain_a: CheckReport,
        /// Report for `theta` independent of `(x1, x2)` given `w`.
        chain_b: CheckReport,
    },
    /// At least one chain fails.
    Invalid {
        /// Report for `x1` independent of `x2` given `w`.
        chain_a: CheckReport,
        /// Report for `theta` independent of `(x1, x2)` given `w`.
        chain_b: CheckReport,
    },
}

impl HciOutcome {
    /// True for the `Valid` arm.
    pub fn is_valid(&self) -> bool {
        matches!(self, HciOutcome::Valid { .. })
    }

    /// The `x1 - w - x2` report.
    pub fn chain_a(&self) -> &CheckReport {
        match self {
            HciOutcome::Valid { chain_a, .. } | HciOutcome::Invalid { chain_a, .. } => chain_a,
        }
    }

    /// The `theta - w - (x1, x2)` report.
    pub fn chain_b(&self) -> &CheckReport {
        match self {
            HciOutcome::Valid { chain_b, .. } | HciOutcome::Invalid { chain_b, .. } => chain_b,
        }
    }
}

/// The two factors recovered by a successful [`factorization_check`].
///
/// Reconstruction: `p(theta=k, x1=a, x2=b) = g[a] * f[t1(a)][k * |x2| + b]`,
/// where `f[c]` is the conditional of `(theta, x2)` given the class `c`
/// (theta slowest). Classes with zero probability get an all-zero `f` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationWitness {
    /// Marginal of `x1`, indexed by symbol.
    pub g: Vec<f64>,
    /// Per-class conditional of `(theta, x2)`, flat with theta slowest.
    pub f: Vec<Vec<f64>>,
}

/// Mutual information before and after reducing one observation axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiGap {
    /// `I(param; X)` in bits.
    pub full_bits: f64,
    /// `I(param; T(X))` in bits.
    pub reduced_bits: f64,
    /// `full_bits - reduced_bits`; nonnegative up to rounding.
    pub gap_bits: f64,
}

fn check_param(m: &DiscreteModel, param: Axis) -> Result<()> {
    match param {
        Axis::Theta => Ok(()),
        Axis::W => {
            if m.has_w() {
                Ok(())
            } else {
                Err(Error::MissingHiddenAxis)
            }
        }
        other => Err(Error::InvalidParameter(format!(
            "posterior checks condition on theta or w, not {other}"
        ))),
    }
}

fn obs_alphabet(m: &DiscreteModel, side: Side, param: Axis) -> Result<&Alphabet> {
    let axis = side.axis();
    if axis == param {
        return Err(Error::InvalidParameter(format!(
            "statistic on axis {axis} cannot be checked against parameter {param}"
        )));
    }
    m.axis_alphabet(axis).ok_or(Error::MissingHiddenAxis)
}

/// Checks that the posterior of `param` given the raw observation equals
/// the posterior given the statistic's value, for every positive-mass
/// symbol on the statistic's side.
pub fn posterior_match(
    m: &DiscreteModel,
    t: &Statistic,
    param: Axis,
    eps: f64,
) -> Result<CheckReport> {
    check_param(m, param)?;
    let alphabet = obs_alphabet(m, t.side(), param)?;
    t.check_domain(alphabet)?;
    let axis = t.side().axis();
    let q = m.marginal(&[param, axis])?;
    let np = q.sizes()[0];
    let nx = q.sizes()[1];

    let mut mass = vec![0.0; nx];
    let nc = t.class_count();
    let mut class_mass = vec![0.0; nc];
    let mut class_prof = vec![0.0; nc * np];
    for k in 0..np {
        for x in 0..nx {
            let v = q.get(&[k, x]);
            mass[x] += v;
            let c = t.apply(x);
            class_mass[c] += v;
            class_prof[c * np + k] += v;
        }
    }

    let mut max_dev = 0.0;
    let mut best: Option<(usize, usize)> = None;
    for k in 0..np {
        for x in 0..nx {
            if mass[x] <= 0.0 {
                continue;
            }
            let c = t.apply(x);
            let d = (q.get(&[k, x]) / mass[x] - class_prof[c * np + k] / class_mass[c]).abs();
            if d > max_dev {
                max_dev = d;
                best = Some((k, x));
            }
        }
    }
    let witness = best.map(|(k, x)| Witness {
        assignment: vec![
            (param.name().into(), q.labels()[0][k].clone()),
            (axis.name().into(), q.labels()[1][x].clone()),
        ],
    });
    Ok(CheckReport::from_scan(eps, max_dev, witness))
}

/// Checks that `(t1, t2)` jointly preserve the posterior of `param` given
/// both raw observations, over every positive-mass observation pair.
pub fn is_global_sufficient(
    m: &DiscreteModel,
    t1: &Statistic,
    t2: &Statistic,
    param: Axis,
    eps: f64,
) -> Result<CheckReport> {
    check_param(m, param)?;
    if t1.side() != Side::One || t2.side() != Side::Two {
        return Err(Error::InvalidParameter(
            "global sufficiency takes a side-1 and a side-2 statistic, in that order".into(),
        ));
    }
    t1.check_domain(m.x1())?;
    t2.check_domain(m.x2())?;
    let q = m.marginal(&[param, Axis::X1, Axis::X2])?;
    let (np, n1, n2) = (q.sizes()[0], q.sizes()[1], q.sizes()[2]);
    let (m1, m2) = (t1.class_count(), t2.class_count());

    let mut mass = vec![0.0; n1 * n2];
    let mut cell_mass = vec![0.0; m1 * m2];
    let mut cell_prof = vec![0.0; m1 * m2 * np];
    for k in 0..np {
        for a in 0..n1 {
            let ca = t1.apply(a);
            for b in 0..n2 {
                let v = q.get(&[k, a, b]);
                mass[a * n2 + b] += v;
                let cell = ca * m2 + t2.apply(b);
                cell_mass[cell] += v;
                cell_prof[cell * np + k] += v;
            }
        }
    }

    let mut max_dev = 0.0;
    let mut best: Option<(usize, usize, usize)> = None;
    for k in 0..np {
        for a in 0..n1 {
            for b in 0..n2 {
                if mass[a * n2 + b] <= 0.0 {
                    continue;
                }
                let cell = t1.apply(a) * m2 + t2.apply(b);
                let d = (q.get(&[k, a, b]) / mass[a * n2 + b]
                    - cell_prof[cell * np + k] / cell_mass[cell])
                    .abs();
                if d > max_dev {
                    max_dev = d;
                    best = Some((k, a, b));
                }
            }
        }
    }
    let witness = best.map(|(k, a, b)| Witness {
        assignment: vec![
            (param.name().into(), q.labels()[0][k].clone()),
            ("x1".into(), q.labels()[1][a].clone()),
            ("x2".into(), q.labels()[2][b].clone()),
        ],
    });
    Ok(CheckReport::from_scan(eps, max_dev, witness))
}

/// The coarsest statistic on `side` preserving the posterior of `param`.
///
/// Symbols are grouped by their posterior profile (sup-norm distance at
/// most `eps` to the first symbol of the class). Zero-probability symbols
/// form one dedicated class of their own so that alphabets never shrink.
pub fn minimal_sufficient(
    m: &DiscreteModel,
    side: Side,
    param: Axis,
    eps: f64,
) -> Result<Statistic> {
    check_param(m, param)?;
    let alphabet = obs_alphabet(m, side, param)?.clone();
    let axis = side.axis();
    let q = m.marginal(&[param, axis])?;
    let np = q.sizes()[0];
    let nx = q.sizes()[1];

    let mut mass = vec![0.0; nx];
    for k in 0..np {
        for x in 0..nx {
            mass[x] += q.get(&[k, x]);
        }
    }
    if mass.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateModel(format!(
            "axis {axis} carries no probability mass"
        )));
    }

    let profile = |x: usize| -> Vec<f64> { (0..np).map(|k| q.get(&[k, x]) / mass[x]).collect() };

    // Representatives are the first symbol of each class; comparing against
    // them (not against a drifting average) keeps grouping transitive.
    let mut reps: Vec<Option<Vec<f64>>> = Vec::new();
    let mut levels = Vec::with_capacity(nx);
    let mut null_class: Option<usize> = None;
    for x in 0..nx {
        if mass[x] <= 0.0 {
            let c = *null_class.get_or_insert_with(|| {
                reps.push(None);
                reps.len() - 1
            });
            levels.push(c);
            continue;
        }
        let p = profile(x);
        let found = reps.iter().position(|r| {
            r.as_ref().is_some_and(|r| {
                r.iter().zip(&p).all(|(a, b)| (a - b).abs() <= eps)
            })
        });
        let c = match found {
            Some(c) => c,
            None => {
                reps.push(Some(p));
                reps.len() - 1
            }
        };
        levels.push(c);
    }
    Statistic::from_levels(side, &alphabet, &levels)
}

/// Checks that the axis sets `a` and `b` are conditionally independent
/// given `given` (marginally independent when `given` is empty).
///
/// The deviation is `|p(a,b|c) - p(a|c) p(b|c)|`, maximized over cells
/// whose conditioning event has positive probability.
pub fn conditional_independence(
    m: &DiscreteModel,
    a: &[Axis],
    b: &[Axis],
    given: &[Axis],
    eps: f64,
) -> Result<CheckReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySubset);
    }
    for (x, y, what) in [(a, b, "the two sides"), (a, given, "side and conditioner"), (b, given, "side and conditioner")] {
        for ax in x {
            if y.contains(ax) {
                return Err(Error::InvalidParameter(format!(
                    "axis {ax} appears in {what} of an independence check"
                )));
            }
        }
    }

    let union: Vec<Axis> = [a, b, given].concat();
    let full = m.marginal(&union)?;
    let pa = m.marginal(&[a, given].concat())?;
    let pb = m.marginal(&[b, given].concat())?;
    let pc = if given.is_empty() {
        None
    } else {
        Some(m.marginal(given)?)
    };

    // Positions of each sub-table's axes within the full table.
    let project = |axes: &[Axis]| -> Vec<usize> {
        axes.iter()
            .map(|&ax| full.axis_position(ax).unwrap())
            .collect()
    };
    let pa_pos = project(pa.axes());
    let pb_pos = project(pb.axes());
    let pc_pos = pc.as_ref().map(|t| project(t.axes()));

    let lookup = |table: &crate::model::PmfTable, pos: &[usize], digits: &[usize]| -> f64 {
        let sub: Vec<usize> = pos.iter().map(|&p| digits[p]).collect();
        table.get(&sub)
    };

    let mut max_dev = 0.0;
    let mut best: Option<Vec<usize>> = None;
    let mut odo = Odometer::new(full.sizes());
    let mut cell = 0;
    loop {
        let digits = odo.digits();
        let p_c = match (&pc, &pc_pos) {
            (Some(t), Some(pos)) => lookup(t, pos, digits),
            _ => 1.0,
        };
        if p_c > 0.0 {
            let joint = full.probs()[cell] / p_c;
            let left = lookup(&pa, &pa_pos, digits) / p_c;
            let right = lookup(&pb, &pb_pos, digits) / p_c;
            let d = (joint - left * right).abs();
            if d > max_dev {
                max_dev = d;
                best = Some(digits.to_vec());
            }
        }
        cell += 1;
        if !odo.step() {
            break;
        }
    }
    let witness = best.map(|digits| Witness {
        assignment: full
            .axes()
            .iter()
            .zip(&digits)
            .map(|(ax, &d)| (ax.name().to_string(), full.labels()[full.axis_position(*ax).unwrap()][d].clone()))
            .collect(),
    });
    Ok(CheckReport::from_scan(eps, max_dev, witness))
}

/// Checks the two hidden-variable chains `x1 - w - x2` and
/// `theta - w - (x1, x2)`. Requires a hidden axis.
pub fn validate_hci(m: &DiscreteModel, eps: f64) -> Result<HciOutcome> {
    if !m.has_w() {
        return Err(Error::MissingHiddenAxis);
    }
    let chain_a = conditional_independence(m, &[Axis::X1], &[Axis::X2], &[Axis::W], eps)?;
    let chain_b =
        conditional_independence(m, &[Axis::Theta], &[Axis::X1, Axis::X2], &[Axis::W], eps)?;
    Ok(if chain_a.holds && chain_b.holds {
        HciOutcome::Valid { chain_a, chain_b }
    } else {
        HciOutcome::Invalid { chain_a, chain_b }
    })
}

/// Checks whether the joint splits as `g(x1) f(t1(x1), x2, theta)`.
///
/// Equivalently: within each class of `t1`, every positive-mass `x1` symbol
/// induces the same conditional over `(theta, x2)`. On success the two
/// factors are returned alongside the report.
pub fn factorization_check(
    m: &DiscreteModel,
    t1: &Statistic,
    eps: f64,
) -> Result<(CheckReport, Option<FactorizationWitness>)> {
    if t1.side() != Side::One {
        return Err(Error::InvalidParameter(
            "factorization checks reduce side 1".into(),
        ));
    }
    t1.check_domain(m.x1())?;
    let q = m.marginal(&[Axis::Theta, Axis::X1, Axis::X2])?;
    let (nt, n1, n2) = (q.sizes()[0], q.sizes()[1], q.sizes()[2]);
    let nc = t1.class_count();

    let mut mass = vec![0.0; n1];
    let mut class_mass = vec![0.0; nc];
    let mut class_cond = vec![0.0; nc * nt * n2];
    for k in 0..nt {
        for a in 0..n1 {
            let c = t1.apply(a);
            for b in 0..n2 {
                let v = q.get(&[k, a, b]);
                mass[a] += v;
                class_mass[c] += v;
                class_cond[(c * nt + k) * n2 + b] += v;
            }
        }
    }

    let mut max_dev = 0.0;
    let mut best: Option<(usize, usize, usize)> = None;
    for k in 0..nt {
        for a in 0..n1 {
            if mass[a] <= 0.0 {
                continue;
            }
            let c = t1.apply(a);
            for b in 0..n2 {
                let d = (q.get(&[k, a, b]) / mass[a]
                    - class_cond[(c * nt + k) * n2 + b] / class_mass[c])
                    .abs();
                if d > max_dev {
                    max_dev = d;
                    best = Some((k, a, b));
                }
            }
        }
    }
    let witness = best.map(|(k, a, b)| Witness {
        assignment: vec![
            ("theta".into(), q.labels()[0][k].clone()),
            ("x1".into(), q.labels()[1][a].clone()),
            ("x2".into(), q.labels()[2][b].clone()),
        ],
    });
    let report = CheckReport::from_scan(eps, max_dev, witness);
    let factors = report.holds.then(|| {
        let f = (0..nc)
            .map(|c| {
                let row = &class_cond[c * nt * n2..(c + 1) * nt * n2];
                if class_mass[c] > 0.0 {
                    row.iter().map(|v| v / class_mass[c]).collect()
                } else {
                    vec![0.0; nt * n2]
                }
            })
            .collect();
        FactorizationWitness { g: mass, f }
    });
    Ok((report, factors))
}

/// Materializes the hidden variable `w = (t1(x1), x2)` implied by a
/// successful factorization.
///
/// Any existing hidden axis is summed out first. The result always
/// satisfies both hidden-variable chains; a failed factorization is
/// an error carrying the observed deviation.
pub fn hci_from_factorization(
    m: &DiscreteModel,
    t1: &Statistic,
    eps: f64,
) -> Result<DiscreteModel> {
    let (report, _) = factorization_check(m, t1, eps)?;
    if !report.holds {
        return Err(Error::FactorizationFails {
            max_deviation: report.max_deviation,
            eps,
        });
    }
    let q = m.marginal(&[Axis::Theta, Axis::X1, Axis::X2])?;
    let (nt, n1, n2) = (q.sizes()[0], q.sizes()[1], q.sizes()[2]);
    let nc = t1.class_count();

    let mut w_labels = Vec::with_capacity(nc * n2);
    for c in 0..nc {
        for b in 0..n2 {
            w_labels.push(format!("({},{})", t1.codomain().label(c), q.labels()[2][b]));
        }
    }
    let w = Alphabet::new(w_labels)?;

    let nw = nc * n2;
    let mut p = vec![0.0; nt * nw * n1 * n2];
    let sizes = [nt, nw, n1, n2];
    for k in 0..nt {
        for a in 0..n1 {
            let h_base = t1.apply(a) * n2;
            for b in 0..n2 {
                let idx = flat_index(&sizes, &[k, h_base + b, a, b]);
                p[idx] = q.get(&[k, a, b]);
            }
        }
    }
    Ok(DiscreteModel::from_joint_unchecked(
        m.theta().clone(),
        Some(w),
        m.x1().clone(),
        m.x2().clone(),
        p,
    ))
}

fn mi_bits(q: &[f64], np: usize, nx: usize) -> f64 {
    let mut pk = vec![0.0; np];
    let mut px = vec![0.0; nx];
    for k in 0..np {
        for x in 0..nx {
            pk[k] += q[k * nx + x];
            px[x] += q[k * nx + x];
        }
    }
    let mut i = 0.0;
    for k in 0..np {
        for x in 0..nx {
            let v = q[k * nx + x];
            if v > 0.0 {
                i += v * (v / (pk[k] * px[x])).log2();
            }
        }
    }
    i
}

/// Mutual information `I(param; X)` on the statistic's side, before and
/// after applying it. The gap is zero exactly when the statistic is
/// sufficient (up to rounding).
pub fn mutual_information_gap(m: &DiscreteModel, t: &Statistic, param: Axis) -> Result<MiGap> {
    check_param(m, param)?;
    let alphabet = obs_alphabet(m, t.side(), param)?;
    t.check_domain(alphabet)?;
    let axis = t.side().axis();
    let q = m.marginal(&[param, axis])?;
    let np = q.sizes()[0];
    let nx = q.sizes()[1];

    let full = mi_bits(q.probs(), np, nx);
    let nc = t.class_count();
    let mut reduced_q = vec![0.0; np * nc];
    for k in 0..np {
        for x in 0..nx {
            reduced_q[k * nc + t.apply(x)] += q.get(&[k, x]);
        }
    }
    let reduced = mi_bits(&reduced_q, np, nc);
    Ok(MiGap {
        full_bits: full,
        reduced_bits: reduced,
        gap_bits: full - reduced,
    })
}
