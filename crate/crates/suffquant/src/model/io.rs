//! JSON model files.
//!
//! A model file names the alphabets and supplies the distribution either as
//! a flat `joint` tensor (canonical row-major order) or as `prior` plus
//! conditional `kernels`. Without a hidden axis the kernel keys are
//! `"x1|theta"` and `"x2|theta"`; with `w` present they are `"w|theta"`,
//! `"x1|w"`, and `"x2|w"`. Optional `cost` and named `statistics` blocks
//! ride along. Unknown fields are rejected so that typos fail loudly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{Alphabet, CostMatrix, DiscreteModel, Side, Statistic};
use crate::{Error, Result};

/// A parsed model file: the joint model plus its optional companions.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    /// The joint distribution.
    pub model: DiscreteModel,
    /// Distortion table, when the file carries one.
    pub cost: Option<CostMatrix>,
    /// Named statistics keyed by their file names.
    pub statistics: BTreeMap<String, Statistic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    theta: Vec<String>,
    #[serde(default)]
    w: Option<Vec<String>>,
    x1: Vec<String>,
    x2: Vec<String>,
    #[serde(default)]
    joint: Option<Vec<f64>>,
    #[serde(default)]
    prior: Option<Vec<f64>>,
    #[serde(default)]
    kernels: Option<BTreeMap<String, Vec<Vec<f64>>>>,
    #[serde(default)]
    cost: Option<CostFile>,
    #[serde(default)]
    statistics: Option<BTreeMap<String, StatisticFile>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFile {
    estimates: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatisticFile {
    side: SideSpec,
    map: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SideSpec {
    Num(u64),
    Str(String),
}

impl SideSpec {
    fn resolve(&self) -> Result<Side> {
        match self {
            SideSpec::Num(1) => Ok(Side::One),
            SideSpec::Num(2) => Ok(Side::Two),
            SideSpec::Str(s) if s == "1" => Ok(Side::One),
            SideSpec::Str(s) if s == "2" => Ok(Side::Two),
            SideSpec::Str(s) if s == "w" => Ok(Side::W),
            other => Err(Error::Schema(format!(
                "statistic side must be 1, 2, or \"w\", found {other:?}"
            ))),
        }
    }
}

/// Loads and fully validates a model file.
pub fn load(path: &Path) -> Result<LoadedModel> {
    from_str(&std::fs::read_to_string(path)?)
}

/// Parses and fully validates a model file from its JSON text.
pub fn from_str(text: &str) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    build(file, true)
}

/// Parses a model file without probability validation.
///
/// Alphabets, shapes, and the schema are still enforced; the joint tensor
/// is taken as written so that [`DiscreteModel::validate`] can report on
/// malformed probabilities instead of construction rejecting them.
pub fn load_lenient(path: &Path) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    build(file, false)
}

fn build(file: ModelFile, strict: bool) -> Result<LoadedModel> {
    let theta = Alphabet::new(file.theta)?;
    let w = file.w.map(Alphabet::new).transpose()?;
    let x1 = Alphabet::new(file.x1)?;
    let x2 = Alphabet::new(file.x2)?;

    let model = match (file.joint, file.prior, file.kernels) {
        (Some(joint), None, None) => {
            let cells =
                theta.len() * w.as_ref().map_or(1, Alphabet::len) * x1.len() * x2.len();
            if joint.len() != cells {
                return Err(Error::Schema(format!(
                    "joint tensor has {} entries, expected {cells}",
                    joint.len()
                )));
            }
            if strict {
                DiscreteModel::from_joint(theta.clone(), w, x1.clone(), x2.clone(), joint)?
            } else {
                DiscreteModel::from_joint_unchecked(theta.clone(), w, x1.clone(), x2.clone(), joint)
            }
        }
        (None, Some(prior), Some(kernels)) => {
            factored(&theta, w, &x1, &x2, &prior, &kernels, strict)?
        }
        (Some(_), _, _) => {
            return Err(Error::Schema(
                "a model file carries either a joint tensor or prior+kernels, not both".into(),
            ));
        }
        _ => {
            return Err(Error::Schema(
                "a model file needs either a joint tensor or both prior and kernels".into(),
            ));
        }
    };

    let cost = file
        .cost
        .map(|c| CostMatrix::new(theta.labels().to_vec(), c.estimates, &c.matrix))
        .transpose()?;

    let mut statistics = BTreeMap::new();
    if let Some(stats) = file.statistics {
        for (name, spec) in stats {
            let side = spec.side.resolve()?;
            let domain = model.axis_alphabet(side.axis()).ok_or_else(|| {
                Error::Schema(format!(
                    "statistic {name:?} lives on axis {} which the model lacks",
                    side.axis()
                ))
            })?;
            statistics.insert(name, Statistic::from_label_map(side, domain, &spec.map)?);
        }
    }

    Ok(LoadedModel {
        model,
        cost,
        statistics,
    })
}

fn factored(
    theta: &Alphabet,
    w: Option<Alphabet>,
    x1: &Alphabet,
    x2: &Alphabet,
    prior: &[f64],
    kernels: &BTreeMap<String, Vec<Vec<f64>>>,
    strict: bool,
) -> Result<DiscreteModel> {
    let expected: &[&str] = if w.is_some() {
        &["w|theta", "x1|w", "x2|w"]
    } else {
        &["x1|theta", "x2|theta"]
    };
    for key in kernels.keys() {
        if !expected.contains(&key.as_str()) {
            return Err(Error::Schema(format!(
                "unexpected kernel {key:?}; with{} a w axis the kernels are {expected:?}",
                if w.is_some() { "" } else { "out" }
            )));
        }
    }
    for key in expected {
        if !kernels.contains_key(*key) {
            return Err(Error::Schema(format!("missing kernel {key:?}")));
        }
    }

    if strict {
        match w {
            Some(w) => DiscreteModel::from_hci_factors(
                theta.clone(),
                prior,
                w,
                &kernels["w|theta"],
                x1.clone(),
                &kernels["x1|w"],
                x2.clone(),
                &kernels["x2|w"],
            ),
            None => DiscreteModel::from_ci_factors(
                theta.clone(),
                prior,
                x1.clone(),
                &kernels["x1|theta"],
                x2.clone(),
                &kernels["x2|theta"],
            ),
        }
    } else {
        // Shape checks only; entries multiply through as written.
        let shape = |key: &str, rows: usize, cols: usize| -> Result<()> {
            let k = &kernels[key];
            if k.len() != rows || k.iter().any(|r| r.len() != cols) {
                return Err(Error::Schema(format!(
                    "kernel {key:?} must be {rows}x{cols}"
                )));
            }
            Ok(())
        };
        if prior.len() != theta.len() {
            return Err(Error::Schema(format!(
                "prior has {} entries, expected {}",
                prior.len(),
                theta.len()
            )));
        }
        match w {
            Some(w) => {
                shape("w|theta", theta.len(), w.len())?;
                shape("x1|w", w.len(), x1.len())?;
                shape("x2|w", w.len(), x2.len())?;
                let mut p = Vec::with_capacity(theta.len() * w.len() * x1.len() * x2.len());
                for (t, pt) in prior.iter().enumerate() {
                    for h in 0..w.len() {
                        for a in 0..x1.len() {
                            for b in 0..x2.len() {
                                p.push(
                                    pt * kernels["w|theta"][t][h]
                                        * kernels["x1|w"][h][a]
                                        * kernels["x2|w"][h][b],
                                );
                            }
                        }
                    }
                }
                Ok(DiscreteModel::from_joint_unchecked(
                    theta.clone(),
                    Some(w),
                    x1.clone(),
                    x2.clone(),
                    p,
                ))
            }
            None => {
                shape("x1|theta", theta.len(), x1.len())?;
                shape("x2|theta", theta.len(), x2.len())?;
                let mut p = Vec::with_capacity(theta.len() * x1.len() * x2.len());
                for (t, pt) in prior.iter().enumerate() {
                    for a in 0..x1.len() {
                        for b in 0..x2.len() {
                            p.push(pt * kernels["x1|theta"][t][a] * kernels["x2|theta"][t][b]);
                        }
                    }
                }
                Ok(DiscreteModel::from_joint_unchecked(
                    theta.clone(),
                    None,
                    x1.clone(),
                    x2.clone(),
                    p,
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_file_round_trip() {
        let text = r#"{
            "theta": ["0", "1"],
            "x1": ["a", "b"],
            "x2": ["*"],
            "joint": [0.3, 0.2, 0.1, 0.4]
        }"#;
        let loaded = from_str(text).unwrap();
        assert!((loaded.model.prob(0, None, 0, 0) - 0.3).abs() < 1e-15);
        assert!((loaded.model.prob(1, None, 1, 0) - 0.4).abs() < 1e-15);
        assert!(loaded.cost.is_none());
        assert!(loaded.statistics.is_empty());
    }

    #[test]
    fn factored_file_with_statistics_and_cost() {
        let text = r#"{
            "theta": ["0", "1"],
            "x1": ["a", "b", "c", "d"],
            "x2": ["*"],
            "prior": [0.5, 0.5],
            "kernels": {
                "x1|theta": [[0.4, 0.1, 0.4, 0.1], [0.1, 0.4, 0.1, 0.4]],
                "x2|theta": [[1.0], [1.0]]
            },
            "cost": { "estimates": ["0", "1"], "matrix": [[0.0, 1.0], [1.0, 0.0]] },
            "statistics": {
                "T1": { "side": 1, "map": {"a": "even", "b": "odd", "c": "even", "d": "odd"} }
            }
        }"#;
        let loaded = from_str(text).unwrap();
        let t1 = &loaded.statistics["T1"];
        assert_eq!(t1.side(), Side::One);
        assert_eq!(t1.map(), &[0, 1, 0, 1]);
        assert_eq!(loaded.cost.unwrap().n_estimates(), 2);
        assert!((loaded.model.prob(0, None, 0, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hidden_axis_kernel_keys() {
        let text = r#"{
            "theta": ["0", "1"],
            "w": ["w0", "w1"],
            "x1": ["a", "b"],
            "x2": ["u", "v"],
            "prior": [0.6, 0.4],
            "kernels": {
                "w|theta": [[0.9, 0.1], [0.2, 0.8]],
                "x1|w": [[0.7, 0.3], [0.1, 0.9]],
                "x2|w": [[0.5, 0.5], [0.25, 0.75]]
            }
        }"#;
        let loaded = from_str(text).unwrap();
        assert!(loaded.model.has_w());
        let expected = 0.6 * 0.9 * 0.7 * 0.5;
        assert!((loaded.model.prob(0, Some(0), 0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn joint_and_prior_are_mutually_exclusive() {
        let text = r#"{
            "theta": ["0"], "x1": ["a"], "x2": ["b"],
            "joint": [1.0],
            "prior": [1.0],
            "kernels": { "x1|theta": [[1.0]], "x2|theta": [[1.0]] }
        }"#;
        assert!(matches!(from_str(text), Err(Error::Schema(_))));
    }

    #[test]
    fn wrong_kernel_key_for_hidden_model() {
        let text = r#"{
            "theta": ["0"], "w": ["w0"], "x1": ["a"], "x2": ["b"],
            "prior": [1.0],
            "kernels": { "w|theta": [[1.0]], "x1|theta": [[1.0]], "x2|w": [[1.0]] }
        }"#;
        assert!(matches!(from_str(text), Err(Error::Schema(_))));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = r#"{
            "theta": ["0"], "x1": ["a"], "x2": ["b"],
            "joint": [1.0],
            "extra": true
        }"#;
        assert!(matches!(from_str(text), Err(Error::Json(_))));
    }

    #[test]
    fn side_spellings() {
        for (side, expected) in [("1", Side::One), ("2", Side::Two), ("\"w\"", Side::W)] {
            let text = format!(
                r#"{{
                    "theta": ["0"], "w": ["h"], "x1": ["a"], "x2": ["b"],
                    "joint": [1.0],
                    "statistics": {{ "T": {{ "side": {side}, "map": {{ "{}": "v" }} }} }}
                }}"#,
                match expected {
                    Side::One => "a",
                    Side::Two => "b",
                    Side::W => "h",
                }
            );
            let loaded = from_str(&text).unwrap();
            assert_eq!(loaded.statistics["T"].side(), expected);
        }
    }

    #[test]
    fn lenient_load_defers_probability_checks() {
        let dir = std::env::temp_dir().join(format!("suffquant-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(
            &path,
            r#"{ "theta": ["0"], "x1": ["a", "b"], "x2": ["c"], "joint": [1.5, -0.5] }"#,
        )
        .unwrap();
        assert!(load(&path).is_err());
        let loaded = load_lenient(&path).unwrap();
        let d = loaded.model.validate();
        assert!(!d.pass);
        assert_eq!(d.negative_entries, 1);
        std::fs::remove_file(&path).ok();
    }
}
