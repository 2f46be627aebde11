//! Experiment plans: JSON schema, parsing and eager validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::frame::{self, Verdict};
use crate::scale::{make_scale, FormulaKind, ScaleSpec, WeightFormula};
use crate::sequence::SequenceGenerator;

pub const SCHEMA_VERSION: u32 = 1;

/// A scale given either by a formula and truncation or by explicit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDescriptor {
    pub formula: FormulaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl ScaleDescriptor {
    pub fn build(&self) -> Result<ScaleSpec> {
        match (&self.weights, self.formula) {
            (Some(w), FormulaKind::Explicit) => make_scale(
                &WeightFormula::Explicit(w.clone()),
                self.n.unwrap_or(w.len()),
            ),
            (Some(_), kind) => Err(Error::InvalidArgument(format!(
                "`weights` is only allowed with the explicit formula, not `{kind}`"
            ))),
            (None, FormulaKind::Explicit) => Err(Error::InvalidArgument(
                "explicit formula needs `weights`".into(),
            )),
            (None, kind) => match self.n {
                Some(n) => make_scale(&kind.into(), n),
                None => Err(Error::InvalidArgument(
                    "`n` is required for a generated scale".into(),
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDecl {
    pub generator: SequenceGenerator,
    /// Ambient index of the family.
    pub m: i32,
}

fn default_random() -> usize {
    crate::propagation::DEFAULT_RANDOM_VECTORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedBounds {
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
}

/// Study parameters. In plan files the variant is selected by a `"kind"`
/// field next to the parameters (see [`StudySpec`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StudyKind {
    FrameBounds {
        sequence: String,
        p: Vec<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Vec<ExpectedBounds>>,
    },
    Unitarity {
        p_min: i32,
        p_max: i32,
        #[serde(default = "default_random")]
        n_random: usize,
        #[serde(default)]
        seed: u64,
    },
    PivotAdjoint {
        p_min: i32,
        p_max: i32,
        pairs: usize,
        #[serde(default)]
        seed: u64,
    },
    Transfer {
        sequence: String,
        /// `(p, r)` pairs; the family is read in `H_p` and moved to `H_r`.
        pairs: Vec<(i32, i32)>,
        #[serde(default = "default_random")]
        n_random: usize,
        #[serde(default)]
        seed: u64,
    },
    Propagation {
        sequence: String,
        r: i32,
        p: i32,
        m: i32,
        #[serde(default = "default_random")]
        n_random: usize,
        #[serde(default)]
        seed: u64,
    },
    Duality {
        sequence: String,
        r: i32,
        p: i32,
        m: i32,
        #[serde(default = "default_random")]
        n_random: usize,
        #[serde(default)]
        seed: u64,
    },
    Collapse {
        sequence: String,
        p: i32,
        q: i32,
        truncations: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        formula: Option<FormulaKind>,
    },
    Classify {
        sequence: String,
        p: i32,
        truncations: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        formula: Option<FormulaKind>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Verdict>,
    },
}

/// Name, one-line summary and the statement each study kind verifies.
pub const STUDY_KINDS: &[(&str, &str)] = &[
    ("frame_bounds", "optimal frame bounds, rank and completeness of a family at the listed indices; extremal vectors must attain both bounds"),
    ("unitarity", "norm preservation of I_{p,r}: ||I_{p,r} x||_r = ||x||_p for all p, r in [p_min, p_max]"),
    ("pivot_adjoint", "adjoint through the pivot pairing: <a, T x>_0 = <T* a, x>_0, T** = T, (UT)* = T* U*, ||T*|| = ||T||"),
    ("transfer", "operators of I_{p,r} psi in H_r equal those of psi in H_p conjugated by I_{p,r}; bounds, duals, Riesz and orthonormal bases carry over"),
    ("propagation", "Bessel bounds carry down the scale, lower bounds carry up, completeness is index independent, C^r = C^p iota_{r,p}"),
    ("duality", "canonical dual phi in H_m is Bessel below m and f = iota_{p,m}^{-1} sum <f,psi_k>_p phi_k"),
    ("collapse", "a frame at p loses its lower bound at q < p: A_q(N) decays as ||iota_{q,p}^{-1}|| grows"),
    ("classify", "frame / upper semi-frame / lower semi-frame verdict from log-log trends of the bounds across truncations"),
];

/// One study: `{"kind": ..., "name"?: ..., "scale"?: ..., <parameters>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub name: Option<String>,
    /// Replaces the plan-level scale for this study.
    pub scale: Option<ScaleDescriptor>,
    pub kind: StudyKind,
}

impl Serialize for StudySpec {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let tagged = serde_json::to_value(&self.kind).map_err(S::Error::custom)?;
        let Value::Object(outer) = tagged else {
            return Err(S::Error::custom("study parameters must be an object"));
        };
        let (kind, params) = outer
            .into_iter()
            .next()
            .ok_or_else(|| S::Error::custom("empty study"))?;
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::String(kind));
        if let Some(name) = &self.name {
            obj.insert("name".into(), Value::String(name.clone()));
        }
        if let Some(scale) = &self.scale {
            obj.insert(
                "scale".into(),
                serde_json::to_value(scale).map_err(S::Error::custom)?,
            );
        }
        if let Value::Object(params) = params {
            obj.extend(params);
        }
        Value::Object(obj).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StudySpec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = Value::deserialize(deserializer)?;
        StudySpec::from_value(value)
            .map_err(|(pointer, message)| D::Error::custom(format!("{pointer}: {message}")))
    }
}

impl StudySpec {
    /// Errors carry a JSON pointer relative to the study object.
    fn from_value(value: Value) -> std::result::Result<StudySpec, (String, String)> {
        let Value::Object(mut obj) = value else {
            return Err((String::new(), "a study must be a JSON object".into()));
        };
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(("/kind".into(), "`kind` must be a string".into())),
            None => return Err((String::new(), "missing field `kind`".into())),
        };
        if !STUDY_KINDS.iter().any(|(k, _)| *k == kind) {
            let known: Vec<&str> = STUDY_KINDS.iter().map(|(k, _)| *k).collect();
            return Err((
                "/kind".into(),
                format!(
                    "unknown study kind `{kind}`, expected one of {}",
                    known.join(", ")
                ),
            ));
        }
        let name = match obj.remove("name") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(("/name".into(), "`name` must be a string".into())),
        };
        let scale = match obj.remove("scale") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_path_to_error::deserialize::<_, ScaleDescriptor>(v).map_err(|e| {
                    (
                        format!("/scale{}", pointer_of(e.path())),
                        e.into_inner().to_string(),
                    )
                })?,
            ),
        };
        let mut tagged = Map::new();
        tagged.insert(kind, Value::Object(obj));
        let kind = serde_path_to_error::deserialize::<_, StudyKind>(Value::Object(tagged))
            .map_err(|e| (pointer_of(e.path()), e.into_inner().to_string()))?;
        Ok(StudySpec { name, scale, kind })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            StudyKind::FrameBounds { .. } => "frame_bounds",
            StudyKind::Unitarity { .. } => "unitarity",
            StudyKind::PivotAdjoint { .. } => "pivot_adjoint",
            StudyKind::Transfer { .. } => "transfer",
            StudyKind::Propagation { .. } => "propagation",
            StudyKind::Duality { .. } => "duality",
            StudyKind::Collapse { .. } => "collapse",
            StudyKind::Classify { .. } => "classify",
        }
    }

    pub fn display_name(&self, position: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}#{position}", self.kind_name()))
    }

    fn sequence(&self) -> Option<&str> {
        match &self.kind {
            StudyKind::FrameBounds { sequence, .. }
            | StudyKind::Transfer { sequence, .. }
            | StudyKind::Propagation { sequence, .. }
            | StudyKind::Duality { sequence, .. }
            | StudyKind::Collapse { sequence, .. }
            | StudyKind::Classify { sequence, .. } => Some(sequence),
            StudyKind::Unitarity { .. } | StudyKind::PivotAdjoint { .. } => None,
        }
    }

    fn override_seed(&mut self, new_seed: u64) {
        match &mut self.kind {
            StudyKind::Unitarity { seed, .. }
            | StudyKind::PivotAdjoint { seed, .. }
            | StudyKind::Transfer { seed, .. }
            | StudyKind::Propagation { seed, .. }
            | StudyKind::Duality { seed, .. } => *seed = new_seed,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema: u32,
    pub scale: ScaleDescriptor,
    #[serde(default)]
    pub sequences: BTreeMap<String, SequenceDecl>,
    #[serde(default)]
    pub studies: Vec<StudySpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn config_error(pointer: impl Into<String>, message: impl ToString) -> Error {
    Error::Config {
        pointer: pointer.into(),
        message: message.to_string(),
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            // Variant names are the `kind` tag, already part of the study object.
            Segment::Enum { .. } => {
                out.pop();
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    schema: u32,
    scale: ScaleDescriptor,
    #[serde(default)]
    sequences: BTreeMap<String, SequenceDecl>,
    #[serde(default)]
    studies: Vec<Value>,
    #[serde(default)]
    output: OutputSpec,
}

/// Parses and validates a plan. Schema violations carry a JSON pointer to the
/// offending value.
pub fn parse_config(text: &str) -> Result<ExperimentPlan> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawPlan = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        config_error(
            if pointer.is_empty() {
                "/".to_string()
            } else {
                pointer
            },
            e.into_inner(),
        )
    })?;
    let studies = raw
        .studies
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            StudySpec::from_value(v).map_err(|(pointer, message)| {
                config_error(format!("/studies/{i}{pointer}"), message)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = ExperimentPlan {
        schema: raw.schema,
        scale: raw.scale,
        sequences: raw.sequences,
        studies,
        output: raw.output,
    };
    plan.validate()?;
    Ok(plan)
}

impl ExperimentPlan {
    /// Replaces the seed of every sequence generator and study.
    pub fn override_seeds(&mut self, seed: u64) {
        for decl in self.sequences.values_mut() {
            decl.generator.override_seed(seed);
        }
        for study in &mut self.studies {
            study.override_seed(seed);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(config_error(
                "/schema",
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    self.schema
                ),
            ));
        }
        let base = self.scale.build().map_err(|e| config_error("/scale", e))?;
        for (name, decl) in &self.sequences {
            let at = format!("/sequences/{name}");
            decl.generator
                .validate()
                .map_err(|e| config_error(format!("{at}/generator"), e))?;
            base.check_index(decl.m)
                .map_err(|e| config_error(format!("{at}/m"), e))?;
        }
        for (i, study) in self.studies.iter().enumerate() {
            self.validate_study(i, study, &base)?;
        }
        Ok(())
    }

    fn validate_study(&self, i: usize, study: &StudySpec, base: &ScaleSpec) -> Result<()> {
        let at = format!("/studies/{i}");
        let err = |field: &str, msg: &dyn ToString| {
            config_error(format!("{at}/{field}"), msg.to_string())
        };
        let overridden;
        let scale = match &study.scale {
            Some(d) => {
                overridden = d.build().map_err(|e| err("scale", &e))?;
                &overridden
            }
            None => base,
        };
        let decl = match study.sequence() {
            Some(name) => Some(
                self.sequences
                    .get(name)
                    .ok_or_else(|| err("sequence", &format!("undefined sequence `{name}`")))?,
            ),
            None => None,
        };
        let index = |field: &str, p: i32| scale.check_index(p).map_err(|e| err(field, &e));
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(err(field, &"must be at least 1"))
            } else {
                Ok(())
            }
        };
        let ordered = |r: i32, p: i32, m: i32| {
            if r <= p && p <= m {
                Ok(())
            } else {
                Err(err(
                    "r",
                    &format!("indices must satisfy r <= p <= m (got {r}, {p}, {m})"),
                ))
            }
        };
        if let Some(d) = decl {
            index("sequence", d.m)?;
        }
        match &study.kind {
            StudyKind::FrameBounds { p, expect, .. } => {
                if p.is_empty() {
                    return Err(err("p", &"at least one index is required"));
                }
                for &q in p {
                    index("p", q)?;
                }
                if let Some(e) = expect {
                    if e.len() != p.len() {
                        return Err(err(
                            "expect",
                            &format!("{} expectations for {} indices", e.len(), p.len()),
                        ));
                    }
                }
            }
            StudyKind::Unitarity {
                p_min,
                p_max,
                n_random,
                ..
            }
            | StudyKind::PivotAdjoint {
                p_min,
                p_max,
                pairs: n_random,
                ..
            } => {
                if p_min > p_max {
                    return Err(err("p_min", &"p_min must not exceed p_max"));
                }
                index("p_min", *p_min)?;
                index("p_max", *p_max)?;
                positive(
                    if matches!(study.kind, StudyKind::Unitarity { .. }) {
                        "n_random"
                    } else {
                        "pairs"
                    },
                    *n_random,
                )?;
            }
            StudyKind::Transfer {
                pairs, n_random, ..
            } => {
                if pairs.is_empty() {
                    return Err(err("pairs", &"at least one (p, r) pair is required"));
                }
                for &(p, r) in pairs {
                    index("pairs", p)?;
                    index("pairs", r)?;
                }
                positive("n_random", *n_random)?;
            }
            StudyKind::Propagation {
                r, p, m, n_random, ..
            }
            | StudyKind::Duality {
                r, p, m, n_random, ..
            } => {
                ordered(*r, *p, *m)?;
                for (f, v) in [("r", *r), ("p", *p), ("m", *m)] {
                    index(f, v)?;
                }
                positive("n_random", *n_random)?;
            }
            StudyKind::Collapse {
                p,
                q,
                truncations,
                formula,
                ..
            } => {
                if q >= p {
                    return Err(err(
                        "q",
                        &format!("collapse needs q < p (got q = {q}, p = {p})"),
                    ));
                }
                self.validate_sweep(&at, truncations, *formula, study, &[*p, *q], decl)?;
            }
            StudyKind::Classify {
                p,
                truncations,
                formula,
                ..
            } => {
                self.validate_sweep(&at, truncations, *formula, study, &[*p], decl)?;
            }
        }
        Ok(())
    }

    fn validate_sweep(
        &self,
        at: &str,
        truncations: &[usize],
        formula: Option<FormulaKind>,
        study: &StudySpec,
        indices: &[i32],
        decl: Option<&SequenceDecl>,
    ) -> Result<()> {
        frame::check_truncations(truncations)
            .map_err(|e| config_error(format!("{at}/truncations"), e))?;
        let kind = self.sweep_formula(study, formula);
        if kind == FormulaKind::Explicit {
            return Err(config_error(
                format!("{at}/formula"),
                "truncation sweeps need a generated weight formula",
            ));
        }
        let largest = make_scale(&kind.into(), *truncations.last().unwrap())
            .map_err(|e| config_error(format!("{at}/truncations"), e))?;
        for &p in indices.iter().chain(decl.map(|d| &d.m)) {
            largest
                .check_index(p)
                .map_err(|e| config_error(at.to_string(), e))?;
        }
        Ok(())
    }

    /// Formula used by a truncation sweep: the study's own, else the scale's.
    pub fn sweep_formula(&self, study: &StudySpec, formula: Option<FormulaKind>) -> FormulaKind {
        formula.unwrap_or_else(|| study.scale.as_ref().unwrap_or(&self.scale).formula)
    }
}
