//! Test sequences `ψ = (ψ_1, …, ψ_M) ⊆ H_m`.
//!
//! Random families are drawn with ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded
//! through `SeedableRng::seed_from_u64`) and standard normals from
//! `rand_distr::StandardNormal`. Entries are generated column by column, each
//! entry as `(re, im)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::scale::{ChainOperator, ScaleSpec, SpaceIndex};

/// Condition numbers above this are treated as singular.
pub const CONDITION_THRESHOLD: f64 = 1e12;

/// Parameters recorded alongside a generated family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
}

/// A finite sequence of vectors stored as the columns of an `N × M` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr", into = "FamilyRepr")]
pub struct SequenceFamily {
    pub vectors: CMatrix,
    pub ambient_index: SpaceIndex,
    pub label: String,
    pub generator_params: GeneratorParams,
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    label: String,
    ambient_index: SpaceIndex,
    dimension: usize,
    count: usize,
    columns: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    generator_params: GeneratorParams,
}

impl From<SequenceFamily> for FamilyRepr {
    fn from(s: SequenceFamily) -> Self {
        let columns = s
            .vectors
            .column_iter()
            .map(|col| col.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        FamilyRepr {
            label: s.label,
            ambient_index: s.ambient_index,
            dimension: s.vectors.nrows(),
            count: s.vectors.ncols(),
            columns,
            generator_params: s.generator_params,
        }
    }
}

impl TryFrom<FamilyRepr> for SequenceFamily {
    type Error = Error;

    fn try_from(repr: FamilyRepr) -> Result<Self> {
        if repr.columns.len() != repr.count {
            return Err(Error::LengthMismatch {
                expected: repr.count,
                found: repr.columns.len(),
            });
        }
        let mut vectors = CMatrix::zeros(repr.dimension, repr.count);
        for (k, col) in repr.columns.iter().enumerate() {
            if col.len() != repr.dimension {
                return Err(Error::LengthMismatch {
                    expected: repr.dimension,
                    found: col.len(),
                });
            }
            for (j, &[re, im]) in col.iter().enumerate() {
                vectors[(j, k)] = C64::new(re, im);
            }
        }
        SequenceFamily::new(
            vectors,
            repr.ambient_index,
            repr.label,
            repr.generator_params,
        )
    }
}

impl SequenceFamily {
    pub fn new(
        vectors: CMatrix,
        ambient_index: impl Into<SpaceIndex>,
        label: impl Into<String>,
        generator_params: GeneratorParams,
    ) -> Result<Self> {
        if vectors.ncols() == 0 || vectors.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        if vectors
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidArgument(
                "sequence contains non-finite entries".into(),
            ));
        }
        Ok(SequenceFamily {
            vectors,
            ambient_index: ambient_index.into(),
            label: label.into(),
            generator_params,
        })
    }

    /// Builds a family from real columns.
    pub fn from_real_columns(
        columns: &[Vec<f64>],
        ambient_index: impl Into<SpaceIndex>,
        label: &str,
    ) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let mut vectors = CMatrix::zeros(n, columns.len());
        for (k, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            for (j, &x) in col.iter().enumerate() {
                vectors[(j, k)] = C64::new(x, 0.0);
            }
        }
        SequenceFamily::new(vectors, ambient_index, label, GeneratorParams::default())
    }

    /// Truncation dimension `N`.
    pub fn dimension(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of vectors `M`.
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn with_vectors(
        &self,
        vectors: CMatrix,
        ambient_index: SpaceIndex,
        label: String,
    ) -> SequenceFamily {
        SequenceFamily {
            vectors,
            ambient_index,
            label,
            generator_params: self.generator_params.clone(),
        }
    }

    /// Long-format CSV (`row,column,re,im`) of the coordinate matrix, 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "column", "re", "im"])?;
        for k in 0..self.len() {
            for j in 0..self.dimension() {
                let z = self.vectors[(j, k)];
                w.write_record([
                    (j + 1).to_string(),
                    (k + 1).to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }
}

fn check_dimension(scale: &ScaleSpec, seq: &SequenceFamily) -> Result<()> {
    if seq.dimension() != scale.n() {
        return Err(Error::LengthMismatch {
            expected: scale.n(),
            found: seq.dimension(),
        });
    }
    Ok(())
}

/// Coordinate vectors `e_1..e_N`.
pub fn canonical_basis(scale: &ScaleSpec, m: impl Into<SpaceIndex>) -> SequenceFamily {
    let n = scale.n();
    SequenceFamily {
        vectors: CMatrix::identity(n, n),
        ambient_index: m.into(),
        label: "canonical_basis".into(),
        generator_params: GeneratorParams::default(),
    }
}

/// Columns `a_k^s e_k`. With `s = −m/2` this is an orthonormal basis of `H_m`.
pub fn weighted_basis(scale: &ScaleSpec, m: impl Into<SpaceIndex>, s: f64) -> SequenceFamily {
    SequenceFamily {
        vectors: linalg::real_diag(&scale.powers(s)),
        ambient_index: m.into(),
        label: format!("weighted_basis(s={s})"),
        generator_params: GeneratorParams {
            exponent: Some(s),
            ..Default::default()
        },
    }
}

/// Image `ψ_k = T(a_k^{−m/2} e_k)` of the orthonormal basis of `H_m` under a
/// bounded bijection `T` on `H_m`.
pub fn riesz_from_operator(
    scale: &ScaleSpec,
    m: impl Into<SpaceIndex>,
    t: &ChainOperator,
    descriptor: &str,
) -> Result<SequenceFamily> {
    let m = m.into();
    if t.source != m || t.target != m || !t.matrix.is_square() {
        return Err(Error::NotEndomorphism);
    }
    let condition = scale.condition_number(t)?;
    if condition.is_nan() || condition > CONDITION_THRESHOLD {
        return Err(Error::NearSingular {
            condition,
            threshold: CONDITION_THRESHOLD,
        });
    }
    let onb = scale.powers(-(m.0 as f64) / 2.0);
    Ok(SequenceFamily {
        vectors: linalg::scale_cols(&t.matrix, &onb),
        ambient_index: m,
        label: format!("riesz({descriptor})"),
        generator_params: GeneratorParams {
            operator: Some(descriptor.to_string()),
            ..Default::default()
        },
    })
}

/// `M` complex Gaussian vectors, scaled so that the Bessel bound in `H_m` is 1.
pub fn random_bessel(
    scale: &ScaleSpec,
    m: impl Into<SpaceIndex>,
    count: usize,
    seed: u64,
) -> Result<SequenceFamily> {
    let m = m.into();
    if count == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = linalg::random_matrix(&mut rng, scale.n(), count);
    let sigma_max =
        linalg::singular_values(&linalg::scale_rows(&raw, &scale.powers(m.0 as f64 / 2.0)))[0];
    Ok(SequenceFamily {
        vectors: raw.map(|z| z / sigma_max),
        ambient_index: m,
        label: format!("random_bessel(M={count},seed={seed})"),
        generator_params: GeneratorParams {
            seed: Some(seed),
            ..Default::default()
        },
    })
}

/// `(I_{p,r} ψ_k)`, declared in `H_r`.
pub fn transform_sequence(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
    r: impl Into<SpaceIndex>,
) -> Result<SequenceFamily> {
    check_dimension(scale, seq)?;
    let (p, r) = (p.into(), r.into());
    let vectors = linalg::scale_rows(&seq.vectors, &scale.berezanskii_factors(p, r));
    let label = if p == r {
        seq.label.clone()
    } else {
        format!("I_{{{p},{r}}}({})", seq.label)
    };
    Ok(seq.with_vectors(vectors, r, label))
}

/// Operators used to generate Riesz bases at any truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RieszOperator {
    Identity,
    Scalar {
        factor: f64,
    },
    /// `diag(1, 2, …, N)`
    DiagonalRamp,
    /// `I + strength · G / ‖G‖₂` with a seeded Gaussian `G`; `strength < 1`
    /// keeps the condition number below `(1 + strength) / (1 − strength)`.
    RandomPerturbation {
        seed: u64,
        strength: f64,
    },
}

impl RieszOperator {
    pub fn matrix(&self, n: usize) -> CMatrix {
        match self {
            RieszOperator::Identity => CMatrix::identity(n, n),
            RieszOperator::Scalar { factor } => CMatrix::identity(n, n) * C64::new(*factor, 0.0),
            RieszOperator::DiagonalRamp => {
                linalg::real_diag(&(1..=n).map(|j| j as f64).collect::<Vec<_>>())
            }
            RieszOperator::RandomPerturbation { seed, strength } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let g = linalg::random_matrix(&mut rng, n, n);
                let norm = linalg::singular_values(&g)[0];
                CMatrix::identity(n, n) + g * C64::new(strength / norm, 0.0)
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            RieszOperator::Identity => "identity".into(),
            RieszOperator::Scalar { factor } => format!("scalar({factor})"),
            RieszOperator::DiagonalRamp => "diagonal_ramp".into(),
            RieszOperator::RandomPerturbation { seed, strength } => {
                format!("random_perturbation(seed={seed},strength={strength})")
            }
        }
    }
}

/// Truncation-independent description of a family, so the same sequence can be
/// rebuilt at every `N` of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceGenerator {
    CanonicalBasis,
    WeightedBasis {
        s: f64,
    },
    /// Orthonormal basis of the ambient space, `s = −m/2`.
    OrthonormalBasis,
    Riesz {
        operator: RieszOperator,
    },
    /// Exactly one of `count` or `redundancy` (`M = ceil(redundancy · N)`).
    RandomBessel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        redundancy: Option<f64>,
        seed: u64,
    },
}

impl SequenceGenerator {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            SequenceGenerator::RandomBessel {
                count, redundancy, ..
            } => match (count, redundancy) {
                (Some(0), None) => Err("count must be at least 1".into()),
                (Some(_), None) => Ok(()),
                (None, Some(r)) if r.is_finite() && *r > 0.0 => Ok(()),
                (None, Some(_)) => Err("redundancy must be a positive number".into()),
                _ => Err("exactly one of `count` or `redundancy` is required".into()),
            },
            SequenceGenerator::Riesz {
                operator: RieszOperator::RandomPerturbation { strength, .. },
            } => {
                if (0.0..1.0).contains(strength) {
                    Ok(())
                } else {
                    Err("strength must lie in [0, 1)".into())
                }
            }
            SequenceGenerator::Riesz {
                operator: RieszOperator::Scalar { factor },
            } => {
                if factor.is_finite() && *factor != 0.0 {
                    Ok(())
                } else {
                    Err("factor must be finite and nonzero".into())
                }
            }
            SequenceGenerator::WeightedBasis { s } if !s.is_finite() => {
                Err("s must be finite".into())
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, scale: &ScaleSpec, m: impl Into<SpaceIndex>) -> Result<SequenceFamily> {
        let m = m.into();
        self.validate().map_err(Error::InvalidArgument)?;
        match self {
            SequenceGenerator::CanonicalBasis => Ok(canonical_basis(scale, m)),
            SequenceGenerator::WeightedBasis { s } => Ok(weighted_basis(scale, m, *s)),
            SequenceGenerator::OrthonormalBasis => {
                let mut seq = weighted_basis(scale, m, -(m.0 as f64) / 2.0);
                seq.label = format!("orthonormal_basis(H_{m})");
                Ok(seq)
            }
            SequenceGenerator::Riesz { operator } => {
                let t = ChainOperator::new(operator.matrix(scale.n()), m, m)?;
                riesz_from_operator(scale, m, &t, &operator.descriptor())
            }
            SequenceGenerator::RandomBessel {
                count,
                redundancy,
                seed,
            } => {
                let count = match (count, redundancy) {
                    (Some(c), _) => *c,
                    (None, Some(r)) => (r * scale.n() as f64).ceil() as usize,
                    _ => unreachable!("validated above"),
                };
                random_bessel(scale, m, count, *seed)
            }
        }
    }

    /// Replaces every embedded seed.
    pub fn override_seed(&mut self, new_seed: u64) {
        match self {
            SequenceGenerator::RandomBessel { seed, .. } => *seed = new_seed,
            SequenceGenerator::Riesz {
                operator: RieszOperator::RandomPerturbation { seed, .. },
            } => *seed = new_seed,
            _ => {}
        }
    }
}
