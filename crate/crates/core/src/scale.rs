//! Finite-dimensional model of an A-scale of Hilbert spaces.
//!
//! The generator is the diagonal operator `A = diag(a_1, …, a_N)` with every
//! `a_j ≥ 1`. The space `H_p` is `C^N` equipped with
//!
//! ```text
//! ⟨x, y⟩_p = Σ_j a_j^p x_j conj(y_j)
//! ```
//!
//! so every element of the chain is the same coordinate space carrying a
//! different weighted norm, and every chain operator is an `N × N` matrix in
//! canonical coordinates. `F = A^{1/2}` and `B = A^{-1/2}` are never stored;
//! they appear implicitly through the half powers `a_j^{(p-r)/2}` used by the
//! Berezanskii isomorphisms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real_diag, scale_entries, CMatrix, CVector, C64};

/// Largest weight accepted by [`ScaleSpec`]. Large enough for `a_j = 2^j`
/// with `N = 64`.
pub const MAX_WEIGHT: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Largest admissible `|p|` for a space index.
pub const INDEX_LIMIT: i32 = 16;

/// `|p| · ln(a_max)` must stay below this so `a_j^p` is finite with headroom.
const MAX_LOG_POWER: f64 = 700.0;

/// Index `p` of a space `H_p` in the scale. Index 0 is the pivot space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpaceIndex(pub i32);

impl SpaceIndex {
    pub const PIVOT: SpaceIndex = SpaceIndex(0);

    pub fn value(self) -> i32 {
        self.0
    }
}

impl From<i32> for SpaceIndex {
    fn from(p: i32) -> Self {
        SpaceIndex(p)
    }
}

impl fmt::Display for SpaceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How the weights of a scale were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaKind {
    /// `a_j = j`
    Linear,
    /// `a_j = 1 + j²`
    ShiftedQuadratic,
    /// `a_j = 2^j`
    Exponential,
    /// `a_j = 1`; every space of the scale coincides.
    Constant,
    Explicit,
}

impl FormulaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaKind::Linear => "linear",
            FormulaKind::ShiftedQuadratic => "shifted_quadratic",
            FormulaKind::Exponential => "exponential",
            FormulaKind::Constant => "constant",
            FormulaKind::Explicit => "explicit",
        }
    }

    pub fn parse(s: &str) -> Option<FormulaKind> {
        Some(match s {
            "linear" => FormulaKind::Linear,
            "shifted_quadratic" => FormulaKind::ShiftedQuadratic,
            "exponential" => FormulaKind::Exponential,
            "constant" => FormulaKind::Constant,
            "explicit" => FormulaKind::Explicit,
            _ => return None,
        })
    }

    /// Weight `a_j` for 1-based position `j`. `None` for explicit lists.
    pub fn weight(self, j: usize) -> Option<f64> {
        let x = j as f64;
        match self {
            FormulaKind::Linear => Some(x),
            FormulaKind::ShiftedQuadratic => Some(1.0 + x * x),
            FormulaKind::Exponential => Some(2f64.powi(j as i32)),
            FormulaKind::Constant => Some(1.0),
            FormulaKind::Explicit => None,
        }
    }
}

impl fmt::Display for FormulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input descriptor for [`make_scale`].
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFormula {
    Generated(FormulaKind),
    Explicit(Vec<f64>),
}

impl From<FormulaKind> for WeightFormula {
    fn from(kind: FormulaKind) -> Self {
        WeightFormula::Generated(kind)
    }
}

/// Generator weights `a_1..a_N` of a truncated scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScaleSpecRepr", into = "ScaleSpecRepr")]
pub struct ScaleSpec {
    formula: FormulaKind,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScaleSpecRepr {
    formula: String,
    n: usize,
    weights: Vec<f64>,
}

impl From<ScaleSpec> for ScaleSpecRepr {
    fn from(s: ScaleSpec) -> Self {
        ScaleSpecRepr {
            formula: s.formula.as_str().to_string(),
            n: s.weights.len(),
            weights: s.weights,
        }
    }
}

impl TryFrom<ScaleSpecRepr> for ScaleSpec {
    type Error = Error;

    fn try_from(repr: ScaleSpecRepr) -> Result<Self> {
        let formula = FormulaKind::parse(&repr.formula).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown weight formula `{}`", repr.formula))
        })?;
        if repr.n != repr.weights.len() {
            return Err(Error::TruncationMismatch {
                expected: repr.n,
                found: repr.weights.len(),
            });
        }
        validate_weights(&repr.weights)?;
        Ok(ScaleSpec {
            formula,
            weights: repr.weights,
        })
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyScale);
    }
    for (i, &a) in weights.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::NonFiniteWeight { index: i + 1 });
        }
        if a < 1.0 {
            return Err(Error::WeightBelowOne {
                index: i + 1,
                value: a,
            });
        }
        if a > MAX_WEIGHT {
            return Err(Error::WeightTooLarge {
                index: i + 1,
                value: a,
                max: MAX_WEIGHT,
            });
        }
    }
    Ok(())
}

/// Evaluates a weight formula at truncation `n`.
pub fn make_scale(formula: &WeightFormula, n: usize) -> Result<ScaleSpec> {
    if n == 0 {
        return Err(Error::EmptyScale);
    }
    match formula {
        WeightFormula::Generated(FormulaKind::Explicit) => Err(Error::InvalidArgument(
            "explicit formula needs a weight list".into(),
        )),
        WeightFormula::Generated(kind) => {
            let weights: Vec<f64> = (1..=n).map(|j| kind.weight(j).unwrap()).collect();
            validate_weights(&weights)?;
            Ok(ScaleSpec {
                formula: *kind,
                weights,
            })
        }
        WeightFormula::Explicit(list) => {
            if list.len() != n {
                return Err(Error::TruncationMismatch {
                    expected: n,
                    found: list.len(),
                });
            }
            validate_weights(list)?;
            Ok(ScaleSpec {
                formula: FormulaKind::Explicit,
                weights: list.clone(),
            })
        }
    }
}

/// Whether `I_{p,r}` is a Berezanskii isomorphism proper, i.e. `(p − r)` is even
/// and the map only involves integer powers of `A`.
pub fn is_berezanskii(p: impl Into<SpaceIndex>, r: impl Into<SpaceIndex>) -> bool {
    (p.into().0 - r.into().0).rem_euclid(2) == 0
}

/// Index of the dual of `H_p` with respect to the central space `H_pivot`.
pub fn dual_index(p: impl Into<SpaceIndex>, pivot: impl Into<SpaceIndex>) -> Result<SpaceIndex> {
    let (p, pivot) = (p.into(), pivot.into());
    if pivot > p {
        return Err(Error::UnorderedIndices {
            what: format!("pivot <= p (got pivot = {pivot}, p = {p})"),
        });
    }
    Ok(SpaceIndex(2 * pivot.0 - p.0))
}

impl ScaleSpec {
    pub fn explicit(weights: Vec<f64>) -> Result<ScaleSpec> {
        let n = weights.len();
        make_scale(&WeightFormula::Explicit(weights), n)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn formula(&self) -> FormulaKind {
        self.formula
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(1.0, f64::max)
    }

    /// True when all weights coincide, so every `H_p` carries a multiple of the same norm.
    pub fn is_trivial(&self) -> bool {
        let first = self.weights[0];
        self.weights.iter().all(|&a| a == first)
    }

    /// Checks that `a_j^p` is representable for every weight.
    pub fn check_index(&self, p: impl Into<SpaceIndex>) -> Result<()> {
        let p = p.into().0;
        let log_max = self.max_weight().ln();
        if p.abs() > INDEX_LIMIT || (p.abs() as f64) * log_max > MAX_LOG_POWER {
            return Err(Error::IndexOutOfRange {
                index: p,
                limit: INDEX_LIMIT,
            });
        }
        Ok(())
    }

    /// `a_j^e` for every weight.
    pub fn powers(&self, exponent: f64) -> Vec<f64> {
        if exponent == 0.0 {
            return vec![1.0; self.n()];
        }
        self.weights.iter().map(|a| a.powf(exponent)).collect()
    }

    /// `W_p = diag(a_j^p)`, the Gram matrix of the canonical coordinates in `H_p`.
    pub fn weight_matrix(&self, p: impl Into<SpaceIndex>) -> CMatrix {
        real_diag(&self.powers(p.into().0 as f64))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    /// `⟨x, y⟩_p = Σ_j a_j^p x_j conj(y_j)`, linear in the first slot.
    pub fn inner_product(&self, p: impl Into<SpaceIndex>, x: &CVector, y: &CVector) -> Result<C64> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let w = self.powers(p.into().0 as f64);
        Ok(x.iter()
            .zip(y.iter())
            .zip(&w)
            .map(|((xj, yj), &wj)| xj * yj.conj() * wj)
            .sum())
    }

    pub fn norm(&self, p: impl Into<SpaceIndex>, x: &CVector) -> Result<f64> {
        self.check_len(x.len())?;
        let w = self.powers(p.into().0 as f64);
        Ok(x.iter()
            .zip(&w)
            .map(|(xj, &wj)| xj.norm_sqr() * wj)
            .sum::<f64>()
            .sqrt())
    }

    /// `ι_{r,p} f`, the adjoint of the inclusion `H_p ⊆ H_r` (so `r ≤ p`):
    /// the unique vector with `⟨f, x⟩_r = ⟨ι_{r,p} f, x⟩_p` for all `x`.
    pub fn inclusion_adjoint(
        &self,
        r: impl Into<SpaceIndex>,
        p: impl Into<SpaceIndex>,
        f: &CVector,
    ) -> Result<CVector> {
        let op = self.inclusion_adjoint_factors(r.into(), p.into())?;
        self.check_len(f.len())?;
        Ok(scale_entries(f, &op))
    }

    pub fn inclusion_adjoint_operator(
        &self,
        r: impl Into<SpaceIndex>,
        p: impl Into<SpaceIndex>,
    ) -> Result<ChainOperator> {
        let (r, p) = (r.into(), p.into());
        let factors = self.inclusion_adjoint_factors(r, p)?;
        Ok(ChainOperator {
            matrix: real_diag(&factors),
            source: r,
            target: p,
        })
    }

    /// `ι_{r,p}^{−1} g` for `r ≤ p`: coordinates `a_j^{p−r} g_j`. Bounded only
    /// at finite truncation; its norm grows with `N` for non-trivial scales.
    pub fn inverse_inclusion_adjoint(
        &self,
        r: impl Into<SpaceIndex>,
        p: impl Into<SpaceIndex>,
        g: &CVector,
    ) -> Result<CVector> {
        let (r, p) = (r.into(), p.into());
        if r > p {
            return Err(Error::NotInclusionDirection { r: r.0, p: p.0 });
        }
        self.check_len(g.len())?;
        Ok(scale_entries(g, &self.powers((p.0 - r.0) as f64)))
    }

    /// `ι_{r,p}^{−1} : H_p → H_r` as a chain operator.
    pub fn inverse_inclusion_operator(
        &self,
        r: impl Into<SpaceIndex>,
        p: impl Into<SpaceIndex>,
    ) -> Result<ChainOperator> {
        let (r, p) = (r.into(), p.into());
        if r > p {
            return Err(Error::NotInclusionDirection { r: r.0, p: p.0 });
        }
        Ok(ChainOperator {
            matrix: real_diag(&self.powers((p.0 - r.0) as f64)),
            source: p,
            target: r,
        })
    }

    fn inclusion_adjoint_factors(&self, r: SpaceIndex, p: SpaceIndex) -> Result<Vec<f64>> {
        if r > p {
            return Err(Error::NotInclusionDirection { r: r.0, p: p.0 });
        }
        Ok(self.powers((r.0 - p.0) as f64))
    }

    /// Coordinate factors of `I_{p,r}`: `a_j^{(p−r)/2}`.
    pub fn berezanskii_factors(
        &self,
        p: impl Into<SpaceIndex>,
        r: impl Into<SpaceIndex>,
    ) -> Vec<f64> {
        let (p, r) = (p.into().0, r.into().0);
        self.powers(f64::from(p - r) / 2.0)
    }

    /// `I_{p,r} x = B^r F^p x`, the unitary map `H_p → H_r`.
    pub fn berezanskii_map(
        &self,
        p: impl Into<SpaceIndex>,
        r: impl Into<SpaceIndex>,
        x: &CVector,
    ) -> Result<CVector> {
        self.check_len(x.len())?;
        Ok(scale_entries(x, &self.berezanskii_factors(p, r)))
    }

    pub fn berezanskii_operator(
        &self,
        p: impl Into<SpaceIndex>,
        r: impl Into<SpaceIndex>,
    ) -> ChainOperator {
        let (p, r) = (p.into(), r.into());
        ChainOperator {
            matrix: real_diag(&self.berezanskii_factors(p, r)),
            source: p,
            target: r,
        }
    }

    /// Hilbert-space adjoint `T* : H_q → H_p` of `T : H_p → H_q`, i.e.
    /// `⟨T x, y⟩_q = ⟨x, T* y⟩_p`.
    pub fn hilbert_adjoint(&self, t: &ChainOperator) -> Result<ChainOperator> {
        self.check_operator(t)?;
        let inv_wp = self.powers(-(t.source.0 as f64));
        let wq = self.powers(t.target.0 as f64);
        let m = linalg::scale_cols(&linalg::scale_rows(&t.matrix.adjoint(), &inv_wp), &wq);
        Ok(ChainOperator {
            matrix: m,
            source: t.target,
            target: t.source,
        })
    }

    /// Pivot adjoint `T★ = I_{p,−p} T* I_{−q,q} : H_{−q} → H_{−p}` of
    /// `T : H_p → H_q`, characterised by `⟨α, T x⟩_0 = ⟨T★ α, x⟩_0`.
    pub fn pivot_adjoint(&self, t: &ChainOperator) -> Result<ChainOperator> {
        let (p, q) = (t.source, t.target);
        let hilbert = self.hilbert_adjoint(t)?;
        let into_q = self.berezanskii_operator(-q.0, q.0);
        let out_of_p = self.berezanskii_operator(p.0, -p.0);
        out_of_p.compose(&hilbert.compose(&into_q)?)
    }

    /// Operator norm of `T : H_p → H_q`, i.e. `σ_max(W_q^{1/2} T W_p^{−1/2})`.
    pub fn operator_norm(&self, t: &ChainOperator) -> Result<f64> {
        self.check_operator(t)?;
        let m = self.orthonormalized(t);
        Ok(linalg::singular_values(&m).first().copied().unwrap_or(0.0))
    }

    /// `‖T‖²` as the largest eigenvalue of `W_p^{−1/2} M^H W_q M W_p^{−1/2}`.
    /// Avoids the square root of the singular value route, so squared norms
    /// that are integers come out exactly for diagonal operators.
    pub fn operator_norm_squared(&self, t: &ChainOperator) -> Result<f64> {
        self.check_operator(t)?;
        let wq_m = linalg::scale_rows(&t.matrix, &self.powers(t.target.0 as f64));
        let gram = t.matrix.adjoint() * wq_m;
        let half = self.powers(-(t.source.0 as f64) / 2.0);
        let h = linalg::scale_cols(&linalg::scale_rows(&gram, &half), &half);
        let h = (&h + h.adjoint()) * linalg::c(0.5);
        Ok(h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(0.0, f64::max))
    }

    /// Condition number of `T` between its declared spaces.
    pub fn condition_number(&self, t: &ChainOperator) -> Result<f64> {
        self.check_operator(t)?;
        let sv = linalg::singular_values(&self.orthonormalized(t));
        let (max, min) = (sv[0], *sv.last().unwrap());
        Ok(if min == 0.0 { f64::INFINITY } else { max / min })
    }

    /// `W_q^{1/2} T W_p^{−1/2}`: the matrix of `T` in orthonormal coordinates.
    fn orthonormalized(&self, t: &ChainOperator) -> CMatrix {
        let left = self.powers(t.target.0 as f64 / 2.0);
        let right = self.powers(-(t.source.0 as f64) / 2.0);
        linalg::scale_cols(&linalg::scale_rows(&t.matrix, &left), &right)
    }

    fn check_operator(&self, t: &ChainOperator) -> Result<()> {
        self.check_len(t.matrix.nrows())?;
        self.check_len(t.matrix.ncols())
    }

    /// `A_p = I_{2+p,p} : H_{2+p} → H_p`. In the diagonal model every shift is
    /// the matrix `diag(a_j)`.
    pub fn shifted_generator(&self, p: impl Into<SpaceIndex>) -> ChainOperator {
        let p = p.into();
        self.berezanskii_operator(p.0 + 2, p.0)
    }
}

/// A vector together with the space whose norm is intended.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorInSpace {
    pub coords: CVector,
    pub index: SpaceIndex,
}

impl VectorInSpace {
    pub fn new(coords: CVector, index: impl Into<SpaceIndex>) -> Self {
        VectorInSpace {
            coords,
            index: index.into(),
        }
    }

    pub fn norm(&self, scale: &ScaleSpec) -> Result<f64> {
        scale.norm(self.index, &self.coords)
    }

    /// Image under the unitary `I_{index,r}`.
    pub fn transport(&self, scale: &ScaleSpec, r: impl Into<SpaceIndex>) -> Result<VectorInSpace> {
        let r = r.into();
        Ok(VectorInSpace {
            coords: scale.berezanskii_map(self.index, r, &self.coords)?,
            index: r,
        })
    }
}

/// Operator `H_source → H_target` given by its matrix in canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOperator {
    pub matrix: CMatrix,
    pub source: SpaceIndex,
    pub target: SpaceIndex,
}

impl ChainOperator {
    pub fn new(
        matrix: CMatrix,
        source: impl Into<SpaceIndex>,
        target: impl Into<SpaceIndex>,
    ) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::LengthMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(ChainOperator {
            matrix,
            source: source.into(),
            target: target.into(),
        })
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.matrix * x
    }

    /// `self ∘ inner`; requires `inner.target == self.source`.
    pub fn compose(&self, inner: &ChainOperator) -> Result<ChainOperator> {
        if inner.target != self.source {
            return Err(Error::InvalidArgument(format!(
                "cannot compose: inner operator lands in H_{} but outer starts at H_{}",
                inner.target, self.source
            )));
        }
        Ok(ChainOperator {
            matrix: &self.matrix * &inner.matrix,
            source: inner.source,
            target: self.target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> CVector {
        CVector::from_iterator(xs.len(), xs.iter().map(|&x| C64::new(x, 0.0)))
    }

    #[test]
    fn squared_norm_agrees_with_singular_values() {
        let s = sc(&[1.0, 2.0, 3.0, 5.0]);
        let inv = s.inverse_inclusion_operator(-1, 0).unwrap();
        assert_eq!(s.operator_norm_squared(&inv).unwrap(), 5.0);
        let t = ChainOperator::new(
            CMatrix::from_fn(4, 4, |i, j| {
                C64::new((i + 2 * j) as f64, i as f64 - j as f64)
            }),
            1,
            -2,
        )
        .unwrap();
        let n = s.operator_norm(&t).unwrap();
        assert!((s.operator_norm_squared(&t).unwrap() - n * n).abs() <= 1e-12 * n * n);
    }

    fn sc(w: &[f64]) -> ScaleSpec {
        ScaleSpec::explicit(w.to_vec()).unwrap()
    }

    #[test]
    fn make_scale_formulas() {
        let s = make_scale(&FormulaKind::Linear.into(), 3).unwrap();
        assert_eq!(s.weights(), &[1.0, 2.0, 3.0]);
        let s = make_scale(&WeightFormula::Explicit(vec![1.0, 4.0, 9.0]), 3).unwrap();
        assert_eq!(s.weights(), &[1.0, 4.0, 9.0]);
        let s = make_scale(&FormulaKind::ShiftedQuadratic.into(), 3).unwrap();
        assert_eq!(s.weights(), &[2.0, 5.0, 10.0]);
        let s = make_scale(&FormulaKind::Exponential.into(), 64).unwrap();
        assert_eq!(s.weights()[63], MAX_WEIGHT);
    }

    #[test]
    fn make_scale_rejects_bad_weights() {
        let err = make_scale(&WeightFormula::Explicit(vec![0.5, 2.0]), 2).unwrap_err();
        assert!(err.to_string().contains("weight below 1"));
        assert!(matches!(
            ScaleSpec::explicit(vec![1.0, f64::NAN]),
            Err(Error::NonFiniteWeight { index: 2 })
        ));
        assert!(matches!(
            ScaleSpec::explicit(vec![1.0, f64::INFINITY]),
            Err(Error::NonFiniteWeight { .. })
        ));
        assert!(matches!(
            make_scale(&FormulaKind::Linear.into(), 0),
            Err(Error::EmptyScale)
        ));
        assert!(matches!(
            make_scale(&FormulaKind::Exponential.into(), 65),
            Err(Error::WeightTooLarge { .. })
        ));
        assert!(matches!(
            make_scale(&WeightFormula::Explicit(vec![1.0]), 2),
            Err(Error::TruncationMismatch { .. })
        ));
    }

    #[test]
    fn inner_product_examples() {
        let s = sc(&[1.0, 2.0]);
        assert_eq!(
            s.inner_product(0, &v(&[1.0, 0.0]), &v(&[1.0, 0.0]))
                .unwrap(),
            C64::new(1.0, 0.0)
        );
        let s = sc(&[1.0, 2.0, 3.0, 4.0]);
        let ones = v(&[1.0; 4]);
        let ip = s.inner_product(-1, &ones, &ones).unwrap();
        assert!((ip.re - 25.0 / 12.0).abs() < 1e-15 && ip.im == 0.0);
        let s = sc(&[1.0, 4.0, 9.0]);
        let ones = v(&[1.0; 3]);
        assert_eq!(s.inner_product(2, &ones, &ones).unwrap().re, 98.0);
        assert!(matches!(
            s.inner_product(0, &ones, &v(&[1.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_second_slot() {
        let s = sc(&[1.0, 3.0]);
        let x = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)]);
        let y = CVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(2.0, -1.0)]);
        let i = C64::new(0.0, 1.0);
        let lhs = s.inner_product(1, &x, &(&y * i)).unwrap();
        let rhs = s.inner_product(1, &x, &y).unwrap() * i.conj();
        assert!((lhs - rhs).norm() < 1e-14);
        let lhs = s.inner_product(1, &(&x * i), &y).unwrap();
        assert!((lhs - s.inner_product(1, &x, &y).unwrap() * i).norm() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        let s = sc(&[1.0, 4.0, 9.0]);
        assert_eq!(s.norm(7, &CVector::zeros(3)).unwrap(), 0.0);
        assert_eq!(s.norm(2, &v(&[1.0; 3])).unwrap(), 98f64.sqrt());
        let s = sc(&[1.0, 2.0]);
        assert_eq!(s.norm(1, &v(&[0.0, 1.0])).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn inclusion_adjoint_examples() {
        let s = sc(&[1.0, 2.0, 3.0]);
        let f = v(&[1.0, 1.0, 1.0]);
        assert_eq!(s.inclusion_adjoint(1, 1, &f).unwrap(), f);
        let g = s.inclusion_adjoint(0, 1, &f).unwrap();
        let expected = v(&[1.0, 0.5, 1.0 / 3.0]);
        assert!((g - expected).norm() < 1e-15);
        assert!(matches!(
            s.inclusion_adjoint(2, 1, &f),
            Err(Error::NotInclusionDirection { r: 2, p: 1 })
        ));
    }

    #[test]
    fn berezanskii_examples() {
        let s = sc(&[1.0, 4.0, 9.0]);
        let x = v(&[1.0; 3]);
        assert_eq!(s.berezanskii_map(3, 3, &x).unwrap(), x);
        let y = s.berezanskii_map(2, 0, &x).unwrap();
        assert_eq!(y, v(&[1.0, 4.0, 9.0]));
        assert_eq!(s.norm(0, &y).unwrap().powi(2), 98.0);
        assert_eq!(s.norm(2, &x).unwrap().powi(2), 98.0);
        let s = sc(&[1.0, 4.0]);
        assert_eq!(
            s.berezanskii_map(0, -2, &v(&[1.0, 1.0])).unwrap(),
            v(&[1.0, 4.0])
        );
    }

    #[test]
    fn berezanskii_flag_follows_parity() {
        for p in -5..=5 {
            for r in -5..=5 {
                assert_eq!(is_berezanskii(p, r), (p - r) % 2 == 0);
            }
        }
    }

    #[test]
    fn dual_index_examples() {
        assert_eq!(dual_index(1, 0).unwrap(), SpaceIndex(-1));
        assert_eq!(dual_index(4, 4).unwrap(), SpaceIndex(4));
        assert_eq!(dual_index(3, 1).unwrap(), SpaceIndex(-1));
        assert!(dual_index(0, 1).is_err());
        // H_p and its dual around the pivot sit symmetrically, so p + dual is even.
        for p in -4..=4 {
            for pivot in -4..=p {
                let q = dual_index(p, pivot).unwrap().0;
                assert_eq!((p + q).rem_euclid(2), 0);
                assert_eq!((p + q) / 2, pivot);
            }
        }
    }

    #[test]
    fn shifted_generator_examples() {
        let s = sc(&[1.0, 3.0, 7.0]);
        let a0 = s.shifted_generator(0);
        assert_eq!((a0.source, a0.target), (SpaceIndex(2), SpaceIndex(0)));
        assert_eq!(a0.matrix, real_diag(&[1.0, 3.0, 7.0]));
        let s = sc(&[1.0, 2.0]);
        let am2 = s.shifted_generator(-2);
        assert_eq!((am2.source, am2.target), (SpaceIndex(0), SpaceIndex(-2)));
        assert_eq!(am2.matrix, real_diag(&[1.0, 2.0]));
    }

    #[test]
    fn pivot_adjoint_at_pivot_is_conjugate_transpose() {
        let s = sc(&[1.0, 2.0]);
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 2.0),
                C64::new(3.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(4.0, 5.0),
            ],
        );
        let t = ChainOperator::new(m.clone(), 0, 0).unwrap();
        let star = s.pivot_adjoint(&t).unwrap();
        assert_eq!(star.matrix, m.adjoint());
    }

    #[test]
    fn pivot_adjoint_swaps_and_negates_indices() {
        let s = sc(&[1.0, 2.0, 5.0]);
        let t = s.berezanskii_operator(3, -1);
        let star = s.pivot_adjoint(&t).unwrap();
        assert_eq!((star.source, star.target), (SpaceIndex(1), SpaceIndex(-3)));
        let back = s.pivot_adjoint(&star).unwrap();
        assert_eq!((back.source, back.target), (t.source, t.target));
        let diff = (&back.matrix - &t.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff <= 4.0 * f64::EPSILON * t.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn compose_checks_indices() {
        let s = sc(&[1.0, 2.0]);
        let a = s.berezanskii_operator(0, 1);
        let b = s.berezanskii_operator(2, 1);
        assert!(a.compose(&b).is_err());
        let c = s.berezanskii_operator(1, 0).compose(&a).unwrap();
        assert_eq!((c.source, c.target), (SpaceIndex(0), SpaceIndex(0)));
    }

    #[test]
    fn check_index_limits_powers() {
        let s = make_scale(&FormulaKind::Exponential.into(), 64).unwrap();
        assert!(s.check_index(15).is_ok());
        assert!(s.check_index(-16).is_err());
        let s = make_scale(&FormulaKind::Linear.into(), 64).unwrap();
        assert!(s.check_index(16).is_ok());
        assert!(s.check_index(17).is_err());
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let s = sc(&[1.0, 2.0, 3.0]);
        let z = CVector::zeros(3);
        assert_eq!(s.berezanskii_map(1, -2, &z).unwrap(), z);
        assert_eq!(s.inclusion_adjoint(-1, 2, &z).unwrap(), z);
        assert_eq!(
            s.inner_product(3, &z, &v(&[1.0, 2.0, 3.0])).unwrap(),
            C64::new(0.0, 0.0)
        );
    }

    #[test]
    fn json_shape() {
        let s = sc(&[1.0, 4.0, 9.0]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"formula":"explicit","n":3,"weights":[1.0,4.0,9.0]}"#
        );
        assert!(serde_json::from_str::<ScaleSpec>(
            r#"{"formula":"explicit","n":2,"weights":[1.0]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<ScaleSpec>(
            r#"{"formula":"explicit","n":1,"weights":[0.2]}"#
        )
        .is_err());
    }
}
