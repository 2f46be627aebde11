//! Frame-related operators of a sequence at a fixed index of the scale.
//!
//! For `ψ ⊆ H_p` with coordinate matrix `Ψ` (columns `ψ_k`) and
//! `W_p = diag(a_j^p)`:
//!
//! | operator | matrix        | maps              |
//! |----------|---------------|-------------------|
//! | `C_ψ^p`  | `Ψ^H W_p`     | `H_p → ℓ²(M)`     |
//! | `D_ψ^p`  | `Ψ`           | `ℓ²(M) → H_p`     |
//! | `S_ψ^p`  | `Ψ Ψ^H W_p`   | `H_p → H_p`       |
//! | `G_ψ^p`  | `Ψ^H W_p Ψ`   | `ℓ²(M) → ℓ²(M)`   |
//!
//! At finite truncation the domains of all four are the whole space, so the
//! synthesis matrix is the same for every `p` and `C D = G`, `D C = S` hold
//! with equality.

use std::io::Write;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::scale::{make_scale, ChainOperator, FormulaKind, ScaleSpec, SpaceIndex};
use crate::sequence::{SequenceFamily, SequenceGenerator};

/// Relative spectral cutoff used for canonical duals unless told otherwise.
pub const DEFAULT_DUAL_CUTOFF: f64 = 1e-12;

/// Cross frame operators with a larger condition number are not reproducing pairs.
pub const REPRODUCING_CONDITION_LIMIT: f64 = 1e12;

/// Slope magnitude separating "flat" from "trending" bounds in [`classify`].
pub const SLOPE_THRESHOLD: f64 = 0.1;

/// Optimal frame bounds at one index and one truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBoundsRecord {
    /// Lower bound over the whole space; zero when the sequence is incomplete.
    pub lower: f64,
    pub upper: f64,
    /// Lower bound restricted to the span of the sequence.
    pub span_lower: f64,
    pub index: SpaceIndex,
    pub truncation: usize,
    pub sequence_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletenessRecord {
    pub numerical_rank: usize,
    pub tolerance_used: f64,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Frame,
    UpperSemiFrame,
    LowerSemiFrame,
    BesselOnly,
    None,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Frame => "frame",
            Verdict::UpperSemiFrame => "upper_semi_frame",
            Verdict::LowerSemiFrame => "lower_semi_frame",
            Verdict::BesselOnly => "bessel_only",
            Verdict::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub truncations: Vec<usize>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub complete: Vec<bool>,
    pub verdict: Verdict,
    /// `None` when some truncation has a zero lower bound.
    pub slope_lower: Option<f64>,
    pub slope_upper: f64,
}

/// `S_{ψ,φ}^p` together with its conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFrameOperator {
    pub matrix: CMatrix,
    pub condition_number: f64,
    pub is_reproducing_pair: bool,
}

/// One row of a bound sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSweepRow {
    pub label: String,
    pub p: i32,
    #[serde(rename = "N")]
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub rank: usize,
    pub complete: bool,
}

impl BoundSweepRow {
    pub fn new(bounds: &FrameBoundsRecord, completeness: &CompletenessRecord) -> Self {
        BoundSweepRow {
            label: bounds.sequence_label.clone(),
            p: bounds.index.0,
            n: bounds.truncation,
            lower: bounds.lower,
            upper: bounds.upper,
            rank: completeness.numerical_rank,
            complete: completeness.complete,
        }
    }
}

/// Writes `label,p,N,lower,upper,rank,complete` rows.
pub fn write_bound_sweep_csv<W: Write>(rows: &[BoundSweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
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

/// `W_p^{1/2} Ψ`: the sequence in orthonormal coordinates of `H_p`.
fn orthonormal_coordinates(scale: &ScaleSpec, seq: &SequenceFamily, p: SpaceIndex) -> CMatrix {
    linalg::scale_rows(&seq.vectors, &scale.powers(p.0 as f64 / 2.0))
}

/// Rows `k` map `f ↦ ⟨f, ψ_k⟩_p`.
pub fn analysis_matrix(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
) -> Result<CMatrix> {
    check_dimension(scale, seq)?;
    Ok(linalg::scale_cols(
        &seq.vectors.adjoint(),
        &scale.powers(p.into().0 as f64),
    ))
}

/// Columns are the `ψ_k`; the same matrix serves every index.
pub fn synthesis_matrix(scale: &ScaleSpec, seq: &SequenceFamily) -> Result<CMatrix> {
    check_dimension(scale, seq)?;
    Ok(seq.vectors.clone())
}

pub fn frame_operator_matrix(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
) -> Result<CMatrix> {
    Ok(synthesis_matrix(scale, seq)? * analysis_matrix(scale, seq, p)?)
}

/// `(G_ψ^p)_{k,l} = ⟨ψ_l, ψ_k⟩_p`.
pub fn gram_matrix(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
) -> Result<CMatrix> {
    Ok(analysis_matrix(scale, seq, p)? * synthesis_matrix(scale, seq)?)
}

/// Numerical rank of `Ψ`. The rank does not depend on `p` because every
/// `W_p` is invertible, so it is computed once from the raw coordinates.
pub fn completeness(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    _p: impl Into<SpaceIndex>,
) -> Result<CompletenessRecord> {
    check_dimension(scale, seq)?;
    let sv = linalg::singular_values(&seq.vectors);
    let tolerance = linalg::rank_tolerance(sv[0], seq.dimension(), seq.len());
    let rank = linalg::numerical_rank(&sv, tolerance);
    Ok(CompletenessRecord {
        numerical_rank: rank,
        tolerance_used: tolerance,
        complete: rank == seq.dimension(),
    })
}

/// Optimal bounds `A ≤ B` with `A‖f‖_p² ≤ Σ_k |⟨f, ψ_k⟩_p|² ≤ B‖f‖_p²`, the
/// squared extreme singular values of `W_p^{1/2} Ψ`.
pub fn frame_bounds(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
) -> Result<FrameBoundsRecord> {
    let p = p.into();
    let comp = completeness(scale, seq, p)?;
    let sv = linalg::singular_values(&orthonormal_coordinates(scale, seq, p));
    let upper = sv[0] * sv[0];
    let span_lower = if comp.numerical_rank == 0 {
        0.0
    } else {
        let s = sv[comp.numerical_rank - 1];
        s * s
    };
    let lower = if comp.complete { span_lower } else { 0.0 };
    Ok(FrameBoundsRecord {
        lower,
        upper,
        span_lower,
        index: p,
        truncation: seq.dimension(),
        sequence_label: seq.label.clone(),
    })
}

/// Unit vectors in `H_p` at which `Σ_k |⟨f, ψ_k⟩_p|²` equals the lower and
/// the upper frame bound respectively.
pub fn frame_bound_witnesses(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
) -> Result<(CVector, CVector)> {
    let p = p.into();
    check_dimension(scale, seq)?;
    let x = orthonormal_coordinates(scale, seq, p);
    let h = &x * x.adjoint();
    let eig = SymmetricEigen::new((&h + h.adjoint()) * linalg::c(0.5));
    let (mut imin, mut imax) = (0, 0);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < eig.eigenvalues[imin] {
            imin = i;
        }
        if l > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let back = scale.powers(-(p.0 as f64) / 2.0);
    let lift = |i: usize| linalg::scale_entries(&eig.eigenvectors.column(i).into_owned(), &back);
    Ok((lift(imin), lift(imax)))
}

/// Canonical dual `φ_k = (S_ψ^p)^{−1} ψ_k`. Eigenvalues of the frame operator
/// below `spectral_cutoff · B` are dropped, which yields the pseudo-inverse
/// dual on the span for incomplete families.
pub fn canonical_dual(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
    spectral_cutoff: f64,
) -> Result<SequenceFamily> {
    let p = p.into();
    let comp = completeness(scale, seq, p)?;
    if !comp.complete && spectral_cutoff <= 0.0 {
        return Err(Error::SingularFrameOperator);
    }
    // S = W^{-1/2} H W^{1/2} with H = W^{1/2} Ψ Ψ^H W^{1/2} Hermitian.
    let x = orthonormal_coordinates(scale, seq, p);
    let (h_inv, _) = linalg::hermitian_pinv(&(&x * x.adjoint()), spectral_cutoff.max(0.0));
    let dual = linalg::scale_rows(&(h_inv * x), &scale.powers(-(p.0 as f64) / 2.0));
    Ok(seq.with_vectors(dual, p, format!("dual_{p}({})", seq.label)))
}

/// `S_{ψ,φ}^p f = Σ_k ⟨f, ψ_k⟩_p φ_k`, i.e. `Φ Ψ^H W_p`.
pub fn cross_frame_operator(
    scale: &ScaleSpec,
    psi: &SequenceFamily,
    phi: &SequenceFamily,
    p: impl Into<SpaceIndex>,
) -> Result<CrossFrameOperator> {
    let p = p.into();
    if psi.len() != phi.len() {
        return Err(Error::CountMismatch {
            left: psi.len(),
            right: phi.len(),
        });
    }
    check_dimension(scale, phi)?;
    let matrix = &phi.vectors * analysis_matrix(scale, psi, p)?;
    let condition_number = scale.condition_number(&ChainOperator::new(matrix.clone(), p, p)?)?;
    Ok(CrossFrameOperator {
        matrix,
        condition_number,
        is_reproducing_pair: condition_number <= REPRODUCING_CONDITION_LIMIT,
    })
}

/// Infers the untruncated frame type of a generated family from the trend of
/// its optimal bounds across truncations.
///
/// Slopes are least-squares fits of `ln(bound)` against `ln(N)`. With
/// `δ = SLOPE_THRESHOLD`:
/// * both slopes in `(−δ, δ)` and complete everywhere: `frame`;
/// * lower slope `≤ −δ` (or a zero lower bound) with upper slope `< δ`:
///   `upper_semi_frame` if complete at every truncation, else `bessel_only`;
/// * upper slope `≥ δ` with lower slope `> −δ` and complete everywhere:
///   `lower_semi_frame`;
/// * anything else: `none`.
pub fn classify(
    formula: FormulaKind,
    generator: &SequenceGenerator,
    m: impl Into<SpaceIndex>,
    p: impl Into<SpaceIndex>,
    truncations: &[usize],
) -> Result<ClassificationRecord> {
    let (m, p) = (m.into(), p.into());
    check_truncations(truncations)?;
    let cells = truncations
        .par_iter()
        .map(|&n| {
            let scale = make_scale(&formula.into(), n)?;
            let seq = generator.build(&scale, m)?;
            let bounds = frame_bounds(&scale, &seq, p)?;
            let comp = completeness(&scale, &seq, p)?;
            Ok((bounds, comp.complete))
        })
        .collect::<Result<Vec<_>>>()?;

    let lower_bounds: Vec<f64> = cells.iter().map(|(b, _)| b.lower).collect();
    let upper_bounds: Vec<f64> = cells.iter().map(|(b, _)| b.upper).collect();
    let complete: Vec<bool> = cells.iter().map(|(_, c)| *c).collect();
    let log_n: Vec<f64> = truncations.iter().map(|&n| (n as f64).ln()).collect();
    let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();

    let all_complete = complete.iter().all(|&c| c);
    let slope_upper = linalg::fit_slope(&log_n, &ln(&upper_bounds));
    let slope_lower = if lower_bounds.iter().all(|&a| a > 0.0) {
        Some(linalg::fit_slope(&log_n, &ln(&lower_bounds)))
    } else {
        None
    };
    let verdict = verdict_from_trends(slope_lower, slope_upper, all_complete);
    Ok(ClassificationRecord {
        truncations: truncations.to_vec(),
        lower_bounds,
        upper_bounds,
        complete,
        verdict,
        slope_lower,
        slope_upper,
    })
}

/// The decision rule documented on [`classify`].
pub fn verdict_from_trends(
    slope_lower: Option<f64>,
    slope_upper: f64,
    all_complete: bool,
) -> Verdict {
    let delta = SLOPE_THRESHOLD;
    let upper_bounded = slope_upper < delta;
    let lower_flat_or_rising = all_complete && slope_lower.is_some_and(|s| s > -delta);
    let lower_decaying = slope_lower.is_none_or(|s| s <= -delta);
    match slope_lower {
        Some(s) if all_complete && s.abs() < delta && slope_upper.abs() < delta => Verdict::Frame,
        _ if lower_decaying && upper_bounded => {
            if all_complete {
                Verdict::UpperSemiFrame
            } else {
                Verdict::BesselOnly
            }
        }
        _ if slope_upper >= delta && lower_flat_or_rising => Verdict::LowerSemiFrame,
        _ => Verdict::None,
    }
}

pub(crate) fn check_truncations(truncations: &[usize]) -> Result<()> {
    if truncations.len() < 3 {
        return Err(Error::InvalidTruncations(format!(
            "need at least 3 truncations, got {}",
            truncations.len()
        )));
    }
    if truncations[0] == 0 {
        return Err(Error::InvalidTruncations(
            "truncations must be positive".into(),
        ));
    }
    if truncations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidTruncations(
            "truncations must be strictly increasing".into(),
        ));
    }
    Ok(())
}
