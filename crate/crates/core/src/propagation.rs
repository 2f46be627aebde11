//! Executable checks of how frame-related properties move across a scale.
//!
//! Each study returns a report whose checks are machine-readable
//! ([`Check`]) and carry the statement they verify.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{
    self, analysis_matrix, canonical_dual, completeness, cross_frame_operator, frame_bounds,
    frame_operator_matrix, gram_matrix, synthesis_matrix, FrameBoundsRecord, DEFAULT_DUAL_CUTOFF,
};
use crate::linalg::{self, relative_residual, relative_vector_residual, CMatrix};
use crate::scale::{make_scale, ChainOperator, FormulaKind, ScaleSpec, SpaceIndex};
use crate::sequence::{transform_sequence, SequenceFamily, SequenceGenerator};

/// Residual threshold for the transfer identities.
pub const TRANSFER_TOLERANCE: f64 = 1e-10;
/// Slack for the bound inequalities, relative to `max(1, rhs)`.
pub const INEQUALITY_SLACK: f64 = 1e-12;
/// Relative reconstruction threshold for dual expansions.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-8;
/// Relative threshold for norm preservation of `I_{p,r}`.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_RANDOM_VECTORS: usize = 100;

/// One machine-checkable claim. `pass` means `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub claim: String,
    pub p: Option<i32>,
    pub r: Option<i32>,
    pub m: Option<i32>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(claim: impl Into<String>, value: f64, threshold: f64) -> Check {
        Check {
            claim: claim.into(),
            p: None,
            r: None,
            m: None,
            n: None,
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn indices(mut self, p: Option<i32>, r: Option<i32>, m: Option<i32>) -> Check {
        self.p = p;
        self.r = r;
        self.m = m;
        self
    }

    pub fn truncation(mut self, n: usize) -> Check {
        self.n = Some(n);
        self
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_rel_bound_diff(a: &FrameBoundsRecord, b: &FrameBoundsRecord) -> f64 {
    let rel = |x: f64, y: f64| {
        let s = x.abs().max(y.abs());
        if s == 0.0 {
            0.0
        } else {
            (x - y).abs() / s
        }
    };
    rel(a.lower, b.lower).max(rel(a.upper, b.upper))
}

// ---------------------------------------------------------------------------
// Transformed sequence I_{p,r} ψ

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub p: SpaceIndex,
    pub r: SpaceIndex,
    pub truncation: usize,
    /// Relative residual of each operator identity (matrix form and on random vectors).
    pub identity_residuals: BTreeMap<String, f64>,
    /// Frame property transfers that only apply to some families (duals,
    /// orthonormal and Riesz bases).
    pub property_residuals: BTreeMap<String, f64>,
    pub bound_pairs: (FrameBoundsRecord, FrameBoundsRecord),
    pub tolerance: f64,
    pub pass: bool,
}

impl TransferReport {
    pub fn checks(&self) -> Vec<Check> {
        self.identity_residuals
            .iter()
            .chain(&self.property_residuals)
            .map(|(claim, &v)| {
                Check::at_most(claim.clone(), v, self.tolerance)
                    .indices(Some(self.p.0), Some(self.r.0), None)
                    .truncation(self.truncation)
            })
            .collect()
    }
}

/// Verifies that the frame-related operators of `I_{p,r} ψ` in `H_r` are the
/// operators of `ψ` in `H_p` conjugated by the unitary `I_{p,r}`.
pub fn run_transfer_suite(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    p: impl Into<SpaceIndex>,
    r: impl Into<SpaceIndex>,
    n_random: usize,
    seed: u64,
) -> Result<TransferReport> {
    let (p, r) = (p.into(), r.into());
    if n_random == 0 {
        return Err(Error::InvalidArgument("n_random must be at least 1".into()));
    }
    let n = scale.n();
    let moved = transform_sequence(scale, seq, p, r)?;
    let i_pr = scale.berezanskii_operator(p, r).matrix;
    let i_rp = scale.berezanskii_operator(r, p).matrix;

    let c_p = analysis_matrix(scale, seq, p)?;
    let c_r_moved = analysis_matrix(scale, &moved, r)?;
    let d_p = synthesis_matrix(scale, seq)?;
    let d_r_moved = synthesis_matrix(scale, &moved)?;

    let mut ids = BTreeMap::new();
    ids.insert(
        "analysis: C^r_{I_{p,r}psi} = C^p_psi I_{r,p}".to_string(),
        relative_residual(&c_r_moved, &(&c_p * &i_rp)),
    );
    ids.insert(
        "analysis: C^p_psi = C^r_{I_{p,r}psi} I_{p,r}".to_string(),
        relative_residual(&c_p, &(&c_r_moved * &i_pr)),
    );
    ids.insert(
        "synthesis: D^r_{I_{p,r}psi} = I_{p,r} D^p_psi".to_string(),
        relative_residual(&d_r_moved, &(&i_pr * &d_p)),
    );
    ids.insert(
        "synthesis: D^p_psi = I_{r,p} D^r_{I_{p,r}psi}".to_string(),
        relative_residual(&d_p, &(&i_rp * &d_r_moved)),
    );
    ids.insert(
        "frame operator: S^r_{I_{p,r}psi} = I_{p,r} S^p_psi I_{r,p}".to_string(),
        relative_residual(
            &frame_operator_matrix(scale, &moved, r)?,
            &(&i_pr * frame_operator_matrix(scale, seq, p)? * &i_rp),
        ),
    );
    // Same identity read with psi living at index r and transported to p.
    let moved_back = transform_sequence(scale, seq, r, p)?;
    ids.insert(
        "frame operator: S^p_{I_{r,p}psi} = I_{r,p} S^r_psi I_{p,r}".to_string(),
        relative_residual(
            &frame_operator_matrix(scale, &moved_back, p)?,
            &(&i_rp * frame_operator_matrix(scale, seq, r)? * &i_pr),
        ),
    );
    ids.insert(
        "gram: G^p_psi = G^r_{I_{p,r}psi}".to_string(),
        relative_residual(
            &gram_matrix(scale, seq, p)?,
            &gram_matrix(scale, &moved, r)?,
        ),
    );

    // Action on random vectors, routed through the coordinate maps rather than matrices.
    let mut g = rng(seed);
    let (mut res_c, mut res_d, mut res_s) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..n_random {
        let x = linalg::random_vector(&mut g, n);
        let lhs = &c_r_moved * &x;
        let rhs = &c_p * scale.berezanskii_map(r, p, &x)?;
        res_c = res_c.max(relative_vector_residual(&lhs, &rhs));

        let coeffs = linalg::random_vector(&mut g, seq.len());
        let lhs = &d_r_moved * &coeffs;
        let rhs = scale.berezanskii_map(p, r, &(&d_p * &coeffs))?;
        res_d = res_d.max(relative_vector_residual(&lhs, &rhs));

        let lhs = &d_r_moved * (&c_r_moved * &x);
        let inner = scale.berezanskii_map(r, p, &x)?;
        let rhs = scale.berezanskii_map(p, r, &(&d_p * (&c_p * inner)))?;
        res_s = res_s.max(relative_vector_residual(&lhs, &rhs));
    }
    ids.insert(
        "analysis on random vectors: C^r_{I_{p,r}psi} x = C^p_psi I_{r,p} x".to_string(),
        res_c,
    );
    ids.insert(
        "synthesis on random coefficients: D^r_{I_{p,r}psi} c = I_{p,r} D^p_psi c".to_string(),
        res_d,
    );
    ids.insert(
        "frame operator on random vectors: S^r_{I_{p,r}psi} x = I_{p,r} S^p_psi I_{r,p} x"
            .to_string(),
        res_s,
    );

    let bounds_p = frame_bounds(scale, seq, p)?;
    let bounds_r = frame_bounds(scale, &moved, r)?;
    let mut props = BTreeMap::new();
    props.insert(
        "frame bounds: bounds(I_{p,r}psi, r) = bounds(psi, p)".to_string(),
        max_rel_bound_diff(&bounds_p, &bounds_r),
    );

    let comp = completeness(scale, seq, p)?;
    if comp.complete {
        // Dual and reproducing pair transfer, with phi the canonical dual in H_p.
        let phi = canonical_dual(scale, seq, p, DEFAULT_DUAL_CUTOFF)?;
        let phi_moved = transform_sequence(scale, &phi, p, r)?;
        let dual_of_moved = canonical_dual(scale, &moved, r, DEFAULT_DUAL_CUTOFF)?;
        props.insert(
            "dual transfer: I_{p,r}phi is the canonical dual of I_{p,r}psi in H_r".to_string(),
            relative_residual(&phi_moved.vectors, &dual_of_moved.vectors),
        );
        let pair_p = cross_frame_operator(scale, seq, &phi, p)?;
        let pair_r = cross_frame_operator(scale, &moved, &phi_moved, r)?;
        props.insert(
            "reproducing pair transfer: S^r_{I psi, I phi} = I_{p,r} S^p_{psi,phi} I_{r,p}"
                .to_string(),
            relative_residual(&pair_r.matrix, &(&i_pr * &pair_p.matrix * &i_rp)),
        );
        props.insert(
            "weak duality after transfer: S^r_{I psi, I phi} = identity".to_string(),
            relative_residual(&pair_r.matrix, &CMatrix::identity(n, n)),
        );
    }

    if seq.len() == n && comp.complete {
        let gram_p = gram_matrix(scale, seq, p)?;
        if relative_residual(&gram_p, &CMatrix::identity(n, n)) <= 1e-12 {
            props.insert(
                "orthonormal basis transfer: G^r_{I_{p,r}psi} = identity".to_string(),
                relative_residual(&gram_matrix(scale, &moved, r)?, &CMatrix::identity(n, n)),
            );
        }
        // Riesz basis psi_k = T e_k with e_k = a_k^{-p/2} e_k orthonormal in H_p;
        // I_{p,r} T^{-1} psi_k must be orthonormal in H_r.
        let onb = linalg::real_diag(&scale.powers(-(p.0 as f64) / 2.0));
        let t = &seq.vectors * linalg::real_diag(&scale.powers(p.0 as f64 / 2.0));
        if let Some(t_inv) = t.clone().try_inverse() {
            let recovered = t_inv * &seq.vectors;
            let image = seq.with_vectors(&i_pr * &recovered, r, "riesz".into());
            props.insert(
                "riesz basis transfer: I_{p,r} T^{-1} psi is orthonormal in H_r".to_string(),
                relative_residual(&gram_matrix(scale, &image, r)?, &CMatrix::identity(n, n)),
            );
            props.insert(
                "riesz basis recovery: T^{-1} psi_k is the orthonormal basis of H_p".to_string(),
                relative_residual(&recovered, &onb),
            );
        }
    }

    let tolerance = TRANSFER_TOLERANCE;
    let pass = ids.values().chain(props.values()).all(|&v| v <= tolerance);
    Ok(TransferReport {
        p,
        r,
        truncation: n,
        identity_residuals: ids,
        property_residuals: props,
        bound_pairs: (bounds_p, bounds_r),
        tolerance,
        pass,
    })
}

// ---------------------------------------------------------------------------
// The original sequence across r <= p <= m

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexBounds {
    pub index: SpaceIndex,
    pub lower: f64,
    pub upper: f64,
    /// Rank of the analysis operator `C_ψ^t`, computed independently per index.
    pub analysis_rank: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub r: SpaceIndex,
    pub p: SpaceIndex,
    pub m: SpaceIndex,
    pub truncation: usize,
    pub bounds: Vec<IndexBounds>,
    pub monotonicity_checks: Vec<Check>,
    pub completeness_checks: Vec<Check>,
    pub factorization_checks: Vec<Check>,
    pub note: String,
    pub pass: bool,
}

impl PropagationReport {
    pub fn checks(&self) -> Vec<Check> {
        self.monotonicity_checks
            .iter()
            .chain(&self.completeness_checks)
            .chain(&self.factorization_checks)
            .cloned()
            .collect()
    }
}

fn ordered(r: SpaceIndex, p: SpaceIndex, m: SpaceIndex) -> Result<()> {
    if r > p || p > m {
        return Err(Error::UnorderedIndices {
            what: format!("r <= p <= m (got r = {r}, p = {p}, m = {m})"),
        });
    }
    Ok(())
}

fn analysis_rank(scale: &ScaleSpec, seq: &SequenceFamily, t: SpaceIndex) -> Result<usize> {
    let c = analysis_matrix(scale, seq, t)?;
    let sv = linalg::singular_values(&c);
    Ok(linalg::numerical_rank(
        &sv,
        linalg::rank_tolerance(sv[0], c.nrows(), c.ncols()),
    ))
}

/// Checks, for the untransformed sequence, that Bessel bounds move down the
/// scale, lower bounds move up, completeness is shared by all indices, and the
/// analysis operators factor through the inclusion adjoints.
pub fn run_propagation_suite(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    r: impl Into<SpaceIndex>,
    p: impl Into<SpaceIndex>,
    m: impl Into<SpaceIndex>,
    n_random: usize,
    seed: u64,
) -> Result<PropagationReport> {
    let (r, p, m) = (r.into(), p.into(), m.into());
    ordered(r, p, m)?;
    let n = scale.n();
    let table = (r.0..=m.0)
        .map(|t| {
            let t = SpaceIndex(t);
            let b = frame_bounds(scale, seq, t)?;
            let rank = analysis_rank(scale, seq, t)?;
            Ok(IndexBounds {
                index: t,
                lower: b.lower,
                upper: b.upper,
                analysis_rank: rank,
                complete: rank == n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let at = |t: SpaceIndex| &table[(t.0 - r.0) as usize];
    let slack = |rhs: f64| INEQUALITY_SLACK * rhs.abs().max(1.0);

    let mut mono = Vec::new();
    for (lo, hi) in [(r, p), (p, m), (r, m)] {
        let (a, b) = (at(lo), at(hi));
        mono.push(
            Check::at_most(
                "Bessel bound carries down the scale: B_r <= B_p",
                a.upper - b.upper,
                slack(b.upper),
            )
            .indices(Some(hi.0), Some(lo.0), Some(m.0))
            .truncation(n),
        );
        mono.push(
            Check::at_most(
                "lower frame bound carries up the scale: A_r <= A_p",
                a.lower - b.lower,
                slack(b.lower),
            )
            .indices(Some(hi.0), Some(lo.0), Some(m.0))
            .truncation(n),
        );
    }
    for w in table.windows(2) {
        mono.push(
            Check::at_most(
                "adjacent indices: B_t <= B_{t+1} and A_t <= A_{t+1}",
                (w[0].upper - w[1].upper - slack(w[1].upper))
                    .max(w[0].lower - w[1].lower - slack(w[1].lower)),
                0.0,
            )
            .indices(Some(w[1].index.0), Some(w[0].index.0), Some(m.0))
            .truncation(n),
        );
    }
    let (ar, ap) = (at(r), at(p));
    if ap.complete {
        // Upper semi-frame at p (complete Bessel) stays one at r with the same bound.
        let violated = if ar.complete {
            (ar.upper - ap.upper - slack(ap.upper)).max(0.0)
        } else {
            1.0
        };
        mono.push(
            Check::at_most(
                "upper semi-frame at p is an upper semi-frame at r with the same bound",
                violated,
                0.0,
            )
            .indices(Some(p.0), Some(r.0), Some(m.0))
            .truncation(n),
        );
    }
    if ar.complete && ar.lower > 0.0 {
        // A frame at r is a lower semi-frame at every higher index with at least the same lower bound.
        let worst = table
            .iter()
            .filter(|t| t.index >= r)
            .map(|t| ar.lower - t.lower - slack(t.lower))
            .fold(f64::NEG_INFINITY, f64::max);
        mono.push(
            Check::at_most(
                "frame at r is a lower semi-frame at every p >= r",
                worst.max(0.0),
                0.0,
            )
            .indices(Some(p.0), Some(r.0), Some(m.0))
            .truncation(n),
        );
    }

    let reference = completeness(scale, seq, p)?;
    let mismatches = table
        .iter()
        .filter(|t| t.complete != reference.complete)
        .count();
    let completeness_checks = vec![
        Check::at_most(
            "completeness is the same at every index (complete at p => at r, and conversely)",
            mismatches as f64,
            0.0,
        )
        .indices(Some(p.0), Some(r.0), Some(m.0))
        .truncation(n),
        Check::at_most(
            "analysis operator rank equals the rank of the sequence at every index",
            table
                .iter()
                .filter(|t| t.analysis_rank != reference.numerical_rank)
                .count() as f64,
            0.0,
        )
        .indices(Some(p.0), Some(r.0), Some(m.0))
        .truncation(n),
    ];

    let mut g = rng(seed);
    let mut factorization_checks = Vec::new();
    for (lo, hi) in [(r, p), (p, m), (r, m)] {
        let c_lo = analysis_matrix(scale, seq, lo)?;
        let c_hi = analysis_matrix(scale, seq, hi)?;
        let (mut fwd, mut inv) = (0.0_f64, 0.0_f64);
        for _ in 0..n_random.max(1) {
            let f = linalg::random_vector(&mut g, n);
            fwd = fwd.max(relative_vector_residual(
                &(&c_lo * &f),
                &(&c_hi * scale.inclusion_adjoint(lo, hi, &f)?),
            ));
            let h = linalg::random_vector(&mut g, n);
            inv = inv.max(relative_vector_residual(
                &(&c_hi * &h),
                &(&c_lo * scale.inverse_inclusion_adjoint(lo, hi, &h)?),
            ));
        }
        factorization_checks.push(
            Check::at_most(
                "analysis factorization: C^r_psi = C^p_psi iota_{r,p}",
                fwd,
                TRANSFER_TOLERANCE,
            )
            .indices(Some(hi.0), Some(lo.0), Some(m.0))
            .truncation(n),
        );
        factorization_checks.push(
            Check::at_most(
                "analysis factorization: C^p_psi = C^r_psi iota_{r,p}^{-1}",
                inv,
                TRANSFER_TOLERANCE,
            )
            .indices(Some(hi.0), Some(lo.0), Some(m.0))
            .truncation(n),
        );
    }

    let pass = mono
        .iter()
        .chain(&completeness_checks)
        .chain(&factorization_checks)
        .all(|c| c.pass);
    Ok(PropagationReport {
        r,
        p,
        m,
        truncation: n,
        bounds: table,
        monotonicity_checks: mono,
        completeness_checks,
        factorization_checks,
        note: "\"same bound\" is checked as the inequality B_r <= B_p, which is what the analysis \
               factorization gives at finite truncation"
            .into(),
        pass,
    })
}

// ---------------------------------------------------------------------------
// Frames at two indices

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub formula: FormulaKind,
    pub p: SpaceIndex,
    pub q: SpaceIndex,
    pub truncations: Vec<usize>,
    pub lower_bound_at_q: Vec<f64>,
    pub upper_bound_at_q: Vec<f64>,
    pub lower_bound_at_p: Vec<f64>,
    pub upper_bound_at_p: Vec<f64>,
    /// Least-squares slope of `ln A_q(N)` against `ln N`; `None` if some `A_q` vanishes.
    pub lower_bound_trend: Option<f64>,
    /// `B_p(N) / A_q(N)`, an upper bound for `‖ι_{q,p}^{−1}‖²`; `None` when `A_q(N) = 0`.
    pub bound_ratio: Vec<Option<f64>>,
    pub bound_ratio_trend: Option<f64>,
    /// `‖ι_{q,p}^{−1}‖²` as an operator `H_p → H_q`, from its diagonal matrix.
    pub inverse_inclusion_norm_sq: Vec<f64>,
    /// The same norm from `(S^q_ψ)^{−1} D^q_ψ C^p_ψ`; `None` when ψ is not complete.
    pub inverse_inclusion_norm_sq_factored: Vec<Option<f64>>,
    pub inverse_inclusion_trend: f64,
    pub trivial_scale: bool,
    pub interpretation: String,
}

impl CollapseReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        let (p, q) = (Some(self.p.0), Some(self.q.0));
        for (i, &n) in self.truncations.iter().enumerate() {
            if let Some(f) = self.inverse_inclusion_norm_sq_factored[i] {
                let direct = self.inverse_inclusion_norm_sq[i];
                out.push(
                    Check::at_most(
                        "inverse inclusion factors as (S^q)^{-1} D^q C^p (relative difference of norms)",
                        (f - direct).abs() / direct,
                        1e-8,
                    )
                    .indices(p, q, None)
                    .truncation(n),
                );
            }
            if let Some(bound) = self.bound_ratio[i] {
                out.push(
                    Check::at_most(
                        "||iota_{q,p}^{-1}||^2 <= B_p / A_q",
                        self.inverse_inclusion_norm_sq[i] - bound * (1.0 + 1e-10),
                        0.0,
                    )
                    .indices(p, q, None)
                    .truncation(n),
                );
            }
        }
        let nonincreasing = self
            .lower_bound_at_q
            .windows(2)
            .filter(|w| w[1] > w[0] * (1.0 + 1e-12))
            .count();
        out.push(
            Check::at_most("A_q(N) is nonincreasing in N", nonincreasing as f64, 0.0)
                .indices(p, q, None),
        );
        out
    }
}

/// Tracks the lower frame bound at `q < p` of a family that is a frame at `p`,
/// together with the norm of `ι_{q,p}^{−1}`, across truncations. Decay of
/// `A_q(N)` is consistent with the fact that a sequence cannot be a frame for
/// two different spaces of a non-trivial scale; a finite computation can only
/// exhibit the trend.
pub fn run_collapse_study(
    formula: FormulaKind,
    generator: &SequenceGenerator,
    m: impl Into<SpaceIndex>,
    p: impl Into<SpaceIndex>,
    q: impl Into<SpaceIndex>,
    truncations: &[usize],
) -> Result<CollapseReport> {
    let (m, p, q) = (m.into(), p.into(), q.into());
    if q >= p {
        return Err(Error::UnorderedIndices {
            what: format!("q < p (got q = {q}, p = {p})"),
        });
    }
    frame::check_truncations(truncations)?;

    struct Cell {
        at_q: FrameBoundsRecord,
        at_p: FrameBoundsRecord,
        norm_sq: f64,
        factored: Option<f64>,
        trivial: bool,
    }
    let cells = truncations
        .par_iter()
        .map(|&n| {
            let scale = make_scale(&formula.into(), n)?;
            let seq = generator.build(&scale, m)?;
            let at_q = frame_bounds(&scale, &seq, q)?;
            let at_p = frame_bounds(&scale, &seq, p)?;
            let inv = scale.inverse_inclusion_operator(q, p)?;
            let norm_sq = scale.operator_norm_squared(&inv)?;
            let factored = if completeness(&scale, &seq, q)?.complete {
                // (S^q)^{-1} D^q C^p, with S^q inverted through its symmetrized form.
                let dual = canonical_dual(&scale, &seq, q, 0.0)?;
                let m = &dual.vectors * analysis_matrix(&scale, &seq, p)?;
                let op = ChainOperator::new(m, p, q)?;
                Some(scale.operator_norm_squared(&op)?)
            } else {
                None
            };
            Ok(Cell {
                at_q,
                at_p,
                norm_sq,
                factored,
                trivial: scale.is_trivial(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let lower_q: Vec<f64> = cells.iter().map(|c| c.at_q.lower).collect();
    let upper_p: Vec<f64> = cells.iter().map(|c| c.at_p.upper).collect();
    let log_n: Vec<f64> = truncations.iter().map(|&n| (n as f64).ln()).collect();
    let trend = |v: &[f64]| {
        if v.iter().all(|&x| x > 0.0 && x.is_finite()) {
            Some(linalg::fit_slope(
                &log_n,
                &v.iter().map(|x| x.ln()).collect::<Vec<_>>(),
            ))
        } else {
            None
        }
    };
    let bound_ratio: Vec<Option<f64>> = upper_p
        .iter()
        .zip(&lower_q)
        .map(|(b, a)| if *a > 0.0 { Some(b / a) } else { None })
        .collect();
    let norm_sq: Vec<f64> = cells.iter().map(|c| c.norm_sq).collect();
    let lower_bound_trend = trend(&lower_q);
    let trivial_scale = cells.iter().all(|c| c.trivial);

    let interpretation = if trivial_scale {
        "scale is trivial: all spaces carry the same norm, the family stays a frame at both indices, \
         consistent with norm equivalence"
            .to_string()
    } else {
        match lower_bound_trend {
            Some(s) if s <= -frame::SLOPE_THRESHOLD => format!(
                "A_q(N) decays (log-log slope {s:.4}) while ||iota_{{q,p}}^{{-1}}|| grows; consistent with \
                 no sequence being a frame for both H_p and H_q of a non-trivial scale"
            ),
            None => "A_q(N) vanishes at some truncation (incomplete family); consistent with no sequence \
                     being a frame for both H_p and H_q"
                .to_string(),
            Some(s) => format!("no decay of A_q(N) detected across these truncations (log-log slope {s:.4})"),
        }
    };

    Ok(CollapseReport {
        formula,
        p,
        q,
        truncations: truncations.to_vec(),
        lower_bound_at_q: lower_q,
        upper_bound_at_q: cells.iter().map(|c| c.at_q.upper).collect(),
        lower_bound_at_p: cells.iter().map(|c| c.at_p.lower).collect(),
        upper_bound_at_p: upper_p,
        lower_bound_trend,
        bound_ratio_trend: bound_ratio
            .iter()
            .copied()
            .collect::<Option<Vec<_>>>()
            .and_then(|v| trend(&v)),
        bound_ratio,
        inverse_inclusion_trend: linalg::fit_slope(
            &log_n,
            &norm_sq.iter().map(|x| x.ln()).collect::<Vec<_>>(),
        ),
        inverse_inclusion_norm_sq: norm_sq,
        inverse_inclusion_norm_sq_factored: cells.iter().map(|c| c.factored).collect(),
        trivial_scale,
        interpretation,
    })
}

// ---------------------------------------------------------------------------
// Duals in H_m and reconstruction in H_p

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub r: SpaceIndex,
    pub p: SpaceIndex,
    pub m: SpaceIndex,
    pub truncation: usize,
    /// Bessel bound of the dual `φ` at each index `r..=m`.
    pub dual_bessel_bounds: Vec<(SpaceIndex, f64)>,
    /// `max ‖f − ι_{p,m}^{−1} Σ_k ⟨f, ψ_k⟩_p φ_k‖_p / ‖f‖_p` over the random vectors.
    pub reconstruction_residual: f64,
    /// Same for the plain expansion `f = Σ_k ⟨f, ψ_k⟩_m φ_k` in `H_m`.
    pub ambient_reconstruction_residual: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Builds the canonical dual `φ` of a complete `ψ` in `H_m` and verifies that
/// it is Bessel at every lower index and reconstructs vectors of `H_p` after
/// the correction by `ι_{p,m}^{−1}`.
#[allow(clippy::too_many_arguments)]
pub fn run_duality_study(
    scale: &ScaleSpec,
    seq: &SequenceFamily,
    r: impl Into<SpaceIndex>,
    p: impl Into<SpaceIndex>,
    m: impl Into<SpaceIndex>,
    n_random: usize,
    seed: u64,
) -> Result<DualityReport> {
    let (r, p, m) = (r.into(), p.into(), m.into());
    ordered(r, p, m)?;
    let n = scale.n();
    let comp = completeness(scale, seq, m)?;
    if !comp.complete {
        return Err(Error::IncompleteSequence {
            rank: comp.numerical_rank,
            n,
        });
    }
    let phi = canonical_dual(scale, seq, m, DEFAULT_DUAL_CUTOFF)?;
    let dual_bessel_bounds = (r.0..=m.0)
        .map(|t| Ok((SpaceIndex(t), frame_bounds(scale, &phi, t)?.upper)))
        .collect::<Result<Vec<_>>>()?;
    let b_m = dual_bessel_bounds.last().unwrap().1;

    let mut checks = Vec::new();
    for &(t, b) in &dual_bessel_bounds {
        checks.push(
            Check::at_most(
                "dual is Bessel at every index <= m with bound <= B_m",
                b - b_m,
                INEQUALITY_SLACK * b_m.max(1.0),
            )
            .indices(Some(t.0), Some(r.0), Some(m.0))
            .truncation(n),
        );
    }

    let c_p = analysis_matrix(scale, seq, p)?;
    let c_m = analysis_matrix(scale, seq, m)?;
    let mut g = rng(seed);
    let (mut worst, mut worst_m) = (0.0_f64, 0.0_f64);
    for _ in 0..n_random.max(1) {
        let f = linalg::random_vector(&mut g, n);
        let expansion = &phi.vectors * (&c_p * &f);
        let rec = scale.inverse_inclusion_adjoint(p, m, &expansion)?;
        worst = worst.max(scale.norm(p, &(&f - rec))? / scale.norm(p, &f)?);
        let rec_m = &phi.vectors * (&c_m * &f);
        worst_m = worst_m.max(scale.norm(m, &(&f - rec_m))? / scale.norm(m, &f)?);
    }
    checks.push(
        Check::at_most(
            "reconstruction: f = iota_{p,m}^{-1} sum_k <f,psi_k>_p phi_k",
            worst,
            RECONSTRUCTION_TOLERANCE,
        )
        .indices(Some(p.0), Some(r.0), Some(m.0))
        .truncation(n),
    );
    checks.push(
        Check::at_most(
            "reconstruction in H_m: f = sum_k <f,psi_k>_m phi_k",
            worst_m,
            RECONSTRUCTION_TOLERANCE,
        )
        .indices(Some(m.0), Some(r.0), Some(m.0))
        .truncation(n),
    );
    let pass = checks.iter().all(|c| c.pass);
    Ok(DualityReport {
        r,
        p,
        m,
        truncation: n,
        dual_bessel_bounds,
        reconstruction_residual: worst,
        ambient_reconstruction_residual: worst_m,
        checks,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Chain calculus sanity suites

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport { checks, pass }
    }
}

/// `|‖I_{p,r} x‖_r − ‖x‖_p| / ‖x‖_p` for every pair in `[lo, hi]²`, plus the
/// inverse relation `I_{r,p} I_{p,r} = id`.
pub fn run_unitarity_suite(
    scale: &ScaleSpec,
    lo: i32,
    hi: i32,
    n_random: usize,
    seed: u64,
) -> Result<SuiteReport> {
    if lo > hi {
        return Err(Error::UnorderedIndices {
            what: format!("p_min <= p_max (got {lo} > {hi})"),
        });
    }
    let mut g = rng(seed);
    let xs: Vec<_> = (0..n_random.max(1))
        .map(|_| linalg::random_vector(&mut g, scale.n()))
        .collect();
    let mut checks = Vec::new();
    for p in lo..=hi {
        for r in lo..=hi {
            let (mut dev, mut inv) = (0.0_f64, 0.0_f64);
            for x in &xs {
                let y = scale.berezanskii_map(p, r, x)?;
                let np = scale.norm(p, x)?;
                dev = dev.max((scale.norm(r, &y)? - np).abs() / np);
                inv = inv.max(relative_vector_residual(
                    &scale.berezanskii_map(r, p, &y)?,
                    x,
                ));
            }
            checks.push(
                Check::at_most(
                    "I_{p,r} is unitary: ||I_{p,r}x||_r = ||x||_p",
                    dev,
                    UNITARITY_TOLERANCE,
                )
                .indices(Some(p), Some(r), None)
                .truncation(scale.n()),
            );
            checks.push(
                Check::at_most("I_{r,p} inverts I_{p,r}", inv, 4.0 * f64::EPSILON)
                    .indices(Some(p), Some(r), None)
                    .truncation(scale.n()),
            );
        }
    }
    Ok(SuiteReport::new(checks))
}

/// Random operators `T: H_p → H_q`, `U: H_q → H_s` with indices in `[lo, hi]`:
/// the pairing identity, `T★★ = T`, `(UT)★ = T★U★` and `‖T★‖ = ‖T‖`.
pub fn run_pivot_adjoint_suite(
    scale: &ScaleSpec,
    lo: i32,
    hi: i32,
    pairs: usize,
    seed: u64,
) -> Result<SuiteReport> {
    use rand::Rng;
    if lo > hi {
        return Err(Error::UnorderedIndices {
            what: format!("p_min <= p_max (got {lo} > {hi})"),
        });
    }
    let n = scale.n();
    let mut g = rng(seed);
    let mut checks = Vec::new();
    for _ in 0..pairs.max(1) {
        let (p, q, s) = (
            g.random_range(lo..=hi),
            g.random_range(lo..=hi),
            g.random_range(lo..=hi),
        );
        let t = ChainOperator::new(linalg::random_matrix(&mut g, n, n), p, q)?;
        let u = ChainOperator::new(linalg::random_matrix(&mut g, n, n), q, s)?;
        let t_star = scale.pivot_adjoint(&t)?;
        let u_star = scale.pivot_adjoint(&u)?;
        let alpha = linalg::random_vector(&mut g, n);
        let x = linalg::random_vector(&mut g, n);
        let lhs = scale.inner_product(0, &alpha, &t.apply(&x))?;
        let rhs = scale.inner_product(0, &t_star.apply(&alpha), &x)?;
        let pairing = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
        let twice = relative_residual(&scale.pivot_adjoint(&t_star)?.matrix, &t.matrix);
        let product = relative_residual(
            &scale.pivot_adjoint(&u.compose(&t)?)?.matrix,
            &t_star.compose(&u_star)?.matrix,
        );
        let (nt, ns) = (scale.operator_norm(&t)?, scale.operator_norm(&t_star)?);
        let idx = (Some(p), Some(q), Some(s));
        for (claim, value) in [
            (
                "pivot adjoint pairing: <alpha, T x>_0 = <T* alpha, x>_0",
                pairing,
            ),
            ("pivot adjoint is an involution: T** = T", twice),
            ("pivot adjoint reverses products: (UT)* = T* U*", product),
            (
                "pivot adjoint preserves the norm: ||T*|| = ||T||",
                (nt - ns).abs() / nt,
            ),
        ] {
            checks.push(
                Check::at_most(claim, value, TRANSFER_TOLERANCE)
                    .indices(idx.0, idx.1, idx.2)
                    .truncation(n),
            );
        }
    }
    Ok(SuiteReport::new(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{canonical_basis, random_bessel, weighted_basis};

    fn linear(n: usize) -> ScaleSpec {
        make_scale(&FormulaKind::Linear.into(), n).unwrap()
    }

    #[test]
    fn transfer_of_orthonormal_basis() {
        let s = linear(10);
        let onb = weighted_basis(&s, 1, -0.5);
        for r in [-2, 0, 3] {
            let rep = run_transfer_suite(&s, &onb, 1, r, 10, 1).unwrap();
            assert!(rep.pass, "{rep:#?}");
            assert!(rep.identity_residuals.values().all(|&v| v <= 1e-12));
            assert!(rep
                .property_residuals
                .contains_key("orthonormal basis transfer: G^r_{I_{p,r}psi} = identity"));
        }
    }

    #[test]
    fn transfer_of_random_family() {
        let s = linear(12);
        let psi = random_bessel(&s, 1, 20, 3).unwrap();
        let rep = run_transfer_suite(&s, &psi, 1, -1, 20, 9).unwrap();
        assert!(rep.pass, "{rep:#?}");
        let (a, b) = &rep.bound_pairs;
        assert!((a.upper - b.upper).abs() <= 1e-10 * a.upper);
        assert!((a.lower - b.lower).abs() <= 1e-10 * a.lower);
    }

    #[test]
    fn transfer_with_equal_indices_is_exact() {
        let s = linear(9);
        let psi = random_bessel(&s, 0, 14, 8).unwrap();
        let rep = run_transfer_suite(&s, &psi, 2, 2, 5, 1).unwrap();
        for (k, v) in &rep.identity_residuals {
            assert_eq!(*v, 0.0, "{k}");
        }
    }

    #[test]
    fn propagation_closed_form() {
        let s = linear(8);
        let rep = run_propagation_suite(&s, &canonical_basis(&s, 1), -1, 0, 1, 10, 2).unwrap();
        assert!(rep.pass, "{rep:#?}");
        let b = &rep.bounds;
        let expected = [(0.125, 1.0), (1.0, 1.0), (1.0, 8.0)];
        for (got, want) in b.iter().zip(expected) {
            assert!(
                (got.lower - want.0).abs() <= 1e-14 * want.0
                    && (got.upper - want.1).abs() <= 1e-14 * want.1
            );
        }
    }

    #[test]
    fn propagation_with_equal_indices() {
        let s = linear(6);
        let psi = random_bessel(&s, 1, 9, 4).unwrap();
        let rep = run_propagation_suite(&s, &psi, 1, 1, 1, 5, 2).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.bounds.len(), 1);
    }

    #[test]
    fn propagation_of_incomplete_family() {
        let s = linear(8);
        let psi = random_bessel(&s, 2, 5, 4).unwrap();
        let rep = run_propagation_suite(&s, &psi, -2, 0, 2, 5, 2).unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert!(rep
            .bounds
            .iter()
            .all(|b| !b.complete && b.lower == 0.0 && b.analysis_rank == 5));
        assert!(matches!(
            run_propagation_suite(&s, &psi, 1, 0, 2, 5, 2),
            Err(Error::UnorderedIndices { .. })
        ));
    }

    #[test]
    fn collapse_linear() {
        let rep = run_collapse_study(
            FormulaKind::Linear,
            &SequenceGenerator::CanonicalBasis,
            0,
            0,
            -1,
            &[8, 16, 32, 64],
        )
        .unwrap();
        for (a, n) in rep.lower_bound_at_q.iter().zip([8.0, 16.0, 32.0, 64.0]) {
            assert!((a - 1.0 / n).abs() < 1e-15);
        }
        assert!((rep.lower_bound_trend.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(rep.inverse_inclusion_norm_sq, vec![8.0, 16.0, 32.0, 64.0]);
        assert!(rep.interpretation.contains("consistent with"));
        assert!(!rep.trivial_scale);
        assert!(rep.checks().iter().all(|c| c.pass));
    }

    #[test]
    fn collapse_trivial_and_exponential() {
        let ns = [8, 16, 32];
        let flat = run_collapse_study(
            FormulaKind::Constant,
            &SequenceGenerator::CanonicalBasis,
            0,
            0,
            -1,
            &ns,
        )
        .unwrap();
        assert!(flat.trivial_scale && flat.interpretation.starts_with("scale is trivial"));
        assert!(flat.lower_bound_at_q.iter().all(|&a| a == 1.0));
        let exp = run_collapse_study(
            FormulaKind::Exponential,
            &SequenceGenerator::CanonicalBasis,
            0,
            0,
            -1,
            &ns,
        )
        .unwrap();
        for (a, n) in exp.lower_bound_at_q.iter().zip(ns) {
            assert!((a - 2f64.powi(-(n as i32))).abs() <= 1e-15 * a);
        }
        assert!(exp.lower_bound_trend.unwrap() < -5.0);
        assert!(run_collapse_study(
            FormulaKind::Linear,
            &SequenceGenerator::CanonicalBasis,
            0,
            0,
            0,
            &ns
        )
        .is_err());
    }

    #[test]
    fn duality_examples() {
        let s = linear(6);
        let onb = weighted_basis(&s, 1, -0.5);
        let rep = run_duality_study(&s, &onb, 1, 1, 1, 10, 3).unwrap();
        assert!(rep.pass && rep.reconstruction_residual < 1e-14);
        let e = canonical_basis(&s, 0);
        let rep = run_duality_study(&s, &e, -1, -1, 0, 10, 3).unwrap();
        assert!(rep.pass && rep.reconstruction_residual < 1e-15, "{rep:#?}");
        let thin = random_bessel(&s, 0, 3, 1).unwrap();
        assert!(matches!(
            run_duality_study(&s, &thin, -1, 0, 0, 5, 1),
            Err(Error::IncompleteSequence { .. })
        ));
    }

    #[test]
    fn chain_suites_pass() {
        let s = make_scale(&FormulaKind::ShiftedQuadratic.into(), 7).unwrap();
        assert!(run_unitarity_suite(&s, -3, 3, 5, 1).unwrap().pass);
        let rep = run_pivot_adjoint_suite(&s, -2, 2, 5, 1).unwrap();
        assert!(rep.pass, "{rep:#?}");
    }
}
