//! Executes a validated plan study by study.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{
    analysis_matrix, classify, completeness, frame_bound_witnesses, frame_bounds, BoundSweepRow,
    ClassificationRecord,
};
use crate::propagation::{
    run_collapse_study, run_duality_study, run_pivot_adjoint_suite, run_propagation_suite,
    run_transfer_suite, run_unitarity_suite, Check, CollapseReport, DualityReport,
    PropagationReport, SuiteReport, TransferReport,
};
use crate::report::plan::{ExperimentPlan, StudyKind, StudySpec};
use crate::scale::ScaleSpec;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Relative accuracy required of the extremal vectors returned for the bounds.
pub const WITNESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBoundsStudy {
    pub rows: Vec<BoundSweepRow>,
}

/// Study-specific payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum StudyDetails {
    FrameBounds(FrameBoundsStudy),
    Unitarity(SuiteReport),
    PivotAdjoint(SuiteReport),
    Transfer(Vec<TransferReport>),
    Propagation(PropagationReport),
    Duality(DualityReport),
    Collapse(CollapseReport),
    Classify(ClassificationRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub name: String,
    pub kind: String,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<StudyDetails>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub studies: usize,
    pub studies_passed: usize,
    pub studies_failed: usize,
    pub studies_errored: usize,
    pub checks: usize,
    pub checks_passed: usize,
    pub checks_failed: usize,
}

impl Summary {
    pub fn of(studies: &[StudyReport]) -> Summary {
        let mut s = Summary {
            studies: studies.len(),
            ..Summary::default()
        };
        for st in studies {
            if st.error.is_some() {
                s.studies_errored += 1;
            } else if st.pass {
                s.studies_passed += 1;
            } else {
                s.studies_failed += 1;
            }
            s.checks += st.checks.len();
            s.checks_passed += st.checks.iter().filter(|c| c.pass).count();
        }
        s.checks_failed = s.checks - s.checks_passed;
        s
    }

    pub fn all_passed(&self) -> bool {
        self.studies_failed == 0 && self.studies_errored == 0 && self.checks_failed == 0
    }
}

/// Wall-clock data. Not covered by the determinism guarantee; everything else
/// in a bundle is a pure function of the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub study_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool_version: String,
    pub plan: ExperimentPlan,
    pub studies: Vec<StudyReport>,
    pub summary: Summary,
    pub timing: Timing,
}

impl ReportBundle {
    pub fn all_passed(&self) -> bool {
        self.summary.all_passed()
    }

    /// Bundle with the timing block zeroed, for byte comparisons.
    pub fn without_timing(&self) -> ReportBundle {
        ReportBundle {
            timing: Timing {
                generated_at: 0,
                study_seconds: Vec::new(),
            },
            ..self.clone()
        }
    }
}

/// Runs every study in declaration order. A failing study is recorded in the
/// bundle and does not stop the others.
pub fn run_plan(plan: &ExperimentPlan) -> ReportBundle {
    let mut studies = Vec::with_capacity(plan.studies.len());
    let mut study_seconds = Vec::with_capacity(plan.studies.len());
    for (i, spec) in plan.studies.iter().enumerate() {
        let started = Instant::now();
        let name = spec.display_name(i);
        let report = match run_study(plan, spec) {
            Ok((checks, details)) => {
                let pass = checks.iter().all(|c| c.pass);
                StudyReport {
                    name,
                    kind: spec.kind_name().into(),
                    checks,
                    details: Some(details),
                    error: None,
                    pass,
                }
            }
            Err(e) => StudyReport {
                name,
                kind: spec.kind_name().into(),
                checks: Vec::new(),
                details: None,
                error: Some(e.to_string()),
                pass: false,
            },
        };
        studies.push(report);
        study_seconds.push(started.elapsed().as_secs_f64());
    }
    let generated_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    ReportBundle {
        tool_version: TOOL_VERSION.to_string(),
        plan: plan.clone(),
        summary: Summary::of(&studies),
        studies,
        timing: Timing {
            generated_at,
            study_seconds,
        },
    }
}

fn run_study(plan: &ExperimentPlan, spec: &StudySpec) -> Result<(Vec<Check>, StudyDetails)> {
    let scale = spec.scale.as_ref().unwrap_or(&plan.scale).build()?;
    let decl = |name: &str| {
        plan.sequences
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("undefined sequence `{name}`")))
    };
    let family = |name: &str| {
        let d = decl(name)?;
        d.generator.build(&scale, d.m)
    };
    match &spec.kind {
        StudyKind::FrameBounds {
            sequence,
            p,
            expect,
        } => {
            let seq = family(sequence)?;
            let (checks, rows) = frame_bounds_study(&scale, &seq, p, expect.as_deref())?;
            Ok((checks, StudyDetails::FrameBounds(FrameBoundsStudy { rows })))
        }
        StudyKind::Unitarity {
            p_min,
            p_max,
            n_random,
            seed,
        } => {
            let rep = run_unitarity_suite(&scale, *p_min, *p_max, *n_random, *seed)?;
            Ok((rep.checks.clone(), StudyDetails::Unitarity(rep)))
        }
        StudyKind::PivotAdjoint {
            p_min,
            p_max,
            pairs,
            seed,
        } => {
            let rep = run_pivot_adjoint_suite(&scale, *p_min, *p_max, *pairs, *seed)?;
            Ok((rep.checks.clone(), StudyDetails::PivotAdjoint(rep)))
        }
        StudyKind::Transfer {
            sequence,
            pairs,
            n_random,
            seed,
        } => {
            let seq = family(sequence)?;
            let reports = pairs
                .iter()
                .map(|&(p, r)| run_transfer_suite(&scale, &seq, p, r, *n_random, *seed))
                .collect::<Result<Vec<_>>>()?;
            let checks = reports.iter().flat_map(|r| r.checks()).collect();
            Ok((checks, StudyDetails::Transfer(reports)))
        }
        StudyKind::Propagation {
            sequence,
            r,
            p,
            m,
            n_random,
            seed,
        } => {
            let rep =
                run_propagation_suite(&scale, &family(sequence)?, *r, *p, *m, *n_random, *seed)?;
            Ok((rep.checks(), StudyDetails::Propagation(rep)))
        }
        StudyKind::Duality {
            sequence,
            r,
            p,
            m,
            n_random,
            seed,
        } => {
            let rep = run_duality_study(&scale, &family(sequence)?, *r, *p, *m, *n_random, *seed)?;
            Ok((rep.checks.clone(), StudyDetails::Duality(rep)))
        }
        StudyKind::Collapse {
            sequence,
            p,
            q,
            truncations,
            formula,
        } => {
            let d = decl(sequence)?;
            let rep = run_collapse_study(
                plan.sweep_formula(spec, *formula),
                &d.generator,
                d.m,
                *p,
                *q,
                truncations,
            )?;
            Ok((rep.checks(), StudyDetails::Collapse(rep)))
        }
        StudyKind::Classify {
            sequence,
            p,
            truncations,
            formula,
            expect,
        } => {
            let d = decl(sequence)?;
            let rec = classify(
                plan.sweep_formula(spec, *formula),
                &d.generator,
                d.m,
                *p,
                truncations,
            )?;
            let mut checks = Vec::new();
            if let Some(expected) = expect {
                checks.push(
                    Check::at_most(
                        format!("verdict is {}", expected.as_str()),
                        if rec.verdict == *expected { 0.0 } else { 1.0 },
                        0.0,
                    )
                    .indices(Some(*p), None, Some(d.m)),
                );
            }
            Ok((checks, StudyDetails::Classify(rec)))
        }
    }
}

fn frame_bounds_study(
    scale: &ScaleSpec,
    seq: &crate::sequence::SequenceFamily,
    indices: &[i32],
    expect: Option<&[crate::report::plan::ExpectedBounds]>,
) -> Result<(Vec<Check>, Vec<BoundSweepRow>)> {
    let n = scale.n();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (i, &p) in indices.iter().enumerate() {
        let bounds = frame_bounds(scale, seq, p)?;
        let comp = completeness(scale, seq, p)?;
        rows.push(BoundSweepRow::new(&bounds, &comp));

        // The bounds come from singular values; the witnesses from an
        // eigen-decomposition. Their Rayleigh quotients must agree.
        let (lo, hi) = frame_bound_witnesses(scale, seq, p)?;
        let c = analysis_matrix(scale, seq, p)?;
        let energy = |f: &crate::linalg::CVector| (&c * f).norm_squared();
        let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        checks.push(
            Check::at_most(
                "extremal vector attains the upper frame bound",
                rel(energy(&hi), bounds.upper),
                WITNESS_TOLERANCE,
            )
            .indices(Some(p), None, Some(seq.ambient_index.0))
            .truncation(n),
        );
        if comp.complete {
            checks.push(
                Check::at_most(
                    "extremal vector attains the lower frame bound",
                    rel(energy(&lo), bounds.lower),
                    WITNESS_TOLERANCE,
                )
                .indices(Some(p), None, Some(seq.ambient_index.0))
                .truncation(n),
            );
        }
        if let Some(e) = expect.and_then(|e| e.get(i)) {
            let dev = rel(bounds.lower, e.lower).max(rel(bounds.upper, e.upper));
            checks.push(
                Check::at_most(
                    format!("frame bounds equal ({}, {})", e.lower, e.upper),
                    dev,
                    e.tolerance,
                )
                .indices(Some(p), None, Some(seq.ambient_index.0))
                .truncation(n),
            );
        }
    }
    Ok((checks, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::plan::parse_config;

    fn plan(studies: &str) -> ExperimentPlan {
        parse_config(&format!(
            r#"{{
                "schema": 1,
                "scale": {{"formula": "linear", "n": 8}},
                "sequences": {{
                    "e": {{"generator": {{"kind": "canonical_basis"}}, "m": 0}},
                    "psi": {{"generator": {{"kind": "random_bessel", "count": 12, "seed": 5}}, "m": 0}}
                }},
                "studies": {studies}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn empty_plan_gives_zero_summary() {
        let b = run_plan(&plan("[]"));
        assert_eq!(b.summary, Summary::default());
        assert!(b.all_passed());
    }

    #[test]
    fn closed_form_bounds_pass() {
        let b = run_plan(&plan(
            r#"[{"kind": "frame_bounds", "sequence": "e", "p": [-1, 1],
                 "expect": [{"lower": 0.125, "upper": 1, "tolerance": 1e-14}, {"lower": 1, "upper": 8, "tolerance": 1e-14}]}]"#,
        ));
        assert!(b.all_passed(), "{:#?}", b.studies);
        assert_eq!(b.summary.checks, 6);
    }

    #[test]
    fn failing_expectation_is_reported() {
        let b = run_plan(&plan(
            r#"[{"kind": "classify", "sequence": "e", "p": -1, "truncations": [8, 16, 32], "expect": "frame"},
                {"kind": "unitarity", "p_min": -1, "p_max": 1, "n_random": 3}]"#,
        ));
        assert!(!b.all_passed());
        assert_eq!(b.summary.studies_failed, 1);
        assert_eq!(b.summary.studies_passed, 1);
        assert_eq!(
            b.summary.checks,
            b.studies.iter().map(|s| s.checks.len()).sum::<usize>()
        );
    }

    #[test]
    fn study_errors_do_not_stop_siblings() {
        // Duality needs a complete family; 12 vectors in dimension 8 are, so use a thin one via override.
        let mut p = plan(
            r#"[{"kind": "duality", "sequence": "psi", "r": -1, "p": 0, "m": 0, "n_random": 2},
                {"kind": "unitarity", "p_min": 0, "p_max": 1, "n_random": 2}]"#,
        );
        p.sequences.get_mut("psi").unwrap().generator =
            crate::sequence::SequenceGenerator::RandomBessel {
                count: Some(3),
                redundancy: None,
                seed: 1,
            };
        let b = run_plan(&p);
        assert!(b.studies[0]
            .error
            .as_deref()
            .unwrap()
            .contains("incomplete"));
        assert!(b.studies[1].pass);
        assert_eq!(b.summary.studies_errored, 1);
    }
}
