//! Field-level stability certification.
//!
//! A computed solution field is swept point by point with two families of
//! perturbation checks derived from quasiconvexity:
//!
//! * the Legendre–Hadamard quadratic form over a deterministic grid of
//!   rank-one directions `(s, b, T)`, and
//! * the finite rank-one convexity residual over the same directions at a
//!   set of finite perturbation magnitudes `|a|`.
//!
//! Values below `-tolerance` are recorded as violations; a report with any
//! violation fails certification. Solutions that violate these necessary
//! conditions cannot be stable energy minimizers, so the certification gate
//! is a hard workflow failure regardless of solver convergence.

use crate::chunks;
use crate::field::FieldGrid;
use crate::material::{
    self, KinematicState, MaterialError, MaterialParams,
};
use crate::tensor2::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|d| = 1` for candidate field samples.
pub const CERTIFY_DIRECTOR_TOL: f64 = 1e-8;

/// Finite rank-one perturbations must keep `det(F + a⊗T)` above this floor;
/// perturbations breaching it are skipped and counted, not treated as
/// violations — the inequality is only meaningful on admissible
/// configurations.
pub const RANK_ONE_DET_FLOOR: f64 = 0.1;

#[derive(Debug, Error)]
pub enum StabilityError {
    /// A field sample failed the admissibility preconditions. A det F ≤ 0
    /// sample is itself a certification failure and is flagged distinctly
    /// from a director-normalization defect.
    #[error("field sample {index} has non-positive jacobian (det F = {det:.6e})")]
    NonPositiveJacobianAt { index: usize, det: f64 },
    #[error("field sample {index} director is not unit length (|d| - 1 = {err:.3e})")]
    NonUnitDirectorAt { index: usize, err: f64 },
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Sampling density and thresholds for the certification sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// Count of equally spaced directions in `[0, π)` used for both `s` and
    /// `T` (the forms are even under sign flips of either vector, so half a
    /// turn suffices).
    pub n_angles: usize,
    /// Magnitudes of the director-rotation block.
    pub b_values: Vec<f64>,
    /// Finite perturbation sizes `|a|` for the rank-one residual sweep.
    pub rank_one_magnitudes: Vec<f64>,
    /// Values below `-tolerance` count as violations.
    pub tolerance: f64,
    /// Evaluate field points on the rayon pool. Serial and parallel runs
    /// produce bitwise-identical reports.
    pub parallel: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            n_angles: 32,
            b_values: vec![0.0, 0.5, 1.0],
            rank_one_magnitudes: vec![0.1, 0.3],
            tolerance: 1e-10,
            parallel: true,
        }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_angles < 4 {
            return Err(format!("n_angles must be at least 4, got {}", self.n_angles));
        }
        if !(self.tolerance > 0.0) {
            return Err(format!("tolerance must be > 0, got {}", self.tolerance));
        }
        Ok(())
    }

    fn angles(&self) -> Vec<f64> {
        (0..self.n_angles)
            .map(|k| std::f64::consts::PI * k as f64 / self.n_angles as f64)
            .collect()
    }
}

/// Which check produced a violation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    LegendreHadamard,
    RankOne,
}

/// One scanned value below the violation threshold.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub point: usize,
    pub check: CheckKind,
    pub value: f64,
}

/// Minimum of the LH form over the scanned directions, with its argmin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LhMinimum {
    pub value: f64,
    pub s: Vec2,
    pub b: f64,
    pub t: Vec2,
}

/// Minimum of the LH sweep across a whole field, with the owning point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FieldLhMinimum {
    pub point: usize,
    pub value: f64,
    pub s: Vec2,
    pub b: f64,
    pub t: Vec2,
}

/// Minimum of the rank-one sweep across a whole field, with the owning
/// point and perturbation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FieldRankOneMinimum {
    pub point: usize,
    pub value: f64,
    pub a: Vec2,
    pub b: f64,
    pub t: Vec2,
}

/// Machine-readable certification verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n_points: usize,
    /// `None` only for an empty field.
    pub min_lh: Option<FieldLhMinimum>,
    /// `None` for an empty field or when every finite perturbation was
    /// inadmissible.
    pub min_rank_one: Option<FieldRankOneMinimum>,
    /// Finite perturbations skipped because they breached
    /// [`RANK_ONE_DET_FLOOR`].
    pub skipped_rank_one: usize,
    /// Sorted by point index, then check kind, then scan order.
    pub violations: Vec<Violation>,
    /// True exactly when `violations` is empty.
    pub passed: bool,
}

/// Minimum of the Legendre–Hadamard form at a single state over the
/// direction grid `(s, b, T)` of `cfg`, with the minimizing direction for
/// diagnostics. Ties keep the earliest scan entry.
pub fn lh_minimum_at(
    state: &KinematicState,
    p: &MaterialParams,
    cfg: &StabilityConfig,
) -> Result<LhMinimum, StabilityError> {
    let angles = cfg.angles();
    let mut best: Option<LhMinimum> = None;
    for &ls in &angles {
        let s = Vec2::from_angle(ls);
        for &b in &cfg.b_values {
            for &lt in &angles {
                let t = Vec2::from_angle(lt);
                let value = material::lh_quadratic_form(state, p, s, b, t)?;
                if best.is_none_or(|m| value < m.value) {
                    best = Some(LhMinimum { value, s, b, t });
                }
            }
        }
    }
    Ok(best.expect("n_angles >= 4 guarantees a nonempty scan"))
}

struct PointOutcome {
    lh: FieldLhMinimum,
    rank_one: Option<FieldRankOneMinimum>,
    skipped: usize,
    violations: Vec<Violation>,
}

fn scan_point(
    index: usize,
    state: &KinematicState,
    p: &MaterialParams,
    cfg: &StabilityConfig,
    angles: &[f64],
) -> Result<PointOutcome, StabilityError> {
    let mut lh_min: Option<FieldLhMinimum> = None;
    let mut violations = Vec::new();
    for &ls in angles {
        let s = Vec2::from_angle(ls);
        for &b in &cfg.b_values {
            for &lt in angles {
                let t = Vec2::from_angle(lt);
                let value = material::lh_quadratic_form(state, p, s, b, t)?;
                if lh_min.is_none_or(|m| value < m.value) {
                    lh_min = Some(FieldLhMinimum {
                        point: index,
                        value,
                        s,
                        b,
                        t,
                    });
                }
                if value < -cfg.tolerance {
                    violations.push(Violation {
                        point: index,
                        check: CheckKind::LegendreHadamard,
                        value,
                    });
                }
            }
        }
    }

    let mut rank_min: Option<FieldRankOneMinimum> = None;
    let mut skipped = 0;
    for &mag in &cfg.rank_one_magnitudes {
        for &ls in angles {
            let a = mag * Vec2::from_angle(ls);
            for &b in &cfg.b_values {
                for &lt in angles {
                    let t = Vec2::from_angle(lt);
                    let det_perturbed = (state.f + a.outer(t)).det();
                    if det_perturbed <= RANK_ONE_DET_FLOOR {
                        skipped += 1;
                        continue;
                    }
                    let value = material::rank_one_residual(state, p, a, b, t)?;
                    if rank_min.is_none_or(|m| value < m.value) {
                        rank_min = Some(FieldRankOneMinimum {
                            point: index,
                            value,
                            a,
                            b,
                            t,
                        });
                    }
                    if value < -cfg.tolerance {
                        violations.push(Violation {
                            point: index,
                            check: CheckKind::RankOne,
                            value,
                        });
                    }
                }
            }
        }
    }

    Ok(PointOutcome {
        lh: lh_min.expect("n_angles >= 4 guarantees a nonempty scan"),
        rank_one: rank_min,
        skipped,
        violations,
    })
}

/// Sweep every sample point of `field` with the LH and rank-one checks.
///
/// Points are validated first (`det F > 0`, `|d| = 1` within
/// [`CERTIFY_DIRECTOR_TOL`]); the first offending sample aborts with an
/// error naming it. The sweep itself is deterministic: the scan order is
/// fixed by `cfg`, per-point work is independent, and the merge is
/// sequential in point order (minima tie-break to the lowest point index),
/// so reports are bitwise identical across thread counts.
pub fn certify_field(
    field: &FieldGrid,
    p: &MaterialParams,
    cfg: &StabilityConfig,
) -> Result<StabilityReport, StabilityError> {
    cfg.validate().map_err(MaterialError::Invalid)?;
    for (index, pt) in field.points.iter().enumerate() {
        let det = pt.f.det();
        if !(det > 0.0) {
            return Err(StabilityError::NonPositiveJacobianAt { index, det });
        }
        let err = (pt.d.norm() - 1.0).abs();
        if !(err <= CERTIFY_DIRECTOR_TOL) {
            return Err(StabilityError::NonUnitDirectorAt { index, err });
        }
    }

    let angles = cfg.angles();
    let n = field.points.len();
    let outcomes: Vec<Result<Vec<PointOutcome>, StabilityError>> =
        chunks::map_chunks(n, cfg.parallel, |range| {
            range
                .map(|i| scan_point(i, &field.points[i].state(), p, cfg, &angles))
                .collect()
        });

    let mut min_lh: Option<FieldLhMinimum> = None;
    let mut min_rank_one: Option<FieldRankOneMinimum> = None;
    let mut skipped_rank_one = 0;
    let mut violations = Vec::new();
    for chunk in outcomes {
        for outcome in chunk? {
            // Strict `<` keeps the lowest point index on ties.
            if min_lh.is_none_or(|m| outcome.lh.value < m.value) {
                min_lh = Some(outcome.lh);
            }
            if let Some(r) = outcome.rank_one {
                if min_rank_one.is_none_or(|m| r.value < m.value) {
                    min_rank_one = Some(r);
                }
            }
            skipped_rank_one += outcome.skipped;
            violations.extend(outcome.violations);
        }
    }

    Ok(StabilityReport {
        n_points: n,
        min_lh,
        min_rank_one,
        skipped_rank_one,
        passed: violations.is_empty(),
        violations,
    })
}
