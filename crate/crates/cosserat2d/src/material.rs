//! Constitutive core: nematic-elastomer energy density, analytic stresses,
//! frame-invariance residual, and the second-order (Legendre–Hadamard /
//! rank-one) forms used for stability certification.
//!
//! The stored energy of a planar nematic elastomer with unit director `d`
//! (current) and `D` (reference) is
//!
//! ```text
//! W(F, d, ∇d) = (μ/2)·(tr(L₀ Fᵀ L⁻¹ F) − 2 − 2·ln det F) + frank·(∇d : ∇d)
//! ```
//!
//! with step-length tensors `L = I + (r−1) d⊗d`, `L₀ = I + (r−1) D⊗D`.
//! The `−2` is the trace of the 2D identity; a 3D variant would subtract 3
//! (see [`DIM_TRACE`]). `frank` stores the *halved* Frank coefficient as it
//! appears grouped in W, so the couple stress is `M = 2·frank·∇d`.
//!
//! `L⁻¹` is implemented by its algebraic closed form
//! `I + (1/r − 1) d⊗d`, which is the exact inverse on `|d| = 1` and defines
//! a smooth extension off the unit circle. With that extension the internal
//! couple `N = ∂W/∂d = μ(1/r − 1)(F L₀ Fᵀ) d` holds as an identity for all
//! `d`, so finite differences of `W` in `d` reproduce `N` without any
//! projection bookkeeping.

use crate::tensor2::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Trace of the identity in the modeled dimension (2): the constant
/// subtracted inside the energy so the reference state has W = 0.
pub const DIM_TRACE: f64 = 2.0;

/// Tolerance on `|D| = 1` for material parameters.
pub const REFERENCE_DIRECTOR_TOL: f64 = 1e-12;

/// Tolerance on `|d| = 1` for kinematic states.
pub const DIRECTOR_UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MaterialError {
    /// The deformation gradient lost invertibility: `det F ≤ 0`. The `ln J`
    /// barrier in the energy must be respected by callers; this is never
    /// clamped here — step control lives in the solvers.
    #[error("non-positive jacobian: det F = {det:.6e}")]
    NonPositiveJacobian { det: f64 },
    /// Parameter or state validation failure.
    #[error("invalid material input: {0}")]
    Invalid(String),
}

/// Normalized material parameters of the nematic-elastomer model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Shear modulus (normalized).
    pub mu: f64,
    /// Shape anisotropy ratio; `r = 1` collapses to the isotropic neo-Hookean
    /// limit.
    pub r: f64,
    /// Halved Frank coefficient, `αγ²/2`, exactly as grouped in W.
    pub frank: f64,
    /// Reference (stress-free) director; must be unit length.
    pub d_ref: Vec2,
}

impl MaterialParams {
    /// The normalized parameter set used by every computed case:
    /// `μ = 1`, `r = 2`, `frank = 5e-4`, reference director at angle `phi0`.
    pub fn standard(phi0: f64) -> Self {
        MaterialParams {
            mu: 1.0,
            r: 2.0,
            frank: 5e-4,
            d_ref: Vec2::from_angle(phi0),
        }
    }

    /// Check `mu > 0`, `r > 0`, `frank ≥ 0`, `|D| = 1` within
    /// [`REFERENCE_DIRECTOR_TOL`].
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.mu > 0.0) {
            return Err(MaterialError::Invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.r > 0.0) {
            return Err(MaterialError::Invalid(format!("r must be > 0, got {}", self.r)));
        }
        if !(self.frank >= 0.0) {
            return Err(MaterialError::Invalid(format!(
                "frank must be >= 0, got {}",
                self.frank
            )));
        }
        let norm_err = (self.d_ref.norm() - 1.0).abs();
        if !(norm_err <= REFERENCE_DIRECTOR_TOL) {
            return Err(MaterialError::Invalid(format!(
                "reference director must be unit length, |D| - 1 = {norm_err:.3e}"
            )));
        }
        Ok(())
    }
}

/// Pointwise kinematic data: deformation gradient, current director, and
/// director gradient with entry `(i, A) = ∂d_i/∂X_A` (row = spatial
/// component, column = referential derivative direction).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KinematicState {
    pub f: Mat2,
    pub d: Vec2,
    pub gradd: Mat2,
}

impl KinematicState {
    pub fn new(f: Mat2, d: Vec2, gradd: Mat2) -> Self {
        KinematicState { f, d, gradd }
    }

    /// Reference state: `F = I`, `d = D`, `∇d = 0`. Energy and stresses all
    /// vanish there.
    pub fn reference(p: &MaterialParams) -> Self {
        KinematicState::new(Mat2::IDENTITY, p.d_ref, Mat2::ZERO)
    }

    /// Check `det F > 0` and `|d| = 1` within [`DIRECTOR_UNIT_TOL`].
    ///
    /// States sampled from an angle field additionally satisfy
    /// `d · (column A of ∇d) = 0`; that is a property of the sampling, not
    /// enforced here.
    pub fn validate(&self) -> Result<(), MaterialError> {
        let det = self.f.det();
        if !(det > 0.0) {
            return Err(MaterialError::NonPositiveJacobian { det });
        }
        let norm_err = (self.d.norm() - 1.0).abs();
        if !(norm_err <= DIRECTOR_UNIT_TOL) {
            return Err(MaterialError::Invalid(format!(
                "director must be unit length, |d| - 1 = {norm_err:.3e}"
            )));
        }
        Ok(())
    }
}

/// The three work-conjugate stresses `P = ∂W/∂F`, `N = ∂W/∂d`,
/// `M = ∂W/∂∇d`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StressSet {
    /// First Piola-type stress, conjugate to F.
    pub p: Mat2,
    /// Internal couple (director stress), conjugate to d.
    pub n: Vec2,
    /// Couple stress, conjugate to ∇d; equals `2·frank·∇d`.
    pub m: Mat2,
}

/// Step-length tensor `L = I + (r−1) d⊗d`; symmetric positive definite with
/// eigenvalues `r` (along d) and 1 (across d) for unit `d`.
pub fn l_tensor(d: Vec2, r: f64) -> Mat2 {
    Mat2::IDENTITY + (r - 1.0) * d.outer(d)
}

/// Reference step-length tensor `L₀ = I + (r−1) D⊗D`.
pub fn l0_tensor(d_ref: Vec2, r: f64) -> Mat2 {
    l_tensor(d_ref, r)
}

/// Closed-form inverse `L⁻¹ = I + (1/r − 1) d⊗d` (exact for unit `d`; used
/// as the smooth off-manifold extension everywhere W is differentiated).
pub fn l_tensor_inv(d: Vec2, r: f64) -> Mat2 {
    Mat2::IDENTITY + (1.0 / r - 1.0) * d.outer(d)
}

fn checked_det(f: Mat2) -> Result<f64, MaterialError> {
    let det = f.det();
    // `!(det > 0)` also traps NaN.
    if !(det > 0.0) {
        Err(MaterialError::NonPositiveJacobian { det })
    } else {
        Ok(det)
    }
}

/// `F⁻ᵀ` by the adjugate, given a pre-validated positive determinant.
fn inv_transpose(f: Mat2, det: f64) -> Mat2 {
    let inv_det = 1.0 / det;
    Mat2::new(
        f.m22 * inv_det,
        -f.m21 * inv_det,
        -f.m12 * inv_det,
        f.m11 * inv_det,
    )
}

/// Stored energy density `W(F, d, ∇d)`.
pub fn energy_density(state: &KinematicState, p: &MaterialParams) -> Result<f64, MaterialError> {
    let det = checked_det(state.f)?;
    let l_inv = l_tensor_inv(state.d, p.r);
    let l0 = l0_tensor(p.d_ref, p.r);
    // tr(L₀ Fᵀ L⁻¹ F) = (L⁻¹ F L₀) : F
    let trace_term = (l_inv * state.f * l0).frobenius_inner(state.f);
    let elastic = 0.5 * p.mu * (trace_term - DIM_TRACE - 2.0 * det.ln());
    let frank_term = p.frank * state.gradd.frobenius_inner(state.gradd);
    Ok(elastic + frank_term)
}

/// Analytic stresses:
/// `P = μ(L⁻¹ F L₀ − F⁻ᵀ)`, `N = μ(1/r − 1)(F L₀ Fᵀ) d`, `M = 2·frank·∇d`.
pub fn stresses(state: &KinematicState, p: &MaterialParams) -> Result<StressSet, MaterialError> {
    let det = checked_det(state.f)?;
    let l_inv = l_tensor_inv(state.d, p.r);
    let l0 = l0_tensor(p.d_ref, p.r);
    let piola = p.mu * (l_inv * state.f * l0 - inv_transpose(state.f, det));
    let couple = p.mu * (1.0 / p.r - 1.0) * (state.f * l0 * state.f.transpose()).mul_vec(state.d);
    let moment = (2.0 * p.frank) * state.gradd;
    Ok(StressSet {
        p: piola,
        n: couple,
        m: moment,
    })
}

/// Frobenius norm of the skew part of `P Fᵀ + N⊗d + M (∇d)ᵀ`.
///
/// Frame invariance of W makes that combination symmetric, so the returned
/// residual is rounding-level (≤ 1e-9) at every admissible state of this
/// model; a corrupted stress set breaks the symmetry.
pub fn frame_invariance_residual(
    state: &KinematicState,
    p: &MaterialParams,
) -> Result<f64, MaterialError> {
    let s = stresses(state, p)?;
    let combined =
        s.p * state.f.transpose() + s.n.outer(state.d) + s.m * state.gradd.transpose();
    Ok(combined.skew_part().frobenius_norm())
}

/// Legendre–Hadamard quadratic form along the rank-one direction
/// `(δF, δ∇d) = (s⊗T, b·d⊥⊗T)`:
///
/// ```text
/// μ·((s·L⁻¹s)(T·L₀T) + (s·F⁻ᵀT)²) + 2·frank·b²·|T|²
/// ```
///
/// This is the exact second directional derivative of W. The mixed
/// (F, ∇d) block vanishes identically because W is additively separable,
/// and the director-rotation magnitude `b` scales the in-plane perturbation
/// direction `d⊥`, keeping `d·δd = 0` exact. The form is homogeneous of
/// degree 2 in `(s, b)` and in `T`; unit `s`, `T` are conventional.
pub fn lh_quadratic_form(
    state: &KinematicState,
    p: &MaterialParams,
    s: Vec2,
    b: f64,
    t: Vec2,
) -> Result<f64, MaterialError> {
    let det = checked_det(state.f)?;
    let l_inv = l_tensor_inv(state.d, p.r);
    let l0 = l0_tensor(p.d_ref, p.r);
    let f_inv_t = inv_transpose(state.f, det);
    let elastic = p.mu
        * (s.dot(l_inv.mul_vec(s)) * t.dot(l0.mul_vec(t))
            + s.dot(f_inv_t.mul_vec(t)).powi(2));
    let frank_block = 2.0 * p.frank * b * b * t.norm_sq();
    Ok(elastic + frank_block)
}

/// Finite rank-one convexity residual
///
/// ```text
/// W(F + a⊗T, d, ∇d + b·d⊥⊗T) − W(F, d, ∇d) − P : a⊗T − M : b·d⊥⊗T
/// ```
///
/// Nonnegative at every stable state; scaling the perturbation by ε gives
/// `residual/ε² → ½·lh_quadratic_form` as ε → 0.
pub fn rank_one_residual(
    state: &KinematicState,
    p: &MaterialParams,
    a: Vec2,
    b: f64,
    t: Vec2,
) -> Result<f64, MaterialError> {
    let base = energy_density(state, p)?;
    let s = stresses(state, p)?;
    let df = a.outer(t);
    let dgrad = b * state.d.perp().outer(t);
    let perturbed = KinematicState::new(state.f + df, state.d, state.gradd + dgrad);
    // Loss of invertibility of the perturbed gradient is reported, never
    // silently clipped: callers choose admissible perturbation sizes.
    let perturbed_energy = energy_density(&perturbed, p)?;
    Ok(perturbed_energy - base - s.p.frobenius_inner(df) - s.m.frobenius_inner(dgrad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central-difference step for O(1) magnitudes: rounding/truncation
    /// sweet spot for 64-bit floats.
    const FD_STEP: f64 = 1e-6;

    fn sample_state(rng: &mut ChaCha8Rng) -> KinematicState {
        // Random admissible state: det F ∈ [0.5, 2], unit d, |∇d| ≤ 2,
        // gradient columns orthogonal to d (angle-field sampling).
        loop {
            let f = Mat2::new(
                1.0 + rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                1.0 + rng.random_range(-0.5..0.5),
            );
            let det = f.det();
            if !(0.5..=2.0).contains(&det) {
                continue;
            }
            let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let d = Vec2::from_angle(phi);
            let gradphi = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let gradd = d.perp().outer(gradphi);
            return KinematicState::new(f, d, gradd);
        }
    }

    fn sample_params(rng: &mut ChaCha8Rng) -> MaterialParams {
        MaterialParams {
            mu: rng.random_range(0.5..2.0),
            r: rng.random_range(1.2..3.0),
            frank: rng.random_range(0.0..1e-2),
            d_ref: Vec2::from_angle(rng.random_range(-1.5..1.5)),
        }
    }

    #[test]
    fn l_tensor_examples() {
        let l = l_tensor(Vec2::new(1.0, 0.0), 2.0);
        assert_eq!(l, Mat2::new(2.0, 0.0, 0.0, 1.0));
        let l = l_tensor(Vec2::new(0.0, 1.0), 1.0);
        assert_eq!(l, Mat2::IDENTITY);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let l = l_tensor(Vec2::new(s, s), 2.0);
        assert!((l - Mat2::new(1.5, 0.5, 0.5, 1.5)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn l_tensor_inverse_is_exact_on_unit_directors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let d = Vec2::from_angle(rng.random_range(-3.2..3.2));
            let r = rng.random_range(0.3..4.0);
            let prod = l_tensor(d, r) * l_tensor_inv(d, r);
            assert!((prod - Mat2::IDENTITY).frobenius_norm() < 1e-14);
        }
    }

    #[test]
    fn reference_state_has_zero_energy_and_stress() {
        for phi0 in [0.0, 0.4, std::f64::consts::FRAC_PI_3, -1.1] {
            let p = MaterialParams::standard(phi0);
            let state = KinematicState::reference(&p);
            let w = energy_density(&state, &p).unwrap();
            assert!(w.abs() < 1e-15, "W at reference = {w}");
            let s = stresses(&state, &p).unwrap();
            assert!(s.p.frobenius_norm() < 1e-14);
            // The couple N is the *unconstrained* partial derivative; on
            // the unit-director manifold only its tangential projection
            // does work, and that must vanish at the reference state. The
            // normal component is μ(1/r − 1)·r by construction.
            assert!(s.n.dot(state.d.perp()).abs() < 1e-14);
            let normal = p.mu * (1.0 / p.r - 1.0) * p.r;
            assert!((s.n.dot(state.d) - normal).abs() < 1e-14);
            assert!(s.m.frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn pure_frank_state_energy() {
        // d = (1,0) with the single gradient entry ∂d₂/∂X₁ = 1: the trace
        // term collapses to the dimension trace and only the Frank term
        // survives.
        let p = MaterialParams::standard(0.0);
        let state = KinematicState::new(
            Mat2::IDENTITY,
            Vec2::new(1.0, 0.0),
            Mat2::new(0.0, 0.0, 1.0, 0.0),
        );
        let w = energy_density(&state, &p).unwrap();
        assert!((w - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn stretch_energy_matches_independent_evaluation() {
        // Frozen from a symbolic evaluation of the trace formula:
        // W(diag(1.1,1), d=D at π/3, μ=1, r=2, ∇d=0) = 27/256 − ln(1.1).
        let p = MaterialParams::standard(std::f64::consts::FRAC_PI_3);
        let state = KinematicState::new(Mat2::diag(1.1, 1.0), p.d_ref, Mat2::ZERO);
        let w = energy_density(&state, &p).unwrap();
        assert!((w - 0.010158570195675139).abs() < 1e-13, "W = {w:.17}");
    }

    #[test]
    fn energy_is_nonnegative_on_admissible_states() {
        // W = Σ (σᵢ² − 1 − 2 ln σᵢ)·μ/2 ≥ 0 in terms of the singular values
        // of L^{-1/2} F L₀^{1/2}, plus the nonnegative Frank term.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let p = sample_params(&mut rng);
            let state = sample_state(&mut rng);
            let w = energy_density(&state, &p).unwrap();
            assert!(w >= -1e-14, "negative energy {w} at {state:?}");
        }
    }

    #[test]
    fn non_positive_jacobian_is_an_error() {
        let p = MaterialParams::standard(0.0);
        let state = KinematicState::new(Mat2::diag(-1.0, 1.0), Vec2::new(1.0, 0.0), Mat2::ZERO);
        assert!(matches!(
            energy_density(&state, &p),
            Err(MaterialError::NonPositiveJacobian { .. })
        ));
        assert!(matches!(
            stresses(&state, &p),
            Err(MaterialError::NonPositiveJacobian { .. })
        ));
    }

    fn slot(m: &mut Mat2, k: usize) -> &mut f64 {
        match k {
            0 => &mut m.m11,
            1 => &mut m.m12,
            2 => &mut m.m21,
            _ => &mut m.m22,
        }
    }

    fn fd_stresses(state: &KinematicState, p: &MaterialParams) -> StressSet {
        let h = FD_STEP;
        let wp = |st: &KinematicState| energy_density(st, p).unwrap();
        let mut piola = Mat2::ZERO;
        for idx in 0..4 {
            let mut plus = *state;
            let mut minus = *state;
            *slot(&mut plus.f, idx) += h;
            *slot(&mut minus.f, idx) -= h;
            let g = (wp(&plus) - wp(&minus)) / (2.0 * h);
            *slot(&mut piola, idx) = g;
        }
        let mut couple = Vec2::ZERO;
        for idx in 0..2 {
            let mut plus = *state;
            let mut minus = *state;
            if idx == 0 {
                plus.d.x += h;
                minus.d.x -= h;
            } else {
                plus.d.y += h;
                minus.d.y -= h;
            }
            let g = (wp(&plus) - wp(&minus)) / (2.0 * h);
            if idx == 0 {
                couple.x = g;
            } else {
                couple.y = g;
            }
        }
        let mut moment = Mat2::ZERO;
        for idx in 0..4 {
            let mut plus = *state;
            let mut minus = *state;
            *slot(&mut plus.gradd, idx) += h;
            *slot(&mut minus.gradd, idx) -= h;
            let g = (wp(&plus) - wp(&minus)) / (2.0 * h);
            *slot(&mut moment, idx) = g;
        }
        StressSet {
            p: piola,
            n: couple,
            m: moment,
        }
    }

    #[test]
    fn stresses_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let p = sample_params(&mut rng);
            let state = sample_state(&mut rng);
            let analytic = stresses(&state, &p).unwrap();
            let fd = fd_stresses(&state, &p);
            let dp = (analytic.p - fd.p).frobenius_norm();
            let dn = (analytic.n - fd.n).norm();
            let dm = (analytic.m - fd.m).frobenius_norm();
            assert!(dp <= 1e-6 * (1.0 + analytic.p.frobenius_norm()), "P: {dp:e}");
            assert!(dn <= 1e-6 * (1.0 + analytic.n.norm()), "N: {dn:e}");
            assert!(dm <= 1e-6 * (1.0 + analytic.m.frobenius_norm()), "M: {dm:e}");
        }
    }

    #[test]
    fn rotation_invariance_of_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..500 {
            let p = sample_params(&mut rng);
            let state = sample_state(&mut rng);
            let w = energy_density(&state, &p).unwrap();
            let q = Mat2::rotation(rng.random_range(-3.2..3.2));
            let rotated = KinematicState::new(
                q * state.f,
                q.mul_vec(state.d),
                q * state.gradd,
            );
            let wr = energy_density(&rotated, &p).unwrap();
            assert!(
                (wr - w).abs() <= 1e-12 * (1.0 + w.abs()),
                "rotation changed energy by {:.3e}",
                wr - w
            );
        }
    }

    #[test]
    fn frame_invariance_residual_is_tiny_and_detects_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let p = MaterialParams::standard(0.9);
        for _ in 0..200 {
            let state = sample_state(&mut rng);
            let res = frame_invariance_residual(&state, &p).unwrap();
            assert!(res <= 1e-9, "residual {res:e}");

            // Negative control: corrupt N by adding perp(d).
            let s = stresses(&state, &p).unwrap();
            let combined = s.p * state.f.transpose()
                + (s.n + state.d.perp()).outer(state.d)
                + s.m * state.gradd.transpose();
            assert!(combined.skew_part().frobenius_norm() > 0.1);
        }
    }

    #[test]
    fn reference_state_residual_is_zero() {
        let p = MaterialParams::standard(std::f64::consts::FRAC_PI_4);
        let state = KinematicState::reference(&p);
        assert_eq!(frame_invariance_residual(&state, &p).unwrap(), 0.0);
    }

    #[test]
    fn lh_form_pinned_values() {
        // Frozen against a finite-difference second derivative of W along
        // ε·s⊗T (and the Frank block along ε·b·d⊥⊗T).
        let p = MaterialParams::standard(0.0);
        let state = KinematicState::reference(&p);
        let e1 = Vec2::new(1.0, 0.0);
        let v = lh_quadratic_form(&state, &p, e1, 0.0, e1).unwrap();
        assert!((v - 2.0).abs() < 1e-14, "LH = {v}");
        let v = lh_quadratic_form(&state, &p, e1, 1.0, e1).unwrap();
        assert!((v - 2.001).abs() < 1e-14, "LH with Frank block = {v}");
    }

    #[test]
    fn lh_form_matches_fd_second_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..100 {
            let p = sample_params(&mut rng);
            let state = sample_state(&mut rng);
            let s = Vec2::from_angle(rng.random_range(-3.2..3.2));
            let t = Vec2::from_angle(rng.random_range(-3.2..3.2));
            let b = rng.random_range(-1.0..1.0);
            let form = lh_quadratic_form(&state, &p, s, b, t).unwrap();

            let h = 1e-5;
            let w_at = |eps: f64| {
                let st = KinematicState::new(
                    state.f + eps * s.outer(t),
                    state.d,
                    state.gradd + (eps * b) * state.d.perp().outer(t),
                );
                energy_density(&st, &p).unwrap()
            };
            let fd = (w_at(h) - 2.0 * w_at(0.0) + w_at(-h)) / (h * h);
            assert!(
                (form - fd).abs() <= 1e-5 * (1.0 + form.abs()),
                "LH {form} vs FD {fd}"
            );
        }
    }

    #[test]
    fn lh_factor_identity_at_r2() {
        // (s·L⁻¹s)(T·L₀T) = (1/8)(3−cos2λ)(3+cos2λ₀) with cos λ = s·d,
        // cos λ₀ = T·D, at r = 2. Spot value at λ = λ₀ = 0: (1/8)·2·4 = 1.
        let d = Vec2::new(1.0, 0.0);
        let l_inv = l_tensor_inv(d, 2.0);
        let l0 = l0_tensor(d, 2.0);
        for k in 0..64 {
            for k0 in 0..64 {
                let lam = std::f64::consts::PI * k as f64 / 64.0;
                let lam0 = std::f64::consts::PI * k0 as f64 / 64.0;
                let s = Vec2::from_angle(lam);
                let t = Vec2::from_angle(lam0);
                let product = s.dot(l_inv.mul_vec(s)) * t.dot(l0.mul_vec(t));
                let closed =
                    0.125 * (3.0 - (2.0 * lam).cos()) * (3.0 + (2.0 * lam0).cos());
                assert!((product - closed).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn mixed_block_vanishes() {
        // W is additively separable in F and ∇d: the FD cross-derivative
        // along (s⊗T, d⊥⊗T) must vanish.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let p = sample_params(&mut rng);
            let state = sample_state(&mut rng);
            let s = Vec2::from_angle(rng.random_range(-3.2..3.2));
            let t = Vec2::from_angle(rng.random_range(-3.2..3.2));
            let h = 1e-4;
            let w_at = |ef: f64, eg: f64| {
                let st = KinematicState::new(
                    state.f + ef * s.outer(t),
                    state.d,
                    state.gradd + eg * state.d.perp().outer(t),
                );
                energy_density(&st, &p).unwrap()
            };
            let cross =
                (w_at(h, h) - w_at(h, -h) - w_at(-h, h) + w_at(-h, -h)) / (4.0 * h * h);
            assert!(cross.abs() <= 1e-8, "cross term {cross:e}");
        }
    }

    #[test]
    fn rank_one_residual_zero_perturbation() {
        let p = MaterialParams::standard(0.7);
        let state = KinematicState::new(
            Mat2::new(1.2, 0.1, -0.05, 0.9),
            Vec2::from_angle(0.5),
            Vec2::from_angle(0.5).perp().outer(Vec2::new(0.3, -0.2)),
        );
        let r = rank_one_residual(&state, &p, Vec2::ZERO, 0.0, Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn rank_one_residual_pinned_value() {
        // Direct two-energy evaluation at F = I, d = D = (1,0), a = (0.3,0),
        // T = (1,0): P and M vanish at the base state, so the residual is
        // W(diag(1.3,1)) = ½(0.69 − 2·ln 1.3).
        let p = MaterialParams::standard(0.0);
        let state = KinematicState::reference(&p);
        let r = rank_one_residual(&state, &p, Vec2::new(0.3, 0.0), 0.0, Vec2::new(1.0, 0.0))
            .unwrap();
        assert!((r - 0.08263573553250914).abs() < 1e-13, "residual = {r:.17}");
    }

    #[test]
    fn rank_one_residual_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let mut checked = 0;
        while checked < 300 {
            let p = sample_params(&mut rng);
            let state = sample_state(&mut rng);
            let a = rng.random_range(0.0..0.4) * Vec2::from_angle(rng.random_range(-3.2..3.2));
            let b = rng.random_range(-1.0..1.0);
            let t = Vec2::from_angle(rng.random_range(-3.2..3.2));
            match rank_one_residual(&state, &p, a, b, t) {
                Ok(r) => {
                    assert!(r >= -1e-10, "rank-one residual {r:e}");
                    checked += 1;
                }
                // Perturbation pushed det(F + a⊗T) ≤ 0; admissibility is the
                // caller's job, so just resample.
                Err(MaterialError::NonPositiveJacobian { .. }) => continue,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn rank_one_expansion_matches_half_lh() {
        let p = MaterialParams::standard(0.9);
        let state = KinematicState::new(
            Mat2::new(1.15, 0.08, -0.03, 0.95),
            Vec2::from_angle(0.7),
            Vec2::from_angle(0.7).perp().outer(Vec2::new(0.3, -0.2)),
        );
        let s = Vec2::from_angle(1.1);
        let t = Vec2::from_angle(0.4);
        let q = 0.8;
        let half_lh = 0.5 * lh_quadratic_form(&state, &p, s, q, t).unwrap();
        let eps = 1e-3;
        let r = rank_one_residual(&state, &p, eps * s, eps * q, t).unwrap();
        let ratio = r / (eps * eps);
        assert!(
            (ratio - half_lh).abs() <= 1e-3 * half_lh.abs(),
            "residual/ε² = {ratio}, ½LH = {half_lh}"
        );
    }

    #[test]
    fn perturbed_jacobian_loss_is_reported() {
        let p = MaterialParams::standard(0.0);
        let state = KinematicState::reference(&p);
        // a⊗T with a = (-2, 0), T = (1, 0) makes F + a⊗T = diag(-1, 1).
        let r = rank_one_residual(&state, &p, Vec2::new(-2.0, 0.0), 0.0, Vec2::new(1.0, 0.0));
        assert!(matches!(r, Err(MaterialError::NonPositiveJacobian { .. })));
    }

    #[test]
    fn parameter_validation() {
        assert!(MaterialParams::standard(0.3).validate().is_ok());
        let bad = MaterialParams {
            mu: -1.0,
            ..MaterialParams::standard(0.0)
        };
        assert!(bad.validate().is_err());
        let skewed = MaterialParams {
            d_ref: Vec2::new(1.0, 1.0),
            ..MaterialParams::standard(0.0)
        };
        assert!(skewed.validate().is_err());
    }

    #[test]
    fn state_validation() {
        let p = MaterialParams::standard(0.0);
        assert!(KinematicState::reference(&p).validate().is_ok());
        let folded = KinematicState::new(Mat2::diag(-1.0, 1.0), p.d_ref, Mat2::ZERO);
        assert!(matches!(
            folded.validate(),
            Err(MaterialError::NonPositiveJacobian { .. })
        ));
        let stretched_d = KinematicState::new(Mat2::IDENTITY, Vec2::new(1.1, 0.0), Mat2::ZERO);
        assert!(stretched_d.validate().is_err());
    }
}
