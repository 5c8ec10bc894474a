//! Optimizers shared by the network trainer and the lattice solver.
//!
//! Both drivers operate on [`ParamLoss`] objectives over flat `f64`
//! parameter vectors and interpret objective errors positionally: a failure
//! at the *starting* point is fatal, while a failure at a *trial* point
//! (e.g. a step long enough to invert an element) is a rejection signal —
//! L-BFGS backtracks, Adam reverts and permanently halves its step size.
//! All accumulations are sequential, so a run is bitwise reproducible.

use crate::graddiff::{GradError, ParamLoss};
use std::collections::VecDeque;
use thiserror::Error;

/// Armijo sufficient-decrease constant.
const ARMIJO_C1: f64 = 1e-4;
/// Line-search backtracking factor.
const BACKTRACK_SHRINK: f64 = 0.5;
/// Curvature-pair acceptance floor: keep `(s, y)` only when
/// `s·y > CURVATURE_FLOOR·‖s‖‖y‖`.
const CURVATURE_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OptError {
    /// The objective could not be evaluated at the starting point — there
    /// is no admissible step to retreat to.
    #[error("objective failed at the starting point: {0}")]
    BadStart(#[from] GradError),
    /// Adam exhausted its budget of step-size halvings.
    #[error("optimization diverged at iteration {iter} after {backoffs} step-size reductions")]
    Diverged { iter: usize, backoffs: usize },
}

/// Why a minimization run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient test `‖g‖∞ ≤ gtol·(1 + |f|)` met.
    GradTol,
    /// Iteration budget exhausted.
    MaxIters,
    /// Line search could not find an acceptable step (typically at the
    /// limit of f64 resolution, or pressed against an admissibility
    /// boundary).
    LineSearchStalled,
    /// Accepted step became negligibly small.
    StepTol,
}

/// Outcome summary of one minimization run.
#[derive(Clone, Copy, Debug)]
pub struct MinimizeReport {
    /// Objective value at the final iterate.
    pub value: f64,
    /// Infinity norm of the gradient at the final iterate.
    pub grad_inf_norm: f64,
    /// Accepted iterations (L-BFGS) or completed epochs (Adam).
    pub iterations: usize,
    /// Whether the gradient test was met.
    pub converged: bool,
    pub stop: StopReason,
}

/// Limited-memory BFGS with Armijo backtracking.
#[derive(Clone, Copy, Debug)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iters: usize,
    /// Relative gradient tolerance: stop when `‖g‖∞ ≤ gtol·(1 + |f|)`.
    pub gtol: f64,
    /// Maximum backtracking halvings per line search.
    pub max_backtracks: usize,
    /// Stop when the accepted step satisfies
    /// `‖Δx‖∞ ≤ step_tol·(1 + ‖x‖∞)`.
    pub step_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 500,
            gtol: 1e-8,
            max_backtracks: 40,
            step_tol: 1e-14,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// One stored curvature pair.
struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Minimize `loss` starting from `x` (updated in place). `on_accept` is
/// called after every accepted step with `(iteration, value)`.
///
/// Accepted values are strictly decreasing (Armijo), so energy histories
/// recorded through `on_accept` are monotone by construction.
pub fn lbfgs<F>(
    loss: &mut dyn ParamLoss,
    x: &mut [f64],
    cfg: &LbfgsConfig,
    mut on_accept: F,
) -> Result<MinimizeReport, OptError>
where
    F: FnMut(usize, f64),
{
    let n = x.len();
    let (mut f, mut g) = eval_checked(loss, x)?;
    if n == 0 {
        return Ok(MinimizeReport {
            value: f,
            grad_inf_norm: 0.0,
            iterations: 0,
            converged: true,
            stop: StopReason::GradTol,
        });
    }

    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut alpha_scratch = vec![0.0; cfg.memory];

    loop {
        let gnorm = inf_norm(&g);
        if gnorm <= cfg.gtol * (1.0 + f.abs()) {
            return Ok(MinimizeReport {
                value: f,
                grad_inf_norm: gnorm,
                iterations,
                converged: true,
                stop: StopReason::GradTol,
            });
        }
        if iterations >= cfg.max_iters {
            return Ok(MinimizeReport {
                value: f,
                grad_inf_norm: gnorm,
                iterations,
                converged: false,
                stop: StopReason::MaxIters,
            });
        }

        // Two-loop recursion for the quasi-Newton direction.
        let mut dir = two_loop_direction(&g, &pairs, &mut alpha_scratch);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // Curvature information unusable; restart from steepest descent.
            pairs.clear();
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            slope = dot(&g, &dir);
        }

        // On the very first step (and after resets) scale the raw gradient
        // direction to unit infinity norm so the initial trial is O(1).
        let mut t = if pairs.is_empty() {
            let dnorm = inf_norm(&dir);
            if dnorm > 1.0 {
                1.0 / dnorm
            } else {
                1.0
            }
        } else {
            1.0
        };

        let mut trial = vec![0.0; n];
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] + t * dir[i];
            }
            match eval_value_checked(loss, &trial) {
                Ok(f_new) if f_new <= f + ARMIJO_C1 * t * slope => {
                    accepted = Some(f_new);
                    break;
                }
                // Insufficient decrease or inadmissible trial point: shrink.
                _ => t *= BACKTRACK_SHRINK,
            }
        }

        let Some(f_new) = accepted else {
            return Ok(MinimizeReport {
                value: f,
                grad_inf_norm: gnorm,
                iterations,
                converged: false,
                stop: StopReason::LineSearchStalled,
            });
        };

        let step_norm = t * inf_norm(&dir);
        let (_, g_new) = eval_checked(loss, &trial)?;
        let mut s = dir;
        for si in &mut s {
            *si *= t;
        }
        let mut y = g_new.clone();
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= gi;
        }
        let sy = dot(&s, &y);
        let s_norm = inf_norm(&s).max(f64::MIN_POSITIVE);
        let y_norm = inf_norm(&y).max(f64::MIN_POSITIVE);
        if sy > CURVATURE_FLOOR * s_norm * y_norm {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            let rho = 1.0 / sy;
            pairs.push_back(Pair { s, y, rho });
        }

        x.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        iterations += 1;
        on_accept(iterations, f);

        if step_norm <= cfg.step_tol * (1.0 + inf_norm(x)) {
            let gnorm = inf_norm(&g);
            return Ok(MinimizeReport {
                value: f,
                grad_inf_norm: gnorm,
                iterations,
                converged: gnorm <= cfg.gtol * (1.0 + f.abs()),
                stop: StopReason::StepTol,
            });
        }
    }
}

fn two_loop_direction(g: &[f64], pairs: &VecDeque<Pair>, alpha: &mut [f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    for (k, pair) in pairs.iter().enumerate().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        alpha[k] = a;
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
    }
    if let Some(last) = pairs.back() {
        let yy = dot(&last.y, &last.y);
        if yy > 0.0 {
            let gamma = dot(&last.s, &last.y) / yy;
            for qi in &mut q {
                *qi *= gamma;
            }
        }
    }
    for (k, pair) in pairs.iter().enumerate() {
        let b = pair.rho * dot(&pair.y, &q);
        let a = alpha[k];
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (a - b) * si;
        }
    }
    for qi in &mut q {
        *qi = -*qi;
    }
    q
}

fn eval_checked(loss: &mut dyn ParamLoss, x: &[f64]) -> Result<(f64, Vec<f64>), OptError> {
    let (f, g) = loss.value_and_grad(x)?;
    if !f.is_finite() {
        return Err(OptError::BadStart(GradError::NonFiniteLoss { value: f }));
    }
    if let Some(&bad) = g.iter().find(|v| !v.is_finite()) {
        return Err(OptError::BadStart(GradError::NonFiniteLoss { value: bad }));
    }
    Ok((f, g))
}

/// Value-only evaluation used for trial points; any error or non-finite
/// value is reported as `Err` so the caller can treat it as a rejection.
fn eval_value_checked(loss: &mut dyn ParamLoss, x: &[f64]) -> Result<f64, GradError> {
    let f = loss.value(x)?;
    if !f.is_finite() {
        return Err(GradError::NonFiniteLoss { value: f });
    }
    Ok(f)
}

/// Adam with a permanent step-halving backoff.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Cumulative step-halving budget; exceeding it aborts with
    /// [`OptError::Diverged`].
    pub max_backoffs: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_backoffs: 30,
        }
    }
}

/// Run `epochs` Adam steps on `loss` starting from `x` (updated in place).
/// `on_epoch` receives `(epoch, value)` with the objective value *before*
/// that epoch's update, so epoch 0 logs the initial loss.
///
/// Each epoch's update is validated by the next evaluation: if the step
/// lands on an inadmissible or non-finite point, the step is reverted, the
/// learning rate is halved permanently, and the update is recomputed from
/// the same gradient moments.
pub fn adam<F>(
    loss: &mut dyn ParamLoss,
    x: &mut [f64],
    cfg: &AdamConfig,
    epochs: usize,
    mut on_epoch: F,
) -> Result<MinimizeReport, OptError>
where
    F: FnMut(usize, f64),
{
    let n = x.len();
    let (mut f, mut g) = eval_checked(loss, x)?;
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut lr = cfg.learning_rate;
    let mut backoffs = 0usize;
    let mut trial = vec![0.0; n];

    for epoch in 0..epochs {
        on_epoch(epoch, f);

        // Moment update depends only on the gradient, not the step size, so
        // a backoff can re-derive the step from the same moments.
        let t = epoch as i32 + 1;
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        }
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);

        loop {
            for i in 0..n {
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                trial[i] = x[i] - lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
            match loss.value_and_grad(&trial) {
                Ok((f_new, g_new))
                    if f_new.is_finite() && g_new.iter().all(|v| v.is_finite()) =>
                {
                    x.copy_from_slice(&trial);
                    f = f_new;
                    g = g_new;
                    break;
                }
                _ => {
                    backoffs += 1;
                    if backoffs > cfg.max_backoffs {
                        return Err(OptError::Diverged {
                            iter: epoch,
                            backoffs,
                        });
                    }
                    lr *= 0.5;
                }
            }
        }
    }

    let gnorm = inf_norm(&g);
    Ok(MinimizeReport {
        value: f,
        grad_inf_norm: gnorm,
        iterations: epochs,
        converged: false,
        stop: StopReason::MaxIters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Convex quadratic ½xᵀAx − bᵀx with a fixed SPD tridiagonal A.
    struct Quadratic {
        n: usize,
        b: Vec<f64>,
    }

    impl Quadratic {
        fn new(n: usize) -> Self {
            Quadratic {
                n,
                b: (0..n).map(|i| ((i % 7) as f64 - 3.0) * 0.25).collect(),
            }
        }
        fn apply_a(&self, x: &[f64]) -> Vec<f64> {
            let mut ax = vec![0.0; self.n];
            for i in 0..self.n {
                ax[i] = 4.0 * x[i];
                if i > 0 {
                    ax[i] += x[i - 1];
                }
                if i + 1 < self.n {
                    ax[i] += x[i + 1];
                }
            }
            ax
        }
    }

    impl ParamLoss for Quadratic {
        fn dim(&self) -> usize {
            self.n
        }
        fn value(&mut self, x: &[f64]) -> Result<f64, GradError> {
            let ax = self.apply_a(x);
            Ok(0.5 * dot(x, &ax) - dot(&self.b, x))
        }
        fn value_and_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), GradError> {
            let ax = self.apply_a(x);
            let f = 0.5 * dot(x, &ax) - dot(&self.b, x);
            let g = ax.iter().zip(&self.b).map(|(a, b)| a - b).collect();
            Ok((f, g))
        }
    }

    struct Rosenbrock;

    impl ParamLoss for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value(&mut self, x: &[f64]) -> Result<f64, GradError> {
            let (a, b) = (x[0], x[1]);
            Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        }
        fn value_and_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), GradError> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Ok((f, g))
        }
    }

    #[test]
    fn lbfgs_solves_a_convex_quadratic_to_gradient_tolerance() {
        let mut loss = Quadratic::new(50);
        let mut x = vec![1.0; 50];
        let report = lbfgs(&mut loss, &mut x, &LbfgsConfig::default(), |_, _| {}).unwrap();
        assert!(report.converged, "stopped with {:?}", report.stop);
        assert!(report.grad_inf_norm <= 1e-8 * (1.0 + report.value.abs()));
        // Residual check against the linear system Ax = b.
        let ax = loss.apply_a(&x);
        let res: f64 = ax
            .iter()
            .zip(&loss.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-7, "residual {res}");
    }

    #[test]
    fn lbfgs_descends_rosenbrock_to_the_global_minimum() {
        let mut x = vec![-1.2, 1.0];
        let report = lbfgs(
            &mut Rosenbrock,
            &mut x,
            &LbfgsConfig {
                max_iters: 500,
                gtol: 1e-10,
                ..LbfgsConfig::default()
            },
            |_, _| {},
        )
        .unwrap();
        assert!(report.value <= 1e-12, "value {}", report.value);
        assert!((x[0] - 1.0).abs() <= 1e-5 && (x[1] - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn lbfgs_accepted_values_are_strictly_decreasing() {
        let mut history = Vec::new();
        let mut x = vec![-1.2, 1.0];
        lbfgs(&mut Rosenbrock, &mut x, &LbfgsConfig::default(), |it, f| {
            history.push((it, f))
        })
        .unwrap();
        assert!(history.len() > 5);
        for pair in history.windows(2) {
            assert!(pair[1].1 < pair[0].1, "history not monotone: {pair:?}");
        }
    }

    #[test]
    fn lbfgs_at_a_minimum_returns_immediately() {
        let mut loss = Quadratic::new(8);
        // Solve first, then restart from the solution.
        let mut x = vec![0.0; 8];
        lbfgs(&mut loss, &mut x, &LbfgsConfig::default(), |_, _| {}).unwrap();
        let mut calls = 0;
        let report = lbfgs(&mut loss, &mut x, &LbfgsConfig::default(), |_, _| calls += 1).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(calls, 0);
        assert!(report.converged);
    }

    /// Objective with an admissibility wall: errors outside the ball
    /// ‖x‖² < r², minimum pushed against the wall.
    struct Walled {
        r2: f64,
    }

    impl ParamLoss for Walled {
        fn dim(&self) -> usize {
            2
        }
        fn value(&mut self, x: &[f64]) -> Result<f64, GradError> {
            let n2 = x[0] * x[0] + x[1] * x[1];
            if n2 >= self.r2 {
                return Err(GradError::NonFiniteLoss { value: f64::NAN });
            }
            Ok(-x[0])
        }
        fn value_and_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), GradError> {
            let f = self.value(x)?;
            Ok((f, vec![-1.0, 0.0]))
        }
    }

    #[test]
    fn lbfgs_treats_inadmissible_trials_as_backtracks() {
        let mut loss = Walled { r2: 1.0 };
        let mut x = vec![0.0, 0.0];
        let report = lbfgs(
            &mut loss,
            &mut x,
            &LbfgsConfig {
                max_iters: 200,
                ..LbfgsConfig::default()
            },
            |_, _| {},
        )
        .unwrap();
        // Must stop against the wall without ever committing an
        // inadmissible iterate.
        assert!(x[0] * x[0] + x[1] * x[1] < 1.0);
        assert!(x[0] > 0.9, "made no progress toward the wall: {x:?}");
        assert!(matches!(
            report.stop,
            StopReason::LineSearchStalled | StopReason::StepTol | StopReason::MaxIters
        ));
    }

    #[test]
    fn bad_starting_point_is_a_hard_error() {
        let mut loss = Walled { r2: 1.0 };
        let mut x = vec![2.0, 0.0];
        assert!(matches!(
            lbfgs(&mut loss, &mut x, &LbfgsConfig::default(), |_, _| {}),
            Err(OptError::BadStart(_))
        ));
        assert!(matches!(
            adam(&mut loss, &mut x, &AdamConfig::default(), 5, |_, _| {}),
            Err(OptError::BadStart(_))
        ));
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut loss = Quadratic::new(20);
        let mut x = vec![1.0; 20];
        let f0 = loss.value(&x).unwrap();
        let report = adam(
            &mut loss,
            &mut x,
            &AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
            400,
            |_, _| {},
        )
        .unwrap();
        assert!(report.value < f0 - 0.5, "insufficient descent: {report:?}");
    }

    #[test]
    fn adam_epoch_zero_logs_the_initial_loss() {
        let mut loss = Quadratic::new(4);
        let mut x = vec![0.3; 4];
        let f0 = loss.value(&x).unwrap();
        let mut first = None;
        adam(&mut loss, &mut x, &AdamConfig::default(), 3, |e, f| {
            if e == 0 {
                first = Some(f);
            }
        })
        .unwrap();
        assert_eq!(first, Some(f0));
    }

    #[test]
    fn adam_backs_off_when_a_step_is_inadmissible_and_still_progresses() {
        // Steep slope toward the wall: the default step overshoots by two
        // orders of magnitude, so the driver must halve its way down before
        // any progress is possible. Few epochs — pressing against the wall
        // forever would exhaust the backoff budget by design.
        let mut loss = Walled { r2: 0.01 };
        let mut x = vec![0.0, 0.0];
        let report = adam(
            &mut loss,
            &mut x,
            &AdamConfig {
                learning_rate: 10.0,
                ..AdamConfig::default()
            },
            5,
            |_, _| {},
        )
        .unwrap();
        assert!(x[0] * x[0] + x[1] * x[1] < 0.01);
        assert!(x[0] > 0.05, "no progress after backoff: {x:?}");
        assert!(report.value < 0.0);
    }

    #[test]
    fn adam_reports_divergence_when_no_step_size_works() {
        /// Admissible only exactly at the origin — every step fails.
        struct Origin;
        impl ParamLoss for Origin {
            fn dim(&self) -> usize {
                1
            }
            fn value(&mut self, x: &[f64]) -> Result<f64, GradError> {
                if x[0] != 0.0 {
                    return Err(GradError::NonFiniteLoss { value: f64::NAN });
                }
                Ok(0.0)
            }
            fn value_and_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), GradError> {
                let f = self.value(x)?;
                Ok((f, vec![1.0]))
            }
        }
        let mut x = vec![0.0];
        let err = adam(&mut Origin, &mut x, &AdamConfig::default(), 10, |_, _| {}).unwrap_err();
        match err {
            OptError::Diverged { backoffs, .. } => assert_eq!(backoffs, 31),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn lbfgs_is_bitwise_deterministic() {
        let run = || {
            let mut loss = Quadratic::new(30);
            let mut x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.1).sin()).collect();
            lbfgs(&mut loss, &mut x, &LbfgsConfig::default(), |_, _| {}).unwrap();
            x
        };
        let a = run();
        let b = run();
        let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
}
