//! The inexact non-interior continuation solver.
//!
//! The driver tracks approximate solutions of the smoothed system
//! `H_μ(w) = 0` while it forces `μ → 0`, never requiring iterates to be
//! feasible (non-interior) and never solving a Newton system exactly
//! (inexact).  Each outer iteration runs five steps:
//!
//! ```text
//!   1. centering:   solve  DH_μ(w) Δw̃ = −H_μ(w)   to rel. tol. θ₁
//!   2. line search: λ ∈ {1, α₁, α₁², …}  until  Ψ_μ(w + λΔw̃) ≤ (1 − σλ)Ψ_μ(w)
//!   3. μ reduction: γ = max{1, α₂, α₂², …}  with  w̃ ∈ 𝒩(β, (1 − γ)μ);  μ̃ = (1 − γ)μ
//!   4. Newton:      solve  DH_μ(w) Δŵ = −H₀(w)    to rel. tol. θ₂;  ŵ = w + Δŵ
//!   5. accept:      ŵ ∈ 𝒩(β, μ̃) ?  take ŵ and shrink μ̃ further by the η-search
//!                                  :  fall back to the centering pair (w̃, μ̃)
//! ```
//!
//! Step 5 is where the local rate comes from: near a solution with a
//! differentiable projection, the full approximate-Newton step ŵ lands so
//! deep inside the neighborhood that the η-search collapses μ quadratically
//! (with `theta2 = quadratic`), while steps 1–3 alone still guarantee global
//! linear progress.  The contraction budget `σ + √2·θ₁ < 1` is what makes the
//! line search provably terminate, and is enforced at configuration time.
//!
//! Everything the convergence statements quantify over — merit values,
//! neighborhood membership, the two linear-solve residual contracts, step
//! norms — is recorded per iteration in [`IterateState`], so the claims can
//! be re-checked after the fact ([`audit_trace`]) or exported
//! ([`write_trace_csv`]).  [`estimate_order`] fits the empirical convergence
//! order from the iterate errors.

use nalgebra::DVector;
use thiserror::Error;

use crate::linsolve::{solve_dense, solve_inexact};
use crate::space::{thin_svd, AmbientPoint, PairPoint};
use crate::vi::{
    dh_matrix, smoothed_residual, smoothed_residual_warm, DhOperator, Residuals, ViError, ViProblem,
};

/// Configuration diagnostics; the CLI maps these to its "invalid config"
/// exit code.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A scalar parameter is outside its admissible range.
    #[error("{name} = {value} must lie in {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    /// `sigma + sqrt(2)·theta1` must stay below 1 for the line search to
    /// terminate.
    #[error("sigma + sqrt(2)*theta1 = {value:.4} must be < 1")]
    ContractionBudget { value: f64 },
    /// An explicit `beta` must exceed `sqrt(theta)` of the problem's set.
    #[error("beta = {beta} must exceed sqrt(theta) = {sqrt_theta:.4}")]
    BetaTooSmall { beta: f64, sqrt_theta: f64 },
    /// An explicit starting pair must satisfy `Ψ_{μ₀}(w₀) ≤ β μ₀`.
    #[error("starting point outside the neighborhood: merit {merit:.3e} > beta*mu0 = {bound:.3e}")]
    StartOutsideNeighborhood { merit: f64, bound: f64 },
}

/// Failures that prevent the solver from running at all; algorithmic
/// breakdowns (line search, linear solves) are reported through
/// [`SolverStatus`] instead.
#[derive(Debug, Error)]
pub enum SolverError {
    /// The configuration violates a stated invariant.
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    /// A residual evaluation failed irrecoverably.
    #[error("problem evaluation failed: {0}")]
    Evaluation(#[from] ViError),
}

/// Tolerance schedule for the approximate Newton step (step 4).  The local
/// convergence order follows the schedule: `Quadratic` realizes
/// `‖r₂‖ = O(‖H₀‖²)` and with it second-order terminal convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta2Mode {
    /// Fixed relative tolerance.
    Constant(f64),
    /// `min(0.5, √‖H₀(w)‖)`.
    Superlinear,
    /// `min(0.5, ‖H₀(w)‖)`.
    Quadratic,
}

/// Solver parameters.  `Default` satisfies every stated constraint with
/// margin; all fields are overridable.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sufficient-decrease fraction of the centering line search, in (0, 1).
    pub sigma: f64,
    /// Line-search backtracking ratio, in (0, 1).
    pub alpha1: f64,
    /// Ratio of the γ-search (centering μ reduction), in (0, 1).
    pub alpha2: f64,
    /// Ratio of the η-search (Newton μ reduction), in (0, 1).
    pub alpha3: f64,
    /// Initial smoothing parameter, > 0.
    pub mu0: f64,
    /// Neighborhood radius; `None` selects `1.05·max(√ϑ, Ψ_{μ₀}(w₀)/μ₀)`.
    pub beta: Option<f64>,
    /// Relative tolerance of the centering solves (constant schedule).
    pub theta1: f64,
    /// Tolerance schedule of the approximate Newton solves.
    pub theta2: Theta2Mode,
    /// Termination threshold on `‖H₀(w)‖`; `None` selects
    /// `1e-9·(1 + ‖F(x₀)‖)`.
    pub tol_h0: Option<f64>,
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Iteration cap per inexact linear solve.
    pub lin_max_iter: usize,
    /// Starting pair; `None` selects the set's canonical interior point with
    /// `y₀ = F(x₀)`.
    pub w0: Option<PairPoint>,
    /// Assemble the dense Jacobian at every iterate and record `‖DH_μ⁻¹‖`
    /// (small instances only); feeds `SolveReport::inverse_norm_max`.
    pub track_inverse_norm: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sigma: 0.25,
            alpha1: 0.5,
            alpha2: 0.5,
            alpha3: 0.5,
            mu0: 1.0,
            beta: None,
            theta1: 0.2,
            theta2: Theta2Mode::Quadratic,
            tol_h0: None,
            max_outer: 200,
            lin_max_iter: 500,
            w0: None,
            track_inverse_norm: false,
        }
    }
}

impl SolverConfig {
    /// Checks every range constraint and the contraction budget
    /// `σ + √2·θ₁ < 1`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let open_unit = [
            ("sigma", self.sigma),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("theta1", self.theta1),
        ];
        for (name, value) in open_unit {
            if !(value > 0.0 && value < 1.0) {
                return Err(ConfigError::OutOfRange { name, value, range: "(0, 1)" });
            }
        }
        if let Theta2Mode::Constant(c) = self.theta2 {
            if !(c > 0.0 && c < 1.0) {
                return Err(ConfigError::OutOfRange { name: "theta2", value: c, range: "(0, 1)" });
            }
        }
        if !(self.mu0 > 0.0) {
            return Err(ConfigError::OutOfRange { name: "mu0", value: self.mu0, range: "(0, inf)" });
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(ConfigError::OutOfRange { name: "beta", value: b, range: "(0, inf)" });
            }
        }
        if let Some(t) = self.tol_h0 {
            if !(t > 0.0) {
                return Err(ConfigError::OutOfRange { name: "tol_h0", value: t, range: "(0, inf)" });
            }
        }
        let budget = self.sigma + std::f64::consts::SQRT_2 * self.theta1;
        if budget >= 1.0 {
            return Err(ConfigError::ContractionBudget { value: budget });
        }
        Ok(())
    }
}

/// Which transition an iteration row records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// The centering pair `(w̃, μ̃)` was accepted.
    Centering,
    /// The approximate Newton point `ŵ` was accepted with `μ = η μ̃`.
    NewtonAccepted,
    /// Terminal row: the state at which the solver stopped.
    Terminated,
}

impl std::fmt::Display for StepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepKind::Centering => "centering",
            StepKind::NewtonAccepted => "newton_accepted",
            StepKind::Terminated => "terminated",
        })
    }
}

/// One row of the solve trace: the state at iteration `k` plus the step
/// taken from it.  Step fields are zero where a quantity does not apply
/// (e.g. `eta` on centering rows, everything on terminal rows).
#[derive(Debug, Clone)]
pub struct IterateState {
    /// Outer iteration index.
    pub k: usize,
    /// The iterate `w⁽ᵏ⁾`.
    pub w: PairPoint,
    /// Smoothing parameter `μ_k`.
    pub mu: f64,
    /// `Ψ_{μ_k}(w⁽ᵏ⁾)`.
    pub merit: f64,
    /// `‖H₀(w⁽ᵏ⁾)‖`.
    pub h0_norm: f64,
    /// Transition recorded by this row.
    pub step_kind: StepKind,
    /// Accepted line-search step length `λ_k` (0 when centering was skipped).
    pub lambda: f64,
    /// Accepted μ-reduction fraction `γ_k`.
    pub gamma: f64,
    /// Newton μ-reduction factor `η_k` (0 on centering rows).
    pub eta: f64,
    /// Krylov iterations spent by both linear solves.
    pub lin_iters: usize,
    /// Larger of the two achieved linear-solve residual norms.
    pub lin_residual: f64,
    /// Achieved centering residual `‖r₁‖` and its contract bound
    /// `θ₁‖H_μ(w)‖` (both 0 when centering was skipped).
    pub r1_norm: f64,
    /// See `r1_norm`.
    pub r1_bound: f64,
    /// Achieved Newton residual `‖r₂‖` and its contract bound `θ₂‖H₀(w)‖`.
    pub r2_norm: f64,
    /// See `r2_norm`.
    pub r2_bound: f64,
    /// `‖Δw̃‖` — centering direction norm.
    pub dwt_norm: f64,
    /// `‖Δŵ‖` — approximate Newton direction norm.
    pub dwh_norm: f64,
    /// `‖DH_μ(w)⁻¹‖` when inverse tracking is enabled, else 0.
    pub inv_norm: f64,
}

/// Terminal classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// `‖H₀‖` reached the tolerance.
    Solved,
    /// The outer iteration cap was exhausted.
    MaxIterations,
    /// The centering line search (or a μ-reduction search) could not make
    /// representable progress.
    LineSearchFailed,
    /// A Newton system could not be solved to its contract, even after the
    /// retry and the dense fallback.
    LinearSolveFailed,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverStatus::Solved => "solved",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::LineSearchFailed => "line_search_failed",
            SolverStatus::LinearSolveFailed => "linear_solve_failed",
        })
    }
}

/// Everything a solve produced.  The solution is reported as the pair
/// `(x, y)`; callers wanting only the primal point read `solution.x`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Terminal classification.
    pub status: SolverStatus,
    /// Per-iteration rows plus one terminal row.
    pub trace: Vec<IterateState>,
    /// Final iterate pair.
    pub solution: PairPoint,
    /// Empirical convergence order from the trace (`None` when too few
    /// usable error points exist).
    pub order_estimate: Option<f64>,
    /// `max_k ‖DH_{μ_k}(w_k)⁻¹‖` when tracking was enabled.
    pub inverse_norm_max: Option<f64>,
    /// Neighborhood radius actually used.
    pub beta: f64,
    /// Termination threshold actually used.
    pub tol_h0: f64,
}

/// Chooses the canonical starting pair and the automatic neighborhood
/// radius: `x₀` the set's canonical interior point, `y₀ = F(x₀)`, and
/// `β = 1.05·max(√ϑ, Ψ_{μ₀}(w₀)/μ₀)` — which forces `w₀ ∈ 𝒩(β, μ₀)`.
pub fn auto_initialize(problem: &ViProblem, mu0: f64) -> Result<(PairPoint, f64), ViError> {
    assert!(mu0 > 0.0, "mu0 must be positive");
    let x0 = problem.set.canonical_interior();
    let y0 = problem.map.eval(&x0);
    let w0 = PairPoint::new(x0, y0);
    let merit = smoothed_residual(problem, &w0, mu0)?.merit;
    let beta = 1.05 * problem.set.theta().sqrt().max(merit / mu0);
    Ok((w0, beta))
}

struct Direction {
    step: PairPoint,
    residual_norm: f64,
    iterations: usize,
}

enum IterStep {
    Accepted { row: IterateState, next_w: PairPoint, next_mu: f64 },
    Finished { row: IterateState, status: SolverStatus, w: PairPoint, mu: f64 },
}

struct Engine<'a> {
    problem: &'a ViProblem,
    config: &'a SolverConfig,
    beta: f64,
    tol_h0: f64,
}

impl Engine<'_> {
    fn terminated_row(&self, k: usize, w: &PairPoint, mu: f64, res: &Residuals) -> IterateState {
        IterateState {
            k,
            w: w.clone(),
            mu,
            merit: res.merit,
            h0_norm: res.h0_norm,
            step_kind: StepKind::Terminated,
            lambda: 0.0,
            gamma: 0.0,
            eta: 0.0,
            lin_iters: 0,
            lin_residual: 0.0,
            r1_norm: 0.0,
            r1_bound: 0.0,
            r2_norm: 0.0,
            r2_bound: 0.0,
            dwt_norm: 0.0,
            dwh_norm: 0.0,
            inv_norm: 0.0,
        }
    }

    /// Inexact solve of `DH_μ(w)·step = rhs` with the escalation policy:
    /// one retry at half the tolerance, then a dense direct solve for
    /// dimensions up to 200, then give up.
    fn direction(
        &self,
        w: &PairPoint,
        mu: f64,
        op: &DhOperator,
        rhs: &PairPoint,
        rel_tol: f64,
    ) -> Option<Direction> {
        let first = solve_inexact(op, rhs, rel_tol, self.config.lin_max_iter);
        if first.converged {
            return Some(Direction {
                step: first.solution,
                residual_norm: first.residual_norm,
                iterations: first.iterations,
            });
        }
        let mut iterations = first.iterations;
        let retry = solve_inexact(op, rhs, rel_tol / 2.0, self.config.lin_max_iter);
        iterations += retry.iterations;
        if retry.converged {
            return Some(Direction { step: retry.solution, residual_norm: retry.residual_norm, iterations });
        }
        if op.dim() <= 200 {
            let dense = dh_matrix(self.problem, w, mu).ok()?;
            let flat = solve_dense(&dense, &rhs.to_flat()).ok()?;
            let step = w.from_flat_like(&flat);
            let residual_norm = rhs.sub(&op.apply(&step)).norm();
            if residual_norm <= rel_tol * rhs.norm() {
                return Some(Direction { step, residual_norm, iterations });
            }
        }
        None
    }

    fn inverse_norm(&self, w: &PairPoint, mu: f64) -> f64 {
        if !self.config.track_inverse_norm || 2 * self.problem.set.dim() > 200 {
            return 0.0;
        }
        let dense = match dh_matrix(self.problem, w, mu) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        match thin_svd(&dense) {
            Ok(f) => {
                let sigma_min = f.sigma.min();
                if sigma_min > 0.0 { 1.0 / sigma_min } else { f64::INFINITY }
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn iterate(
        &self,
        k: usize,
        w: &PairPoint,
        mu: f64,
        warm: &mut Option<AmbientPoint>,
    ) -> Result<IterStep, SolverError> {
        let problem = self.problem;
        let cfg = self.config;
        let (res, p) = smoothed_residual_warm(problem, w, mu, warm.as_ref())?;
        *warm = Some(p.clone());

        if res.h0_norm <= self.tol_h0 {
            return Ok(IterStep::Finished {
                row: self.terminated_row(k, w, mu, &res),
                status: SolverStatus::Solved,
                w: w.clone(),
                mu,
            });
        }

        let op = DhOperator::new(problem, w, mu)?;
        let inv_norm = self.inverse_norm(w, mu);

        // Step 1 + 2: centering direction and line search.  Skipped when the
        // iterate is already (numerically) centered.
        let mut lambda = 0.0;
        let mut lin_iters = 0usize;
        let (mut r1_norm, mut r1_bound, mut dwt_norm) = (0.0, 0.0, 0.0);
        let (w_tilde, p_tilde) = if res.merit <= 1e-15 * (1.0 + w.norm()) {
            (w.clone(), p.clone())
        } else {
            let rhs1 = PairPoint::new(res.phi.scale(-1.0), res.fgap.scale(-1.0));
            r1_bound = cfg.theta1 * res.hmu_norm();
            let Some(dir) = self.direction(w, mu, &op, &rhs1, cfg.theta1) else {
                return Ok(IterStep::Finished {
                    row: self.terminated_row(k, w, mu, &res),
                    status: SolverStatus::LinearSolveFailed,
                    w: w.clone(),
                    mu,
                });
            };
            lin_iters += dir.iterations;
            r1_norm = dir.residual_norm;
            dwt_norm = dir.step.norm();

            let mut lam = 1.0;
            let mut hit = None;
            for _ in 0..60 {
                let trial = w.axpy(lam, &dir.step);
                if let Ok((rt, pt)) = smoothed_residual_warm(problem, &trial, mu, warm.as_ref()) {
                    if rt.merit <= (1.0 - cfg.sigma * lam) * res.merit {
                        hit = Some((trial, pt));
                        break;
                    }
                }
                lam *= cfg.alpha1;
            }
            let Some((wt, pt)) = hit else {
                return Ok(IterStep::Finished {
                    row: self.terminated_row(k, w, mu, &res),
                    status: SolverStatus::LineSearchFailed,
                    w: w.clone(),
                    mu,
                });
            };
            lambda = lam;
            *warm = Some(pt.clone());
            (wt, pt)
        };

        // Step 3: γ-search.  γ = 1 means the centering pair already solves
        // the unsmoothed problem.
        let res0_tilde = smoothed_residual(problem, &w_tilde, 0.0)?;
        if res0_tilde.merit <= self.tol_h0 {
            return Ok(IterStep::Finished {
                row: self.terminated_row(k, &w_tilde, 0.0, &res0_tilde),
                status: SolverStatus::Solved,
                w: w_tilde,
                mu: 0.0,
            });
        }
        let mut gamma = cfg.alpha2;
        let mut mu_tilde;
        let mut probes = 0usize;
        loop {
            mu_tilde = (1.0 - gamma) * mu;
            if mu_tilde >= mu {
                // γ shrank below floating-point resolution: the centering
                // step cannot buy any representable μ decrease.
                return Ok(IterStep::Finished {
                    row: self.terminated_row(k, w, mu, &res),
                    status: SolverStatus::LineSearchFailed,
                    w: w.clone(),
                    mu,
                });
            }
            let inside = matches!(
                smoothed_residual_warm(problem, &w_tilde, mu_tilde, Some(&p_tilde)),
                Ok((r, _)) if r.merit <= self.beta * mu_tilde
            );
            if inside {
                break;
            }
            gamma *= cfg.alpha2;
            probes += 1;
            if probes >= 2000 {
                return Ok(IterStep::Finished {
                    row: self.terminated_row(k, w, mu, &res),
                    status: SolverStatus::LineSearchFailed,
                    w: w.clone(),
                    mu,
                });
            }
        }

        // Step 4: approximate Newton step from w toward the μ = 0 system,
        // using the same Jacobian as the centering step.
        let theta2 = match cfg.theta2 {
            Theta2Mode::Constant(c) => c,
            Theta2Mode::Superlinear => res.h0_norm.sqrt().min(0.5),
            Theta2Mode::Quadratic => res.h0_norm.min(0.5),
        }
        .max(1e-14);
        let rhs2 = PairPoint::new(res.phi0.scale(-1.0), res.fgap.scale(-1.0));
        let r2_bound = theta2 * res.h0_norm;
        let Some(dir2) = self.direction(w, mu, &op, &rhs2, theta2) else {
            return Ok(IterStep::Finished {
                row: self.terminated_row(k, w, mu, &res),
                status: SolverStatus::LinearSolveFailed,
                w: w.clone(),
                mu,
            });
        };
        lin_iters += dir2.iterations;
        let r2_norm = dir2.residual_norm;
        let dwh_norm = dir2.step.norm();
        let w_hat = w.axpy(1.0, &dir2.step);

        // Step 5: accept ŵ when it stayed in the shrunken neighborhood, and
        // pay out the extra μ decrease it affords via the η-search.
        let mut eta = 0.0;
        let (next_w, next_mu, step_kind) = match smoothed_residual_warm(problem, &w_hat, mu_tilde, Some(&p_tilde)) {
            Ok((rh, ph)) if rh.merit <= self.beta * mu_tilde => {
                if rh.h0_norm <= self.tol_h0 {
                    return Ok(IterStep::Finished {
                        row: self.terminated_row(k, &w_hat, mu_tilde, &rh),
                        status: SolverStatus::Solved,
                        w: w_hat,
                        mu: mu_tilde,
                    });
                }
                eta = 1.0;
                let mut reps = 0usize;
                loop {
                    let trial_mu = eta * cfg.alpha3 * mu_tilde;
                    if trial_mu < 1e-300 {
                        break;
                    }
                    let inside = matches!(
                        smoothed_residual_warm(problem, &w_hat, trial_mu, Some(&ph)),
                        Ok((r, _)) if r.merit <= self.beta * trial_mu
                    );
                    if !inside {
                        break;
                    }
                    eta *= cfg.alpha3;
                    reps += 1;
                    if reps >= 2000 {
                        break;
                    }
                }
                *warm = Some(ph);
                (w_hat, eta * mu_tilde, StepKind::NewtonAccepted)
            }
            _ => {
                *warm = Some(p_tilde.clone());
                (w_tilde, mu_tilde, StepKind::Centering)
            }
        };

        let row = IterateState {
            k,
            w: w.clone(),
            mu,
            merit: res.merit,
            h0_norm: res.h0_norm,
            step_kind,
            lambda,
            gamma,
            eta,
            lin_iters,
            lin_residual: r1_norm.max(r2_norm),
            r1_norm,
            r1_bound,
            r2_norm,
            r2_bound,
            dwt_norm,
            dwh_norm,
            inv_norm,
        };
        eprintln!(
            "ROW k={k} mu={mu:.3e} merit={:.3e} h0={:.3e} kind={step_kind} lam={lambda:.2e} gam={gamma:.2e} eta={eta:.2e} |w|={:.3e} |next_w|={:.3e} next_mu={next_mu:.3e} dwt={dwt_norm:.2e} dwh={dwh_norm:.2e}",
            res.merit, res.h0_norm, w.norm(), next_w.norm()
        );
        Ok(IterStep::Accepted { row, next_w, next_mu })
    }
}

/// Runs the continuation method on `problem`.  Configuration and evaluation
/// failures come back as errors; algorithmic termination (including the
/// failure modes) is classified in `SolveReport::status`.
pub fn solve(problem: &ViProblem, config: &SolverConfig) -> Result<SolveReport, SolverError> {
    config.validate()?;
    let sqrt_theta = problem.set.theta().sqrt();
    let mu0 = config.mu0;

    let (w0, beta) = match (&config.w0, config.beta) {
        (Some(w), Some(b)) => (w.clone(), b),
        (Some(w), None) => {
            let merit = smoothed_residual(problem, w, mu0)?.merit;
            (w.clone(), 1.05 * sqrt_theta.max(merit / mu0))
        }
        (None, b) => {
            let (w0, auto_beta) = auto_initialize(problem, mu0)?;
            (w0, b.unwrap_or(auto_beta))
        }
    };
    if beta <= sqrt_theta {
        return Err(ConfigError::BetaTooSmall { beta, sqrt_theta }.into());
    }

    let start = smoothed_residual(problem, &w0, mu0)?;
    if start.merit > beta * mu0 {
        return Err(ConfigError::StartOutsideNeighborhood { merit: start.merit, bound: beta * mu0 }.into());
    }
    let tol_h0 = config
        .tol_h0
        .unwrap_or_else(|| 1e-9 * (1.0 + problem.map.eval(&w0.x).norm()));

    let engine = Engine { problem, config, beta, tol_h0 };
    let mut trace: Vec<IterateState> = Vec::new();
    let mut w = w0;
    let mut mu = mu0;
    let mut warm: Option<AmbientPoint> = None;
    let mut outcome: Option<(SolverStatus, PairPoint, f64)> = None;

    for k in 0..config.max_outer {
        match engine.iterate(k, &w, mu, &mut warm)? {
            IterStep::Accepted { row, next_w, next_mu } => {
                trace.push(row);
                w = next_w;
                mu = next_mu;
            }
            IterStep::Finished { row, status, w: wt, mu: mt } => {
                trace.push(row);
                outcome = Some((status, wt, mt));
                break;
            }
        }
    }
    let (status, solution) = match outcome {
        Some((status, wt, _)) => (status, wt),
        None => {
            let res = smoothed_residual_warm(problem, &w, mu, warm.as_ref())?.0;
            trace.push(engine.terminated_row(config.max_outer, &w, mu, &res));
            (SolverStatus::MaxIterations, w)
        }
    };

    let order_estimate = estimate_order(&trace, problem.known_solution.as_ref()).ok();
    let inverse_norm_max = if config.track_inverse_norm {
        trace
            .iter()
            .map(|r| r.inv_norm)
            .filter(|v| *v > 0.0)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    } else {
        None
    };

    Ok(SolveReport { status, trace, solution, order_estimate, inverse_norm_max, beta, tol_h0 })
}

/// Post-hoc scan of a solve trace against the stated per-iteration
/// guarantees: neighborhood membership `Ψ_{μ_k} ≤ β μ_k`, strictly
/// decreasing `μ`, and the two linear-solve residual contracts.  Returns one
/// human-readable line per violation (empty = clean).
///
/// Membership is re-checked with a `1e-9` relative cushion: merit values are
/// re-evaluated through warm-started implicit smoothing solves, whose
/// accepted-residual jitter can move a boundary-tight merit by parts in
/// `1e-12`.
pub fn audit_trace(report: &SolveReport) -> Vec<String> {
    let mut violations = Vec::new();
    let slack = 1.0 + 1e-9;
    for row in &report.trace {
        if row.step_kind != StepKind::Terminated && row.merit > report.beta * row.mu * slack {
            violations.push(format!(
                "row {}: merit {:.6e} outside neighborhood bound {:.6e}",
                row.k,
                row.merit,
                report.beta * row.mu
            ));
        }
        if row.r1_norm > row.r1_bound * slack {
            violations.push(format!(
                "row {}: centering residual {:.6e} above contract {:.6e}",
                row.k, row.r1_norm, row.r1_bound
            ));
        }
        if row.r2_norm > row.r2_bound * slack {
            violations.push(format!(
                "row {}: newton residual {:.6e} above contract {:.6e}",
                row.k, row.r2_norm, row.r2_bound
            ));
        }
    }
    for pair in report.trace.windows(2) {
        if pair[1].mu >= pair[0].mu {
            violations.push(format!(
                "row {}: mu did not decrease ({:.6e} -> {:.6e})",
                pair[1].k, pair[0].mu, pair[1].mu
            ));
        }
    }
    if report.status == SolverStatus::Solved {
        if let Some(last) = report.trace.last() {
            if last.h0_norm > report.tol_h0 {
                violations.push(format!(
                    "terminal h0 {:.6e} above tolerance {:.6e} despite Solved status",
                    last.h0_norm, report.tol_h0
                ));
            }
        }
    }
    violations
}

/// Writes the trace as CSV with the fixed column set
/// `k,mu,merit,h0_norm,step_kind,lambda,gamma,eta,lin_iters,lin_residual`.
pub fn write_trace_csv<W: std::io::Write>(trace: &[IterateState], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,mu,merit,h0_norm,step_kind,lambda,gamma,eta,lin_iters,lin_residual")?;
    for row in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{},{:e},{:e},{:e},{},{:e}",
            row.k,
            row.mu,
            row.merit,
            row.h0_norm,
            row.step_kind,
            row.lambda,
            row.gamma,
            row.eta,
            row.lin_iters,
            row.lin_residual
        )?;
    }
    Ok(())
}

/// [`estimate_order`] could not find enough usable error points.
#[derive(Debug, Error)]
#[error("fewer than 4 usable trailing error points in the trace")]
pub struct InsufficientData;

/// Empirical convergence order: with `e_k = ‖w_k − w*‖` (`w*` the supplied
/// solution, or the final iterate when absent), fits the least-squares slope
/// of `log e_{k+1}` against `log e_k` over the last usable window — the
/// trailing four iterates whose errors decrease strictly and sit above the
/// floating-point floor `1e-14`.  The window is deliberately short: it
/// isolates the terminal phase, which is where the order statements live;
/// folding in the global (linear) phase would bias every estimate toward 1.
/// An exactly q-order sequence returns q.
pub fn estimate_order(trace: &[IterateState], w_star: Option<&PairPoint>) -> Result<f64, InsufficientData> {
    let star = match w_star {
        Some(w) => w.clone(),
        None => trace.last().ok_or(InsufficientData)?.w.clone(),
    };
    let errs: Vec<f64> = trace
        .iter()
        .map(|r| r.w.sub(&star).norm())
        .filter(|e| *e > 1e-14)
        .collect();
    let mut start = errs.len().saturating_sub(1);
    while start > 0 && errs[start - 1] > errs[start] {
        start -= 1;
    }
    let decreasing = &errs[start..];
    if decreasing.len() < 4 {
        return Err(InsufficientData);
    }
    let suffix = &decreasing[decreasing.len() - 4..];
    let xs: Vec<f64> = suffix[..suffix.len() - 1].iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = suffix[1..].iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx == 0.0 {
        return Err(InsufficientData);
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::SmoothedSet;
    use crate::vi::{Monotonicity, ViMap};
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Affine {
        m: DMatrix<f64>,
        q: DVector<f64>,
        rho: f64,
    }

    impl ViMap for Affine {
        fn eval(&self, x: &AmbientPoint) -> AmbientPoint {
            x.from_flat_like(&(&self.m * x.to_flat() + &self.q))
        }
        fn jacobian_apply(&self, x: &AmbientPoint, u: &AmbientPoint) -> AmbientPoint {
            x.from_flat_like(&(&self.m * u.to_flat()))
        }
        fn is_affine(&self) -> bool {
            true
        }
        fn monotonicity(&self) -> Monotonicity {
            Monotonicity::Strongly(self.rho)
        }
    }

    /// Strongly monotone LCP with a planted strictly complementary solution:
    /// `M = A'A + I + skew`, positive `x*` on the first half, `y* = 1` on
    /// the rest, `q = y* − M x*`.
    fn planted_lcp(n: usize, seed: u64) -> ViProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let c = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let m = a.transpose() * &a + DMatrix::identity(n, n) + (&c - c.transpose());
        let xs = DVector::from_fn(n, |i, _| if i < n / 2 { 0.5 + 1.5 * rng.random::<f64>() } else { 0.0 });
        let ys = DVector::from_fn(n, |i, _| if i < n / 2 { 0.0 } else { 1.0 });
        let q = &ys - &m * &xs;
        let problem = ViProblem::new(
            format!("lcp-{n}"),
            SmoothedSet::orthant(n),
            Box::new(Affine { m, q, rho: 1.0 }),
        );
        problem.with_known_solution(PairPoint::new(
            AmbientPoint::vector(xs),
            AmbientPoint::vector(ys),
        ))
    }

    fn scalar_problem(m: f64, q: f64) -> ViProblem {
        ViProblem::new(
            "scalar",
            SmoothedSet::orthant(1),
            Box::new(Affine {
                m: DMatrix::from_element(1, 1, m),
                q: DVector::from_element(1, q),
                rho: m,
            }),
        )
    }

    #[test]
    fn config_validation_gates() {
        assert!(SolverConfig::default().validate().is_ok());

        let budget = SolverConfig { sigma: 0.9, ..Default::default() };
        assert!(matches!(budget.validate(), Err(ConfigError::ContractionBudget { .. })));

        let alpha = SolverConfig { alpha1: 1.0, ..Default::default() };
        assert!(matches!(alpha.validate(), Err(ConfigError::OutOfRange { name: "alpha1", .. })));

        let mu = SolverConfig { mu0: 0.0, ..Default::default() };
        assert!(matches!(mu.validate(), Err(ConfigError::OutOfRange { name: "mu0", .. })));

        let t2 = SolverConfig { theta2: Theta2Mode::Constant(1.5), ..Default::default() };
        assert!(matches!(t2.validate(), Err(ConfigError::OutOfRange { name: "theta2", .. })));
    }

    #[test]
    fn scalar_lcp_reaches_unit_solution() {
        let problem = scalar_problem(1.0, -1.0);
        let report = solve(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolverStatus::Solved);
        let x = report.solution.x.as_vector()[0];
        let y = report.solution.y.as_vector()[0];
        assert!((x - 1.0).abs() <= 1e-8, "x = {x}");
        assert!(y.abs() <= 1e-8, "y = {y}");
        assert!(audit_trace(&report).is_empty());
    }

    #[test]
    fn degenerate_scalar_lcp_reaches_exact_solution() {
        // x* = y* = 0 without strict complementarity.  The solution sits
        // exactly at the projector kink, so once the iterate's active piece
        // is resolved the (exactly solved, affine) Newton step lands on the
        // solution in finitely many iterations — the trace is too short for
        // an order fit.  The ≈ 1 degenerate order shows up on multi-
        // dimensional degenerate instances instead.
        let problem = scalar_problem(1.0, 0.0).with_known_solution(PairPoint::new(
            AmbientPoint::vector_from(&[0.0]),
            AmbientPoint::vector_from(&[0.0]),
        ));
        let report = solve(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolverStatus::Solved);
        assert!(report.solution.x.as_vector()[0].abs() <= 1e-12);
        assert!(report.solution.y.as_vector()[0].abs() <= 1e-12);
        match report.order_estimate {
            None => assert!(report.trace.len() <= 3, "finite termination expected"),
            Some(order) => assert!(order < 1.3, "degenerate order should be ~1, got {order:.3}"),
        }
    }

    #[test]
    fn planted_lcp_recovers_solution_quadratically() {
        let problem = planted_lcp(20, 62);
        let config = SolverConfig { track_inverse_norm: true, ..Default::default() };
        let report = solve(&problem, &config).unwrap();
        assert_eq!(report.status, SolverStatus::Solved);
        let err = report
            .solution
            .x
            .sub(&problem.known_solution.as_ref().unwrap().x)
            .norm();
        assert!(err <= 1e-6, "planted-solution error {err:.3e}");
        assert!(report.trace.len() <= 101);

        let order = report.order_estimate.expect("order should be estimable");
        assert!(order >= 1.7, "expected quadratic terminal order, got {order:.3}");

        // Eventual Newton acceptance: the trailing non-terminal rows.
        let non_terminal: Vec<_> = report
            .trace
            .iter()
            .filter(|r| r.step_kind != StepKind::Terminated)
            .collect();
        assert!(non_terminal.len() >= 3);
        assert!(
            non_terminal
                .iter()
                .rev()
                .take(3)
                .all(|r| r.step_kind == StepKind::NewtonAccepted),
            "trailing steps should be accepted Newton steps"
        );

        assert!(audit_trace(&report).is_empty(), "{:?}", audit_trace(&report));

        // Direction bounds and the bounded-inverse diagnostic.
        let inv_max = report.inverse_norm_max.expect("tracking enabled");
        assert!(inv_max.is_finite());
        let sqrt_theta = problem.set.theta().sqrt();
        let mut first_inv = None;
        for row in &report.trace {
            if row.step_kind == StepKind::Terminated {
                continue;
            }
            let inv = row.inv_norm;
            assert!(inv.is_finite() && inv > 0.0);
            first_inv.get_or_insert(inv);
            if row.r1_bound > 0.0 {
                let theta1 = 0.2;
                let bound = inv * (1.0 + theta1) * row.merit * (1.0 + 1e-9);
                assert!(row.dwt_norm <= bound, "row {}: centering direction {:.3e} > {:.3e}", row.k, row.dwt_norm, bound);
            }
            let theta2 = row.r2_bound / row.h0_norm;
            let bound = inv * (1.0 + theta2) * (report.beta + sqrt_theta) * row.mu * (1.0 + 1e-9);
            assert!(row.dwh_norm <= bound, "row {}: newton direction {:.3e} > {:.3e}", row.k, row.dwh_norm, bound);
        }
        assert!(inv_max <= 10.0 * first_inv.unwrap(), "inverse norm grew more than 10x");
    }

    #[test]
    fn constant_theta2_slows_terminal_order() {
        let problem = planted_lcp(20, 62);
        let config = SolverConfig { theta2: Theta2Mode::Constant(0.4), ..Default::default() };
        let report = solve(&problem, &config).unwrap();
        assert_eq!(report.status, SolverStatus::Solved);
        let order = report.order_estimate.expect("order should be estimable");
        assert!(order < 1.3, "constant theta2 should cap the order near 1, got {order:.3}");
    }

    #[test]
    fn box_constrained_vi_projects_onto_box() {
        // X = [0,1]^2, F(x) = x − (2, −1): the solution is the projection
        // (1, 0) of the anchor onto the box.
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_column_slice(&[0.0, 0.0, -1.0, -1.0]);
        let set = SmoothedSet::polyhedron(a, b).unwrap();
        let problem = ViProblem::new(
            "box-projection",
            set,
            Box::new(Affine {
                m: DMatrix::identity(2, 2),
                q: DVector::from_column_slice(&[-2.0, 1.0]),
                rho: 1.0,
            }),
        );
        let report = solve(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolverStatus::Solved);
        let x = report.solution.x.as_vector();
        assert!((x[0] - 1.0).abs() <= 1e-7 && x[1].abs() <= 1e-7, "x = ({}, {})", x[0], x[1]);
        assert!(audit_trace(&report).is_empty());
    }

    #[test]
    fn auto_initialize_matches_canonical_points() {
        let problem = scalar_problem(1.0, 0.0);
        let (w0, _) = auto_initialize(&problem, 1.0).unwrap();
        assert_eq!(w0.x.as_vector()[0], 1.0);
        assert_eq!(w0.y.as_vector()[0], 1.0);

        // Identity map on Orthant(2): x0 = (1,1), y0 = (1,1), z = 0, and
        // p_1(0) = (1,1) makes the merit vanish, so beta = 1.05·sqrt(2).
        let problem = ViProblem::new(
            "orthant-2",
            SmoothedSet::orthant(2),
            Box::new(Affine { m: DMatrix::identity(2, 2), q: DVector::zeros(2), rho: 1.0 }),
        );
        let (w0, beta) = auto_initialize(&problem, 1.0).unwrap();
        assert_eq!(w0.x.as_vector(), w0.y.as_vector());
        assert!((beta - 1.05 * 2f64.sqrt()).abs() < 1e-12);
        let member = crate::vi::in_neighborhood(&problem, &w0, beta, 1.0).unwrap();
        assert!(member);
    }

    #[test]
    fn max_outer_cap_reports_max_iterations() {
        let problem = planted_lcp(8, 63);
        let config = SolverConfig { max_outer: 3, ..Default::default() };
        let report = solve(&problem, &config).unwrap();
        assert_eq!(report.status, SolverStatus::MaxIterations);
        assert_eq!(report.trace.len(), 4);
        assert_eq!(report.trace.last().unwrap().step_kind, StepKind::Terminated);
        assert!(audit_trace(&report).is_empty());
    }

    #[test]
    fn order_estimator_on_synthetic_sequences() {
        let shape = PairPoint::new(AmbientPoint::vector_from(&[0.0]), AmbientPoint::vector_from(&[0.0]));
        let fake_trace = |errors: &[f64]| -> Vec<IterateState> {
            errors
                .iter()
                .enumerate()
                .map(|(k, e)| IterateState {
                    k,
                    w: PairPoint::new(
                        AmbientPoint::vector_from(&[*e]),
                        AmbientPoint::vector_from(&[0.0]),
                    ),
                    mu: 1.0 / (k + 1) as f64,
                    merit: *e,
                    h0_norm: *e,
                    step_kind: StepKind::NewtonAccepted,
                    lambda: 1.0,
                    gamma: 0.5,
                    eta: 0.5,
                    lin_iters: 1,
                    lin_residual: 0.0,
                    r1_norm: 0.0,
                    r1_bound: 0.0,
                    r2_norm: 0.0,
                    r2_bound: 0.0,
                    dwt_norm: 0.0,
                    dwh_norm: 0.0,
                    inv_norm: 0.0,
                })
                .collect()
        };

        let quad: Vec<f64> = (0..5).map(|k| 10f64.powi(-(1 << k))).collect();
        let order = estimate_order(&fake_trace(&quad), Some(&shape)).unwrap();
        assert!((order - 2.0).abs() <= 0.05, "quadratic sequence gave {order:.3}");

        let lin: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let order = estimate_order(&fake_trace(&lin), Some(&shape)).unwrap();
        assert!((order - 1.0).abs() <= 0.05, "linear sequence gave {order:.3}");

        let short: Vec<f64> = vec![1.0, 0.1, 0.01];
        assert!(estimate_order(&fake_trace(&short), Some(&shape)).is_err());
    }

    #[test]
    fn trace_csv_has_fixed_columns() {
        let problem = scalar_problem(1.0, -1.0);
        let report = solve(&problem, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&report.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,mu,merit,h0_norm,step_kind,lambda,gamma,eta,lin_iters,lin_residual"
        );
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), report.trace.len());
        for line in body {
            assert_eq!(line.split(',').count(), 10, "bad row: {line}");
        }
    }
}
