use serde::{Deserialize, Serialize};

use super::{Result, SolverError};
use crate::data::LabeledExample;
use crate::geometry::{check_dims, UnitVector};
use crate::losses::SurrogateLoss;
use crate::scalar::{distance, dot, norm, Scalar};

/// Projected gradient descent with Armijo backtracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexSolverParams {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
}

impl Default for ConvexSolverParams {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: 1e-8,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
        }
    }
}

impl ConvexSolverParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.grad_tol > 0.0
            && self.initial_step > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c <= 0.5;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// `{w : ‖w − center‖ ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateBall<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> SurrogateBall<T> {
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || center.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::InvalidParams(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// `Δ_k`: centered at `R·w_k` with radius `R·r_k`.
    pub fn epoch(w_k: &UnitVector<T>, r_k: T, norm_bound: T) -> Result<Self> {
        Self::new(w_k.scaled(norm_bound), norm_bound * r_k)
    }

    pub fn contains(&self, v: &[T], slack: T) -> bool {
        distance(v, &self.center) <= self.radius + slack
    }
}

pub fn project_to_ball<T: Scalar>(v: &[T], ball: &SurrogateBall<T>) -> Vec<T> {
    let dist = distance(v, &ball.center);
    if dist <= ball.radius {
        return v.to_vec();
    }
    let s = ball.radius / dist;
    v.iter()
        .zip(&ball.center)
        .map(|(&vi, &ci)| ci + s * (vi - ci))
        .collect()
}

fn checked_margin<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, w: &[T], ex: &LabeledExample<T>) -> Result<T> {
    let z = ex.sign() * dot(w, &ex.x);
    if let Some(floor) = loss.argument_floor() {
        if z < floor || !z.is_finite() {
            return Err(SolverError::SolverDiverged {
                argument: z.to_f64_lossy(),
            });
        }
    }
    Ok(z)
}

/// `Σ φ(y·w·x)`.
pub fn surrogate_objective<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    loss: &L,
    w: &[T],
    data: &[LabeledExample<T>],
) -> Result<T> {
    let mut total = T::zero();
    for ex in data {
        check_dims(ex.x.len(), w.len())?;
        total = total + loss.phi(checked_margin(loss, w, ex)?);
    }
    Ok(total)
}

/// `Σ y·φ′(y·w·x)·x`.
pub fn surrogate_gradient<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    loss: &L,
    w: &[T],
    data: &[LabeledExample<T>],
) -> Result<Vec<T>> {
    let mut g = vec![T::zero(); w.len()];
    for ex in data {
        check_dims(ex.x.len(), w.len())?;
        let coef = ex.sign() * loss.phi_prime(checked_margin(loss, w, ex)?);
        for (gi, &xi) in g.iter_mut().zip(&ex.x) {
            *gi = *gi + coef * xi;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution<T> {
    pub w: Vec<T>,
    pub objective: T,
    /// `‖w − P(w − ∇)‖` at the returned point.
    pub residual: T,
    pub iterations: usize,
}

fn step<T: Scalar>(w: &[T], g: &[T], t: T, ball: &SurrogateBall<T>) -> Vec<T> {
    let moved: Vec<T> = w.iter().zip(g).map(|(&wi, &gi)| wi - t * gi).collect();
    project_to_ball(&moved, ball)
}

/// `argmin_{w ∈ Δ_k} Σ φ(y·w·x)` with `Δ_k = B(R·w_k, R·r_k)`, started at the
/// center.
pub fn erm_convex<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    loss: &L,
    data: &[LabeledExample<T>],
    w_k: &UnitVector<T>,
    r_k: T,
    norm_bound: T,
    params: &ConvexSolverParams,
) -> Result<ConvexSolution<T>> {
    if !(norm_bound > T::zero()) {
        return Err(SolverError::InvalidParams(format!("R must be positive, got {norm_bound}")));
    }
    let ball = SurrogateBall::epoch(w_k, r_k, norm_bound)?;
    let start = ball.center.clone();
    erm_convex_in_ball(loss, data, &ball, &start, params)
}

/// Projected gradient over an arbitrary ball from a feasible start point.
pub fn erm_convex_in_ball<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    loss: &L,
    data: &[LabeledExample<T>],
    ball: &SurrogateBall<T>,
    start: &[T],
    params: &ConvexSolverParams,
) -> Result<ConvexSolution<T>> {
    params.validate()?;
    check_dims(start.len(), ball.center.len())?;
    let mut w = project_to_ball(start, ball);
    let mut f = surrogate_objective(loss, &w, data)?;
    let tol = T::of(params.grad_tol);
    let shrink = T::of(params.backtrack_factor);
    let c = T::of(params.armijo_c);
    let mut t = T::of(params.initial_step);
    let mut residual = T::infinity();
    // rounding scale of a sum of n terms
    let noise = T::epsilon() * T::of(16.0 * (data.len() as f64 + 1.0));

    for iter in 0..params.max_iters {
        let g = surrogate_gradient(loss, &w, data)?;
        residual = distance(&w, &step(&w, &g, T::one(), ball));
        if residual <= tol * (T::one() + norm(&g)) {
            return Ok(ConvexSolution {
                w,
                objective: f,
                residual,
                iterations: iter,
            });
        }
        let mut accepted = None;
        // Give the step a chance to grow back after earlier backtracking.
        t = (t / shrink).min(T::of(params.initial_step).max(t));
        while t > T::min_positive_value() {
            let cand = step(&w, &g, t, ball);
            let moved = distance(&cand, &w);
            if moved == T::zero() {
                break;
            }
            match surrogate_objective(loss, &cand, data) {
                Ok(fc) if fc <= f - c / t * moved * moved => {
                    accepted = Some((cand, fc));
                    break;
                }
                // Near the optimum the decrease drops below the rounding of
                // f. The gradient is still accurate there, and for a convex
                // objective a non-positive slope at the far end of the segment
                // means f did not increase along it.
                Ok(fc) if (fc - f).abs() <= noise * (T::one() + f.abs()) => {
                    let gc = surrogate_gradient(loss, &cand, data)?;
                    let d: Vec<T> = cand.iter().zip(&w).map(|(&a, &b)| a - b).collect();
                    if dot(&gc, &d) <= T::zero() {
                        accepted = Some((cand, fc));
                        break;
                    }
                    t = t * shrink;
                }
                // A trial point past the exponential clamp is simply too far.
                Ok(_) | Err(SolverError::SolverDiverged { .. }) => t = t * shrink,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((cand, fc)) => {
                debug_assert!(fc <= f + noise * (T::one() + f.abs()), "accepted step increased the objective");
                w = cand;
                f = fc;
            }
            None => {
                log::debug!("line search stalled at iteration {iter}, residual {residual}");
                return Err(SolverError::MaxItersExceeded {
                    best: w.iter().map(|v| v.to_f64_lossy()).collect(),
                    objective: f.to_f64_lossy(),
                    residual: residual.to_f64_lossy(),
                    iterations: iter,
                });
            }
        }
    }
    let g = surrogate_gradient(loss, &w, data)?;
    residual = residual.min(distance(&w, &step(&w, &g, T::one(), ball)));
    if residual <= tol * (T::one() + norm(&g)) {
        return Ok(ConvexSolution {
            w,
            objective: f,
            residual,
            iterations: params.max_iters,
        });
    }
    Err(SolverError::MaxItersExceeded {
        best: w.iter().map(|v| v.to_f64_lossy()).collect(),
        objective: f.to_f64_lossy(),
        residual: residual.to_f64_lossy(),
        iterations: params.max_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Conditional, DataModel, Marginal};
    use crate::losses::Loss;
    use crate::rng::SeedTree;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ex(x: &[f64], y: i8) -> LabeledExample<f64> {
        LabeledExample::new(x.to_vec(), y).unwrap()
    }

    fn sample(n: usize, seed: u64, kappa: f64) -> Vec<LabeledExample<f64>> {
        let model = DataModel::new(
            Marginal::UniformSphere,
            Conditional::PoweredMargin { kappa, clamp: 1.0 },
            vec![0.6, 0.8],
        )
        .unwrap();
        let mut rng = SeedTree::new(seed).stream("convex", 0);
        (0..n)
            .map(|_| {
                let x = model.sample_instance(&mut rng);
                model.label_oracle(x, &mut rng).unwrap()
            })
            .collect()
    }

    #[test]
    fn projection_examples() {
        let unit = SurrogateBall::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(project_to_ball(&[0.3, -0.2], &unit), vec![0.3, -0.2]);
        assert_eq!(project_to_ball(&[0.0, 2.0], &unit), vec![0.0, 1.0]);
        let shifted = SurrogateBall::new(vec![1.0, 1.0], 0.5).unwrap();
        assert_eq!(project_to_ball(&[1.0, 1.0], &shifted), vec![1.0, 1.0]);
        assert!(SurrogateBall::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn objective_and_gradient_examples() {
        let tq = Loss::TruncatedQuadratic;
        let data = [ex(&[1.0, 0.0], 1)];
        assert_eq!(surrogate_objective(&tq, &[2.0, 0.0], &data).unwrap(), 0.0);
        assert_eq!(surrogate_gradient(&tq, &[2.0, 0.0], &data).unwrap(), vec![0.0, 0.0]);
        let data = sample(17, 3, 2.0);
        assert_eq!(surrogate_objective(&Loss::Exponential, &[0.0, 0.0], &data).unwrap(), 17.0);
    }

    #[test]
    fn exponential_clamp_is_reported() {
        let data = [ex(&[1.0, 0.0], -1)];
        assert!(matches!(
            surrogate_objective(&Loss::Exponential, &[60.0, 0.0], &data),
            Err(SolverError::SolverDiverged { .. })
        ));
        assert!(surrogate_objective(&Loss::Logistic, &[60.0, 0.0], &data).is_ok());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let data = sample(40, 11, 2.0);
        for loss in Loss::ALL {
            let w = [0.4, -1.3];
            let g = surrogate_gradient(&loss, &w, &data).unwrap();
            let h = 1e-6;
            for i in 0..2 {
                let mut up = w;
                let mut down = w;
                up[i] += h;
                down[i] -= h;
                let fd = (surrogate_objective(&loss, &up, &data).unwrap()
                    - surrogate_objective(&loss, &down, &data).unwrap())
                    / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1e-3);
                assert!(rel <= 1e-5, "{loss}: coordinate {i}, fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn single_point_exponential_hits_the_boundary() {
        let data = [ex(&[1.0, 0.0], 1)];
        let w_k = UnitVector::basis(2, 0).unwrap();
        let sol = erm_convex(&Loss::Exponential, &data, &w_k, 1.0, 1.0, &ConvexSolverParams::default()).unwrap();
        assert_abs_diff_eq!(sol.w[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.w[1], 0.0, epsilon = 1e-9);
        // better than every point of the feasible segment along e1
        for i in 0..=100 {
            let s = i as f64 / 100.0 * 2.0;
            let f = surrogate_objective(&Loss::Exponential, &[s, 0.0], &data).unwrap();
            assert!(sol.objective <= f + 1e-12);
        }
    }

    #[test]
    fn symmetric_data_gives_interior_stationary_point() {
        let mut data = Vec::new();
        for p in [[0.6, 0.8], [-0.28, 0.96], [0.1, -0.7]] {
            data.push(ex(&p, 1));
            data.push(ex(&[-p[0], -p[1]], -1));
            data.push(ex(&p, -1));
            data.push(ex(&[-p[0], -p[1]], 1));
        }
        let ball = SurrogateBall::new(vec![0.0, 0.0], 3.0).unwrap();
        for loss in Loss::ALL {
            let sol = erm_convex_in_ball(&loss, &data, &ball, &[0.5, 0.5], &ConvexSolverParams::default()).unwrap();
            let g = surrogate_gradient(&loss, &sol.w, &data).unwrap();
            assert!(norm(&g) <= 1e-6, "{loss}: {g:?}");
            assert!(norm(&sol.w) < 3.0);
        }
    }

    #[test]
    fn separable_set_reaches_zero_truncated_quadratic_loss() {
        // Margins w·x ≥ 0.5 for w = (1, 0), so (3, 0) clears margin 1.
        let data: Vec<_> = [0.5f64, 0.7, 0.9, 1.0]
            .iter()
            .flat_map(|&a| {
                let b = (1.0 - a * a).sqrt();
                [ex(&[a, b], 1), ex(&[-a, -b], -1), ex(&[a, -b], 1)]
            })
            .collect();
        let w_k = UnitVector::basis(2, 0).unwrap();
        let sol = erm_convex(&Loss::TruncatedQuadratic, &data, &w_k, 1.0, 2.0, &ConvexSolverParams::default()).unwrap();
        assert!(sol.objective <= 1e-12);
        for e in &data {
            assert!(e.sign() * dot(&sol.w, &e.x) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn max_iters_reports_best_iterate() {
        let data = sample(200, 5, 2.0);
        let w_k = UnitVector::basis(2, 1).unwrap();
        let params = ConvexSolverParams {
            max_iters: 1,
            ..Default::default()
        };
        match erm_convex(&Loss::Logistic, &data, &w_k, 1.0, 1.0, &params) {
            Err(SolverError::MaxItersExceeded { best, residual, .. }) => {
                assert_eq!(best.len(), 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected MaxItersExceeded, got {other:?}"),
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = ConvexSolverParams {
            armijo_c: 0.7,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let w_k = UnitVector::basis(2, 1).unwrap();
        assert!(erm_convex(&Loss::Logistic, &sample(5, 1, 2.0), &w_k, 1.0, 0.0, &Default::default()).is_err());
    }

    #[test]
    fn empty_data_returns_the_center() {
        let w_k = UnitVector::<f64>::from_angle(0.3);
        let sol = erm_convex(&Loss::Exponential, &[], &w_k, 0.5, 2.0, &Default::default()).unwrap();
        assert_eq!(sol.w, w_k.scaled(2.0));
    }

    #[test]
    fn works_in_single_precision() {
        let data: Vec<LabeledExample<f32>> = sample(50, 9, 1.0)
            .into_iter()
            .map(|e| LabeledExample::new(e.x.iter().map(|&v| v as f32).collect(), e.y).unwrap())
            .collect();
        let w_k = UnitVector::<f32>::from_angle(0.5);
        let params = ConvexSolverParams {
            grad_tol: 1e-4,
            ..Default::default()
        };
        let sol = erm_convex(&Loss::TruncatedQuadratic, &data, &w_k, 1.0, 1.0, &params).unwrap();
        assert!(distance(&sol.w, &w_k.scaled(1.0)) <= 1.0 + 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solution_is_feasible_and_improves_on_start(
            seed in 0u64..1000,
            phi in -3.1f64..3.1,
            r_pow in 0u32..4,
            loss_idx in 0usize..3,
            norm_bound in 0.5f64..3.0,
        ) {
            let loss = Loss::ALL[loss_idx];
            let data = sample(60, seed, 2.0);
            let w_k = UnitVector::from_angle(phi);
            let r_k = if r_pow == 0 { 2.0 } else { 0.5f64.powi(r_pow as i32 - 1) };
            let params = ConvexSolverParams::default();
            let sol = erm_convex(&loss, &data, &w_k, r_k, norm_bound, &params).unwrap();
            let center = w_k.scaled(norm_bound);
            prop_assert!(distance(&sol.w, &center) <= norm_bound * r_k + 1e-12);
            prop_assert!(sol.objective <= surrogate_objective(&loss, &center, &data).unwrap());
            let ball = SurrogateBall::epoch(&w_k, r_k, norm_bound).unwrap();
            let g = surrogate_gradient(&loss, &sol.w, &data).unwrap();
            let res = distance(&sol.w, &project_to_ball(
                &sol.w.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>(), &ball));
            prop_assert!(res <= params.grad_tol * (1.0 + norm(&g)));
            // bitwise determinism
            let again = erm_convex(&loss, &data, &w_k, r_k, norm_bound, &params).unwrap();
            prop_assert_eq!(sol, again);
        }

        #[test]
        fn projection_lands_in_ball(
            v in proptest::collection::vec(-10.0f64..10.0, 3),
            c in proptest::collection::vec(-2.0f64..2.0, 3),
            radius in 0.01f64..5.0,
        ) {
            let ball = SurrogateBall::new(c, radius).unwrap();
            let p = project_to_ball(&v, &ball);
            prop_assert!(ball.contains(&p, 1e-12));
            prop_assert_eq!(project_to_ball(&p, &ball).len(), 3);
        }
    }
}
