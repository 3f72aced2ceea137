use std::cmp::Ordering;

use rand::Rng;

use super::{Result, SolverError};
use crate::data::LabeledExample;
use crate::geometry::{angular_radius, normalize, rotate_toward, RadiusKind, UnitVector};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroOneSolution<T> {
    pub w: UnitVector<T>,
    pub errors: usize,
}

/// `Σ 1(y ≠ sgn(w·x))`; a zero margin counts as an error.
pub fn zero_one_errors<T: Scalar>(w: &[T], data: &[LabeledExample<T>]) -> usize {
    data.iter()
        .filter(|ex| ex.sign() * dot(w, &ex.x) <= T::zero())
        .count()
}

/// Wraps an angle into `(−π, π]`.
fn wrap<T: Scalar>(a: T) -> T {
    let two_pi = T::TAU();
    let mut v = a % two_pi;
    if v > T::PI() {
        v = v - two_pi;
    } else if v <= -T::PI() {
        v = v + two_pi;
    }
    v
}

/// Feasible offsets `s` from the reference direction of a plane.
#[derive(Debug, Clone, Copy)]
enum ArcDomain<T> {
    Circle,
    /// `[lo, hi]` with `lo ≤ 0 ≤ hi`.
    Interval(T, T),
}

/// A point projected onto the plane `(e₁, e₂)`: it is classified correctly by
/// `cos s·e₁ + sin s·e₂` exactly for `s` in the open half-circle `(lo, lo + π)`.
struct HalfCircle<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> HalfCircle<T> {
    /// Decided by the same boundary values the sweep crosses, so direct
    /// counts and swept counts agree bit for bit.
    fn contains(&self, s: T) -> bool {
        if self.lo < self.hi {
            self.lo < s && s < self.hi
        } else {
            s > self.lo || s < self.hi
        }
    }
}

/// Exact minimizer of the planar 0-1 count over `domain`: sorts the angles at
/// which some point changes side and sweeps the arcs between them. Among
/// optimal arcs the candidate with the smallest `|s|` wins, and an arc
/// containing `s = 0` offers `0` itself.
fn sweep<T: Scalar>(planar: &[(T, T, i8)], domain: ArcDomain<T>) -> (T, usize) {
    let pi = T::PI();
    let half_pi = T::FRAC_PI_2();
    let mut always_wrong = 0usize;
    let mut arcs = Vec::with_capacity(planar.len());
    for &(p, q, y) in planar {
        if p == T::zero() && q == T::zero() {
            always_wrong += 1;
            continue;
        }
        let beta = q.atan2(p);
        let c = if y > 0 { beta } else { beta + pi };
        arcs.push(HalfCircle {
            lo: wrap(c - half_pi),
            hi: wrap(c + half_pi),
        });
    }
    let count_at = |s: T| always_wrong + arcs.iter().filter(|a| !a.contains(s)).count();

    // (position, change in error count when crossing it upward)
    let mut events: Vec<(T, i64)> = arcs.iter().flat_map(|a| [(a.lo, -1), (a.hi, 1)]).collect();
    let in_domain = |s: T| match domain {
        ArcDomain::Circle => true,
        ArcDomain::Interval(lo, hi) => s > lo && s < hi,
    };
    events.retain(|e| in_domain(e.0));
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut cuts: Vec<T> = events.iter().map(|e| e.0).collect();
    cuts.dedup();

    // Open arcs between consecutive cuts, as (start, end) with end possibly
    // beyond π for the wrap-around arc of the circle.
    let mut pieces: Vec<(T, T)> = Vec::new();
    match domain {
        ArcDomain::Interval(lo, hi) => {
            if hi - lo <= T::zero() {
                return (T::zero(), count_at(T::zero()));
            }
            let mut bounds = vec![lo];
            bounds.extend_from_slice(&cuts);
            bounds.push(hi);
            pieces.extend(bounds.windows(2).map(|w| (w[0], w[1])));
        }
        ArcDomain::Circle => {
            if cuts.is_empty() {
                return (T::zero(), count_at(T::zero()));
            }
            pieces.extend(cuts.windows(2).map(|w| (w[0], w[1])));
            pieces.push((cuts[cuts.len() - 1], cuts[0] + T::TAU()));
        }
    }
    let candidate = |(a, b): (T, T)| -> T {
        let inside_zero = (a < T::zero() && T::zero() < b) || (b > pi && wrap(b) > T::zero());
        if inside_zero {
            T::zero()
        } else {
            wrap((a + b) / T::of(2.0))
        }
    };

    let mut best_s = candidate(pieces[0]);
    let mut count = count_at(best_s) as i64;
    let mut best = count;
    let mut ev = events.iter().peekable();
    for (i, &piece) in pieces.iter().enumerate() {
        if i > 0 {
            // cross every event at the piece's lower boundary
            while let Some(&&(pos, delta)) = ev.peek() {
                if pos <= piece.0 {
                    count += delta;
                    ev.next();
                } else {
                    break;
                }
            }
        } else {
            // events at the first lower boundary were already reflected
            while let Some(&&(pos, _)) = ev.peek() {
                if pos <= piece.0 {
                    ev.next();
                } else {
                    break;
                }
            }
        }
        if piece.1 <= piece.0 {
            continue;
        }
        let s = candidate(piece);
        if count < best || (count == best && s.abs() < best_s.abs()) {
            best = count;
            best_s = s;
        }
    }
    debug_assert_eq!(count_at(best_s) as i64, best);
    (best_s, best.max(0) as usize)
}

/// Exact 0-1 ERM over `{w : θ(w, w_k) ≤ 2·asin(r_k/2)}` in the plane, or the
/// whole circle when `r_k = 2`.
pub fn erm_zero_one_2d<T: Scalar>(
    data: &[LabeledExample<T>],
    w_k: &UnitVector<T>,
    r_k: T,
) -> Result<ZeroOneSolution<T>> {
    if w_k.dim() != 2 {
        return Err(SolverError::DimensionNotTwo(w_k.dim()));
    }
    let kind = RadiusKind::classify(r_k)?;
    let (c, s) = (w_k.as_slice()[0], w_k.as_slice()[1]);
    let mut planar = Vec::with_capacity(data.len());
    for ex in data {
        if ex.x.len() != 2 {
            return Err(SolverError::DimensionNotTwo(ex.x.len()));
        }
        // coordinates in the frame (w_k, w_k rotated by +π/2)
        planar.push((c * ex.x[0] + s * ex.x[1], -s * ex.x[0] + c * ex.x[1], ex.y));
    }
    let domain = match kind {
        RadiusKind::WholeSphere => ArcDomain::Circle,
        RadiusKind::Local => {
            let rho = angular_radius(r_k);
            ArcDomain::Interval(-rho, rho)
        }
    };
    let (offset, _) = sweep(&planar, domain);
    let w = UnitVector::from_angle(w_k.polar_angle() + offset);
    let errors = zero_one_errors(w.as_slice(), data);
    Ok(ZeroOneSolution { w, errors })
}

/// Best 0-1 rotation of `w` inside the plane `(w, u)`, keeping
/// `θ(·, w_k) ≤ rho` (ignored when `rho` is `None`).
fn plane_step<T: Scalar>(
    data: &[LabeledExample<T>],
    w: &UnitVector<T>,
    u: &UnitVector<T>,
    w_k: &UnitVector<T>,
    rho: Option<T>,
) -> UnitVector<T> {
    let planar: Vec<(T, T, i8)> = data
        .iter()
        .map(|ex| (dot(w.as_slice(), &ex.x), dot(u.as_slice(), &ex.x), ex.y))
        .collect();
    let domain = match rho {
        None => ArcDomain::Circle,
        Some(rho) => {
            // w(s)·w_k = a cos s + b sin s = M cos(s − δ) ≥ cos ρ
            let a = dot(w.as_slice(), w_k.as_slice());
            let b = dot(u.as_slice(), w_k.as_slice());
            let m = (a * a + b * b).sqrt();
            if m <= T::zero() {
                return w.clone();
            }
            let delta = b.atan2(a);
            let half = (rho.cos() / m).min(T::one()).acos() * T::of(1.0 - 1e-12);
            let lo = (delta - half).min(T::zero());
            let hi = (delta + half).max(T::zero());
            ArcDomain::Interval(lo, hi)
        }
    };
    let (s, _) = sweep(&planar, domain);
    if s == T::zero() {
        return w.clone();
    }
    let coords: Vec<T> = w
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(&a, &b)| s.cos() * a + s.sin() * b)
        .collect();
    normalize(&coords).unwrap_or_else(|_| w.clone())
}

/// Coordinate-plane refinement: repeatedly rotates within `(w, e_i)` to the
/// best feasible angle, accepting strict improvements only.
fn refine<T: Scalar>(
    data: &[LabeledExample<T>],
    start: UnitVector<T>,
    w_k: &UnitVector<T>,
    rho: Option<T>,
) -> ZeroOneSolution<T> {
    const MAX_PASSES: usize = 50;
    let d = start.dim();
    let mut w = start;
    let mut errors = zero_one_errors(w.as_slice(), data);
    for _ in 0..MAX_PASSES {
        let mut improved = false;
        for i in 0..d {
            let mut e = vec![T::zero(); d];
            e[i] = T::one();
            let Ok(u) = rotate_toward(&w, &e, T::FRAC_PI_2()) else {
                continue;
            };
            let cand = plane_step(data, &w, &u, w_k, rho);
            let cand_errors = zero_one_errors(cand.as_slice(), data);
            let feasible = rho.is_none_or(|rho| crate::geometry::angle(&cand, w_k).is_ok_and(|t| t <= rho));
            if feasible && cand_errors < errors {
                w = cand;
                errors = cand_errors;
                improved = true;
            }
        }
        if !improved || errors == 0 {
            break;
        }
    }
    ZeroOneSolution { w, errors }
}

/// Heuristic 0-1 ERM for any `d ≥ 2`: refines `w_k` and `restarts` random
/// feasible starts by exact sweeps within coordinate planes.
///
/// The result is never worse than `w_k`, and in `d = 2` a single sweep from
/// `w_k` already covers the whole feasible arc. For `d > 2` it may miss the
/// global minimum.
pub fn erm_zero_one_search<T: Scalar, R: Rng + ?Sized>(
    data: &[LabeledExample<T>],
    w_k: &UnitVector<T>,
    r_k: T,
    restarts: usize,
    rng: &mut R,
) -> Result<ZeroOneSolution<T>> {
    let d = w_k.dim();
    if d < 2 {
        return Err(crate::geometry::GeometryError::DimensionTooSmall(d).into());
    }
    let rho = match RadiusKind::classify(r_k)? {
        RadiusKind::WholeSphere => None,
        RadiusKind::Local => Some(angular_radius(r_k)),
    };
    let mut best = refine(data, w_k.clone(), w_k, rho);
    for _ in 0..restarts {
        if best.errors == 0 {
            break;
        }
        let start = match rho {
            None => UnitVector::random(d, rng)?,
            Some(rho) => {
                let dir = UnitVector::<T>::random(d, rng)?;
                let theta = rho * T::of(rng.random::<f64>());
                rotate_toward(w_k, dir.as_slice(), theta).unwrap_or_else(|_| w_k.clone())
            }
        };
        let cand = refine(data, start, w_k, rho);
        if cand.errors < best.errors {
            best = cand;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Conditional, DataModel, Marginal};
    use crate::geometry::angle;
    use crate::rng::SeedTree;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn noisy(n: usize, seed: u64, dim: usize) -> Vec<LabeledExample<f64>> {
        let mut w = vec![0.0; dim];
        w[0] = 0.6;
        w[1] = 0.8;
        let model = DataModel::new(
            Marginal::UniformSphere,
            Conditional::PoweredMargin { kappa: 2.0, clamp: 1.0 },
            w,
        )
        .unwrap();
        let mut rng = SeedTree::new(seed).stream("zero-one", 0);
        (0..n)
            .map(|_| {
                let x = model.sample_instance(&mut rng);
                model.label_oracle(x, &mut rng).unwrap()
            })
            .collect()
    }

    /// Minimum 0-1 count over `n` equally spaced feasible angles (endpoints
    /// included).
    fn grid_minimum(data: &[LabeledExample<f64>], w_k: &UnitVector<f64>, r_k: f64, n: usize) -> usize {
        let (lo, hi) = if r_k == 2.0 {
            (-PI, PI)
        } else {
            let rho = angular_radius(r_k);
            (-rho, rho)
        };
        (0..n)
            .map(|i| {
                let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let w = UnitVector::from_angle(w_k.polar_angle() + s);
                zero_one_errors(w.as_slice(), data)
            })
            .min()
            .unwrap()
    }

    #[test]
    fn single_example_whole_circle() {
        let data = [LabeledExample::new(vec![-0.6, 0.8], 1).unwrap()];
        let sol = erm_zero_one_2d(&data, &UnitVector::basis(2, 0).unwrap(), 2.0).unwrap();
        assert_eq!(sol.errors, 0);
        assert!(dot(sol.w.as_slice(), &data[0].x) > 0.0);
    }

    #[test]
    fn separable_set_is_solved() {
        let star = UnitVector::<f64>::from_angle(1.0);
        let data: Vec<_> = (0..10)
            .map(|i| {
                let x = UnitVector::<f64>::from_angle(i as f64 * 0.61 + 0.05).into_vec();
                let y = if dot(star.as_slice(), &x) > 0.0 { 1 } else { -1 };
                LabeledExample::new(x, y).unwrap()
            })
            .collect();
        let w_k = UnitVector::from_angle(0.7);
        let sol = erm_zero_one_2d(&data, &w_k, 1.0).unwrap();
        assert_eq!(sol.errors, 0);
        assert!(angle(&sol.w, &w_k).unwrap() <= angular_radius(1.0) + 1e-12);
    }

    #[test]
    fn rejects_other_dimensions_and_radii() {
        let w3 = UnitVector::<f64>::basis(3, 0).unwrap();
        assert!(matches!(erm_zero_one_2d(&[], &w3, 1.0), Err(SolverError::DimensionNotTwo(3))));
        let w2 = UnitVector::<f64>::basis(2, 0).unwrap();
        assert!(erm_zero_one_2d(&[], &w2, 1.5).is_err());
    }

    #[test]
    fn empty_data_returns_w_k() {
        let w_k = UnitVector::from_angle(0.4);
        let sol = erm_zero_one_2d(&[], &w_k, 0.5).unwrap();
        assert!(angle(&sol.w, &w_k).unwrap() < 1e-12);
        let sol = erm_zero_one_search::<f64, _>(&[], &w_k, 0.5, 4, &mut SeedTree::new(1).stream("s", 0)).unwrap();
        assert_eq!(sol.w, w_k);
    }

    #[test]
    fn ties_prefer_w_k() {
        // Every feasible direction separates this pair perfectly.
        let data = [
            LabeledExample::new(vec![1.0, 0.0], 1).unwrap(),
            LabeledExample::new(vec![-1.0, 0.0], -1).unwrap(),
        ];
        let w_k = UnitVector::from_angle(0.3);
        let sol = erm_zero_one_2d(&data, &w_k, 0.5).unwrap();
        assert_eq!(sol.w, UnitVector::from_angle(0.3));
    }

    #[test]
    fn zero_margin_counts_as_error() {
        let data = [LabeledExample::new(vec![0.0, 1.0], 1).unwrap()];
        assert_eq!(zero_one_errors(&[1.0, 0.0], &data), 1);
    }

    #[test]
    fn matches_grid_oracle_on_random_instances() {
        for seed in 0..100u64 {
            let data = noisy(40, seed, 2);
            let mut rng = SeedTree::new(seed).stream("wk", 0);
            let w_k = UnitVector::<f64>::random(2, &mut rng).unwrap();
            let r_k = [2.0, 1.0, 0.5, 0.25][seed as usize % 4];
            let sol = erm_zero_one_2d(&data, &w_k, r_k).unwrap();
            assert_eq!(sol.errors, grid_minimum(&data, &w_k, r_k, 10_000), "seed {seed}");
            let rho = if r_k == 2.0 { PI } else { angular_radius(r_k) };
            assert!(angle(&sol.w, &w_k).unwrap() <= rho + 1e-12);
        }
    }

    #[test]
    fn search_matches_exact_solver_in_the_plane() {
        for seed in 0..20u64 {
            let data = noisy(50, 100 + seed, 2);
            let w_k = UnitVector::from_angle(seed as f64);
            let r_k = if seed % 2 == 0 { 2.0 } else { 0.5 };
            let exact = erm_zero_one_2d(&data, &w_k, r_k).unwrap();
            let mut rng = SeedTree::new(seed).stream("search", 0);
            let found = erm_zero_one_search(&data, &w_k, r_k, 8, &mut rng).unwrap();
            assert_eq!(found.errors, exact.errors, "seed {seed}");
        }
    }

    #[test]
    fn search_separates_wide_margin_instance_in_five_dimensions() {
        let star = normalize(&[0.5, -0.3, 0.4, 0.6, 0.2]).unwrap();
        let mut rng = SeedTree::new(42).stream("d5", 0);
        let mut data = Vec::new();
        while data.len() < 200 {
            let x = UnitVector::<f64>::random(5, &mut rng).unwrap().into_vec();
            let m = dot(star.as_slice(), &x);
            if m.abs() >= 0.3 {
                data.push(LabeledExample::new(x, if m > 0.0 { 1 } else { -1 }).unwrap());
            }
        }
        let w_k = UnitVector::basis(5, 0).unwrap();
        let sol = erm_zero_one_search(&data, &w_k, 2.0, 64, &mut rng).unwrap();
        assert_eq!(sol.errors, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn search_never_worse_than_w_k_and_stays_feasible(
            seed in 0u64..10_000,
            dim in 2usize..6,
            r_pow in 0u32..4,
            restarts in 0usize..4,
        ) {
            let data = noisy(30, seed, dim);
            let mut rng = SeedTree::new(seed).stream("prop", 0);
            let w_k = UnitVector::<f64>::random(dim, &mut rng).unwrap();
            let r_k = if r_pow == 0 { 2.0 } else { 0.5f64.powi(r_pow as i32 - 1) };
            let sol = erm_zero_one_search(&data, &w_k, r_k, restarts, &mut rng).unwrap();
            prop_assert!(sol.errors <= zero_one_errors(w_k.as_slice(), &data));
            prop_assert_eq!(sol.errors, zero_one_errors(sol.w.as_slice(), &data));
            if r_k < 2.0 {
                prop_assert!(angle(&sol.w, &w_k).unwrap() <= angular_radius(r_k) + 1e-12);
            }
        }

        #[test]
        fn wrap_lands_in_half_open_interval(a in -50.0f64..50.0) {
            let w = wrap(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((a - w) / (2.0 * PI)).round() * 2.0 * PI - (a - w) < 1e-9);
        }
    }
}
