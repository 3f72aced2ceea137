//! Unit-vector geometry and the label-query predicate.
//!
//! A hypothesis ball `Ω = {w : ‖w‖ = 1, ‖w − c‖ ≤ r}` on the unit sphere is
//! the set of unit vectors within chord distance `r` of the center `c`. Chord
//! distance `r` corresponds to an angular radius of `2·asin(r/2)`, which is
//! what turns "some member of Ω disagrees with `c` on `x`" into a band
//! condition on `|x̄·c|`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cannot normalize a zero or non-finite vector")]
    Normalization,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("radius {0} is outside (0, 1] ∪ {{2}}")]
    UnsupportedRadius(f64),
    #[error("closed-form disagreement region requires a rotation-invariant marginal")]
    UnsupportedMarginal,
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

pub(crate) fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { left, right })
    }
}

/// A direction in `R^d`, `d ≥ 2`, with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> UnitVector<T> {
    /// `e_i` in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if dim < 2 {
            return Err(GeometryError::DimensionTooSmall(dim));
        }
        let mut coords = vec![T::zero(); dim];
        coords[i] = T::one();
        Ok(Self { coords })
    }

    /// `(cos φ, sin φ)`.
    pub fn from_angle(phi: T) -> Self {
        Self {
            coords: vec![phi.cos(), phi.sin()],
        }
    }

    /// Uniformly distributed direction (normalized standard Gaussian).
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if dim < 2 {
            return Err(GeometryError::DimensionTooSmall(dim));
        }
        loop {
            let v: Vec<T> = (0..dim)
                .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            if let Ok(u) = normalize(&v) {
                return Ok(u);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn dot(&self, other: &[T]) -> Result<T> {
        check_dims(self.dim(), other.len())?;
        Ok(dot(&self.coords, other))
    }

    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|&c| -c).collect(),
        }
    }

    /// Polar angle; only meaningful in two dimensions.
    pub fn polar_angle(&self) -> T {
        self.coords[1].atan2(self.coords[0])
    }

    /// `R·w` as a plain vector.
    pub fn scaled(&self, s: T) -> Vec<T> {
        crate::scalar::scaled(&self.coords, s)
    }
}

impl<T> AsRef<[T]> for UnitVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.coords
    }
}

/// `v / ‖v‖`.
pub fn normalize<T: Scalar>(v: &[T]) -> Result<UnitVector<T>> {
    if v.len() < 2 {
        return Err(GeometryError::DimensionTooSmall(v.len()));
    }
    let n = norm(v);
    if !n.is_finite() || n <= T::zero() {
        return Err(GeometryError::Normalization);
    }
    let coords: Vec<T> = v.iter().map(|&c| c / n).collect();
    debug_assert!((norm(&coords) - T::one()).abs().to_f64_lossy() <= T::UNIT_TOLERANCE);
    Ok(UnitVector { coords })
}

/// Inner product of two unit vectors, clamped into `[−1, 1]`.
fn clamped_cosine<T: Scalar>(u: &[T], v: &[T]) -> T {
    dot(u, v).max(-T::one()).min(T::one())
}

/// Angle between two unit vectors, in `[0, π]`.
pub fn angle<T: Scalar>(u: &UnitVector<T>, v: &UnitVector<T>) -> Result<T> {
    check_dims(u.dim(), v.dim())?;
    // acos loses half the digits near 0 and π; the half-angle form does not.
    let diff = crate::scalar::distance(u.as_slice(), v.as_slice());
    let sum = u.as_slice().iter().zip(v.as_slice()).map(|(&a, &b)| (a + b) * (a + b)).sum::<T>().sqrt();
    Ok(T::of(2.0) * diff.atan2(sum))
}

/// `‖u − v‖`, equal to `2·sin(θ(u, v)/2)`.
pub fn chord_length<T: Scalar>(u: &UnitVector<T>, v: &UnitVector<T>) -> Result<T> {
    check_dims(u.dim(), v.dim())?;
    Ok(crate::scalar::distance(u.as_slice(), v.as_slice()))
}

/// Chord radius `r` ↦ angular radius `2·asin(r/2)`.
pub fn angular_radius<T: Scalar>(chord: T) -> T {
    let two = T::of(2.0);
    two * (chord / two).min(T::one()).asin()
}

/// Unit vector at angle `theta` from `u`, rotating in the plane spanned by
/// `u` and `toward`.
pub fn rotate_toward<T: Scalar>(u: &UnitVector<T>, toward: &[T], theta: T) -> Result<UnitVector<T>> {
    check_dims(u.dim(), toward.len())?;
    let c = dot(u.as_slice(), toward);
    let perp: Vec<T> = toward
        .iter()
        .zip(u.as_slice())
        .map(|(&t, &ui)| t - c * ui)
        .collect();
    let perp = normalize(&perp)?;
    let coords: Vec<T> = u
        .as_slice()
        .iter()
        .zip(perp.as_slice())
        .map(|(&a, &b)| theta.cos() * a + theta.sin() * b)
        .collect();
    normalize(&coords)
}

/// Epoch hypothesis set: unit vectors within chord distance `radius` of `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisBall<T> {
    pub center: UnitVector<T>,
    pub radius: T,
}

impl<T: Scalar> HypothesisBall<T> {
    pub fn new(center: UnitVector<T>, radius: T) -> Self {
        Self { center, radius }
    }

    /// First-epoch ball: radius 2 covers the whole sphere.
    pub fn whole_sphere(center: UnitVector<T>) -> Self {
        Self::new(center, T::of(2.0))
    }

    pub fn kind(&self) -> Result<RadiusKind> {
        RadiusKind::classify(self.radius)
    }
}

/// The two radius regimes the query rule is defined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusKind {
    /// `r = 2`: every hypothesis on the sphere is admissible.
    WholeSphere,
    /// `0 < r ≤ 1`.
    Local,
}

impl RadiusKind {
    pub fn classify<T: Scalar>(r: T) -> Result<Self> {
        if r == T::of(2.0) {
            Ok(RadiusKind::WholeSphere)
        } else if r > T::zero() && r <= T::one() {
            Ok(RadiusKind::Local)
        } else {
            Err(GeometryError::UnsupportedRadius(r.to_f64_lossy()))
        }
    }
}

/// Band half-width on `|x̄·w_k|`: `r·√(1 − r²/4)`.
pub fn query_threshold<T: Scalar>(r: T) -> T {
    r * (T::one() - r * r / T::of(4.0)).sqrt()
}

/// Whether the label of `x` must be requested in the epoch with hypothesis
/// ball `ball`.
///
/// Radius 2 always queries; otherwise the instance is queried iff
/// `|x̄·w_k| ≤ r·√(1 − r²/4)`, inclusive at the threshold.
pub fn should_query<T: Scalar>(x: &[T], ball: &HypothesisBall<T>) -> Result<bool> {
    let kind = ball.kind()?;
    check_dims(x.len(), ball.center.dim())?;
    let xbar = normalize(x)?;
    match kind {
        RadiusKind::WholeSphere => Ok(true),
        RadiusKind::Local => {
            let c = dot(xbar.as_slice(), ball.center.as_slice()).abs();
            Ok(c <= query_threshold(ball.radius))
        }
    }
}

/// Angular form of the query rule: some `w` with `θ(w, w_k) ≤ 2·asin(r/2)`
/// puts `x` on the other side, i.e. `|θ(w_k, x̄) − π/2| ≤ 2·asin(r/2)`.
///
/// Computed through `acos`/`asin`, independently of [`should_query`].
pub fn disagreement_exists_oracle<T: Scalar>(x: &[T], ball: &HypothesisBall<T>) -> Result<bool> {
    let kind = ball.kind()?;
    check_dims(x.len(), ball.center.dim())?;
    let xbar = normalize(x)?;
    match kind {
        RadiusKind::WholeSphere => Ok(true),
        RadiusKind::Local => {
            let theta = clamped_cosine(ball.center.as_slice(), xbar.as_slice()).acos();
            Ok((theta - T::FRAC_PI_2()).abs() <= angular_radius(ball.radius))
        }
    }
}

/// Symmetry of the instance marginal, as far as closed-form disagreement
/// probabilities are concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalSymmetry {
    /// Orthogonally invariant: `Pr{sgn(u·X) ≠ sgn(v·X)} = θ(u, v)/π`.
    RotationInvariant,
    General,
}

/// Membership of `x` in `DIS(B(w, r))`, where `B(w, r)` collects the unit
/// vectors whose disagreement probability with `w` is at most `r`.
///
/// Under a rotation-invariant marginal `B(w, r)` is the angular cap of radius
/// `π·r`, so membership is `|θ(w, x̄) − π/2| ≤ min(π·r, π/2)`.
pub fn dis_region_test<T: Scalar>(
    x: &[T],
    w: &UnitVector<T>,
    r: T,
    symmetry: MarginalSymmetry,
) -> Result<bool> {
    if symmetry != MarginalSymmetry::RotationInvariant {
        return Err(GeometryError::UnsupportedMarginal);
    }
    if !(r > T::zero() && r <= T::one()) {
        return Err(GeometryError::UnsupportedRadius(r.to_f64_lossy()));
    }
    check_dims(x.len(), w.dim())?;
    let xbar = normalize(x)?;
    let theta = angle(w, &xbar)?;
    let window = (T::PI() * r).min(T::FRAC_PI_2());
    Ok((theta - T::FRAC_PI_2()).abs() <= window)
}
