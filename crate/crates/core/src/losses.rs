//! Convex surrogate losses, their ψ-transform and the constants that tie
//! binary excess risk to distance from the optimal direction.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("loss argument is not finite: {0}")]
    NonFinite(f64),
    #[error("ψ-transform argument {0} is outside [0, 1]")]
    PsiDomain(f64),
    #[error("calibration grid value {0} must lie in (0, 1) and differ from 1/2")]
    CalibrationGrid(f64),
    #[error("loss `{0}` has no global smoothness constant")]
    NotSmooth(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown loss `{0}` (expected exponential, truncated-quadratic or logistic)")]
    UnknownLoss(String),
}

pub type Result<T, E = LossError> = std::result::Result<T, E>;

/// Half-width of the interval searched by the numeric ψ-transform.
pub const PSI_SEARCH_HALF_WIDTH: f64 = 50.0;
/// Exponential-loss arguments below this are clamped.
pub const EXP_ARGUMENT_FLOOR: f64 = -50.0;
const PSI_TOLERANCE: f64 = 1e-9;
const CALIBRATION_MARGIN: f64 = 1e-9;

/// Lower bound `ψ(z) ≥ a·z^γ` on `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiLowerBound<T> {
    pub a: T,
    pub gamma: T,
}

/// A convex margin loss `φ`.
pub trait SurrogateLoss<T: Scalar> {
    fn name(&self) -> &str;

    fn phi(&self, z: T) -> T;

    fn phi_prime(&self, z: T) -> T;

    /// Lipschitz constant of `φ` on `|z| ≤ bound`.
    fn lipschitz(&self, bound: T) -> T;

    /// Global bound on `φ''`, if one exists.
    fn smoothness(&self) -> Option<T>;

    fn psi_closed(&self, _z: T) -> Option<T> {
        None
    }

    fn psi_lower(&self) -> PsiLowerBound<T>;

    /// Smallest argument evaluated without clamping, if `φ` is clamped.
    fn argument_floor(&self) -> Option<T> {
        None
    }
}

/// Built-in losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `e^{−z}`.
    Exponential,
    /// `max(0, 1 − z)²`.
    TruncatedQuadratic,
    /// `ln(1 + e^{−z})`; numeric ψ only.
    Logistic,
}

impl Loss {
    pub const ALL: [Loss; 3] = [Loss::Exponential, Loss::TruncatedQuadratic, Loss::Logistic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Loss::Exponential => "exponential",
            Loss::TruncatedQuadratic => "truncated-quadratic",
            Loss::Logistic => "logistic",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Loss {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self> {
        Loss::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| LossError::UnknownLoss(s.to_string()))
    }
}

impl<T: Scalar> SurrogateLoss<T> for Loss {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn phi(&self, z: T) -> T {
        match self {
            Loss::Exponential => (-z.max(T::of(EXP_ARGUMENT_FLOOR))).exp(),
            Loss::TruncatedQuadratic => {
                let h = (T::one() - z).max(T::zero());
                h * h
            }
            Loss::Logistic => (-z).max(T::zero()) + (-z.abs()).exp().ln_1p(),
        }
    }

    fn phi_prime(&self, z: T) -> T {
        match self {
            Loss::Exponential => -(-z.max(T::of(EXP_ARGUMENT_FLOOR))).exp(),
            Loss::TruncatedQuadratic => -T::of(2.0) * (T::one() - z).max(T::zero()),
            Loss::Logistic => {
                // −1/(1 + e^z), evaluated without overflow
                if z >= T::zero() {
                    let e = (-z).exp();
                    -e / (T::one() + e)
                } else {
                    -T::one() / (T::one() + z.exp())
                }
            }
        }
    }

    fn lipschitz(&self, bound: T) -> T {
        match self {
            Loss::Exponential => bound.exp(),
            Loss::TruncatedQuadratic => T::of(2.0) * (T::one() + bound),
            Loss::Logistic => T::one(),
        }
    }

    fn smoothness(&self) -> Option<T> {
        match self {
            Loss::Exponential => None,
            Loss::TruncatedQuadratic => Some(T::of(2.0)),
            Loss::Logistic => Some(T::of(0.25)),
        }
    }

    fn psi_closed(&self, z: T) -> Option<T> {
        match self {
            Loss::Exponential => Some(T::one() - (T::one() - z * z).max(T::zero()).sqrt()),
            Loss::TruncatedQuadratic => Some(z * z),
            Loss::Logistic => None,
        }
    }

    fn psi_lower(&self) -> PsiLowerBound<T> {
        match self {
            Loss::Exponential | Loss::Logistic => PsiLowerBound {
                a: T::of(0.5),
                gamma: T::of(2.0),
            },
            Loss::TruncatedQuadratic => PsiLowerBound {
                a: T::one(),
                gamma: T::of(2.0),
            },
        }
    }

    fn argument_floor(&self) -> Option<T> {
        match self {
            Loss::Exponential => Some(T::of(EXP_ARGUMENT_FLOOR)),
            _ => None,
        }
    }
}

/// Bound on `|y·w·x|` reachable by iterates: `R·(1 + r₁) + 1` with `r₁ = 2`.
pub fn working_margin_bound<T: Scalar>(norm_bound: T) -> T {
    norm_bound * T::of(3.0) + T::one()
}

/// `φ(z)`, rejecting non-finite input.
pub fn phi<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, z: T) -> Result<T> {
    if !z.is_finite() {
        return Err(LossError::NonFinite(z.to_f64_lossy()));
    }
    Ok(loss.phi(z))
}

/// Minimizes a convex function on `[lo, hi]` by golden-section search until
/// the bracket is narrower than `tol`. Returns `(argmin, min)`.
pub fn golden_section_min<T: Scalar>(f: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::of((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    // A fixed iteration count keeps f32 from stalling above the tolerance.
    let width = (hi - lo).to_f64_lossy();
    let iters = ((tol.to_f64_lossy() / width).ln() / (inv_phi.to_f64_lossy()).ln()).ceil().max(1.0) as usize;
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / T::of(2.0);
    [(mid, f(mid)), (lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)]
        .into_iter()
        .fold((mid, T::infinity()), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// `(H⁻(η), H(η))`: the conditional surrogate risk `η·φ(α) + (1−η)·φ(−α)`
/// minimized over wrong-sign `α` (`α·(2η−1) ≤ 0`) and over all `α`.
pub fn conditional_risk_infima<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, eta: T) -> (T, T) {
    let a = T::of(PSI_SEARCH_HALF_WIDTH);
    let tol = T::of(PSI_TOLERANCE);
    let risk = |alpha: T| eta * loss.phi(alpha) + (T::one() - eta) * loss.phi(-alpha);
    let bias = T::of(2.0) * eta - T::one();
    let (lo, hi) = if bias > T::zero() {
        (-a, T::zero())
    } else if bias < T::zero() {
        (T::zero(), a)
    } else {
        (-a, a)
    };
    let (_, h_minus) = golden_section_min(risk, lo, hi, tol);
    let (_, h) = golden_section_min(risk, -a, a, tol);
    (h_minus, h)
}

fn check_psi_domain<T: Scalar>(z: T) -> Result<()> {
    if z.is_finite() && z >= T::zero() && z <= T::one() {
        Ok(())
    } else {
        Err(LossError::PsiDomain(z.to_f64_lossy()))
    }
}

/// ψ-transform evaluated from its definition by one-dimensional minimization.
pub fn psi_numeric<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, z: T) -> Result<T> {
    check_psi_domain(z)?;
    let eta = (T::one() + z) / T::of(2.0);
    let (h_minus, h) = conditional_risk_infima(loss, eta);
    Ok((h_minus - h).max(T::zero()))
}

/// ψ-transform: the closed form when the loss has one, else [`psi_numeric`].
pub fn psi<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, z: T) -> Result<T> {
    check_psi_domain(z)?;
    match loss.psi_closed(z) {
        Some(v) => Ok(v),
        None => psi_numeric(loss, z),
    }
}

/// Classification calibration on a grid: `H⁻(η) > H(η)` at every grid point.
pub fn is_classification_calibrated<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    loss: &L,
    eta_grid: &[T],
) -> Result<bool> {
    let half = T::of(0.5);
    if let Some(&bad) = eta_grid
        .iter()
        .find(|&&e| !(e > T::zero() && e < T::one()) || e == half)
    {
        return Err(LossError::CalibrationGrid(bad.to_f64_lossy()));
    }
    Ok(eta_grid.iter().all(|&eta| {
        let (h_minus, h) = conditional_risk_infima(loss, eta);
        h_minus > h + T::of(CALIBRATION_MARGIN)
    }))
}

/// The four constants bounding binary excess risk by chord distance:
/// `ℓ₋·‖w̄ − w̄*‖^{γ₋} ≤ ℓ_b(w) − ℓ_b(w*) ≤ ℓ₊·‖w̄ − w̄*‖^{γ₊}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AssumptionIIIConstants<T> {
    pub ell_minus: T,
    pub gamma_minus: T,
    pub ell_plus: T,
    pub gamma_plus: T,
}

impl<T: Scalar> AssumptionIIIConstants<T> {
    pub fn new(ell_minus: T, gamma_minus: T, ell_plus: T, gamma_plus: T) -> Result<Self> {
        let zero = T::zero();
        if !(ell_minus > zero && ell_plus > zero && gamma_plus > zero && gamma_minus >= gamma_plus) {
            return Err(LossError::InvalidParameter(format!(
                "need ℓ₋, ℓ₊ > 0 and γ₋ ≥ γ₊ > 0, got ℓ₋={ell_minus}, γ₋={gamma_minus}, ℓ₊={ell_plus}, γ₊={gamma_plus}"
            )));
        }
        Ok(Self {
            ell_minus,
            gamma_minus,
            ell_plus,
            gamma_plus,
        })
    }

    /// Upper bound `ℓ₊·chord^{γ₊}`.
    pub fn upper(&self, chord: T) -> T {
        self.ell_plus * chord.powf(self.gamma_plus)
    }

    /// Lower bound `ℓ₋·chord^{γ₋}`.
    pub fn lower(&self, chord: T) -> T {
        self.ell_minus * chord.powf(self.gamma_minus)
    }
}

/// `(ℓ₊, γ₊) = ((L_φ·R²/(2a))^{1/γ}, 2/γ)` from explicit constants.
pub fn upper_bound_constants_from<T: Scalar>(l_phi: T, psi_lower: PsiLowerBound<T>, norm: T) -> Result<(T, T)> {
    let PsiLowerBound { a, gamma } = psi_lower;
    if !(l_phi > T::zero() && a > T::zero() && gamma > T::zero() && norm > T::zero()) {
        return Err(LossError::InvalidParameter(format!(
            "need L_φ, a, γ, R > 0, got L_φ={l_phi}, a={a}, γ={gamma}, R={norm}"
        )));
    }
    let ell_plus = (l_phi * norm * norm / (T::of(2.0) * a)).powf(gamma.recip());
    Ok((ell_plus, T::of(2.0) / gamma))
}

/// `(ℓ₊, γ₊)` for a smooth loss whose optimal classifier has norm `norm`.
pub fn upper_bound_constants<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, norm: T) -> Result<(T, T)> {
    let l_phi = loss
        .smoothness()
        .ok_or_else(|| LossError::NotSmooth(loss.name().to_string()))?;
    upper_bound_constants_from(l_phi, loss.psi_lower(), norm)
}

/// `(ℓ₋, γ₋) = (c^κ/μ^κ, κ)` for a marginal with angle-to-disagreement
/// constant `c` under noise exponent `κ` and scale `μ`.
pub fn lower_bound_constants<T: Scalar>(mu: T, kappa: T, c: T) -> Result<(T, T)> {
    if !(mu > T::zero() && kappa >= T::one() && c > T::zero()) {
        return Err(LossError::InvalidParameter(format!(
            "need μ > 0, κ ≥ 1, c > 0, got μ={mu}, κ={kappa}, c={c}"
        )));
    }
    Ok(((c / mu).powf(kappa), kappa))
}
