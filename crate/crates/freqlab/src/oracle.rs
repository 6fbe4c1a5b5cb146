//! Closed-form moments of the two-state linear model: stationary sigma,
//! transient mean/variance of the frequency deviation, the zero-damping
//! variance growth law, and the inertia-effectiveness threshold.

use crate::error::{Error, Result};
use crate::sde::{LinearSde, OuParams};
use nalgebra::DMatrix;

/// Sinusoidal deterministic power imbalance rho * sin(psi * t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidDrive {
    /// Amplitude (pu/s).
    pub rho: f64,
    /// Angular frequency (rad/s).
    pub psi: f64,
}

/// Aggregate two-state linear model: swing equation with OU load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedSystem {
    /// Inertia constant (s, on the pu power base).
    pub h: f64,
    /// Load damping (pu power per pu frequency).
    pub d_l: f64,
    pub ou: OuParams,
    pub drive: Option<SinusoidDrive>,
}

impl SimplifiedSystem {
    pub fn new(h: f64, d_l: f64, ou: OuParams, drive: Option<SinusoidDrive>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("H must be positive, got {h}")));
        }
        if !(d_l >= 0.0) || !d_l.is_finite() {
            return Err(Error::InvalidArgument(format!("D_L must be >= 0, got {d_l}")));
        }
        ou.validate()?;
        if let Some(d) = drive {
            if !(d.psi > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "drive psi must be positive, got {}",
                    d.psi
                )));
            }
        }
        Ok(SimplifiedSystem { h, d_l, ou, drive })
    }

    /// The same system as a `LinearSde` for simulation or covariance work.
    pub fn to_linear(&self) -> Result<LinearSde> {
        LinearSde::two_state(self.h, self.d_l, self.ou, self.drive.map(|d| (d.rho, d.psi)))
    }

    fn degenerate(&self) -> bool {
        let a = 2.0 * self.h * self.ou.alpha;
        (a - self.d_l).abs() < 1e-6 * a.max(self.d_l)
    }
}

/// The derived coefficient set of the transient moment formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticMoments {
    /// Stationary std of delta_omega (pu).
    pub sigma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    /// Asymptotic mean quadrature amplitudes (pu).
    pub rho_c: f64,
    pub rho_s: f64,
    /// Constant enforcing E[delta_omega(0)] = 0.
    pub k_const: f64,
}

impl AnalyticMoments {
    pub fn from_system(sys: &SimplifiedSystem) -> Result<Self> {
        if sys.degenerate() {
            return Err(Error::DegenerateParameters(format!(
                "2*H*alpha = {} coincides with D_L = {}; closed forms are singular",
                2.0 * sys.h * sys.ou.alpha,
                sys.d_l
            )));
        }
        let (h, d_l, alpha, b) = (sys.h, sys.d_l, sys.ou.alpha, sys.ou.b);
        let two_h_alpha = 2.0 * h * alpha;
        let den = (d_l - two_h_alpha).powi(2);
        let sigma = if d_l > 0.0 {
            b / (2.0 * alpha * d_l * (d_l + two_h_alpha)).sqrt()
        } else {
            f64::INFINITY
        };
        let kappa1 = two_h_alpha * (d_l + two_h_alpha) / den;
        let kappa2 = 4.0 * two_h_alpha * d_l / den;
        let kappa3 = b * b / (2.0 * alpha * den);
        let (rho_c, rho_s, k_const) = match sys.drive {
            Some(SinusoidDrive { rho, psi }) => {
                let q = (alpha * alpha + psi * psi) * (4.0 * h * h * psi * psi + d_l * d_l);
                let rho_c = rho * psi * (two_h_alpha + d_l) / q;
                let rho_s = rho * (2.0 * h * psi * psi - alpha * d_l) / q;
                let ce = rho * psi / ((alpha * alpha + psi * psi) * (two_h_alpha - d_l));
                (rho_c, rho_s, -(ce + rho_c))
            }
            None => (0.0, 0.0, 0.0),
        };
        Ok(AnalyticMoments {
            sigma,
            kappa1,
            kappa2,
            kappa3,
            rho_c,
            rho_s,
            k_const,
        })
    }
}

/// Stationary standard deviation of delta_omega: b / sqrt(2 alpha D_L (D_L + 2 H alpha)).
pub fn stationary_sigma(sys: &SimplifiedSystem) -> Result<f64> {
    if sys.d_l <= 0.0 {
        return Err(Error::Domain(
            "stationary sigma is undefined for D_L = 0; use var_zero_damping for the growth law"
                .into(),
        ));
    }
    Ok(sys.ou.b / (2.0 * sys.ou.alpha * sys.d_l * (sys.d_l + 2.0 * sys.h * sys.ou.alpha)).sqrt())
}

/// Transient mean of delta_omega under the sinusoidal drive, with the free
/// constant chosen so the value at t = 0 is exactly 0.
pub fn mean_delta_omega(t: f64, sys: &SimplifiedSystem) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let (h, d_l, alpha) = (sys.h, sys.d_l, sys.ou.alpha);
    match sys.drive {
        None => {
            if sys.ou.mu == 0.0 {
                return Ok(0.0);
            }
            // Constant power offset mu: response to E[eta] = (mu/alpha)(1 - e^{-alpha t}).
            let beta = d_l / (2.0 * h);
            let target = sys.ou.mu / alpha;
            if (beta - alpha).abs() < 1e-12 * beta.max(alpha) {
                return Err(Error::DegenerateParameters(
                    "constant-drive mean is singular at D_L/(2H) = alpha".into(),
                ));
            }
            if beta == 0.0 {
                return Err(Error::Domain(
                    "constant-drive mean requires D_L > 0".into(),
                ));
            }
            let term1 = -(-beta * t).exp_m1() / beta;
            let term2 = ((-alpha * t).exp() - (-beta * t).exp()) / (beta - alpha);
            return Ok(-(target / (2.0 * h)) * (term1 - term2));
        }
        Some(SinusoidDrive { rho: _, psi }) => {
            if sys.degenerate() {
                return Err(Error::DegenerateParameters(
                    "mean closed form is singular at 2*H*alpha = D_L".into(),
                ));
            }
            let m = AnalyticMoments::from_system(sys)?;
            let ce = -(m.k_const + m.rho_c);
            Ok(m.k_const * (-d_l / (2.0 * h) * t).exp()
                + ce * (-alpha * t).exp()
                + m.rho_c * (psi * t).cos()
                + m.rho_s * (psi * t).sin())
        }
    }
}

/// Asymptotic (alpha*t >> 0) mean: rho_c cos(psi t) + rho_s sin(psi t).
pub fn mean_delta_omega_asymptotic(t: f64, sys: &SimplifiedSystem) -> Result<f64> {
    match sys.drive {
        None => Ok(0.0),
        Some(SinusoidDrive { psi, .. }) => {
            let m = AnalyticMoments::from_system(sys)?;
            Ok(m.rho_c * (psi * t).cos() + m.rho_s * (psi * t).sin())
        }
    }
}

/// Transient variance of delta_omega. Near the removable singularity
/// 2*H*alpha = D_L the Lyapunov ODE path is used instead of the closed form.
pub fn var_delta_omega(t: f64, sys: &SimplifiedSystem) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    if sys.d_l <= 0.0 {
        return Err(Error::Domain(
            "variance closed form requires D_L > 0; use var_zero_damping".into(),
        ));
    }
    if sys.degenerate() {
        return var_via_lyapunov(t, sys);
    }
    let m = AnalyticMoments::from_system(sys)?;
    let (h, d_l, alpha) = (sys.h, sys.d_l, sys.ou.alpha);
    let s2 = m.sigma * m.sigma;
    // Rearranged with expm1 so the t = 0 cancellation is exact:
    // sigma^2 (1 - k1 + k2) - k3 = 0 analytically.
    Ok(s2 * (-m.kappa1 * (-d_l / h * t).exp_m1()
        + m.kappa2 * (-(d_l + 2.0 * h * alpha) / (2.0 * h) * t).exp_m1())
        - m.kappa3 * (-2.0 * alpha * t).exp_m1()
        + (s2 * (1.0 - m.kappa1 + m.kappa2) - m.kappa3))
}

fn var_via_lyapunov(t: f64, sys: &SimplifiedSystem) -> Result<f64> {
    let lin = sys.to_linear()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let out = crate::sde::propagate_covariance(&lin, &DMatrix::zeros(2, 2), t, t)?;
    Ok(out.last().unwrap().1[(0, 0)])
}

/// Variance growth law in the undamped extreme D_L = 0.
pub fn var_zero_damping(t: f64, sys: &SimplifiedSystem) -> Result<f64> {
    if sys.d_l != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "var_zero_damping requires D_L = 0, got {}",
            sys.d_l
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let (h, alpha, b) = (sys.h, sys.ou.alpha, sys.ou.b);
    let bracket = t + (2.0 * (-alpha * t).exp_m1() - 0.5 * (-2.0 * alpha * t).exp_m1()) / alpha;
    Ok(b * b / (4.0 * h * h * alpha * alpha) * bracket)
}

/// Asymptotic slope of `var_zero_damping` w.r.t. t: b^2 / (4 H^2 alpha^2).
pub fn var_zero_damping_slope(sys: &SimplifiedSystem) -> Result<f64> {
    if sys.d_l != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "zero-damping slope requires D_L = 0, got {}",
            sys.d_l
        )));
    }
    let (h, alpha, b) = (sys.h, sys.ou.alpha, sys.ou.b);
    Ok(b * b / (4.0 * h * h * alpha * alpha))
}

/// Outcome of the inertia-effectiveness inequality on H.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InertiaThreshold {
    /// Inertia starts limiting deviations only above this value (s).
    Threshold(f64),
    /// The bound is nonpositive: inertia helps for any H.
    AlwaysEffective,
}

/// Threshold H* = (1 - 2 alpha D_L^2) / (4 alpha^2 D_L) above which inertia
/// effectively limits frequency deviations.
pub fn inertia_effectiveness_threshold(alpha: f64, d_l: f64) -> Result<InertiaThreshold> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if d_l <= 0.0 {
        return Err(Error::Domain(
            "threshold is undefined for D_L = 0: inertia alone cannot bound the variance".into(),
        ));
    }
    let value = (1.0 - 2.0 * alpha * d_l * d_l) / (4.0 * alpha * alpha * d_l);
    if value <= 0.0 {
        Ok(InertiaThreshold::AlwaysEffective)
    } else {
        Ok(InertiaThreshold::Threshold(value))
    }
}
