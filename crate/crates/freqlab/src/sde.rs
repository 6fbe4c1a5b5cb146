//! Exact Ornstein-Uhlenbeck stepping, exact discretization of constant-drift
//! linear SDEs, and covariance propagation through the differential Lyapunov
//! equation.
//!
//! Dynamics follow the sign convention dx = (mu(t) - A x) dt + B dW, so a
//! stable system has A with eigenvalues in the right half plane.

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::rng::NoiseStream;
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// Stochastic-load process parameters: d(eta) = (mu - alpha*eta) dt + b dW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    /// Drift offset (pu/s).
    pub mu: f64,
    /// Mean-reversion rate, reciprocal of the reversal time (1/s).
    pub alpha: f64,
    /// Noise intensity (pu/sqrt(s)).
    pub b: f64,
    /// Initial value (pu).
    pub eta0: f64,
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "b must be nonnegative and finite, got {}",
                self.b
            )));
        }
        if !self.mu.is_finite() || !self.eta0.is_finite() {
            return Err(Error::InvalidArgument("mu and eta0 must be finite".into()));
        }
        Ok(())
    }

    /// Stationary standard deviation b/sqrt(2 alpha).
    pub fn stationary_std(&self) -> f64 {
        self.b / (2.0 * self.alpha).sqrt()
    }
}

/// One entry of the deterministic drive vector mu(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveEntry {
    Constant(f64),
    /// rho * sin(psi * t)
    Sinusoid { rho: f64, psi: f64 },
}

impl DriveEntry {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            DriveEntry::Constant(c) => c,
            DriveEntry::Sinusoid { rho, psi } => rho * (psi * t).sin(),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            DriveEntry::Constant(c) => c == 0.0,
            DriveEntry::Sinusoid { rho, .. } => rho == 0.0,
        }
    }
}

/// Constant-coefficient linear SDE dx = (mu(t) - A x) dt + B dW.
#[derive(Debug, Clone)]
pub struct LinearSde {
    /// N x N drift matrix (1/s).
    pub a: DMatrix<f64>,
    /// N x M diffusion matrix (pu/sqrt(s)).
    pub b: DMatrix<f64>,
    /// N-dimensional deterministic drive.
    pub drive: Vec<DriveEntry>,
    /// Initial state (pu).
    pub x0: DVector<f64>,
    /// Per-component names used in trajectory exports.
    pub labels: Vec<String>,
}

impl LinearSde {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, drive: Vec<DriveEntry>, x0: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidArgument("A must be square and nonempty".into()));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "B must have N rows and at least one column".into(),
            ));
        }
        if drive.len() != n || x0.len() != n {
            return Err(Error::InvalidArgument(
                "drive and x0 must have N entries".into(),
            ));
        }
        for d in &drive {
            if let DriveEntry::Sinusoid { psi, .. } = d {
                if *psi < 0.0 {
                    return Err(Error::InvalidArgument("sinusoid psi must be >= 0".into()));
                }
            }
        }
        let labels = (0..n).map(|i| format!("x{}", i + 1)).collect();
        Ok(LinearSde { a, b, drive, x0, labels })
    }

    /// The two-state system of the swing equation coupled to the OU load:
    /// states (delta_omega, eta).
    pub fn two_state(h: f64, d_l: f64, ou: OuParams, drive: Option<(f64, f64)>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("H must be positive, got {h}")));
        }
        if d_l < 0.0 {
            return Err(Error::InvalidArgument(format!("D_L must be >= 0, got {d_l}")));
        }
        ou.validate()?;
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[d_l / (2.0 * h), 1.0 / (2.0 * h), 0.0, ou.alpha],
        );
        let b = DMatrix::from_row_slice(2, 1, &[0.0, ou.b]);
        let eta_drive = match drive {
            Some((rho, psi)) => DriveEntry::Sinusoid { rho, psi },
            None => DriveEntry::Constant(ou.mu),
        };
        let mut sys = LinearSde::new(
            a,
            b,
            vec![DriveEntry::Constant(0.0), eta_drive],
            DVector::from_vec(vec![0.0, ou.eta0]),
        )?;
        sys.labels = vec!["delta_omega".into(), "eta".into()];
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn drive_at(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.drive.len(), self.drive.iter().map(|d| d.eval(t)))
    }
}

/// Uniformly stamped sample paths of the state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Strictly increasing time stamps (s).
    pub t: Vec<f64>,
    /// One state vector per stamp.
    pub states: Vec<DVector<f64>>,
    /// Per-component names.
    pub labels: Vec<String>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.t.len() != self.states.len() {
            return Err(Error::InvariantViolation(
                "trajectory stamp/state count mismatch".into(),
            ));
        }
        for w in self.t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvariantViolation(
                    "trajectory time stamps must be strictly increasing".into(),
                ));
            }
        }
        if self
            .states
            .iter()
            .any(|s| s.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvariantViolation(
                "trajectory contains non-finite entries".into(),
            ));
        }
        Ok(())
    }

    pub fn component_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// CSV export: header `t,<label1>,...`, >= 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "t")?;
        for l in &self.labels {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
        for (t, x) in self.t.iter().zip(&self.states) {
            write!(out, "{t:.9e}")?;
            for v in x.iter() {
                write!(out, ",{v:.9e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One exact-in-distribution OU step.
pub fn ou_exact_step(eta: f64, p: &OuParams, dt: f64, stream: NoiseStream) -> Result<(f64, NoiseStream)> {
    p.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let target = p.mu / p.alpha;
    let decay = (-p.alpha * dt).exp();
    // Transition noise std: b * sqrt((1 - e^{-2 alpha dt}) / (2 alpha)),
    // written with exp_m1 for small alpha*dt.
    let std = p.b * ((-(-2.0 * p.alpha * dt).exp_m1()) / (2.0 * p.alpha)).sqrt();
    let (xi, next) = stream.gaussian();
    Ok((target + (eta - target) * decay + std * xi, next))
}

/// Mean and variance of the OU process at time t.
pub fn ou_moments(t: f64, p: &OuParams) -> Result<(f64, f64)> {
    p.validate()?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let target = p.mu / p.alpha;
    let mean = target + (p.eta0 - target) * (-p.alpha * t).exp();
    let var = p.b * p.b / (2.0 * p.alpha) * (-(-2.0 * p.alpha * t).exp_m1());
    Ok((mean, var))
}

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.5255324099163290,
    -0.1834346424956498,
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const GL_WEIGHTS: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.3626837833783620,
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// Symmetric square root via eigendecomposition, clamping tiny negative
/// eigenvalues from roundoff.
fn psd_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (q + q.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::NumericalFailure(format!(
            "step noise covariance has negative eigenvalue {min}"
        )));
    }
    let sqrt_vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}

/// RK4 integration of the Lyapunov ODE w' = -(A w + w A^T) + B B^T from `w0`
/// over `span`, using `n_sub` substeps. Result is symmetrized.
fn lyapunov_rk4(a: &DMatrix<f64>, bbt: &DMatrix<f64>, w0: &DMatrix<f64>, span: f64, n_sub: usize) -> DMatrix<f64> {
    let h = span / n_sub as f64;
    let rhs = |w: &DMatrix<f64>| -> DMatrix<f64> { -(a * w + w * a.transpose()) + bbt };
    let mut w = w0.clone();
    for _ in 0..n_sub {
        let k1 = rhs(&w);
        let k2 = rhs(&(&w + &k1 * (h / 2.0)));
        let k3 = rhs(&(&w + &k2 * (h / 2.0)));
        let k4 = rhs(&(&w + &k3 * h));
        w += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        w = (&w + w.transpose()) * 0.5;
    }
    w
}

fn lyapunov_substeps(a: &DMatrix<f64>, span: f64) -> usize {
    let rate = (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-3);
    ((span * rate * 2.0 / 0.01).ceil() as usize).clamp(8, 200_000)
}

/// Precomputed one-step transition operators for the exact Gaussian scheme.
struct StepOperators {
    /// e^{-A dt}
    phi: DMatrix<f64>,
    /// Quadrature operators w_j * e^{-A (dt - s_j)} with node offsets s_j.
    drive_ops: Vec<(f64, DMatrix<f64>)>,
    /// Factor L with L L^T = integral of e^{-A s} B B^T e^{-A^T s} ds.
    noise_factor: DMatrix<f64>,
    has_noise: bool,
    has_drive: bool,
}

fn build_step_operators(sys: &LinearSde, dt: f64) -> Result<StepOperators> {
    let phi = expm(&(-&sys.a * dt))?;
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "matrix-exponential step produced non-finite entries".into(),
        ));
    }
    let has_drive = sys.drive.iter().any(|d| !d.is_zero());
    let mut drive_ops = Vec::new();
    if has_drive {
        for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let s = dt * 0.5 * (node + 1.0);
            let op = expm(&(-&sys.a * (dt - s)))? * (w * dt * 0.5);
            drive_ops.push((s, op));
        }
    }
    let has_noise = sys.b.iter().any(|&v| v != 0.0);
    let n = sys.dim();
    let noise_factor = if has_noise {
        let bbt = &sys.b * sys.b.transpose();
        let q = lyapunov_rk4(
            &sys.a,
            &bbt,
            &DMatrix::zeros(n, n),
            dt,
            lyapunov_substeps(&sys.a, dt),
        );
        psd_sqrt(&q)?
    } else {
        DMatrix::zeros(n, n)
    };
    Ok(StepOperators {
        phi,
        drive_ops,
        noise_factor,
        has_noise,
        has_drive,
    })
}

/// Integrates the linear SDE with the exact Gaussian transition
/// (matrix exponential plus integrated one-step noise covariance).
pub fn simulate_linear(sys: &LinearSde, horizon: f64, dt: f64, stream: NoiseStream) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if horizon < dt {
        return Err(Error::InvalidArgument(
            "horizon must be at least one step".into(),
        ));
    }
    let ops = build_step_operators(sys, dt)?;
    let n_steps = (horizon / dt).round() as usize;
    let n = sys.dim();

    let mut t = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut x = sys.x0.clone();
    let mut s = stream;
    t.push(0.0);
    states.push(x.clone());
    for k in 0..n_steps {
        let tk = k as f64 * dt;
        let mut next = &ops.phi * &x;
        if ops.has_drive {
            for (offset, op) in &ops.drive_ops {
                next += op * sys.drive_at(tk + offset);
            }
        }
        if ops.has_noise {
            let mut xi = DVector::zeros(n);
            for i in 0..n {
                let (z, ns) = s.gaussian();
                xi[i] = z;
                s = ns;
            }
            next += &ops.noise_factor * xi;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "state became non-finite at t = {}",
                tk + dt
            )));
        }
        x = next;
        t.push((k + 1) as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory {
        t,
        states,
        labels: sys.labels.clone(),
    })
}

/// Euler-Maruyama integration, kept as a cross-check mode for the exact scheme.
pub fn simulate_linear_euler(sys: &LinearSde, horizon: f64, dt: f64, stream: NoiseStream) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if horizon < dt {
        return Err(Error::InvalidArgument(
            "horizon must be at least one step".into(),
        ));
    }
    let n_steps = (horizon / dt).round() as usize;
    let n = sys.dim();
    let m = sys.b.ncols();
    let sqrt_dt = dt.sqrt();
    let mut t = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut x = sys.x0.clone();
    let mut s = stream;
    t.push(0.0);
    states.push(x.clone());
    for k in 0..n_steps {
        let tk = k as f64 * dt;
        let mut dw = DVector::zeros(m);
        for i in 0..m {
            let (z, ns) = s.gaussian();
            dw[i] = z * sqrt_dt;
            s = ns;
        }
        let drift = (sys.drive_at(tk) - &sys.a * &x) * dt;
        x = &x + drift + &sys.b * dw;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "state became non-finite at t = {}",
                tk + dt
            )));
        }
        t.push((k + 1) as f64 * dt);
        states.push(x.clone());
        let _ = n;
    }
    Ok(Trajectory {
        t,
        states,
        labels: sys.labels.clone(),
    })
}

/// Propagates the state covariance through w' = -(A w + w A^T) + B B^T,
/// emitting the matrix at every multiple of `dt`. The drive mu(t) does not
/// enter the equation, so the output is invariant w.r.t. it.
pub fn propagate_covariance(
    sys: &LinearSde,
    w0: &DMatrix<f64>,
    horizon: f64,
    dt: f64,
) -> Result<Vec<(f64, DMatrix<f64>)>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let n = sys.dim();
    if w0.nrows() != n || w0.ncols() != n {
        return Err(Error::InvalidArgument("w0 must be N x N".into()));
    }
    let asym = (w0 - w0.transpose()).amax();
    if asym > 1e-9 * w0.amax().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "w0 must be symmetric (max asymmetry {asym})"
        )));
    }
    let min_eig = w0
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 {
        return Err(Error::InvalidArgument(format!(
            "w0 must be positive semidefinite (min eigenvalue {min_eig})"
        )));
    }

    let bbt = &sys.b * sys.b.transpose();
    let n_sub = lyapunov_substeps(&sys.a, dt);
    let n_steps = (horizon / dt).round() as usize;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut w = (w0 + w0.transpose()) * 0.5;
    out.push((0.0, w.clone()));
    for k in 0..n_steps {
        w = lyapunov_rk4(&sys.a, &bbt, &w, dt, n_sub);
        let diag_min = (0..n).map(|i| w[(i, i)]).fold(f64::INFINITY, f64::min);
        if diag_min < -1e-12 {
            return Err(Error::NumericalFailure(format!(
                "covariance diagonal went negative ({diag_min}) at t = {}",
                (k + 1) as f64 * dt
            )));
        }
        out.push(((k + 1) as f64 * dt, w.clone()));
    }
    Ok(out)
}
