//! Euclidean projections onto the constraint sets of the design problem.
//!
//! The two ellipsoid-type projections are solved through their KKT systems:
//! the solution is a shrinkage of the input parametrised by one dual
//! variable, and the dual is found by bisection on a monotone power curve.
//! Each of them returns a [`ProjectionCertificate`] with the KKT residuals
//! measured at the returned point.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Precoder, ReflectCoeffs};
use crate::{CMatrix, C64};

/// Bisection stops once the constraint value is within this relative
/// distance of the radius.
pub const BISECTION_REL_TOL: f64 = 1e-10;
pub const MAX_BISECTION_ITERS: usize = 200;

/// `{ φ : Σ_i λ_i |φ_i|² <= radius }`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEllipsoid {
    pub lambda: Vec<f64>,
    pub radius: f64,
}

/// `{ w : Σ_k w_k^H Ψ w_k <= radius }` with `Ψ` Hermitian PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEllipsoid {
    pub psi: CMatrix,
    pub radius: f64,
}

/// KKT residuals of a projection, all relative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCertificate {
    /// Multiplier of the ellipsoid constraint (`γ` or `ν`).
    pub dual: f64,
    pub stationarity: f64,
    pub complementary_slackness: f64,
    pub feasibility: f64,
    pub iterations: usize,
    /// Non-positive radius (limit point returned) or bisection ran out of
    /// iterations.
    pub flagged: bool,
}

impl ProjectionCertificate {
    pub fn max_residual(&self) -> f64 {
        self.stationarity.max(self.complementary_slackness).max(self.feasibility)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        !self.flagged && self.max_residual() <= tol
    }
}

struct Bisection {
    root: f64,
    iterations: usize,
    exhausted: bool,
}

/// Finds `x >= 0` with `value(x) ≈ target` for a non-increasing `value`
/// with `value(0) > target`. The upper end starts at 1 and is doubled until
/// it undershoots the target. The returned root is on the feasible side
/// unless it already meets the relative tolerance.
fn bisect_decreasing(value: impl Fn(f64) -> f64, target: f64) -> Bisection {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while value(hi) > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if !hi.is_finite() || doublings > 2000 {
            return Bisection { root: lo, iterations: doublings, exhausted: true };
        }
    }
    for it in 1..=MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Bisection { root: hi, iterations: it, exhausted: false };
        }
        let v = value(mid);
        if (v - target).abs() <= BISECTION_REL_TOL * target {
            return Bisection { root: mid, iterations: it, exhausted: false };
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Bisection { root: hi, iterations: MAX_BISECTION_ITERS, exhausted: true }
}

/// Projection onto the sum-power ball `Σ_k ||w_k||² <= p_bs`.
pub fn project_ball(w: &Precoder, p_bs: f64) -> Precoder {
    let power = w.power();
    if power <= p_bs {
        return w.clone();
    }
    Precoder::new(w.as_matrix() * C64::from(p_bs.sqrt() / power.sqrt()))
}

/// Projection onto the per-antenna box `||w̄_m||² <= p_bs / M`, which is
/// separable over rows.
pub fn project_per_antenna(w: &Precoder, p_bs: f64) -> Precoder {
    let cap = p_bs / w.num_antennas() as f64;
    let mut out = w.as_matrix().clone();
    for mut row in out.row_iter_mut() {
        let p = row.norm_squared();
        if p > cap {
            row *= C64::from(cap.sqrt() / p.sqrt());
        }
    }
    Precoder::new(out)
}

/// Projection onto `{ w : Σ_k w_k^H Ψ w_k <= P }`.
///
/// Outside the set the solution is `w_k ← (I + 2νΨ)^{-1} w_k` with `ν > 0`
/// chosen so the constraint is active. The resolvent is applied in the
/// eigenbasis of `Ψ`, so each bisection step costs `O(M)`.
///
/// A non-positive radius leaves only the null space of `Ψ` (or nothing);
/// the `ν → ∞` limit, the projection onto that null space, is returned and
/// the certificate is flagged.
pub fn project_ellipsoid(w: &Precoder, ell: &MatrixEllipsoid) -> Result<(Precoder, ProjectionCertificate)> {
    let m = w.num_antennas();
    if ell.psi.shape() != (m, m) {
        return Err(Error::dims(format!("Psi is {:?}, expected ({m}, {m})", ell.psi.shape())));
    }
    if !ell.radius.is_finite() {
        return Err(Error::invalid("ellipsoid radius must be finite"));
    }
    let current = quad_form(&ell.psi, w);
    if ell.radius > 0.0 && current <= ell.radius {
        let cert = certify_ellipsoid(w, ell, w, 0.0);
        return Ok((w.clone(), cert));
    }

    let eig = SymmetricEigen::new(hermitian_part(&ell.psi));
    let d_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let d: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&v| if v <= 1e-14 * d_max { 0.0 } else { v })
        .collect();
    let coords = eig.eigenvectors.adjoint() * w.as_matrix();
    let energy: Vec<f64> = coords.row_iter().map(|r| r.norm_squared()).collect();

    let rebuild = |shrink: &dyn Fn(f64) -> f64| {
        let mut c = coords.clone();
        for (j, mut row) in c.row_iter_mut().enumerate() {
            row *= C64::from(shrink(d[j]));
        }
        Precoder::new(&eig.eigenvectors * c)
    };

    if ell.radius <= 0.0 {
        let y = rebuild(&|dj| if dj == 0.0 { 1.0 } else { 0.0 });
        let mut cert = certify_ellipsoid(w, ell, &y, f64::INFINITY);
        cert.flagged = true;
        return Ok((y, cert));
    }

    let power = |nu: f64| -> f64 {
        d.iter()
            .zip(&energy)
            .map(|(&dj, &sj)| dj * sj / ((1.0 + 2.0 * nu * dj) * (1.0 + 2.0 * nu * dj)))
            .sum()
    };
    if power(0.0) <= ell.radius {
        // eigen rounding put us back inside; no shrinkage needed
        let cert = certify_ellipsoid(w, ell, w, 0.0);
        return Ok((w.clone(), cert));
    }
    let bis = bisect_decreasing(power, ell.radius);
    let nu = bis.root;
    let y = rebuild(&|dj| 1.0 / (1.0 + 2.0 * nu * dj));
    let mut cert = certify_ellipsoid(w, ell, &y, nu);
    cert.iterations = bis.iterations;
    cert.flagged |= bis.exhausted;
    Ok((y, cert))
}

/// KKT residuals of `y` as the projection of `w` onto `ell` with multiplier
/// `nu`, evaluated directly in the original coordinates.
pub fn certify_ellipsoid(w: &Precoder, ell: &MatrixEllipsoid, y: &Precoder, nu: f64) -> ProjectionCertificate {
    let value = quad_form(&ell.psi, y);
    let scale = ell.radius.abs().max(f64::MIN_POSITIVE);
    let stationarity = if nu.is_finite() {
        let grad = (y.as_matrix() - w.as_matrix()) + &ell.psi * y.as_matrix() * C64::from(2.0 * nu);
        grad.norm() / w.as_matrix().norm().max(f64::MIN_POSITIVE)
    } else {
        0.0
    };
    let complementary_slackness = if nu > 0.0 { (value - ell.radius).abs() / scale } else { 0.0 };
    ProjectionCertificate {
        dual: nu,
        stationarity,
        complementary_slackness,
        feasibility: (value - ell.radius).max(0.0) / scale,
        iterations: 0,
        flagged: false,
    }
}

/// `Σ_i λ_i min(|φ_i| / (1 + γ λ_i), η_i)²`: RIS power of the candidate
/// projection at dual value `γ`. Non-increasing in `γ`.
pub fn box_ellipsoid_power(phi: &ReflectCoeffs, eta: &[f64], lambda: &[f64], gamma: f64) -> f64 {
    phi.as_vector()
        .iter()
        .zip(eta)
        .zip(lambda)
        .map(|((p, &e), &l)| {
            let a = (p.norm() / (1.0 + gamma * l)).min(e);
            l * a * a
        })
        .sum()
}

/// Projection onto `{ φ : |φ_i| <= η_i, Σ_i λ_i |φ_i|² <= P_A }`.
///
/// Every coordinate keeps its phase; the magnitude is
/// `min(|φ_i| / (1 + γ λ_i), η_i)` where `γ = 0` if the element caps alone
/// already meet the power limit, otherwise `γ > 0` makes the power limit
/// active. Zero entries stay zero.
pub fn project_box_ellipsoid(
    phi: &ReflectCoeffs,
    eta: &[f64],
    ell: &DiagonalEllipsoid,
) -> Result<(ReflectCoeffs, ProjectionCertificate)> {
    let n = phi.len();
    if eta.len() != n || ell.lambda.len() != n {
        return Err(Error::dims(format!(
            "phi has length {n}, caps {}, weights {}",
            eta.len(),
            ell.lambda.len()
        )));
    }
    if !(ell.radius > 0.0 && ell.radius.is_finite()) {
        return Err(Error::invalid(format!("RIS power budget must be positive, got {}", ell.radius)));
    }
    if eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("element caps must be positive"));
    }
    if ell.lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::invalid("ellipsoid weights must be positive"));
    }

    let power = |g: f64| box_ellipsoid_power(phi, eta, &ell.lambda, g);
    let (gamma, iterations, exhausted) = if power(0.0) <= ell.radius {
        (0.0, 0, false)
    } else {
        let bis = bisect_decreasing(power, ell.radius);
        (bis.root, bis.iterations, bis.exhausted)
    };
    let y = shrink_box(phi, eta, &ell.lambda, gamma);
    let mut cert = certify_box_ellipsoid(phi, eta, ell, &y, gamma);
    cert.iterations = iterations;
    cert.flagged = exhausted;
    Ok((y, cert))
}

fn shrink_box(phi: &ReflectCoeffs, eta: &[f64], lambda: &[f64], gamma: f64) -> ReflectCoeffs {
    let v = phi.as_vector().map_with_location(|i, _, p| {
        let a = p.norm();
        if a == 0.0 {
            return C64::default();
        }
        let target = (a / (1.0 + gamma * lambda[i])).min(eta[i]);
        p * (target / a)
    });
    ReflectCoeffs::new(v)
}

/// KKT residuals of `y` as the box/ellipsoid projection of `phi` with
/// multiplier `gamma`. The element-cap multipliers are recovered from
/// stationarity, `β_i = |φ_i| / |y_i| - 1 - γ λ_i`, clipped at zero so
/// any sign violation surfaces as a stationarity residual.
pub fn certify_box_ellipsoid(
    phi: &ReflectCoeffs,
    eta: &[f64],
    ell: &DiagonalEllipsoid,
    y: &ReflectCoeffs,
    gamma: f64,
) -> ProjectionCertificate {
    let scale = phi.as_vector().norm().max(1.0);
    let mut stationarity = 0.0f64;
    let mut slack = 0.0f64;
    let mut elem_violation = 0.0f64;
    for i in 0..phi.len() {
        let (p, q) = (phi.as_vector()[i], y.as_vector()[i]);
        let l = ell.lambda[i];
        let beta = if q.norm() > 0.0 { (p.norm() / q.norm() - 1.0 - gamma * l).max(0.0) } else { 0.0 };
        let r = q * (1.0 + gamma * l + beta) - p;
        stationarity = stationarity.max(r.norm() / scale);
        elem_violation = elem_violation.max((q.norm() - eta[i]) / eta[i]);
        // an active multiplier needs the cap to be tight
        if beta > 1e-12 * (1.0 + gamma * l) {
            slack = slack.max((q.norm() - eta[i]).abs() / eta[i]);
        }
    }
    let value: f64 = y.as_vector().iter().zip(&ell.lambda).map(|(q, l)| l * q.norm_sqr()).sum();
    if gamma > 0.0 {
        slack = slack.max((value - ell.radius).abs() / ell.radius);
    }
    ProjectionCertificate {
        dual: gamma,
        stationarity,
        complementary_slackness: slack,
        feasibility: elem_violation.max((value - ell.radius) / ell.radius).max(0.0),
        iterations: 0,
        flagged: false,
    }
}

/// `Σ_k w_k^H Ψ w_k`.
pub fn quad_form(psi: &CMatrix, w: &Precoder) -> f64 {
    let pw = psi * w.as_matrix();
    w.as_matrix().iter().zip(pw.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::from(0.5)
}
