//! Block successive upper-bound minimization of the weighted-MSE surrogate.
//!
//! One outer iteration updates the blocks in the order `u → ρ → w → φ`.
//! The `u` and `ρ` blocks are exact minimizers. The `w` and `φ` blocks
//! minimize a proximal-distance majorizer: the constraint sets are replaced
//! by `μ ||x - Π(x_prev)||²`, which has a closed-form minimizer obtained
//! from one Cholesky factorization. `μ` grows geometrically (homotopy) up
//! to a cap.

use std::time::Instant;

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, ChannelSet};
use crate::error::{Error, Result};
use crate::objective::{
    constraint_residuals, link_terms, ris_power_weights, surrogate_g, user_rates, AuxiliaryVars,
    PowerBudget, Precoder, ReflectCoeffs, Residuals,
};
use crate::projections::{
    project_ball, project_box_ellipsoid, project_ellipsoid, project_per_antenna, DiagonalEllipsoid,
    MatrixEllipsoid,
};
use crate::{CMatrix, CVector, C64};

/// Lower clamp on the BS-side reflected-power radius, relative to `P_A`.
pub const MIN_RADIUS_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// `|SR(ℓ+1) - SR(ℓ)| <= tol`.
    SumRate,
    /// `max_k |R_k(ℓ+1) - R_k(ℓ)| <= tol`.
    PerUserMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Initial penalty. `None` picks `1e-3 · tr(A)` at the initial point.
    pub mu0: Option<f64>,
    /// Multiplicative penalty growth per iteration. 1 keeps `μ` fixed.
    pub mu_growth: f64,
    /// Penalty cap. `None` means `1e6 · mu0`.
    pub mu_max: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub stop_rule: StopRule,
    /// Seed for the random phases of the default initial `φ`.
    pub init_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu0: None,
            mu_growth: 1.2,
            mu_max: None,
            tol: 1e-4,
            max_iters: 500,
            stop_rule: StopRule::SumRate,
            init_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0 && mu0.is_finite()) {
                return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
            }
        }
        if !(self.mu_growth >= 1.0 && self.mu_growth.is_finite()) {
            return Err(Error::invalid(format!("mu_growth must be >= 1, got {}", self.mu_growth)));
        }
        if let Some(cap) = self.mu_max {
            if !(cap > 0.0) {
                return Err(Error::invalid(format!("mu_max must be positive, got {cap}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Quadratic `w` subproblem: `Σ_k w_k^H A w_k - 2 Re(b_k^H w_k)` subject to
/// the BS power constraint and `Σ_k w_k^H Ψ w_k <= p_eff`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSubproblem {
    pub a_matrix: CMatrix,
    /// Column `k` is `b_k`.
    pub b: CMatrix,
    pub psi: CMatrix,
    pub p_eff: f64,
    /// `P_A - ||φ||² σ_v²` was below the clamp and got raised.
    pub p_clamped: bool,
}

/// Quadratic `φ` subproblem: `φ^H Q φ - 2 Re(φ^H z)` subject to the element
/// caps and `Σ_n λ_n |φ_n|² <= P_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSubproblem {
    pub q_matrix: CMatrix,
    pub z: CVector,
    pub lambda_diag: Vec<f64>,
}

/// `u_k = h_k^H w_k / (Σ_i |h_k^H w_i|² + ||f_k^H Φ||² σ_v² + σ_k²)`.
pub fn update_u(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs) -> Result<Vec<C64>> {
    let t = link_terms(ch, w, phi)?;
    Ok((0..ch.num_users()).map(|k| t.cross[(k, k)] / t.total[k]).collect())
}

/// `ρ_k = 1 / F_k(w, φ, u_k)`, the exact minimizer of the surrogate in `ρ`.
/// For the MMSE `u` this is `(1 - u_k^* h_k^H w_k)^{-1} = 1 + SINR_k`.
pub fn update_rho(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs, u: &[C64]) -> Result<Vec<f64>> {
    if u.len() != ch.num_users() {
        return Err(Error::dims(format!("{} receive scalars for K={}", u.len(), ch.num_users())));
    }
    let t = link_terms(ch, w, phi)?;
    u.iter()
        .enumerate()
        .map(|(k, uk)| {
            let mse = uk.norm_sqr() * t.total[k] - 2.0 * (uk.conj() * t.cross[(k, k)]).re + 1.0;
            if mse > 0.0 && mse.is_finite() {
                Ok(1.0 / mse)
            } else {
                Err(Error::NonPositiveWeight { index: k, value: 1.0 / mse })
            }
        })
        .collect()
}

pub fn assemble_w_subproblem(
    ch: &ChannelSet,
    phi: &ReflectCoeffs,
    aux: &AuxiliaryVars,
    budget: &PowerBudget,
) -> Result<WSubproblem> {
    let k = ch.num_users();
    if aux.u.len() != k || aux.rho.len() != k {
        return Err(Error::dims("auxiliaries do not match K"));
    }
    let h = effective_channel(ch, phi)?;

    let mut weighted = h.clone();
    let mut b = h.clone();
    for user in 0..k {
        let (u, rho) = (aux.u[user], aux.rho[user]);
        weighted.column_mut(user).scale_mut(rho * u.norm_sqr());
        // b_k = ρ_k u_k h_k so that b_k^H w_k = ρ_k u_k^* h_k^H w_k
        b.column_mut(user).iter_mut().for_each(|x| *x *= u * rho);
    }
    let a_matrix = hermitian(&weighted * h.adjoint());

    let mut phi_g = ch.bs_ris.clone();
    for (mut row, p) in phi_g.row_iter_mut().zip(phi.as_vector().iter()) {
        row *= *p;
    }
    let psi = hermitian(phi_g.adjoint() * phi_g);

    let raw = budget.p_ris - phi.norm_squared() * ch.noise_ris;
    let floor = MIN_RADIUS_FRACTION * budget.p_ris;
    Ok(WSubproblem { a_matrix, b, psi, p_eff: raw.max(floor), p_clamped: raw < floor })
}

/// Closed-form minimizer of the majorized `w` subproblem,
/// `w_k = (2μI + A)^{-1} (b_k + μ [Π_BS(w_prev)]_k + μ [Π_BR(w_prev)]_k)`.
pub fn update_w(sub: &WSubproblem, w_prev: &Precoder, mu: f64, budget: &PowerBudget) -> Result<Precoder> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("penalty must be positive, got {mu}")));
    }
    let m = w_prev.num_antennas();
    if sub.a_matrix.shape() != (m, m) || sub.b.shape() != w_prev.as_matrix().shape() {
        return Err(Error::dims("w subproblem does not match the previous precoder"));
    }
    let bs = if budget.per_antenna { project_per_antenna(w_prev, budget.p_bs) } else { project_ball(w_prev, budget.p_bs) };
    let (br, _) = project_ellipsoid(w_prev, &MatrixEllipsoid { psi: sub.psi.clone(), radius: sub.p_eff })?;

    let lhs = &sub.a_matrix + CMatrix::identity(m, m) * C64::from(2.0 * mu);
    let rhs = &sub.b + (bs.as_matrix() + br.as_matrix()) * C64::from(mu);
    let chol = Cholesky::new(lhs).ok_or(Error::NotPositiveDefinite("2μI + A"))?;
    Ok(Precoder::new(chol.solve(&rhs)))
}

/// Expands the surrogate around `φ`: up to a constant it equals
/// `φ^H Q φ - 2 Re(φ^H z)` with
///
/// ```text
/// Q = Σ_k ρ_k|u_k|² conj(Diag(f_k^*) G W G^H Diag(f_k)) + σ_v² Σ_k ρ_k|u_k|² Diag(|f_k|²)
/// z = Σ_k conj(Diag(f_k^*) G (ρ_k u_k^* w_k - ρ_k|u_k|² W h̄_k))
/// ```
///
/// where `W = Σ_i w_i w_i^H`. The conjugations come from `φ` entering
/// `h_k^H` unconjugated. `Λ` is the diagonal RIS power weight for `w`.
pub fn assemble_phi_subproblem(ch: &ChannelSet, w: &Precoder, aux: &AuxiliaryVars) -> Result<PhiSubproblem> {
    let (n, k) = (ch.num_elements(), ch.num_users());
    if w.num_antennas() != ch.num_antennas() || w.num_users() != k {
        return Err(Error::dims("precoder does not match channels"));
    }
    if aux.u.len() != k || aux.rho.len() != k {
        return Err(Error::dims("auxiliaries do not match K"));
    }
    let gw = &ch.bs_ris * w.as_matrix();
    // conj(G W G^H) = conj(Σ_i (Gw_i)(Gw_i)^H)
    let gwg = (&gw * gw.adjoint()).map(|x| x.conj());
    // G W h̄_k for every k, as columns
    let gw_h = &gw * (w.as_matrix().adjoint() * &ch.bs_user);

    let mut q = CMatrix::zeros(n, n);
    let mut z = CVector::zeros(n);
    for user in 0..k {
        let (u, rho) = (aux.u[user], aux.rho[user]);
        let weight = rho * u.norm_sqr();
        let f = ch.ris_user.column(user);
        if weight != 0.0 {
            for c in 0..n {
                for r in 0..n {
                    q[(r, c)] += f[r] * gwg[(r, c)] * f[c].conj() * weight;
                }
                q[(c, c)] += C64::from(weight * ch.noise_ris * f[c].norm_sqr());
            }
        }
        for r in 0..n {
            let inner = gw[(r, user)] * (u.conj() * rho) - gw_h[(r, user)] * weight;
            z[r] += f[r] * inner.conj();
        }
    }
    Ok(PhiSubproblem { q_matrix: hermitian(q), z, lambda_diag: ris_power_weights(ch, w) })
}

/// `φ = (Q + μI)^{-1} (z + μ Π(φ_prev))` with `Π` the projection onto the
/// element caps intersected with the RIS power ellipsoid.
pub fn update_phi(sub: &PhiSubproblem, phi_prev: &ReflectCoeffs, mu: f64, budget: &PowerBudget) -> Result<ReflectCoeffs> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("penalty must be positive, got {mu}")));
    }
    let n = phi_prev.len();
    if sub.q_matrix.shape() != (n, n) || sub.z.len() != n {
        return Err(Error::dims("phi subproblem does not match the previous coefficients"));
    }
    let ell = DiagonalEllipsoid { lambda: sub.lambda_diag.clone(), radius: budget.p_ris };
    let (proj, _) = project_box_ellipsoid(phi_prev, &budget.eta, &ell)?;
    let lhs = &sub.q_matrix + CMatrix::identity(n, n) * C64::from(mu);
    let rhs = &sub.z + proj.as_vector() * C64::from(mu);
    let chol = Cholesky::new(lhs).ok_or(Error::NotPositiveDefinite("Q + μI"))?;
    Ok(ReflectCoeffs::new(chol.solve(&rhs)))
}

/// Matched-filter precoder at full BS power and random-phase reflection
/// coefficients at their caps, projected onto the RIS constraints.
pub fn default_init(ch: &ChannelSet, budget: &PowerBudget, seed: u64) -> Result<(Precoder, ReflectCoeffs)> {
    let mut w = ch.bs_user.clone();
    let power = w.norm_squared();
    if power > 0.0 {
        w *= C64::from((budget.p_bs / power).sqrt());
    }
    let mut w = Precoder::new(w);
    if budget.per_antenna {
        w = project_per_antenna(&w, budget.p_bs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: Vec<C64> = budget
        .eta
        .iter()
        .map(|&eta| C64::from_polar(eta, 2.0 * std::f64::consts::PI * rng.random::<f64>()))
        .collect();
    let ell = DiagonalEllipsoid { lambda: ris_power_weights(ch, &w), radius: budget.p_ris };
    let (phi, _) = project_box_ellipsoid(&ReflectCoeffs::from(phi), &budget.eta, &ell)?;
    Ok((w, phi))
}

/// Pushes `(w, φ)` onto the feasible set: BS-side ellipsoid for the current
/// `φ`, then the BS power set, then the RIS caps/power set for the final
/// `w`. The last step alone guarantees the reflected-power constraint.
pub fn enforce_feasibility(
    ch: &ChannelSet,
    budget: &PowerBudget,
    w: &Precoder,
    phi: &ReflectCoeffs,
) -> Result<(Precoder, ReflectCoeffs)> {
    let mut phi_g = ch.bs_ris.clone();
    for (mut row, p) in phi_g.row_iter_mut().zip(phi.as_vector().iter()) {
        row *= *p;
    }
    let radius = budget.p_ris - phi.norm_squared() * ch.noise_ris;
    let w = if radius > 0.0 {
        project_ellipsoid(w, &MatrixEllipsoid { psi: hermitian(phi_g.adjoint() * phi_g), radius })?.0
    } else {
        w.clone()
    };
    let w = if budget.per_antenna { project_per_antenna(&w, budget.p_bs) } else { project_ball(&w, budget.p_bs) };
    let ell = DiagonalEllipsoid { lambda: ris_power_weights(ch, &w), radius: budget.p_ris };
    let (phi, _) = project_box_ellipsoid(phi, &budget.eta, &ell)?;
    Ok((w, phi))
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Sum rate of the (possibly infeasible) iterate.
    pub sum_rate: f64,
    pub g: f64,
    /// Penalty used in this iteration.
    pub mu: f64,
    pub residuals: Residuals,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub w: Precoder,
    pub phi: ReflectCoeffs,
    /// Sum rate after feasibility enforcement.
    pub sum_rate: f64,
    /// Sum rate of the last iterate before enforcement.
    pub sum_rate_unprojected: f64,
    /// Sum rate at the starting point.
    pub initial_sum_rate: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
}

/// Stateful BSUM iteration. [`bsum_solve`] drives it to convergence; it is
/// also usable step by step.
#[derive(Debug, Clone)]
pub struct BsumSolver<'a> {
    ch: &'a ChannelSet,
    budget: &'a PowerBudget,
    w: Precoder,
    phi: ReflectCoeffs,
    aux: Option<AuxiliaryVars>,
    mu: f64,
    mu_growth: f64,
    mu_max: f64,
    iteration: usize,
}

impl<'a> BsumSolver<'a> {
    pub fn new(
        ch: &'a ChannelSet,
        budget: &'a PowerBudget,
        cfg: &SolverConfig,
        init: Option<(Precoder, ReflectCoeffs)>,
    ) -> Result<Self> {
        ch.validate()?;
        budget.validate()?;
        cfg.validate()?;
        if budget.eta.len() != ch.num_elements() {
            return Err(Error::dims(format!("{} caps for N={}", budget.eta.len(), ch.num_elements())));
        }
        let (w, phi) = match init {
            Some(pair) => pair,
            None => default_init(ch, budget, cfg.init_seed)?,
        };
        if w.num_antennas() != ch.num_antennas() || w.num_users() != ch.num_users() || phi.len() != ch.num_elements() {
            return Err(Error::dims("initial point does not match channels"));
        }
        let mu = match cfg.mu0 {
            Some(mu0) => mu0,
            None => {
                let u = update_u(ch, &w, &phi)?;
                let rho = update_rho(ch, &w, &phi, &u)?;
                let sub = assemble_w_subproblem(ch, &phi, &AuxiliaryVars { u, rho }, budget)?;
                let trace: f64 = sub.a_matrix.diagonal().iter().map(|x| x.re).sum();
                let mu = 1e-3 * trace;
                if mu > 0.0 && mu.is_finite() { mu } else { 1e-3 }
            }
        };
        Ok(Self {
            ch,
            budget,
            w,
            phi,
            aux: None,
            mu,
            mu_growth: cfg.mu_growth,
            mu_max: cfg.mu_max.unwrap_or(1e6 * mu),
            iteration: 0,
        })
    }

    pub fn w(&self) -> &Precoder {
        &self.w
    }

    pub fn phi(&self) -> &ReflectCoeffs {
        &self.phi
    }

    /// Auxiliaries from the last step, `None` before the first one.
    pub fn aux(&self) -> Option<&AuxiliaryVars> {
        self.aux.as_ref()
    }

    /// Penalty the next step will use.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One outer iteration; returns the penalty it used.
    pub fn step(&mut self) -> Result<f64> {
        let (ch, budget, mu) = (self.ch, self.budget, self.mu);
        let u = update_u(ch, &self.w, &self.phi)?;
        let rho = update_rho(ch, &self.w, &self.phi, &u)?;
        let aux = AuxiliaryVars { u, rho };

        let wsub = assemble_w_subproblem(ch, &self.phi, &aux, budget)?;
        if wsub.p_clamped {
            log::debug!("iteration {}: reflected-power radius clamped", self.iteration + 1);
        }
        let w = update_w(&wsub, &self.w, mu, budget)?;

        let psub = assemble_phi_subproblem(ch, &w, &aux)?;
        let phi = update_phi(&psub, &self.phi, mu, budget)?;

        self.w = w;
        self.phi = phi;
        self.aux = Some(aux);
        self.mu = (mu * self.mu_growth).min(self.mu_max.max(mu));
        self.iteration += 1;
        Ok(mu)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.phi.is_finite()
    }
}

/// Runs the BSUM iteration until the rate change drops below `cfg.tol` or
/// `cfg.max_iters` is reached, then enforces feasibility and reports the
/// rate of the feasible point.
pub fn bsum_solve(
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &SolverConfig,
    init: Option<(Precoder, ReflectCoeffs)>,
) -> Result<Solution> {
    let start = Instant::now();
    let mut solver = BsumSolver::new(ch, budget, cfg, init)?;
    let mut rates = user_rates(ch, solver.w(), solver.phi())?;
    let initial_sum_rate: f64 = rates.iter().sum();
    let mut trace = Vec::new();
    let mut converged = false;

    while solver.iteration() < cfg.max_iters {
        let mu = match solver.step() {
            Ok(mu) => mu,
            Err(e @ (Error::NotPositiveDefinite(_) | Error::NonPositiveWeight { .. })) if !solver.is_finite() => {
                log::warn!("solver aborted: {e}");
                return Err(Error::NonFinite { iteration: solver.iteration() + 1, trace });
            }
            Err(e) => return Err(e),
        };
        if !solver.is_finite() {
            return Err(Error::NonFinite { iteration: solver.iteration(), trace });
        }
        let new_rates = user_rates(ch, solver.w(), solver.phi())?;
        let sum: f64 = new_rates.iter().sum();
        let aux = solver.aux().expect("set by step");
        let g = surrogate_g(ch, solver.w(), solver.phi(), aux)?;
        if !(sum.is_finite() && g.is_finite()) {
            return Err(Error::NonFinite { iteration: solver.iteration(), trace });
        }
        trace.push(TraceRecord {
            iteration: solver.iteration(),
            sum_rate: sum,
            g,
            mu,
            residuals: constraint_residuals(solver.w(), solver.phi(), budget, ch)?,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let change = match cfg.stop_rule {
            StopRule::SumRate => (sum - rates.iter().sum::<f64>()).abs(),
            StopRule::PerUserMax => new_rates.iter().zip(&rates).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        };
        rates = new_rates;
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }

    let sum_rate_unprojected: f64 = rates.iter().sum();
    let (w, phi) = enforce_feasibility(ch, budget, solver.w(), solver.phi())?;
    let sum_rate = crate::objective::sum_rate(ch, &w, &phi)?;
    let residuals = constraint_residuals(&w, &phi, budget, ch)?;
    log::debug!(
        "bsum: {} iterations, converged={converged}, rate {sum_rate:.4} (unprojected {sum_rate_unprojected:.4})",
        solver.iteration()
    );
    Ok(Solution {
        w,
        phi,
        sum_rate,
        sum_rate_unprojected,
        initial_sum_rate,
        residuals,
        iterations: solver.iteration(),
        converged,
        trace,
    })
}

fn hermitian(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * C64::from(0.5)
}
