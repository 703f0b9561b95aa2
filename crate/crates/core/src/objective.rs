//! Performance metrics and constraint residuals.
//!
//! Everything here is a pure evaluation. Rates use `log2`; the surrogate's
//! `-log ρ_k` term uses the natural log, so at the optimal auxiliaries the
//! surrogate equals `K - ln 2 * sum_rate`.

use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, ChannelSet};
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// The `K` BS beamformers stacked as columns of an `M x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder(CMatrix);

impl Precoder {
    pub fn new(columns: CMatrix) -> Self {
        Self(columns)
    }

    pub fn zeros(antennas: usize, users: usize) -> Self {
        Self(CMatrix::zeros(antennas, users))
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn num_antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    /// `Σ_k ||w_k||²`.
    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Power radiated by antenna `m`, i.e. `||w̄_m||²` of row `m`.
    pub fn row_power(&self, m: usize) -> f64 {
        self.0.row(m).norm_squared()
    }

    pub fn max_row_power(&self) -> f64 {
        (0..self.num_antennas()).map(|m| self.row_power(m)).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl From<CMatrix> for Precoder {
    fn from(m: CMatrix) -> Self {
        Self(m)
    }
}

/// Active-RIS reflection coefficients `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectCoeffs(CVector);

impl ReflectCoeffs {
    pub fn new(phi: CVector) -> Self {
        Self(phi)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CVector::zeros(n))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl From<Vec<C64>> for ReflectCoeffs {
    fn from(v: Vec<C64>) -> Self {
        Self(CVector::from_vec(v))
    }
}

impl From<CVector> for ReflectCoeffs {
    fn from(v: CVector) -> Self {
        Self(v)
    }
}

/// Power limits of the BS and the active RIS (watts).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBudget {
    pub p_bs: f64,
    pub p_ris: f64,
    /// Per-element amplitude caps `η_n`.
    pub eta: Vec<f64>,
    /// Replace the sum-power ball by `||w̄_m||² <= p_bs / M` for every antenna.
    pub per_antenna: bool,
}

impl PowerBudget {
    pub fn new(p_bs: f64, p_ris: f64, eta: Vec<f64>, per_antenna: bool) -> Result<Self> {
        let b = Self { p_bs, p_ris, eta, per_antenna };
        b.validate()?;
        Ok(b)
    }

    /// Same cap `eta` on all `n` elements.
    pub fn uniform(p_bs: f64, p_ris: f64, eta: f64, n: usize, per_antenna: bool) -> Result<Self> {
        Self::new(p_bs, p_ris, vec![eta; n], per_antenna)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_bs > 0.0 && self.p_bs.is_finite()) {
            return Err(Error::invalid(format!("BS budget must be positive, got {}", self.p_bs)));
        }
        if !(self.p_ris > 0.0 && self.p_ris.is_finite()) {
            return Err(Error::invalid(format!("RIS budget must be positive, got {}", self.p_ris)));
        }
        if self.eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("element caps must be positive"));
        }
        Ok(())
    }
}

/// Receive scalars `u_k` and MSE weights `ρ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryVars {
    pub u: Vec<C64>,
    pub rho: Vec<f64>,
}

/// Per-user quantities shared by the metrics and the `u` update.
#[derive(Debug, Clone)]
pub(crate) struct LinkTerms {
    /// `cross[(k, i)] = h_k^H w_i`.
    pub cross: CMatrix,
    /// `Σ_i |h_k^H w_i|² + ||f_k^H Φ||² σ_v² + σ_k²`.
    pub total: Vec<f64>,
}

pub(crate) fn link_terms(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs) -> Result<LinkTerms> {
    check_dims(ch, w, phi)?;
    let h = effective_channel(ch, phi)?;
    let cross = h.adjoint() * w.as_matrix();
    let k = ch.num_users();
    let ris_noise: Vec<f64> = (0..k)
        .map(|user| {
            ch.ris_user
                .column(user)
                .iter()
                .zip(phi.as_vector().iter())
                .map(|(f, p)| f.norm_sqr() * p.norm_sqr())
                .sum::<f64>()
                * ch.noise_ris
        })
        .collect();
    let total = (0..k)
        .map(|user| cross.row(user).norm_squared() + ris_noise[user] + ch.noise_user[user])
        .collect();
    Ok(LinkTerms { cross, total })
}

fn check_dims(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs) -> Result<()> {
    if w.num_antennas() != ch.num_antennas() || w.num_users() != ch.num_users() {
        return Err(Error::dims(format!(
            "precoder is {}x{}, channels expect {}x{}",
            w.num_antennas(),
            w.num_users(),
            ch.num_antennas(),
            ch.num_users()
        )));
    }
    if phi.len() != ch.num_elements() {
        return Err(Error::dims(format!("phi has length {}, expected {}", phi.len(), ch.num_elements())));
    }
    Ok(())
}

/// SINR of every user.
pub fn sinrs(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs) -> Result<Vec<f64>> {
    let t = link_terms(ch, w, phi)?;
    Ok((0..ch.num_users())
        .map(|k| {
            let signal = t.cross[(k, k)].norm_sqr();
            signal / (t.total[k] - signal)
        })
        .collect())
}

/// SINR of user `k`.
pub fn sinr(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs, k: usize) -> Result<f64> {
    if k >= ch.num_users() {
        return Err(Error::invalid(format!("user index {k} out of range for K={}", ch.num_users())));
    }
    Ok(sinrs(ch, w, phi)?[k])
}

/// `log2(1 + SINR_k)` for every user.
pub fn user_rates(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs) -> Result<Vec<f64>> {
    Ok(sinrs(ch, w, phi)?.into_iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect())
}

/// Sum rate in bits/s/Hz.
pub fn sum_rate(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs) -> Result<f64> {
    Ok(user_rates(ch, w, phi)?.iter().sum())
}

/// Weighted-MSE surrogate `Σ_k ρ_k F_k(w, φ, u_k) - ln ρ_k`.
pub fn surrogate_g(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs, aux: &AuxiliaryVars) -> Result<f64> {
    let k = ch.num_users();
    if aux.u.len() != k || aux.rho.len() != k {
        return Err(Error::dims(format!("auxiliaries sized ({}, {}), expected K={k}", aux.u.len(), aux.rho.len())));
    }
    if let Some((index, &value)) = aux.rho.iter().enumerate().find(|(_, &r)| !(r > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let t = link_terms(ch, w, phi)?;
    Ok((0..k)
        .map(|user| {
            let u = aux.u[user];
            let f = u.norm_sqr() * t.total[user] - 2.0 * (u.conj() * t.cross[(user, user)]).re + 1.0;
            aux.rho[user] * f - aux.rho[user].ln()
        })
        .sum())
}

/// Diagonal of `Λ = Σ_k Diag(G w_k) Diag(G w_k)^H + σ_v² I`, so that the
/// RIS output power is `Σ_n λ_n |φ_n|²`.
pub fn ris_power_weights(ch: &ChannelSet, w: &Precoder) -> Vec<f64> {
    let gw = &ch.bs_ris * w.as_matrix();
    gw.row_iter().map(|row| row.norm_squared() + ch.noise_ris).collect()
}

/// Constraint violations; a point is feasible when every entry is `<= 0`.
///
/// `bs` is `Σ||w_k||² - P_B` under the sum-power constraint, or
/// `max_m ||w̄_m||² - P_B/M` under the per-antenna one. The `*_rel` fields
/// divide by the matching budget (`P_B` or `P_B/M`, `η_n`, `P_A`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub bs: f64,
    pub ris_elem: f64,
    pub ris_power: f64,
    pub bs_rel: f64,
    pub ris_elem_rel: f64,
    pub ris_power_rel: f64,
}

impl Residuals {
    /// Largest normalized residual.
    pub fn max_relative(&self) -> f64 {
        self.bs_rel.max(self.ris_elem_rel).max(self.ris_power_rel)
    }

    pub fn is_feasible(&self, rel_tol: f64) -> bool {
        self.max_relative() <= rel_tol
    }
}

pub fn constraint_residuals(
    w: &Precoder,
    phi: &ReflectCoeffs,
    budget: &PowerBudget,
    ch: &ChannelSet,
) -> Result<Residuals> {
    check_dims(ch, w, phi)?;
    if budget.eta.len() != phi.len() {
        return Err(Error::dims(format!("{} caps for N={}", budget.eta.len(), phi.len())));
    }
    let (bs, bs_rel) = if budget.per_antenna {
        let cap = budget.p_bs / w.num_antennas() as f64;
        let r = w.max_row_power() - cap;
        (r, r / cap)
    } else {
        let r = w.power() - budget.p_bs;
        (r, r / budget.p_bs)
    };
    let (ris_elem, ris_elem_rel) = phi
        .as_vector()
        .iter()
        .zip(&budget.eta)
        .map(|(p, &e)| (p.norm() - e, (p.norm() - e) / e))
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), (x, y)| (a.max(x), b.max(y)));
    let lambda = ris_power_weights(ch, w);
    let ris_power = phi
        .as_vector()
        .iter()
        .zip(&lambda)
        .map(|(p, l)| l * p.norm_sqr())
        .sum::<f64>()
        - budget.p_ris;
    Ok(Residuals {
        bs,
        ris_elem,
        ris_power,
        bs_rel,
        ris_elem_rel,
        ris_power_rel: ris_power / budget.p_ris,
    })
}
