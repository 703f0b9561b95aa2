//! Channel realizations for one BS, one active RIS and `K` single-antenna
//! users, plus the effective channel seen by each user for a given RIS
//! configuration.
//!
//! Small-scale fading is Rician with line-of-sight components built from
//! half-wavelength uniform-linear-array steering vectors. Large-scale fading
//! follows the log-distance form `PL(d) = a + b log10(d)` (dB, `d` in meters).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ReflectCoeffs;
use crate::{dbm_to_watts, CMatrix, C64};

/// Node placement. The BS and RIS sit at fixed points; users are dropped
/// uniformly in the disk of radius `user_radius` around the RIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    pub user_radius: f64,
    pub num_users: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            ris_position: [100.0, 0.0],
            user_radius: 8.0,
            num_users: 8,
        }
    }
}

impl Geometry {
    pub fn bs_ris_distance(&self) -> f64 {
        distance(self.bs_position, self.ris_position)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.bs_position.iter().chain(&self.ris_position).all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("node positions must be finite"));
        }
        if !(self.bs_ris_distance() > 0.0) {
            return Err(Error::ZeroDistance("BS and RIS"));
        }
        if !(self.user_radius > 0.0 && self.user_radius.is_finite()) {
            return Err(Error::invalid(format!("user radius must be positive, got {}", self.user_radius)));
        }
        if self.num_users == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        Ok(())
    }
}

/// `PL(d) = intercept_db + slope * log10(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub slope: f64,
}

impl PathLossModel {
    pub const BS_USER: Self = Self { intercept_db: 41.2, slope: 28.7 };
    pub const RIS_LINK: Self = Self { intercept_db: 37.3, slope: 22.0 };

    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.intercept_db + self.slope * distance_m.log10()
    }

    /// Linear power gain `10^(-PL/10)`.
    pub fn gain(&self, distance_m: f64) -> f64 {
        10f64.powf(-self.loss_db(distance_m) / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingConfig {
    /// Linear Rician factor. Zero gives Rayleigh fading.
    pub rician_factor: f64,
    pub seed: u64,
    pub pathloss_bs_user: PathLossModel,
    /// Used for both the BS-RIS and the RIS-user links.
    pub pathloss_ris_links: PathLossModel,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            rician_factor: 10.0,
            seed: 0,
            pathloss_bs_user: PathLossModel::BS_USER,
            pathloss_ris_links: PathLossModel::RIS_LINK,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rician_factor >= 0.0 && self.rician_factor.is_finite()) {
            return Err(Error::invalid(format!(
                "rician factor must be finite and non-negative, got {}",
                self.rician_factor
            )));
        }
        for m in [self.pathloss_bs_user, self.pathloss_ris_links] {
            if !(m.intercept_db.is_finite() && m.slope.is_finite()) {
                return Err(Error::invalid("path-loss coefficients must be finite"));
            }
        }
        Ok(())
    }
}

/// Receiver noise powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePowers {
    pub user_w: f64,
    pub ris_w: f64,
}

impl Default for NoisePowers {
    fn default() -> Self {
        Self { user_w: dbm_to_watts(-80.0), ris_w: dbm_to_watts(-80.0) }
    }
}

/// All channels of one realization.
///
/// Column `k` of `bs_user` is the direct channel `h̄_k` (length `M`), column
/// `k` of `ris_user` is `f_k` (length `N`) and `bs_ris` is the `N x M`
/// BS-to-RIS matrix `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub bs_user: CMatrix,
    pub ris_user: CMatrix,
    pub bs_ris: CMatrix,
    pub noise_ris: f64,
    pub noise_user: Vec<f64>,
    /// Drop positions of the users, empty for hand-built channel sets.
    pub user_positions: Vec<[f64; 2]>,
}

impl ChannelSet {
    /// Builds a channel set from explicit matrices, checking consistency.
    pub fn new(
        bs_user: CMatrix,
        ris_user: CMatrix,
        bs_ris: CMatrix,
        noise_ris: f64,
        noise_user: Vec<f64>,
    ) -> Result<Self> {
        let ch = Self { bs_user, ris_user, bs_ris, noise_ris, noise_user, user_positions: Vec::new() };
        ch.validate()?;
        Ok(ch)
    }

    pub fn num_antennas(&self) -> usize {
        self.bs_user.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.ris_user.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.bs_user.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, k) = self.bs_user.shape();
        let n = self.ris_user.nrows();
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::dims(format!("empty channel set (M={m}, N={n}, K={k})")));
        }
        if self.ris_user.ncols() != k {
            return Err(Error::dims(format!("ris_user has {} columns, expected K={k}", self.ris_user.ncols())));
        }
        if self.bs_ris.shape() != (n, m) {
            return Err(Error::dims(format!("bs_ris is {:?}, expected ({n}, {m})", self.bs_ris.shape())));
        }
        if self.noise_user.len() != k {
            return Err(Error::dims(format!("{} user noise powers for K={k}", self.noise_user.len())));
        }
        let finite = self
            .bs_user
            .iter()
            .chain(self.ris_user.iter())
            .chain(self.bs_ris.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::invalid("channel entries must be finite"));
        }
        if !(self.noise_ris > 0.0) || self.noise_user.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise powers must be positive"));
        }
        Ok(())
    }
}

/// Draws one channel realization. The same inputs always produce a
/// bit-identical [`ChannelSet`].
pub fn generate_channels(
    geometry: &Geometry,
    fading: &FadingConfig,
    dims: (usize, usize),
    noise: NoisePowers,
) -> Result<ChannelSet> {
    let (m, n) = dims;
    if m == 0 || n == 0 {
        return Err(Error::dims(format!("M and N must be at least 1, got ({m}, {n})")));
    }
    geometry.validate()?;
    fading.validate()?;
    if !(noise.user_w > 0.0 && noise.ris_w > 0.0) {
        return Err(Error::invalid("noise powers must be positive"));
    }

    let k = geometry.num_users;
    let kappa = fading.rician_factor;
    let mut rng = ChaCha8Rng::seed_from_u64(fading.seed);

    let users: Vec<[f64; 2]> = (0..k)
        .map(|_| {
            let radius = geometry.user_radius * rng.random::<f64>().sqrt();
            let angle = 2.0 * PI * rng.random::<f64>();
            let [x, y] = geometry.ris_position;
            [x + radius * angle.cos(), y + radius * angle.sin()]
        })
        .collect();

    let d_br = geometry.bs_ris_distance();
    let g_gain = fading.pathloss_ris_links.gain(d_br);
    let depart = uniform_angle(&mut rng);
    let arrive = uniform_angle(&mut rng);
    let los_g = steering(n, arrive) * steering(m, depart).adjoint();
    let bs_ris = rician(&mut rng, &los_g, kappa, g_gain);

    let mut bs_user = CMatrix::zeros(m, k);
    let mut ris_user = CMatrix::zeros(n, k);
    for (idx, &pos) in users.iter().enumerate() {
        let d_bu = distance(geometry.bs_position, pos);
        let d_ru = distance(geometry.ris_position, pos);
        if !(d_bu > 0.0) {
            return Err(Error::ZeroDistance("BS and user"));
        }
        if !(d_ru > 0.0) {
            return Err(Error::ZeroDistance("RIS and user"));
        }
        let los_h = steering(m, uniform_angle(&mut rng));
        let h = rician(&mut rng, &los_h, kappa, fading.pathloss_bs_user.gain(d_bu));
        bs_user.set_column(idx, &h.column(0));
        let los_f = steering(n, uniform_angle(&mut rng));
        let f = rician(&mut rng, &los_f, kappa, fading.pathloss_ris_links.gain(d_ru));
        ris_user.set_column(idx, &f.column(0));
    }

    log::debug!("seed {}: users placed at {:?}", fading.seed, users);

    Ok(ChannelSet {
        bs_user,
        ris_user,
        bs_ris,
        noise_ris: noise.ris_w,
        noise_user: vec![noise.user_w; k],
        user_positions: users,
    })
}

/// Returns the `M x K` matrix whose column `k` is `h_k`, where
/// `h_k^H = h̄_k^H + f_k^H Diag(φ) G`, i.e. `h_k = h̄_k + G^H (conj(φ) ∘ f_k)`.
pub fn effective_channel(ch: &ChannelSet, phi: &ReflectCoeffs) -> Result<CMatrix> {
    let n = ch.num_elements();
    if phi.len() != n {
        return Err(Error::dims(format!("phi has length {}, expected N={n}", phi.len())));
    }
    let mut scaled = ch.ris_user.clone();
    for (mut row, p) in scaled.row_iter_mut().zip(phi.as_vector().iter()) {
        row *= p.conj();
    }
    Ok(&ch.bs_user + ch.bs_ris.adjoint() * scaled)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn uniform_angle(rng: &mut ChaCha8Rng) -> f64 {
    PI * (rng.random::<f64>() - 0.5)
}

/// Half-wavelength ULA response `[e^{jπ i sin θ}]_i` as a column.
fn steering(len: usize, theta: f64) -> CMatrix {
    let s = theta.sin();
    CMatrix::from_fn(len, 1, |i, _| C64::from_polar(1.0, PI * i as f64 * s))
}

/// `sqrt(gain) (sqrt(κ/(κ+1)) LOS + sqrt(1/(κ+1)) NLOS)` with i.i.d. CN(0, 1)
/// scatter drawn row-major.
fn rician(rng: &mut ChaCha8Rng, los: &CMatrix, kappa: f64, gain: f64) -> CMatrix {
    let (rows, cols) = los.shape();
    let w_los = (kappa / (kappa + 1.0)).sqrt();
    let w_nlos = (1.0 / (kappa + 1.0)).sqrt();
    let amp = gain.sqrt();
    let mut out = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let nlos = complex_gaussian(rng);
            out[(r, c)] = (los[(r, c)] * w_los + nlos * w_nlos) * amp;
        }
    }
    out
}

/// Circularly-symmetric CN(0, 1).
fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_set() -> ChannelSet {
        let geometry = Geometry { num_users: 3, ..Default::default() };
        let fading = FadingConfig { seed: 11, ..Default::default() };
        generate_channels(&geometry, &fading, (4, 5), NoisePowers::default()).unwrap()
    }

    #[test]
    fn bs_user_loss_at_100m() {
        let pl = PathLossModel::BS_USER.loss_db(100.0);
        assert!((pl - 98.6).abs() < 1e-12);
    }

    #[test]
    fn path_loss_increases_with_distance() {
        for model in [PathLossModel::BS_USER, PathLossModel::RIS_LINK] {
            let mut prev = model.loss_db(0.5);
            for d in [1.0, 2.0, 8.0, 50.0, 100.0, 1000.0] {
                let cur = model.loss_db(d);
                assert!(cur > prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn same_seed_same_channels() {
        assert_eq!(small_set(), small_set());
    }

    #[test]
    fn different_seed_different_channels() {
        let geometry = Geometry { num_users: 3, ..Default::default() };
        let a = generate_channels(&geometry, &FadingConfig { seed: 1, ..Default::default() }, (4, 5), NoisePowers::default()).unwrap();
        let b = generate_channels(&geometry, &FadingConfig { seed: 2, ..Default::default() }, (4, 5), NoisePowers::default()).unwrap();
        assert_ne!(a.bs_user, b.bs_user);
    }

    #[test]
    fn users_inside_disk() {
        let geometry = Geometry { num_users: 200, ..Default::default() };
        let ch = generate_channels(&geometry, &FadingConfig::default(), (1, 1), NoisePowers::default()).unwrap();
        for p in &ch.user_positions {
            assert!(distance(*p, geometry.ris_position) <= geometry.user_radius);
        }
    }

    #[test]
    fn colocated_bs_and_ris_rejected() {
        let geometry = Geometry { ris_position: [0.0, 0.0], ..Default::default() };
        let err = generate_channels(&geometry, &FadingConfig::default(), (2, 2), NoisePowers::default());
        assert!(matches!(err, Err(Error::ZeroDistance(_))));
    }

    #[test]
    fn bad_dims_rejected() {
        let err = generate_channels(&Geometry::default(), &FadingConfig::default(), (0, 2), NoisePowers::default());
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_reflection_gives_direct_channel() {
        let ch = small_set();
        let h = effective_channel(&ch, &ReflectCoeffs::zeros(5)).unwrap();
        assert_eq!(h, ch.bs_user);
    }

    #[test]
    fn scalar_effective_channel() {
        let ch = ChannelSet::new(
            CMatrix::zeros(1, 1),
            CMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
            CMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
            1.0,
            vec![1.0],
        )
        .unwrap();
        let phi = ReflectCoeffs::from(vec![C64::new(2.0, 0.0)]);
        let h = effective_channel(&ch, &phi).unwrap();
        assert_eq!(h[(0, 0)], C64::new(2.0, 0.0));
        // with a complex coefficient the row h^H carries φ, so h carries conj(φ)
        let phi = ReflectCoeffs::from(vec![C64::new(0.0, 3.0)]);
        let h = effective_channel(&ch, &phi).unwrap();
        assert_eq!(h[(0, 0)].conj(), C64::new(0.0, 3.0));
    }

    #[test]
    fn effective_channel_matches_dense_product() {
        let ch = small_set();
        let phi = ReflectCoeffs::from(
            (0..5).map(|i| C64::from_polar(1.0 + i as f64, 0.7 * i as f64)).collect::<Vec<_>>(),
        );
        let h = effective_channel(&ch, &phi).unwrap();
        let diag = CMatrix::from_diagonal(phi.as_vector());
        for k in 0..3 {
            // row form h_k^H = h̄_k^H + f_k^H Diag(φ) G
            let row = ch.bs_user.column(k).adjoint() + ch.ris_user.column(k).adjoint() * &diag * &ch.bs_ris;
            for m in 0..4 {
                assert!((h[(m, k)].conj() - row[(0, m)]).norm() < 1e-15 * (1.0 + row[(0, m)].norm()));
            }
        }
    }

    #[test]
    fn effective_channel_rejects_wrong_length() {
        let ch = small_set();
        assert!(effective_channel(&ch, &ReflectCoeffs::zeros(4)).is_err());
    }
}
