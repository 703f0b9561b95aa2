//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ris_bsum::{AuxiliaryVars, CMatrix, ChannelSet, Precoder, ReflectCoeffs, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cn(rng))
}

/// Unit-scale channels with noise powers in [0.1, 1).
pub fn random_channel(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> ChannelSet {
    let bs_user = cmat(rng, m, k);
    let ris_user = cmat(rng, n, k);
    let bs_ris = cmat(rng, n, m);
    let noise_ris = rng.random_range(0.1..1.0);
    let noise_user = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    ChannelSet::new(bs_user, ris_user, bs_ris, noise_ris, noise_user).unwrap()
}

pub fn random_precoder(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Precoder {
    Precoder::new(cmat(rng, m, k))
}

pub fn random_phi(rng: &mut ChaCha8Rng, n: usize) -> ReflectCoeffs {
    ReflectCoeffs::from((0..n).map(|_| cn(rng)).collect::<Vec<_>>())
}

pub fn random_aux(rng: &mut ChaCha8Rng, k: usize) -> AuxiliaryVars {
    AuxiliaryVars {
        u: (0..k).map(|_| cn(rng)).collect(),
        rho: (0..k).map(|_| rng.random_range(0.5..3.0)).collect(),
    }
}

/// Random Hermitian PSD matrix `B B^H` of the given rank.
pub fn random_psd(rng: &mut ChaCha8Rng, m: usize, rank: usize) -> CMatrix {
    let b = cmat(rng, m, rank);
    &b * b.adjoint()
}

/// `h_k^H` as a row, entry by entry: `conj(h̄_mk) + Σ_n conj(f_nk) φ_n G_nm`.
pub fn effective_row(ch: &ChannelSet, phi: &ReflectCoeffs, k: usize) -> Vec<C64> {
    (0..ch.num_antennas())
        .map(|m| {
            let mut acc = ch.bs_user[(m, k)].conj();
            for n in 0..ch.num_elements() {
                acc += ch.ris_user[(n, k)].conj() * phi.as_vector()[n] * ch.bs_ris[(n, m)];
            }
            acc
        })
        .collect()
}

pub fn dot_row(row: &[C64], w: &Precoder, i: usize) -> C64 {
    row.iter().enumerate().map(|(m, h)| h * w.as_matrix()[(m, i)]).sum()
}

/// Scalar-arithmetic SINR of user `k`.
pub fn sinr_oracle(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs, k: usize) -> f64 {
    let row = effective_row(ch, phi, k);
    let signal = dot_row(&row, w, k).norm_sqr();
    let mut interference = 0.0;
    for i in 0..ch.num_users() {
        if i != k {
            interference += dot_row(&row, w, i).norm_sqr();
        }
    }
    let mut ris = 0.0;
    for n in 0..ch.num_elements() {
        ris += (ch.ris_user[(n, k)].conj() * phi.as_vector()[n]).norm_sqr();
    }
    signal / (interference + ris * ch.noise_ris + ch.noise_user[k])
}

/// Scalar-arithmetic surrogate.
pub fn surrogate_oracle(ch: &ChannelSet, w: &Precoder, phi: &ReflectCoeffs, aux: &AuxiliaryVars) -> f64 {
    let mut g = 0.0;
    for k in 0..ch.num_users() {
        let row = effective_row(ch, phi, k);
        let mut total = ch.noise_user[k];
        for i in 0..ch.num_users() {
            total += dot_row(&row, w, i).norm_sqr();
        }
        for n in 0..ch.num_elements() {
            total += (ch.ris_user[(n, k)].conj() * phi.as_vector()[n]).norm_sqr() * ch.noise_ris;
        }
        let u = aux.u[k];
        let f = u.norm_sqr() * total - 2.0 * (u.conj() * dot_row(&row, w, k)).re + 1.0;
        g += aux.rho[k] * f - aux.rho[k].ln();
    }
    g
}

/// Projection onto `Σ λ_i |y_i|² <= radius` alone: `y_i = φ_i / (1 + ν λ_i)`
/// with `ν` from plain bisection.
pub fn diag_ellipsoid_oracle(phi: &[C64], lambda: &[f64], radius: f64) -> Vec<C64> {
    let power = |nu: f64| -> f64 {
        phi.iter().zip(lambda).map(|(p, l)| l * p.norm_sqr() / (1.0 + nu * l).powi(2)).sum()
    };
    if power(0.0) <= radius {
        return phi.to_vec();
    }
    let mut hi = 1.0;
    while power(hi) > radius {
        hi *= 4.0;
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if power(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    phi.iter().zip(lambda).map(|(p, l)| p / (1.0 + hi * l)).collect()
}

/// Projection onto the element discs intersected with the diagonal
/// ellipsoid, solved as a convex QCQP in real coordinates by a log-barrier
/// interior-point method (damped Newton, barrier weight up to 1e14, so the
/// duality gap is below 1e-13 and `||y - y*||² <= gap`).
pub fn barrier_box_ellipsoid(phi: &[C64], eta: &[f64], lambda: &[f64], radius: f64) -> Vec<C64> {
    use nalgebra::{DMatrix, DVector};
    let n = phi.len();
    let dim = 2 * n;
    let target = DVector::from_fn(dim, |i, _| if i < n { phi[i].re } else { phi[i - n].im });
    // constraints c_j(x) <= 0: j < n element caps, j = n ellipsoid
    let cons = |x: &DVector<f64>| -> Vec<f64> {
        let mut c: Vec<f64> = (0..n).map(|i| x[i] * x[i] + x[n + i] * x[n + i] - eta[i] * eta[i]).collect();
        c.push((0..n).map(|i| lambda[i] * (x[i] * x[i] + x[n + i] * x[n + i])).sum::<f64>() - radius);
        c
    };
    let barrier = |x: &DVector<f64>, t: f64| -> f64 {
        let c = cons(x);
        if c.iter().any(|&v| v >= 0.0) {
            return f64::INFINITY;
        }
        t * (x - &target).norm_squared() - c.iter().map(|v| (-v).ln()).sum::<f64>()
    };
    let mut x = DVector::<f64>::zeros(dim);
    let mut t = 1.0;
    while t <= 1e14 {
        for _ in 0..200 {
            let c = cons(&x);
            let mut grad = (&x - &target) * (2.0 * t);
            let mut hess = DMatrix::<f64>::identity(dim, dim) * (2.0 * t);
            for j in 0..=n {
                let mut gc = DVector::<f64>::zeros(dim);
                let mut hc = DVector::<f64>::zeros(dim);
                if j < n {
                    gc[j] = 2.0 * x[j];
                    gc[n + j] = 2.0 * x[n + j];
                    hc[j] = 2.0;
                    hc[n + j] = 2.0;
                } else {
                    for i in 0..n {
                        gc[i] = 2.0 * lambda[i] * x[i];
                        gc[n + i] = 2.0 * lambda[i] * x[n + i];
                        hc[i] = 2.0 * lambda[i];
                        hc[n + i] = 2.0 * lambda[i];
                    }
                }
                let inv = -1.0 / c[j];
                grad += &gc * inv;
                hess += &gc * gc.transpose() * (inv * inv);
                for i in 0..dim {
                    hess[(i, i)] += hc[i] * inv;
                }
            }
            let step = hess.cholesky().expect("barrier Hessian is SPD").solve(&(-&grad));
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let f0 = barrier(&x, t);
            let mut alpha = 1.0;
            loop {
                let cand = &x + &step * alpha;
                if barrier(&cand, t) <= f0 - 0.25 * alpha * decrement {
                    x = cand;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    break;
                }
            }
        }
        t *= 10.0;
    }
    (0..n).map(|i| C64::new(x[i], x[n + i])).collect()
}

/// Projection onto `Σ_k w_k^H Ψ w_k <= radius` by golden-section ascent on
/// the concave dual `D(ν) = ||x(ν) - w||² + ν (Σ x^H Ψ x - radius)` with
/// `x(ν) = (I + νΨ)^{-1} w` from dense LU solves.
pub fn ellipsoid_dual_oracle(w: &CMatrix, psi: &CMatrix, radius: f64) -> CMatrix {
    let m = psi.nrows();
    let solve = |nu: f64| -> CMatrix {
        let lhs = CMatrix::identity(m, m) + psi * C64::from(nu);
        lhs.lu().solve(w).expect("I + νΨ is invertible")
    };
    let quad = |x: &CMatrix| -> f64 { (x.adjoint() * psi * x).trace().re };
    if quad(w) <= radius {
        return w.clone();
    }
    let dual = |nu: f64| -> f64 {
        let x = solve(nu);
        (&x - w).norm_squared() + nu * (quad(&x) - radius)
    };
    let mut hi = 1.0;
    while quad(&solve(hi)) > radius {
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0, hi);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (dual(c), dual(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = dual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = dual(d);
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    solve(0.5 * (a + b))
}

/// Random point in the element discs, rescaled into the ellipsoid.
pub fn sample_box_ellipsoid(rng: &mut ChaCha8Rng, eta: &[f64], lambda: &[f64], radius: f64) -> Vec<C64> {
    let mut y: Vec<C64> = eta
        .iter()
        .map(|&e| C64::from_polar(e * rng.random::<f64>().sqrt(), 2.0 * std::f64::consts::PI * rng.random::<f64>()))
        .collect();
    let p: f64 = y.iter().zip(lambda).map(|(v, l)| l * v.norm_sqr()).sum();
    if p > radius {
        let s = (radius / p).sqrt() * rng.random::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v *= s);
    }
    y
}

/// `Re<a - b, c - b>` for complex matrices viewed as real vectors.
pub fn real_inner(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> f64 {
    (a - b).iter().zip((c - b).iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Surrogate value and the two squared-distance penalties the BSUM blocks see:
/// `(g, dist²(w, C_BS) + dist²(w, C_BR(φ)), dist²(φ, C_RIS(w)))`.
pub fn penalty_terms(
    ch: &ChannelSet,
    budget: &ris_bsum::PowerBudget,
    w: &Precoder,
    phi: &ReflectCoeffs,
    aux: &AuxiliaryVars,
) -> (f64, f64, f64) {
    use ris_bsum::objective::ris_power_weights;
    use ris_bsum::projections::*;
    use ris_bsum::solver::assemble_w_subproblem;
    let g = ris_bsum::surrogate_g(ch, w, phi, aux).unwrap();
    let sub = assemble_w_subproblem(ch, phi, aux, budget).unwrap();
    let bs = if budget.per_antenna { project_per_antenna(w, budget.p_bs) } else { project_ball(w, budget.p_bs) };
    let (br, _) = project_ellipsoid(w, &MatrixEllipsoid { psi: sub.psi, radius: sub.p_eff }).unwrap();
    let dw = (w.as_matrix() - bs.as_matrix()).norm_squared() + (w.as_matrix() - br.as_matrix()).norm_squared();
    let ell = DiagonalEllipsoid { lambda: ris_power_weights(ch, w), radius: budget.p_ris };
    let (pp, _) = project_box_ellipsoid(phi, &budget.eta, &ell).unwrap();
    (g, dw, (phi.as_vector() - pp.as_vector()).norm_squared())
}

/// Worst relative increase of the per-block penalized objectives and of the
/// global merit `g + μ(d_w + d_φ)` over `iters` fixed-penalty iterations.
pub fn fixed_mu_descent(
    ch: &ChannelSet,
    budget: &ris_bsum::PowerBudget,
    iters: usize,
) -> (f64, f64) {
    use ris_bsum::{BsumSolver, SolverConfig};
    let cfg = SolverConfig { mu_growth: 1.0, ..Default::default() };
    let mut solver = BsumSolver::new(ch, budget, &cfg, None).unwrap();
    let (mut worst_block, mut worst_global) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut prev: Option<f64> = None;
    for _ in 0..iters {
        let (w0, phi0) = (solver.w().clone(), solver.phi().clone());
        let mu = solver.step().unwrap();
        let aux = solver.aux().unwrap().clone();
        let (w1, phi1) = (solver.w().clone(), solver.phi().clone());

        let (g0, dw0, _) = penalty_terms(ch, budget, &w0, &phi0, &aux);
        let (gm, dwm, dpm) = penalty_terms(ch, budget, &w1, &phi0, &aux);
        let (g1, dw1, dp1) = penalty_terms(ch, budget, &w1, &phi1, &aux);
        let (before_w, after_w) = (g0 + mu * dw0, gm + mu * dwm);
        let (before_phi, after_phi) = (gm + mu * dpm, g1 + mu * dp1);
        worst_block = worst_block
            .max((after_w - before_w) / before_w.abs().max(1.0))
            .max((after_phi - before_phi) / before_phi.abs().max(1.0));

        let merit = g1 + mu * (dw1 + dp1);
        if let Some(p) = prev {
            worst_global = worst_global.max((merit - p) / p.abs().max(1.0));
        }
        prev = Some(merit);
    }
    (worst_block, worst_global)
}
