use crate::error::{Error, Result};
use crate::fock::{phi_op, FockSpace};
use crate::models::{extract_constants, Family, ModelSpec};
use crate::report::CheckReport;
use crate::spectra::SpectralData;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const PROBABILITY_FLOOR: f64 = 1e-13;

/// P(n_site ≥ n) in `state`.
pub fn tail_probability(state: &[C64], space: &FockSpace, site: usize, n: usize) -> Result<f64> {
    space.check_site(site)?;
    if n > space.cutoff(site) {
        return Err(Error::BeyondCutoff { n, cutoff: space.cutoff(site) });
    }
    Ok(tail_curve(state, space, site)?[n])
}

/// P(n_site ≥ N) for N = 0..=cutoff, normalized by ‖state‖².
pub fn tail_curve(state: &[C64], space: &FockSpace, site: usize) -> Result<Vec<f64>> {
    space.check_site(site)?;
    if state.len() != space.dim() {
        return Err(Error::DimensionMismatch(state.len(), space.dim()));
    }
    let nc = space.cutoff(site);
    let mut hist = vec![0.0; nc + 1];
    for (i, a) in state.iter().enumerate() {
        hist[space.occupation(i, site)] += a.norm_sqr();
    }
    let total: f64 = hist.iter().sum();
    let mut tail = vec![0.0; nc + 1];
    let mut acc = 0.0;
    for n in (0..=nc).rev() {
        acc += hist[n];
        tail[n] = (acc / total).min(1.0);
    }
    Ok(tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationFit {
    /// Stretch exponent 𝔞 in 𝔠·exp(−𝔟 N^{1/𝔞}).
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub inv_a: f64,
    pub fit_window: (f64, f64),
    pub residual: f64,
    pub floor: f64,
    pub n_points: usize,
}

impl ConcentrationFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.c * (-self.b * n.powf(self.inv_a)).exp()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub floor: f64,
    pub n_min: f64,
    pub min_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { floor: PROBABILITY_FLOOR, n_min: 1.0, min_points: 5 }
    }
}

pub fn fit_concentration(points: &[(f64, f64)]) -> Result<ConcentrationFit> {
    fit_concentration_with(points, &FitOptions::default())
}

fn sse(params: &[f64; 3], xs: &[f64], ys: &[f64]) -> f64 {
    let b = params[1].exp();
    xs.iter().zip(ys).map(|(&n, &y)| (params[2] - b * n.powf(params[0]) - y).powi(2)).sum()
}

/// Least squares on log p = log 𝔠 − 𝔟 N^{1/𝔞}: a grid over 1/𝔞 with the two
/// linear parameters solved in closed form, refined by Levenberg-Marquardt.
pub fn fit_concentration_with(points: &[(f64, f64)], opts: &FitOptions) -> Result<ConcentrationFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(n, p)| n >= opts.n_min && n > 0.0 && p > opts.floor)
        .collect();
    if pts.len() < opts.min_points {
        return Err(Error::InvalidArgument(format!(
            "insufficient points above floor {:e}: {} < {}",
            opts.floor,
            pts.len(),
            opts.min_points
        )));
    }
    for w in pts.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidArgument("tail points must be sorted by N".into()));
        }
        if w[1].1 > w[0].1 * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "tail increases between N={} and N={}; not a ground-state tail",
                w[0].0, w[1].0
            )));
        }
    }
    if pts.last().unwrap().1 >= pts[0].1 {
        return Err(Error::InvalidArgument("tail does not decrease over the fit window".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;

    let mut best: Option<([f64; 3], f64)> = None;
    let mut p = 0.15;
    while p <= 4.0 {
        let x: Vec<f64> = xs.iter().map(|n| n.powf(p)).collect();
        let xm = x.iter().sum::<f64>() / m;
        let ym = ys.iter().sum::<f64>() / m;
        let cov: f64 = x.iter().zip(&ys).map(|(a, b)| (a - xm) * (b - ym)).sum();
        let var: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
        let slope = -cov / var;
        if slope > 0.0 {
            let params = [p, slope.ln(), ym + slope * xm];
            let s = sse(&params, &xs, &ys);
            if best.as_ref().map_or(true, |b| s < b.1) {
                best = Some((params, s));
            }
        }
        p += 0.01;
    }
    let (mut theta, mut cost) = best.ok_or_else(|| Error::InvalidArgument("no decaying fit found".into()))?;

    let mut lambda = 1e-3;
    for _ in 0..500 {
        let b = theta[1].exp();
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&n, &y) in xs.iter().zip(&ys) {
            let np = n.powf(theta[0]);
            let r = theta[2] - b * np - y;
            let j = Vector3::new(-b * np * n.ln(), -b * np, 1.0);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            let c = sse(&cand, &xs, &ys);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                theta = cand;
                cost = c;
                lambda = (lambda / 3.0).max(1e-15);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let inv_a = theta[0];
    Ok(ConcentrationFit {
        a: 1.0 / inv_a,
        b: theta[1].exp(),
        c: theta[2].exp(),
        inv_a,
        fit_window: (xs[0], *xs.last().unwrap()),
        residual: (cost / m).sqrt(),
        floor: opts.floor,
        n_points: xs.len(),
    })
}

/// (1 − √(1 − 16ζ²)) / (4ζ), the per-step decay of the Bose-Hubbard tail bound.
pub fn bh_decay_base(zeta: f64) -> f64 {
    if zeta == 0.0 {
        0.0
    } else {
        (1.0 - (1.0 - 16.0 * zeta * zeta).sqrt()) / (4.0 * zeta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhBoundConstants {
    pub site: usize,
    pub zeta: f64,
    pub m0: f64,
    pub u_param: f64,
    pub check_j: f64,
    pub decay_base: f64,
    /// `false` for the J̄_{i,k} = 0 branch, whose base is e^{−1}.
    pub general_branch: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BhCheckOptions {
    /// 𝔲_i = fraction · ΔU_i with U_i = 5J̄_{i,k} + ΔU_i.
    pub u_fraction: f64,
    /// Override for č𝒥; default 2𝒥̄.
    pub check_j: Option<f64>,
}

impl Default for BhCheckOptions {
    fn default() -> Self {
        Self { u_fraction: 0.5, check_j: None }
    }
}

pub fn bh_bound_constants(spec: &ModelSpec, opts: &BhCheckOptions) -> Result<Vec<BhBoundConstants>> {
    if spec.family != Family::BoseHubbardClass {
        return Err(Error::Hypothesis("not a Bose-Hubbard-class model".into()));
    }
    let c = extract_constants(spec);
    let k = spec.k as f64;
    let check_j = opts.check_j.unwrap_or(2.0 * c.jcal);
    let mut out = Vec::new();
    for i in 0..spec.n_sites {
        let u = spec.onsite_repulsion.get(i).copied().unwrap_or(0.0);
        let jk = c.jbar_k(i);
        if u <= 0.0 || u <= 5.0 * jk {
            return Err(Error::Hypothesis(format!("repulsive condition fails at site {i}: U={u}, 5J̄={}", 5.0 * jk)));
        }
        if jk == 0.0 {
            let m0 = (2f64.powf(2.0 / k) * (check_j / u).powi(2)).max(((16.0 * c.jcal + check_j) / u).powi(2));
            out.push(BhBoundConstants {
                site: i,
                zeta: 0.0,
                m0,
                u_param: 0.0,
                check_j,
                decay_base: (-1f64).exp(),
                general_branch: false,
            });
        } else {
            let du = u - 5.0 * jk;
            let up = opts.u_fraction * du;
            let zeta = jk / (u - up - jk);
            let m0 = (2f64.powf(2.0 / k) * (check_j / (u - jk)).powi(2))
                .max(((check_j * jk + 2.0 * c.jcal * (u - up - jk)) / (up * jk)).powi(2));
            out.push(BhBoundConstants {
                site: i,
                zeta,
                m0,
                u_param: up,
                check_j,
                decay_base: bh_decay_base(zeta),
                general_branch: true,
            });
        }
    }
    Ok(out)
}

/// Measured P(n_i ≥ x) against base^{2(x−M_{i,0})/k} at every representable x.
pub fn bh_concentration_check(
    spec: &ModelSpec,
    spectral: &SpectralData,
    space: &FockSpace,
    opts: &BhCheckOptions,
) -> Result<CheckReport> {
    let consts = match bh_bound_constants(spec, opts) {
        Ok(c) => c,
        Err(Error::Hypothesis(why)) => return Ok(CheckReport::hypothesis_failed("bh_concentration", why)),
        Err(e) => return Err(e),
    };
    let mut rep = CheckReport::new("bh_concentration");
    let k = spec.k as f64;
    for bc in &consts {
        let tail = tail_curve(&spectral.ground_vector, space, bc.site)?;
        for (x, &p) in tail.iter().enumerate().skip(1) {
            let bound = bc.decay_base.powf(2.0 * (x as f64 - bc.m0) / k);
            rep.le(format!("site{}_x{}", bc.site, x), p, bound, 1e-12, 1e-15);
        }
        rep.info(format!("site{}_M0", bc.site), bc.m0, bc.m0, format!("ζ={:.6} base={:.6}", bc.zeta, bc.decay_base));
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phi4BoundConstants {
    pub c_tilde: f64,
    pub c1: f64,
    pub mu_bar: f64,
    pub fbar_prime: f64,
    pub gap: f64,
    pub phi_mean_max: f64,
    pub k: usize,
}

pub fn phi4_bound_constants(spec: &ModelSpec, gap: f64, phi_mean_max: f64) -> Result<Phi4BoundConstants> {
    if gap <= 0.0 {
        return Err(Error::Degenerate);
    }
    let c = extract_constants(spec);
    if c.mu_bar <= 0.0 {
        return Err(Error::Hypothesis("μ̄ must be positive".into()));
    }
    let k = spec.k;
    let c1 = 2.0 * phi_mean_max + 4.0 * (c.mu_bar / gap).sqrt() + 1.0;
    let c_tilde = c1 * (k * k) as f64 * (c.fbar_prime / c.mu_bar).powf(1.0 / k as f64);
    Ok(Phi4BoundConstants { c_tilde, c1, mu_bar: c.mu_bar, fbar_prime: c.fbar_prime, gap, phi_mean_max, k })
}

/// max_i |⟨φ_i⟩| in the state.
pub fn max_phi_mean(state: &[C64], space: &FockSpace) -> Result<f64> {
    let mut m: f64 = 0.0;
    for i in 0..space.n_sites() {
        m = m.max(phi_op(space, i)?.expectation(state).norm());
    }
    Ok(m)
}

/// 4e^k exp(−k x^{1/k}/(8e C̃)).
pub fn phi4_tail_bound(consts: &Phi4BoundConstants, x: f64) -> f64 {
    let k = consts.k as f64;
    let e = std::f64::consts::E;
    4.0 * e.powf(k) * (-k * x.powf(1.0 / k) / (8.0 * e * consts.c_tilde)).exp()
}

pub fn phi4_concentration_check(spec: &ModelSpec, spectral: &SpectralData, space: &FockSpace) -> Result<CheckReport> {
    if spec.family != Family::Phi4Class || !spec.has_parity_symmetry() {
        return Ok(CheckReport::hypothesis_failed("phi4_concentration", "parity symmetry φ→−φ not satisfied"));
    }
    if spectral.degenerate || spectral.gap <= 0.0 {
        return Ok(CheckReport::hypothesis_failed("phi4_concentration", "degenerate ground state"));
    }
    let mut rep = CheckReport::new("phi4_concentration");
    let phi_mean = max_phi_mean(&spectral.ground_vector, space)?;
    rep.le("parity_phi_mean", phi_mean, 1e-8, 0.0, 0.0);
    // parity forces ⟨φ⟩ = 0; the constant is evaluated there
    let consts = phi4_bound_constants(spec, spectral.gap, 0.0)?;
    for site in 0..space.n_sites() {
        let tail = tail_curve(&spectral.ground_vector, space, site)?;
        for x in 0..space.cutoff(site) {
            rep.le(format!("site{site}_x{x}"), tail[x + 1], phi4_tail_bound(&consts, x as f64), 1e-12, 1e-15);
        }
    }
    rep.info("c_tilde", consts.c_tilde, consts.c_tilde, format!("č₁={:.6} Δ={:.6}", consts.c1, consts.gap));
    Ok(rep)
}
