use crate::error::{Error, Result};
use crate::models::jbar_profile;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// ḡ_x = g₀ + g₁ log^χ(x+1), the local energy scale after truncating site x
/// at N̄_x bosons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GBar {
    pub g: f64,
    pub g0: f64,
    pub g1: f64,
    pub chi: f64,
}

impl GBar {
    /// g₀ = g𝔟^{−𝔞k/2}2^{𝔞k/2}log^{𝔞k/2}(1/ε₀), g₁ = g𝔟^{−𝔞k/2}6^{𝔞k/2}, χ = 𝔞k/2.
    pub fn new(g: f64, k: usize, a: f64, b: f64, eps0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 1.0) || a <= 0.0 || b <= 0.0 || g < 0.0 {
            return Err(Error::InvalidArgument(format!("ḡ needs g ≥ 0, 𝔞,𝔟 > 0, ε₀ ∈ (0,1); got g={g} 𝔞={a} 𝔟={b} ε₀={eps0}")));
        }
        let chi = a * k as f64 / 2.0;
        let pre = g * b.powf(-chi);
        Ok(Self { g, g0: pre * 2f64.powf(chi) * (1.0 / eps0).ln().powf(chi), g1: pre * 6f64.powf(chi), chi })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.g0 + self.g1 * (x.max(0.0) + 1.0).ln().powf(self.chi)
    }
}

/// Numerical supremum of Σ_{y≥y₀} ḡ_{r+y}(y^{p−1}+1)J̄(y) / [ḡ_{r+y₀}(y₀^p+1)J̄(y₀)]
/// over r ≥ 0, y₀ ≥ 1, clamped at 1. Sums run to Y = 10⁵ with the remainder
/// bounded by the integral of the (eventually decreasing) summand.
pub fn eta_p(p: u32, gbar: &GBar, alpha_bar: f64) -> Result<f64> {
    if alpha_bar <= 0.0 || p as f64 >= alpha_bar + 2.0 {
        return Err(Error::Hypothesis(format!("η_{p} needs p < α = ᾱ+2 (ᾱ={alpha_bar})")));
    }
    const Y: usize = 100_000;
    let pf = p as f64;
    let mut r_grid: Vec<f64> = (0..=32).map(|r| r as f64).collect();
    r_grid.extend((1..=40).map(|j| 32.0 * 10f64.powf(j as f64 * 0.125)));
    let mut y0_grid: Vec<usize> = (1..=64).collect();
    y0_grid.extend((1..=24).map(|j| (64.0 * 10f64.powf(j as f64 * 0.125)) as usize));
    let mut best: f64 = 1.0;
    for &r in &r_grid {
        let f = |y: f64| gbar.eval(r + y) * (y.powf(pf - 1.0) + 1.0) * jbar_profile(y, alpha_bar);
        let tail = quadrature::integrate(
            |s: f64| {
                let y = Y as f64 * s.exp();
                f(y) * y
            },
            0.0,
            400.0,
            1e-14,
        )
        .integral;
        // suffix sums S[y] = Σ_{y' ≥ y}
        let mut suffix = vec![0.0; Y + 2];
        suffix[Y + 1] = tail;
        for y in (1..=Y).rev() {
            suffix[y] = suffix[y + 1] + f(y as f64);
        }
        for &y0 in &y0_grid {
            let y0f = y0 as f64;
            let den = gbar.eval(r + y0f) * (y0f.powf(pf) + 1.0) * jbar_profile(y0f, alpha_bar);
            best = best.max(suffix[y0] / den);
        }
    }
    Ok(best)
}

/// Integrates a non-negative, eventually decreasing integrand on [0, ∞) over
/// doubling segments. Returns (value, error estimate) where the estimate
/// adds per-segment quadrature errors and a geometric bound on the
/// untouched remainder.
pub fn integrate_half_line(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut err = 0.0;
    let mut prev_seg = f64::INFINITY;
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let out = quadrature::integrate(&f, a, b, 1e-13);
        total += out.integral;
        err += out.error_estimate;
        let seg = out.integral.abs();
        if seg < 1e-16 * total.abs().max(1e-300) && seg <= prev_seg {
            let ratio = if prev_seg.is_finite() && prev_seg > 0.0 { (seg / prev_seg).min(0.5) } else { 0.5 };
            err += seg * ratio / (1.0 - ratio);
            return (total, err);
        }
        prev_seg = seg;
        a = b;
        b *= 2.0;
    }
    (total, f64::INFINITY)
}

/// Constants of the block-truncated Hamiltonian analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgspConstants {
    pub k: usize,
    pub q: usize,
    pub l: usize,
    pub alpha_bar: f64,
    pub gbar: GBar,
    pub eta1: f64,
    pub eta2: f64,
    /// c₀ = 4η₁η₂J̄(1)
    pub c0: f64,
    /// c̃₁ = 2^{χ+3}·4kη₁/(1−2^{−ᾱ})
    pub c1t: f64,
    /// c̃₂ = c̃₁[2χ(2+ᾱ)/ᾱ]^χ
    pub c2t: f64,
    /// c̃₃ = 2^ᾱ + 2(2+ᾱ)/ᾱ
    pub c3t: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Relative quadrature error estimate of μ₁, μ₂ (max of the two).
    pub mu_rel_err: f64,
}

impl AgspConstants {
    pub fn new(k: usize, q: usize, l: usize, alpha_bar: f64, gbar: GBar) -> Result<Self> {
        let eta1 = eta_p(1, &gbar, alpha_bar)?;
        let eta2 = eta_p(2, &gbar, alpha_bar)?;
        let chi = gbar.chi;
        let c0 = 4.0 * eta1 * eta2 * jbar_profile(1.0, alpha_bar);
        let c1t = 2f64.powf(chi + 3.0) * 4.0 * k as f64 * eta1 / (1.0 - 2f64.powf(-alpha_bar));
        let c2t = c1t * (2.0 * chi * (2.0 + alpha_bar) / alpha_bar).powf(chi);
        let c3t = 2f64.powf(alpha_bar) + 2.0 * (2.0 + alpha_bar) / alpha_bar;
        let (i1, e1) = integrate_half_line(|z| (z + 3.0) * (-z / (4.0 * E * (1.0 + (z + 3.0).ln().powf(chi)))).exp());
        let beta = (2.0 * c0 * c3t + c1t) / (4.0 * E * c2t);
        let (i2, e2) = integrate_half_line(|z| (z + 3.0) * (-(beta * z).powf(1.0 / (1.0 + chi))).exp());
        let mu1 = 1.0 + i1;
        let mu2 = 1.0 + i2;
        Ok(Self {
            k,
            q,
            l,
            alpha_bar,
            gbar,
            eta1,
            eta2,
            c0,
            c1t,
            c2t,
            c3t,
            mu1,
            mu2,
            mu_rel_err: (e1 / mu1).max(e2 / mu2),
        })
    }

    fn ql(&self) -> f64 {
        (self.q * self.l) as f64
    }

    fn lead(&self) -> f64 {
        2.0 * self.c0 * self.c3t + self.c1t
    }

    /// T_m = (2c₀c̃₃+c̃₁)ḡ_{m+ql} + c̃₂g₁m^χ
    pub fn t_m(&self, m: usize) -> f64 {
        let mf = m as f64;
        self.lead() * self.gbar.eval(mf + self.ql()) + self.c2t * self.gbar.g1 * mf.powf(self.gbar.chi)
    }

    /// (T_m m)^m with 0⁰ = 1.
    pub fn multicommutator_factor(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            (self.t_m(m) * m as f64).powi(m as i32)
        }
    }

    /// ‖H̄ − H_t‖ ≤ 4η₁η₂qḡ_{ql}(l²+1)J̄(l)
    pub fn interaction_bound(&self) -> f64 {
        let l = self.l as f64;
        4.0 * self.eta1 * self.eta2 * self.q as f64 * self.gbar.eval(self.ql()) * (l * l + 1.0) * jbar_profile(l, self.alpha_bar)
    }

    /// 2q(τ + 2c₀ḡ_{ql})
    pub fn width_bound(&self, tau: f64) -> f64 {
        2.0 * self.q as f64 * (tau + 2.0 * self.c0 * self.gbar.eval(self.ql()))
    }

    /// ℰ_y = μ₁exp(−y/(4eT̃_{y/T₀})) + μ₂exp(−(y/(4ec̃₂g₁))^{1/(1+χ)}); +∞ for y ≤ 0.
    pub fn energy_error(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        let t0 = self.t_m(0);
        let t_tilde = self.lead() * self.gbar.eval(y / t0 + self.ql());
        let second = if self.gbar.g1 > 0.0 {
            self.mu2 * (-(y / (4.0 * E * self.c2t * self.gbar.g1)).powf(1.0 / (1.0 + self.gbar.chi))).exp()
        } else {
            0.0
        };
        self.mu1 * (-y / (4.0 * E * t_tilde)).exp() + second
    }

    /// (ε₁, ε₂) at cutoff offset τ.
    pub fn cutoff_errors(&self, tau: f64) -> (f64, f64) {
        let y = tau - 4.0 * self.c0 * self.gbar.eval(self.ql()) - 8.0 * self.t_m(0);
        let e1 = 2.0 * self.q as f64 * self.energy_error(y);
        let e2 = if e1 < 1.0 { (e1 / (1.0 - e1) * self.width_bound(tau)).sqrt() } else { f64::INFINITY };
        (e1, e2)
    }
}

/// Schmidt-rank bound for H_t^m: min{[2+(2dl)^k]^m, d^{ql}(q+m+1)^{q+1}[e(q+1)²(2dl)^k]^{m/(q+1)}},
/// returned as a natural logarithm.
pub fn ln_schmidt_rank_bound(m: usize, d: usize, q: usize, l: usize, k: usize) -> f64 {
    let (mf, df, qf, lf, kf) = (m as f64, d as f64, q as f64, l as f64, k as f64);
    let x = kf * (2.0 * df * lf).ln();
    let first = mf * (2.0 + x.exp()).ln();
    let second = qf * lf * df.ln() + (qf + 1.0) * (qf + mf + 1.0).ln() + mf / (qf + 1.0) * (1.0 + 2.0 * (qf + 1.0).ln() + x);
    first.min(second)
}

/// ln D_K for a degree-m polynomial: ln Σ_{j=0}^m SR(H_t^j).
pub fn ln_agsp_rank_bound(m: usize, d: usize, q: usize, l: usize, k: usize) -> f64 {
    let terms: Vec<f64> = (0..=m).map(|j| ln_schmidt_rank_bound(j, d, q, l, k)).collect();
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}
