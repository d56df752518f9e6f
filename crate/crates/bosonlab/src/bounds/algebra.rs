use crate::error::{Error, Result};
use crate::fock::{phi_op, pi_op, FockSpace, OpKind, SparseOperator};
use crate::linalg::eigh;
use crate::models::{build_term, TermRole, TermSpec};
use crate::report::CheckReport;
use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn binom(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// C_{k,m,n} = k!·C(m,k)·C(n,k) for k = 1..=min(m,n).
pub fn commutator_coefficients(m: u32, n: u32) -> Vec<(u32, u128)> {
    let mut fact: u128 = 1;
    (1..=m.min(n))
        .map(|k| {
            fact *= k as u128;
            (k, fact * binom(m, k) * binom(n, k))
        })
        .collect()
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Max interior deviation of [φ^m, π^n] from Σ_k i^k C_{k,m,n} π^{n−k}φ^{m−k}.
pub fn commutator_identity_deviation(cutoff: usize, m: u32, n: u32) -> Result<f64> {
    let s = FockSpace::uniform(1, cutoff)?;
    let phi = phi_op(&s, 0)?;
    let pi = pi_op(&s, 0)?;
    let lhs = crate::fock::commutator(&phi.pow(m), &pi.pow(n))?;
    let mut rhs = SparseOperator::zeros(s.dim());
    for (k, c) in commutator_coefficients(m, n) {
        let term = pi.pow(n - k).matmul(&phi.pow(m - k))?.scale(i_pow(k) * c as f64);
        rhs = rhs.add(&term)?;
    }
    let mask = s.interior_mask((m + n) as usize);
    if !mask.iter().any(|&b| b) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} leaves no interior for degree {}", m + n)));
    }
    lhs.max_abs_diff_on(&rhs, &mask)
}

pub fn commutator_identity_check(max_mn: u32, tol: f64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("commutator_identity");
    for m in 1..=max_mn {
        for n in 1..=max_mn {
            let dev = commutator_identity_deviation((2 * max_mn + 8) as usize, m, n)?;
            rep.le(format!("m{m}_n{n}"), dev, tol, 0.0, 0.0);
        }
    }
    Ok(rep)
}

/// [[π², φ^m], φ^m] against −2m² φ^{2m−2} on the interior.
pub fn double_commutator_deviation(cutoff: usize, m: u32) -> Result<f64> {
    let s = FockSpace::uniform(1, cutoff)?;
    let phi = phi_op(&s, 0)?;
    let pi2 = pi_op(&s, 0)?.pow(2);
    let pm = phi.pow(m);
    let dc = crate::fock::commutator(&crate::fock::commutator(&pi2, &pm)?, &pm)?;
    let target = phi.pow(2 * m - 2).scale(C64::new(-2.0 * (m * m) as f64, 0.0));
    let mask = s.interior_mask((2 * m + 2) as usize);
    dc.max_abs_diff_on(&target, &mask)
}

/// Exact Gaussian integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GaussInt {
    pub re: i128,
    pub im: i128,
}

impl GaussInt {
    pub const fn new(re: i128, im: i128) -> Self {
        Self { re, im }
    }
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
    fn scale(self, s: i128) -> Self {
        Self::new(self.re * s, self.im * s)
    }
    fn times_i(self) -> Self {
        Self::new(-self.im, self.re)
    }
    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }
    pub fn abs(self) -> f64 {
        ((self.re as f64).powi(2) + (self.im as f64).powi(2)).sqrt()
    }
    pub fn to_c64(self) -> C64 {
        C64::new(self.re as f64, self.im as f64)
    }
}

/// λ^{(s)}_{m₁,m₂} with (φ²+π²)^s = Σ λ φ^{m₁} π^{m₂}, from
/// λ^{(s+1)}_{a,b} = λ_{a−2,b} + λ_{a,b−2} − 2i(a+1)λ_{a+1,b−1} − (a+2)(a+1)λ_{a+2,b}.
pub fn lambda_coefficients(s: u32) -> BTreeMap<(u32, u32), GaussInt> {
    let mut cur: BTreeMap<(u32, u32), GaussInt> = BTreeMap::new();
    if s == 0 {
        cur.insert((0, 0), GaussInt::new(1, 0));
        return cur;
    }
    cur.insert((2, 0), GaussInt::new(1, 0));
    cur.insert((0, 2), GaussInt::new(1, 0));
    for _ in 1..s {
        let mut next: BTreeMap<(u32, u32), GaussInt> = BTreeMap::new();
        for (&(m1, m2), &lam) in &cur {
            // φ² from the left
            let e = next.entry((m1 + 2, m2)).or_default();
            *e = e.add(lam);
            // π² φ^{m1} π^{m2} = φ^{m1}π^{m2+2} − 2i m1 φ^{m1−1}π^{m2+1} − m1(m1−1) φ^{m1−2}π^{m2}
            let e = next.entry((m1, m2 + 2)).or_default();
            *e = e.add(lam);
            if m1 >= 1 {
                let e = next.entry((m1 - 1, m2 + 1)).or_default();
                *e = e.add(lam.times_i().scale(-2 * m1 as i128));
            }
            if m1 >= 2 {
                let e = next.entry((m1 - 2, m2)).or_default();
                *e = e.add(lam.scale(-((m1 * (m1 - 1)) as i128)));
            }
        }
        next.retain(|_, v| !v.is_zero());
        cur = next;
    }
    cur
}

/// |λ^{(s)}_{m₁,m₂}| ≤ 4^s s^{2s−m₁−m₂} for every coefficient, s = 1..=s_max.
pub fn lambda_bound_check(s_max: u32) -> CheckReport {
    let mut rep = CheckReport::new("lambda_bound");
    for s in 1..=s_max {
        let mut worst: f64 = 0.0;
        for (&(m1, m2), lam) in &lambda_coefficients(s) {
            let bound = 4f64.powi(s as i32) * (s as f64).powi(2 * s as i32 - (m1 + m2) as i32);
            worst = worst.max(lam.abs() / bound);
        }
        rep.le(format!("s{s}_max_ratio"), worst, 1.0, 0.0, 0.0);
    }
    rep
}

/// Interior deviation of (φ²+π²)^s from Σ λ φ^{m₁}π^{m₂}.
pub fn lambda_operator_deviation(s: u32, cutoff: usize) -> Result<f64> {
    let sp = FockSpace::uniform(1, cutoff)?;
    let phi = phi_op(&sp, 0)?;
    let pi = pi_op(&sp, 0)?;
    let base = phi.pow(2).add(&pi.pow(2))?;
    let lhs = base.pow(s);
    let mut rhs = SparseOperator::zeros(sp.dim());
    for (&(m1, m2), lam) in &lambda_coefficients(s) {
        rhs = rhs.add(&phi.pow(m1).matmul(&pi.pow(m2))?.scale(lam.to_c64()))?;
    }
    let mask = sp.interior_mask(2 * s as usize);
    lhs.max_abs_diff_on(&rhs, &mask)
}

pub const HOPPING_BUDGET: usize = 2000;

/// B̂ = b†_{i_k}⋯b†_{i_{s+1}} b_{i_s}⋯b_{i_1} against Π_j (n̂_{i_j}+k)^{1/2}:
/// min eigenvalue of the difference of the right side and |B̂|.
pub fn hopping_inequality_check(space: &FockSpace, multiset: &[usize], split: usize) -> Result<CheckReport> {
    if space.dim() > HOPPING_BUDGET {
        return Err(Error::Budget(format!("hopping check needs dense dimension {} ≤ {HOPPING_BUDGET}", space.dim())));
    }
    if split > multiset.len() || multiset.is_empty() {
        return Err(Error::InvalidArgument("split must lie within the multiset".into()));
    }
    let k = multiset.len();
    let mut factors: Vec<(usize, OpKind)> = multiset[split..].iter().rev().map(|&i| (i, OpKind::Bdag)).collect();
    factors.extend(multiset[..split].iter().rev().map(|&i| (i, OpKind::B)));
    let b = build_term(&TermSpec::new(1.0, factors, TermRole::Coupling), space)?.to_dense();
    let btb = b.adjoint() * &b;
    let (vals, vecs) = eigh(&btb);
    let sq = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    let abs_b = &vecs * sq * vecs.adjoint();
    let diag: Vec<C64> = (0..space.dim())
        .map(|idx| {
            let occ = space.decode(idx);
            let p: f64 = multiset.iter().map(|&i| ((occ[i] + k) as f64).sqrt()).product();
            C64::new(p, 0.0)
        })
        .collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let min_eig = eigh(&(d - abs_b)).0[0];
    let mut rep = CheckReport::new("hopping_inequality");
    rep.le("neg_min_eigenvalue", -min_eig, 1e-8, 0.0, 0.0);
    Ok(rep)
}

fn seq_rhs(a: &[f64], x: &[f64], zeta: f64, m: usize) -> f64 {
    let last = a.len() - 1;
    let mut r = zeta * x[m - 1] / x[m] * a[m - 1];
    if m < last {
        r += zeta * x[m + 1] / x[m] * a[m + 1];
    }
    r
}

/// Saturation oracle for the sequence lemma: random feasible seeds are
/// iterated a_m ← ζ(x_{m−1}/x_m)a_{m−1} + ζ(x_{m+1}/x_m)a_{m+1} to the fixed
/// point, which dominates every feasible sequence with the same a₀.
pub fn sequence_lemma_check(x: &[f64], zeta: f64, trials: usize, seed: u64) -> Result<CheckReport> {
    if !(zeta > 0.0 && zeta <= 0.5) {
        return Err(Error::InvalidArgument(format!("ζ={zeta} outside (0, 1/2]")));
    }
    if x.len() < 2 || x.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("x must have ≥ 2 strictly positive entries".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = (1.0 - (1.0 - 4.0 * zeta * zeta).sqrt()) / (2.0 * zeta);
    let n = x.len();
    let mut rep = CheckReport::new("sequence_lemma");
    for t in 0..trials.max(1) {
        let a0 = 1.0;
        let profile: Vec<f64> = (0..n).map(|i| if i == 0 { a0 } else { rng.gen::<f64>() }).collect();
        let feasible = |s: f64| {
            let a: Vec<f64> = profile.iter().enumerate().map(|(i, &p)| if i == 0 { p } else { s * p }).collect();
            (1..n).all(|m| a[m] <= seq_rhs(&a, x, zeta, m) + 1e-15)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        if feasible(1.0) {
            lo = 1.0;
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let mut a: Vec<f64> = profile.iter().enumerate().map(|(i, &p)| if i == 0 { p } else { lo * p }).collect();
        for _ in 0..2_000_000 {
            let mut change: f64 = 0.0;
            for m in 1..n {
                let r = seq_rhs(&a, x, zeta, m);
                change = change.max((r - a[m]).abs() / r.abs().max(1e-300));
                a[m] = r;
            }
            if change < 1e-15 {
                break;
            }
        }
        let worst = (1..n)
            .map(|m| a[m] / (base.powi(m as i32) * x[0] * a0 / x[m]))
            .fold(0.0, f64::max);
        rep.le(format!("trial{t}_max_ratio"), worst, 1.0, 1e-9, 0.0);
    }
    Ok(rep)
}

fn pow_big(b: u64, e: u32) -> BigUint {
    BigUint::from(b).pow(e)
}

/// C(m₁+m₂, m₁)·m₁^{m₁}·m₂^{m₂} ≤ (m₁+m₂)^{m₁+m₂} exhaustively (0⁰ = 1),
/// in exact integer arithmetic.
pub fn binomial_lemma_check(max_m: u32) -> CheckReport {
    let mut rep = CheckReport::new("binomial_lemma");
    let mut violations = 0usize;
    let mut worst_log = f64::NEG_INFINITY;
    for m1 in 0..=max_m {
        for m2 in 0..=max_m {
            let n = m1 + m2;
            let mut c = BigUint::from(1u32);
            for i in 0..m1 {
                c = c * BigUint::from(n - i) / BigUint::from(i + 1);
            }
            let lhs = &c * pow_big(m1 as u64, m1) * pow_big(m2 as u64, m2);
            let rhs = pow_big(n as u64, n);
            if lhs > rhs {
                violations += 1;
            }
            let lr = lhs.bits() as f64 - rhs.bits() as f64;
            worst_log = worst_log.max(lr);
        }
    }
    rep.le("violations", violations as f64, 0.0, 0.0, 0.0);
    let eq = BigUint::from(1u32) * pow_big(0, 0) * pow_big(5, 5) == pow_big(5, 5);
    rep.le("m1_zero_equality", if eq { 0.0 } else { 1.0 }, 0.0, 0.0, 0.0);
    rep.info("max_log2_ratio_estimate", worst_log, 0.0, "bit-length difference, informational");
    rep
}
