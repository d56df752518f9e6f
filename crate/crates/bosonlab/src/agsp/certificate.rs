use super::chebyshev::ChebyshevAgsp;
use super::constants::ln_agsp_rank_bound;
use super::pipeline::{aligned_distance, Pipeline};
use crate::entanglement::bipartite;
use crate::error::{Error, Result};
use crate::fock::{inner, norm, SparseOperator};
use crate::linalg::{random_unit_vector, svd, LinearOp};
use crate::report::CheckReport;
use crate::C64;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Singular values below this fraction of the largest do not count toward a rank.
pub const RANK_FLOOR: f64 = 1e-10;
/// Largest realigned-operator side (d_L² or d_R²) handled by dense SVD.
pub const OPERATOR_SR_BUDGET: usize = 1600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub gate_value: f64,
    pub gate_ok: bool,
    pub rank_used: usize,
    /// Best rank-D approximation of the ground state.
    pub truncation_distance: f64,
    pub lemma_bound: f64,
    /// ψ = Kφ/‖Kφ‖ from the top Schmidt product state φ.
    pub agsp_distance: f64,
    pub agsp_distance_bound: f64,
    pub top_schmidt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgspReport {
    pub m: usize,
    pub gap: f64,
    pub width_measured: f64,
    pub width_used: f64,
    /// ‖KΩ − Ω‖ for the exact ground state of the filtered Hamiltonian.
    pub delta_k: f64,
    pub eps_k: f64,
    pub eps_k_power: f64,
    pub eps_bound: f64,
    pub ln_dk_bound: f64,
    pub dk_numeric: Option<usize>,
    pub sr_product: usize,
    pub theory_gate_value: f64,
    pub bootstrap: Option<BootstrapReport>,
    /// Measured ‖Ω_ambient − ψ‖ for the bootstrap witness, against ε_K√(2D_K) + δ.
    pub end_to_end: Option<(f64, f64)>,
    pub checks: CheckReport,
}

fn numeric_rank(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > RANK_FLOOR * top).count()
}

/// Reshapes a vector (left index fastest) into a d_L × d_R matrix.
/// Operator Schmidt rank across the cut by realignment.
pub fn operator_schmidt_rank(k: &DMatrix<C64>, dl: usize, dr: usize) -> Result<usize> {
    if dl * dl > OPERATOR_SR_BUDGET && dr * dr > OPERATOR_SR_BUDGET {
        return Err(Error::Budget(format!("realigned operator {}×{} exceeds the SVD budget", dl * dl, dr * dr)));
    }
    let r = DMatrix::from_fn(dl * dl, dr * dr, |a, b| {
        let (il, jl) = (a % dl, a / dl);
        let (ir, jr) = (b % dr, b / dr);
        k[(il + dl * ir, jl + dl * jr)]
    });
    Ok(numeric_rank(&svd(&r).1))
}

/// Schmidt coefficients (descending) of a vector across the cut.
pub fn schmidt_values(v: &[C64], dl: usize, dr: usize) -> Vec<f64> {
    svd(&bipartite(v, dl, dr)).1
}

/// Bootstrap with measured (ε_K, D_K, δ_K): when ε_K²D_K ≤ 1/2 the best
/// rank-D_K approximation of Ω must lie within ε_K√(2D_K) + δ_K, and the
/// filtered top Schmidt product state within 2ε_K√(1−λ₁²)/λ₁.
pub fn bootstrap_check(
    k: &dyn LinearOp,
    ground: &[C64],
    dl: usize,
    dr: usize,
    eps_k: f64,
    d_k: usize,
    delta_k: f64,
    checks: &mut CheckReport,
) -> Result<BootstrapReport> {
    let gate_value = eps_k * eps_k * d_k as f64;
    let gate_ok = gate_value <= 0.5;
    let (u, s, vt) = svd(&bipartite(ground, dl, dr));
    let rank = d_k.min(s.len()).max(1);
    let mut trunc = DMatrix::<C64>::zeros(dl, dr);
    for j in 0..rank {
        trunc += u.column(j) * vt.row(j) * C64::new(s[j], 0.0);
    }
    let mut psi_t: Vec<C64> = (0..dl * dr).map(|i| trunc[(i % dl, i / dl)]).collect();
    let n = norm(&psi_t);
    psi_t.iter_mut().for_each(|x| *x /= n);
    let truncation_distance = aligned_distance(&psi_t, ground);
    let lemma_bound = eps_k * (2.0 * d_k as f64).sqrt() + delta_k;
    let prod = u.column(0) * vt.row(0);
    let phi: Vec<C64> = (0..dl * dr).map(|i| prod[(i % dl, i / dl)]).collect();
    let mut kphi = k.apply(&phi);
    let kn = norm(&kphi);
    kphi.iter_mut().for_each(|x| *x /= kn);
    let agsp_distance = aligned_distance(&kphi, ground);
    let lam = s[0];
    let agsp_distance_bound = 2.0 * eps_k * (1.0 - lam * lam).max(0.0).sqrt() / lam + 2.0 * delta_k;
    checks.le("bootstrap_filtered_product", agsp_distance, agsp_distance_bound, 1e-8, 1e-9);
    if gate_ok {
        checks.le("bootstrap_lemma", truncation_distance, lemma_bound, 1e-8, 1e-9);
    } else {
        checks.skip("bootstrap_lemma", format!("ε_K²D_K = {gate_value:.3e} > 1/2"));
    }
    Ok(BootstrapReport {
        gate_value,
        gate_ok,
        rank_used: rank,
        truncation_distance,
        lemma_bound,
        agsp_distance,
        agsp_distance_bound,
        top_schmidt: lam,
    })
}

/// Inputs describing a filtered Hamiltonian on a bipartite product space.
pub struct CertificateInput<'a> {
    pub h: &'a SparseOperator,
    /// Full spectrum ascending.
    pub spectrum: &'a [f64],
    pub ground: &'a [C64],
    pub dl: usize,
    pub dr: usize,
    /// Local dimensions of the right-hand factors (for random product states).
    pub factor_dims: Vec<usize>,
    /// (d, q, l, k) entering the Schmidt-rank bound.
    pub rank_params: (usize, usize, usize, usize),
    pub seed: u64,
}

pub fn agsp_certificate(input: &CertificateInput, m: usize) -> Result<AgspReport> {
    let n = input.h.dim();
    if n != input.dl * input.dr || input.spectrum.len() != n {
        return Err(Error::DimensionMismatch(n, input.dl * input.dr));
    }
    let e0 = input.spectrum[0];
    let gap = input.spectrum.get(1).map(|e| e - e0).unwrap_or(0.0);
    if !(gap > 1e-10 * e0.abs().max(1.0)) {
        return Err(Error::Degenerate);
    }
    let width_measured = input.spectrum[n - 1] - e0;
    let width_used = 1.01 * width_measured;
    let k = ChebyshevAgsp::new(input.h, e0, gap, width_used, m)?;
    let mut checks = CheckReport::new(format!("agsp_m{m}"));

    let kg = k.apply(input.ground);
    let diff: Vec<C64> = kg.iter().zip(input.ground).map(|(a, b)| a - b).collect();
    let delta_k = norm(&diff);
    checks.le("fixes_ground", delta_k, 1e-8, 0.0, 0.0);

    let eps_k = input.spectrum[1..].iter().map(|&e| k.scalar(e - e0).abs()).fold(0.0, f64::max);
    let eps_bound = k.error_bound();
    checks.le("contraction", eps_k, eps_bound, 1e-9, 1e-14);

    // power iteration on K(1−P) from a random start
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
    let mut v = random_unit_vector(n, &mut rng);
    let mut eps_k_power = 0.0;
    for _ in 0..300 {
        let ov = inner(input.ground, &v);
        v.iter_mut().zip(input.ground).for_each(|(x, g)| *x -= ov * g);
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = k.apply(&v);
        let est = norm(&w);
        let done = (est - eps_k_power).abs() <= 1e-6 * est.max(1e-300);
        eps_k_power = est;
        v = w;
        if done {
            break;
        }
    }
    checks.le("power_iteration_consistent", eps_k_power, eps_k, 1e-6, 1e-14);

    let (d, q, l, kk) = input.rank_params;
    let ln_dk_bound = ln_agsp_rank_bound(m, d, q, l, kk);

    // product state on the bipartite space
    let (mut left, mut right) = (vec![C64::new(1.0, 0.0)], vec![C64::new(1.0, 0.0)]);
    let mut acc = 1;
    for &dim in &input.factor_dims {
        let f = random_unit_vector(dim, &mut rng);
        let target = if acc < input.dl { &mut left } else { &mut right };
        *target = kron_vec(&f, target);
        acc *= dim;
    }
    if left.len() != input.dl || right.len() != input.dr {
        return Err(Error::InvalidArgument("factor dimensions do not match the cut".into()));
    }
    let product = kron_vec(&right, &left);
    let sr_product = numeric_rank(&schmidt_values(&k.apply(&product), input.dl, input.dr));
    checks.le("schmidt_rank_product", (sr_product as f64).ln(), ln_dk_bound, 1e-12, 1e-12);

    let dk_numeric = if input.dl * input.dl <= OPERATOR_SR_BUDGET || input.dr * input.dr <= OPERATOR_SR_BUDGET {
        let dense = crate::linalg::to_dense_op(&k);
        let r = operator_schmidt_rank(&dense, input.dl, input.dr)?;
        checks.le("operator_schmidt_rank", (r as f64).ln(), ln_dk_bound, 1e-12, 1e-12);
        checks.le("product_rank_vs_operator_rank", sr_product as f64, r as f64, 0.0, 0.0);
        Some(r)
    } else {
        checks.skip("operator_schmidt_rank", "realigned operator beyond the SVD budget");
        None
    };
    let theory_gate_value = (2.0 * eps_k.ln() + ln_dk_bound).exp();
    checks.info("theory_gate", theory_gate_value, 0.5, "ε_K²·D_K with the Schmidt-rank bound");
    let bootstrap = match dk_numeric {
        Some(r) => Some(bootstrap_check(&k, input.ground, input.dl, input.dr, eps_k, r, delta_k, &mut checks)?),
        None => None,
    };
    Ok(AgspReport {
        m,
        gap,
        width_measured,
        width_used,
        delta_k,
        eps_k,
        eps_k_power,
        eps_bound,
        ln_dk_bound,
        dk_numeric,
        sr_product,
        theory_gate_value,
        bootstrap,
        end_to_end: None,
        checks,
    })
}

/// Kronecker product of vectors with `b` fastest.
fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

impl Pipeline {
    pub fn certificate_input(&self, seed: u64) -> CertificateInput<'_> {
        let nl = self.blocks.left_blocks();
        let radices: Vec<usize> = (0..self.block_space.n_sites()).map(|s| self.block_space.cutoff(s) + 1).collect();
        let d = self.reduced.cutoffs().iter().max().unwrap() + 1;
        CertificateInput {
            h: &self.h_tilde,
            spectrum: &self.tilde_spectrum,
            ground: &self.tilde_ground,
            dl: radices[..nl].iter().product(),
            dr: radices[nl..].iter().product(),
            factor_dims: radices,
            rank_params: (d, self.blocks.q, self.blocks.l, self.constants.k),
            seed,
        }
    }

    /// Certificate for K(m, H̃) with the end-to-end bootstrap against the
    /// ambient ground state, δ being the measured total displacement.
    pub fn agsp_certificate(&self, m: usize, seed: u64) -> Result<AgspReport> {
        let input = self.certificate_input(seed);
        let mut rep = agsp_certificate(&input, m)?;
        if let Some(b) = &rep.bootstrap {
            if b.gate_ok {
                let (u, s, vt) = svd(&bipartite(&self.tilde_ground, input.dl, input.dr));
                let mut trunc = DMatrix::<C64>::zeros(input.dl, input.dr);
                for j in 0..b.rank_used {
                    trunc += u.column(j) * vt.row(j) * C64::new(s[j], 0.0);
                }
                let mut psi: Vec<C64> = (0..input.dl * input.dr).map(|i| trunc[(i % input.dl, i / input.dl)]).collect();
                let nn = norm(&psi);
                psi.iter_mut().for_each(|x| *x /= nn);
                let amb = self.to_ambient(&psi)?;
                let measured = aligned_distance(&amb, &self.ambient_ground);
                let delta = self.total_displacement()? + rep.delta_k;
                let bound = rep.eps_k * (2.0 * b.rank_used as f64).sqrt() + delta;
                rep.checks.le("bootstrap_end_to_end", measured, bound, 1e-8, 1e-9);
                rep.end_to_end = Some((measured, bound));
            }
        }
        Ok(rep)
    }
}
