use crate::bounds::concentration::{bh_bound_constants, phi4_bound_constants, BhCheckOptions};
use crate::error::{Error, Result};
use crate::fock::{embed, inner, local_product, FockSpace, OpKind, SparseOperator};
use crate::models::{extract_constants, Family, ModelSpec};
use crate::report::CheckReport;
use crate::spectra::SpectralData;

/// Var(O)·Δ ≤ ½|⟨[[H,O],O]⟩| in the ground state.
pub fn tradeoff_check(h: &SparseOperator, spectral: &SpectralData, o: &SparseOperator) -> Result<CheckReport> {
    if h.dim() != o.dim() {
        return Err(Error::DimensionMismatch(h.dim(), o.dim()));
    }
    if spectral.degenerate || spectral.gap <= 0.0 {
        return Ok(CheckReport::hypothesis_failed("tradeoff", "degenerate ground state"));
    }
    let herm = o.hermiticity_error();
    if herm > 1e-12 * o.max_abs().max(1.0) {
        return Ok(CheckReport::hypothesis_failed("tradeoff", format!("observable not Hermitian ({herm:e})")));
    }
    let psi = &spectral.ground_vector;
    let hp = h.apply(psi);
    let op = o.apply(psi);
    let oop = o.apply(&op);
    let mean = inner(psi, &op).re;
    let var = inner(psi, &oop).re - mean * mean;
    // ⟨HO²⟩ − 2⟨OHO⟩ + ⟨O²H⟩
    let hop = h.apply(&op);
    let dc = inner(&hp, &oop) - inner(&op, &hop) * 2.0 + inner(&oop, &hp);
    let lhs = var.max(0.0) * spectral.gap;
    let rhs = 0.5 * dc.norm();
    let scale = spectral.e0.abs().max(1.0) * o.max_abs().max(1.0).powi(2);
    let mut rep = CheckReport::new("tradeoff");
    rep.le("var_times_gap", lhs, rhs, 1e-8, 1e-10 * scale);
    rep.info("variance", var, f64::NAN, "");
    Ok(rep)
}

fn site_power(space: &FockSpace, site: usize, kind: OpKind, s: usize) -> Result<SparseOperator> {
    let local = if matches!(kind, OpKind::N) {
        local_product(&[OpKind::NPow(s as u32)], space.cutoff(site))
    } else {
        local_product(&vec![kind; s], space.cutoff(site))
    };
    embed(&local, space, site)
}

/// Ground-state moment bounds. φ⁴ class: ⟨φ^s⟩, ⟨π^s⟩, ⟨n^s⟩ for s = 1..=s_max.
/// Bose-Hubbard class: ⟨n_i^{k/2}⟩ and Q_Ω.
pub fn moment_suite(spec: &ModelSpec, spectral: &SpectralData, space: &FockSpace, s_max: usize) -> Result<CheckReport> {
    match spec.family {
        Family::Phi4Class => phi4_moments(spec, spectral, space, s_max),
        Family::BoseHubbardClass => bh_moments(spec, spectral, space),
        Family::Explicit => Ok(CheckReport::hypothesis_failed("moments", "no moment bound for explicit models")),
    }
}

fn phi4_moments(spec: &ModelSpec, spectral: &SpectralData, space: &FockSpace, s_max: usize) -> Result<CheckReport> {
    if spectral.degenerate || spectral.gap <= 0.0 {
        return Ok(CheckReport::hypothesis_failed("phi4_moments", "degenerate ground state"));
    }
    let psi = &spectral.ground_vector;
    let c = extract_constants(spec);
    let k = spec.k as f64;
    let mut rep = CheckReport::new("phi4_moments");
    let mut phi_means = Vec::with_capacity(space.n_sites());
    for i in 0..space.n_sites() {
        phi_means.push(site_power(space, i, OpKind::Phi, 1)?.expectation(psi).norm());
    }
    let phi_max = phi_means.iter().copied().fold(0.0, f64::max);
    let consts = phi4_bound_constants(spec, spectral.gap, phi_max)?;
    let ratio = (c.mu_bar / spectral.gap).sqrt();
    for (i, &pm) in phi_means.iter().enumerate() {
        for s in 1..=s_max {
            let sf = s as f64;
            let m_phi = site_power(space, i, OpKind::Phi, s)?.expectation(psi).norm();
            rep.le(format!("site{i}_phi_s{s}"), m_phi, ((pm + 2.0 * ratio) * sf).powf(sf), 1e-10, 1e-12);
            let m_pi = site_power(space, i, OpKind::Pi, s)?.expectation(psi).norm();
            let b_pi = ((c.fbar_prime / c.mu_bar) * (consts.c1 * k * k * sf).powf(k)).powf(sf / 2.0);
            rep.le(format!("site{i}_pi_s{s}"), m_pi, b_pi, 1e-10, 1e-12);
            let m_n = site_power(space, i, OpKind::N, s)?.expectation(psi).re;
            let b_n = 4.0 * (8.0 * consts.c_tilde * sf).powf(k * sf / 2.0);
            rep.le(format!("site{i}_n_s{s}"), m_n, b_n, 1e-10, 1e-12);
        }
    }
    rep.info("c_tilde", consts.c_tilde, consts.c_tilde, format!("max|⟨φ⟩|={phi_max:.3e}"));
    Ok(rep)
}

fn bh_moments(spec: &ModelSpec, spectral: &SpectralData, space: &FockSpace) -> Result<CheckReport> {
    let consts = match bh_bound_constants(spec, &BhCheckOptions::default()) {
        Ok(c) => c,
        Err(Error::Hypothesis(why)) => return Ok(CheckReport::hypothesis_failed("bh_moments", why)),
        Err(e) => return Err(e),
    };
    let c = extract_constants(spec);
    let k = spec.k;
    let half = k as f64 / 2.0;
    let psi = &spectral.ground_vector;
    let mut rep = CheckReport::new("bh_moments");
    let mut q_pow = 0.0f64;
    let mut q_bound = 1.0f64;
    for bc in &consts {
        let i = bc.site;
        let n_op = site_power(space, i, OpKind::N, 1)?;
        // ⟨n^{k/2}⟩ through the spectral decomposition of the diagonal n̂
        let m: f64 = psi
            .iter()
            .enumerate()
            .map(|(idx, a)| a.norm_sqr() * (n_op.get(idx, idx).re).powf(half))
            .sum();
        let denom = spec.onsite_repulsion[i] - c.jbar_k(i);
        rep.le(format!("site{i}_n_pow_k_half"), m, (bc.check_j / denom).powi(k as i32), 1e-10, 1e-12);
        q_pow = q_pow.max(m);
        q_bound = q_bound.max((2.0 * c.jcal / denom).powi(2));
    }
    let q = q_pow.powf(1.0 / half);
    rep.le("q_omega", q, q_bound, 1e-10, 1e-12);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::phi_op;
    use crate::models::{build_hamiltonian, standard_bose_hubbard, standard_phi4, Boundary};
    use crate::report::Status;
    use crate::spectra::ground_state;

    #[test]
    fn tradeoff_on_oscillator_and_phi4() {
        let spec = standard_phi4(1, 0.0, 0.0).unwrap();
        let s = FockSpace::uniform(1, 60).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let phi = phi_op(&s, 0).unwrap();
        // saturated for the harmonic oscillator
        let rep = tradeoff_check(&h, &sd, &phi).unwrap();
        assert_eq!(rep.status(), Status::Pass);
        assert!((rep.rows[0].measured - rep.rows[0].bound).abs() < 1e-8);
        let spec = standard_phi4(2, 0.5, 0.2).unwrap();
        let s = FockSpace::uniform(2, 24).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let o = phi_op(&s, 0).unwrap().add(&phi_op(&s, 1).unwrap().pow(2)).unwrap();
        assert_eq!(tradeoff_check(&h, &sd, &o).unwrap().status(), Status::Pass);
    }

    #[test]
    fn identity_observable_is_trivial() {
        let spec = standard_phi4(1, 1.0, 0.0).unwrap();
        let s = FockSpace::uniform(1, 40).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let rep = tradeoff_check(&h, &sd, &SparseOperator::identity(s.dim())).unwrap();
        assert_eq!(rep.status(), Status::Pass);
        assert!(rep.rows[0].measured.abs() < 1e-12);
    }

    #[test]
    fn phi4_moments_hold() {
        let spec = standard_phi4(1, 1.0, 0.0).unwrap();
        let s = FockSpace::uniform(1, 80).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let rep = moment_suite(&spec, &sd, &s, 6).unwrap();
        assert_eq!(rep.status(), Status::Pass, "{:?}", rep.violations());
    }

    #[test]
    fn bh_moments_hold() {
        let spec = standard_bose_hubbard(3, 0.1, 2.0, Boundary::Open).unwrap();
        let s = FockSpace::uniform(3, 8).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let rep = moment_suite(&spec, &sd, &s, 0).unwrap();
        assert_eq!(rep.status(), Status::Pass, "{:?}", rep.violations());
    }
}
