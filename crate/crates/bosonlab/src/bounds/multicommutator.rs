use crate::agsp::AgspConstants;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::report::CheckReport;
use crate::C64;
use nalgebra::DMatrix;

fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

/// ‖ad_{H}^m(O)‖ against (T_m m)^m ‖O‖ for m = 1..=m_max, dense.
/// `h_s` is the local piece O must commute with.
pub fn multicommutator_norm_check(
    h_t: &DMatrix<C64>,
    o: &DMatrix<C64>,
    h_s: &DMatrix<C64>,
    consts: &AgspConstants,
    m_max: usize,
) -> Result<CheckReport> {
    if h_t.shape() != o.shape() {
        return Err(Error::DimensionMismatch(h_t.nrows(), o.nrows()));
    }
    if h_s.shape() != o.shape() {
        return Err(Error::DimensionMismatch(h_s.nrows(), o.nrows()));
    }
    let o_norm = spectral_norm(o);
    let scale = o_norm.max(1.0) * spectral_norm(h_s).max(1.0);
    let comm = spectral_norm(&commutator(o, h_s));
    if comm > 1e-10 * scale {
        return Ok(CheckReport::hypothesis_failed("multicommutator", format!("‖[O,h_s]‖ = {comm:e}")));
    }
    let mut rep = CheckReport::new("multicommutator");
    let mut cur = o.clone();
    let mut pts = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        cur = commutator(h_t, &cur);
        let nrm = spectral_norm(&cur);
        let bound = consts.multicommutator_factor(m) * o_norm;
        rep.le(format!("ad_m{m}"), nrm, bound, 1e-10, 1e-12);
        if m == 1 {
            let b1 = 4.0 * consts.c0 * consts.gbar.eval((consts.q * consts.l) as f64) * o_norm;
            rep.le("ad_m1_local", nrm, b1, 1e-10, 1e-12);
        }
        if nrm > 0.0 {
            pts.push(((m as f64).ln(), nrm.ln()));
        }
    }
    if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        rep.info("loglog_slope", num / den, f64::NAN, "ln‖ad^m O‖ vs ln m");
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agsp::GBar;
    use crate::fock::FockSpace;
    use crate::models::{build_hamiltonian, build_terms, interaction_constant_g, standard_bose_hubbard, Boundary};
    use crate::report::Status;

    #[test]
    fn bose_hubbard_local_term() {
        let spec = standard_bose_hubbard(4, 0.2, 1.0, Boundary::Open).unwrap();
        let space = FockSpace::uniform(4, 3).unwrap();
        let h = build_hamiltonian(&spec, &space).unwrap().to_dense();
        let hs = build_terms(&spec.restricted_terms(&[1]), &space, "h1").unwrap().to_dense();
        let g = interaction_constant_g(&spec, 3, 2.0).unwrap().max(1e-3);
        let consts = AgspConstants::new(spec.k, 2, 1, 2.0, GBar::new(g, spec.k, 1.0, 2.0, 0.1).unwrap()).unwrap();
        let rep = multicommutator_norm_check(&h, &hs, &hs, &consts, 5).unwrap();
        assert_eq!(rep.status(), Status::Pass, "{:?}", rep.violations());
        assert!(rep.rows[0].measured > 0.0);
        // O not commuting with h_s
        let hop = build_terms(&spec.restricted_terms(&[1, 2]), &space, "h12").unwrap().to_dense();
        let rep = multicommutator_norm_check(&h, &hop, &hs, &consts, 2).unwrap();
        assert_eq!(rep.status(), Status::HypothesisFailed);
    }
}
