//! Ground states, gaps and spectral projectors.

use crate::error::{Error, Result};
use crate::fock::{inner, norm, FockSpace, SparseOperator};
use crate::linalg::{eigh, lowest_eigenpairs, LanczosOptions, LinearOp, Method};
use crate::models::{build_terms, ModelSpec};
use crate::report::CheckReport;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEGENERACY_TOL: f64 = 1e-10;
pub const DENSE_THRESHOLD: usize = 2000;
pub const PROJECTOR_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub method: String,
    pub matvecs: usize,
    pub restarts: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub e0: f64,
    pub gap: f64,
    pub ground_vector: Vec<C64>,
    pub low_eigs: Vec<(f64, f64)>,
    pub degenerate: bool,
    pub solver_meta: SolverMeta,
    #[serde(skip)]
    pub low_vectors: Vec<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub n_eigs: usize,
    pub tol: f64,
    pub dense_threshold: usize,
    pub seed: u64,
    pub start: Option<Vec<C64>>,
    pub max_matvecs: usize,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { n_eigs: 2, tol: 1e-10, dense_threshold: DENSE_THRESHOLD, seed: 0x5eed, start: None, max_matvecs: 400_000, method: Method::Auto }
    }
}

/// Random start vector damped as exp(−Σn/4), so Krylov vectors stay in the
/// low-occupation region where ground states live.
pub fn fock_start_vector(space: &FockSpace, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..space.dim())
        .map(|i| {
            let w = (-(space.total_occupation(i) as f64) / 4.0).exp();
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * w
        })
        .collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn fix_phase(v: &mut [C64]) {
    if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|x| *x *= ph);
        }
    }
}

pub fn ground_state(h: &SparseOperator, n_eigs: usize, tol: f64) -> Result<SpectralData> {
    ground_state_with(h, &SolveOptions { n_eigs, tol, ..Default::default() })
}

pub fn ground_state_with(h: &SparseOperator, opts: &SolveOptions) -> Result<SpectralData> {
    let err = h.hermiticity_error();
    if err > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::NonHermitian(err));
    }
    solve_op(h, opts)
}

/// Same as [`ground_state_with`] for any Hermitian linear operator.
pub fn solve_op<A: LinearOp + ?Sized>(h: &A, opts: &SolveOptions) -> Result<SpectralData> {
    let n_eigs = opts.n_eigs.max(1).min(h.dim());
    let lopts = LanczosOptions {
        tol: opts.tol,
        max_matvecs: opts.max_matvecs,
        seed: opts.seed,
        start: opts.start.clone(),
        method: opts.method,
        ..Default::default()
    };
    let (pairs, method) = lowest_eigenpairs(h, n_eigs, opts.dense_threshold, &lopts)?;
    let e0 = pairs.values[0];
    let (gap, degenerate) = if pairs.values.len() > 1 {
        let g = pairs.values[1] - e0;
        if g <= DEGENERACY_TOL * e0.abs().max(pairs.values[1].abs()).max(1.0) {
            (0.0, true)
        } else {
            (g, false)
        }
    } else {
        (f64::INFINITY, false)
    };
    let mut vectors = pairs.vectors;
    for v in &mut vectors {
        fix_phase(v);
    }
    Ok(SpectralData {
        e0,
        gap,
        ground_vector: vectors[0].clone(),
        low_eigs: pairs.values.iter().copied().zip(pairs.residuals.iter().copied()).collect(),
        degenerate,
        solver_meta: SolverMeta {
            method: method.to_string(),
            matvecs: pairs.matvecs,
            restarts: pairs.restarts,
            tol: opts.tol,
        },
        low_vectors: vectors,
    })
}

impl SpectralData {
    pub fn residual(&self) -> f64 {
        self.low_eigs[0].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    AtMost,
    Above,
}

/// Projector onto the eigenvectors of `h` whose eigenvalue is ≤ (or >)
/// `threshold`.
pub fn spectral_projector(h: &SparseOperator, threshold: f64, side: Side) -> Result<SparseOperator> {
    if h.dim() > PROJECTOR_BUDGET {
        return Err(Error::Budget(format!(
            "spectral projector needs dense diagonalization of dimension {} > {}",
            h.dim(),
            PROJECTOR_BUDGET
        )));
    }
    let (vals, vecs) = eigh(&h.to_dense());
    let cols: Vec<usize> = (0..vals.len())
        .filter(|&i| match side {
            Side::AtMost => vals[i] <= threshold,
            Side::Above => vals[i] > threshold,
        })
        .collect();
    let n = h.dim();
    let mut p = nalgebra::DMatrix::<C64>::zeros(n, n);
    for &c in &cols {
        let v = vecs.column(c);
        p += &v * v.adjoint();
    }
    Ok(SparseOperator::from_dense(&p, true, "Π"))
}

fn check_region(spec: &ModelSpec, region: &[usize]) -> Result<()> {
    if region.is_empty() {
        return Err(Error::InvalidArgument("empty region".into()));
    }
    for &s in region {
        if s >= spec.n_sites {
            return Err(Error::SiteOutOfRange { site: s, n_sites: spec.n_sites });
        }
    }
    Ok(())
}

/// H_X on the full space: terms contained in `region`, identity elsewhere.
pub fn subset_hamiltonian(spec: &ModelSpec, space: &FockSpace, region: &[usize]) -> Result<SparseOperator> {
    check_region(spec, region)?;
    build_terms(&spec.restricted_terms(region), space, "H_X")
}

/// H_X on the reduced space of the region's sites (in the order given).
pub fn subset_hamiltonian_reduced(
    spec: &ModelSpec,
    space: &FockSpace,
    region: &[usize],
) -> Result<(FockSpace, SparseOperator)> {
    check_region(spec, region)?;
    let sub = space.restrict(region)?;
    let terms: Vec<_> = spec
        .restricted_terms(region)
        .into_iter()
        .map(|mut t| {
            for f in &mut t.factors {
                f.0 = region.iter().position(|&s| s == f.0).unwrap();
            }
            t
        })
        .collect();
    let h = build_terms(&terms, &sub, "H_X")?;
    Ok((sub, h))
}

/// E_{0,X} ≥ E_{0,X̄} for X ⊆ X̄, each energy from the reduced-space solve.
pub fn subset_energy_check(spec: &ModelSpec, space: &FockSpace, x: &[usize], xbar: &[usize]) -> Result<CheckReport> {
    if let Some(&s) = x.iter().find(|s| !xbar.contains(s)) {
        return Err(Error::InvalidArgument(format!("site {s} of X is not in X̄")));
    }
    let solve = |region: &[usize]| -> Result<f64> {
        let (_, h) = subset_hamiltonian_reduced(spec, space, region)?;
        Ok(ground_state(&h, 2, 1e-12)?.e0)
    };
    let (e_x, e_xbar) = (solve(x)?, solve(xbar)?);
    let mut rep = CheckReport::new("subset_energy");
    // E_{0,X̄} ≤ E_{0,X}
    rep.le("subset_monotone", e_xbar, e_x, 1e-10, 1e-10 * e_x.abs().max(1.0));
    Ok(rep)
}

/// Energy expectation of a normalized vector.
pub fn energy(h: &SparseOperator, v: &[C64]) -> f64 {
    (h.expectation(v) / inner(v, v)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_hamiltonian, standard_bose_hubbard, standard_phi4, Boundary};
    use crate::linalg::random_unit_vector;

    #[test]
    fn harmonic_oscillator_cutoff_200() {
        let spec = standard_phi4(1, 0.0, 0.0).unwrap();
        let s = FockSpace::uniform(1, 200).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        assert!((sd.e0 - 1.0).abs() < 1e-8);
        assert!((sd.gap - 2.0).abs() < 1e-8);
    }

    #[test]
    fn lanczos_path_matches_dense_for_oscillator() {
        let spec = standard_phi4(1, 1.0, 0.0).unwrap();
        let s = FockSpace::uniform(1, 400).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let dense = ground_state(&h, 2, 1e-12).unwrap();
        for method in [Method::Lanczos, Method::Davidson] {
            let opts = SolveOptions { dense_threshold: 0, start: Some(fock_start_vector(&s, 3)), method, ..Default::default() };
            let kry = ground_state_with(&h, &opts).unwrap();
            assert_eq!(kry.solver_meta.method, format!("{method:?}").to_lowercase());
            assert!((dense.e0 - kry.e0).abs() < 1e-10);
            assert!((dense.gap - kry.gap).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_bh_vacuum() {
        let spec = standard_bose_hubbard(3, 0.0, 1.0, Boundary::Open).unwrap();
        let s = FockSpace::uniform(3, 3).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        assert!(sd.e0.abs() < 1e-12);
        // vacuum and single-boson states are all at zero energy
        assert!(sd.degenerate);
        assert_eq!(sd.gap, 0.0);
    }

    #[test]
    fn bh_l2_krylov_vs_dense() {
        let spec = standard_bose_hubbard(2, 1.0, 1.0, Boundary::Open).unwrap();
        let s = FockSpace::uniform(2, 3).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let (vals, _) = eigh(&h.to_dense());
        let opts = SolveOptions { n_eigs: 3, dense_threshold: 0, ..Default::default() };
        let sd = ground_state_with(&h, &opts).unwrap();
        for i in 0..3 {
            assert!((sd.low_eigs[i].0 - vals[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn variational_property() {
        let spec = standard_bose_hubbard(3, 0.6, 1.0, Boundary::Open).unwrap();
        let s = FockSpace::uniform(3, 3).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = random_unit_vector(s.dim(), &mut rng);
            assert!(sd.e0 <= energy(&h, &v) + 1e-12);
        }
    }

    #[test]
    fn residual_below_tolerance() {
        let spec = standard_phi4(2, 0.5, 0.2).unwrap();
        let s = FockSpace::uniform(2, 30).unwrap();
        let h = build_hamiltonian(&spec, &s).unwrap();
        let opts = SolveOptions { start: Some(fock_start_vector(&s, 1)), ..Default::default() };
        let sd = ground_state_with(&h, &opts).unwrap();
        let hv = h.apply(&sd.ground_vector);
        let r: Vec<C64> = hv.iter().zip(&sd.ground_vector).map(|(a, b)| a - sd.e0 * b).collect();
        assert!(norm(&r) <= 1e-10 * sd.e0.abs().max(1.0));
    }

    #[test]
    fn non_hermitian_rejected() {
        let s = FockSpace::uniform(1, 3).unwrap();
        let b = crate::fock::annihilation_op(&s, 0).unwrap();
        assert!(matches!(ground_state(&b, 2, 1e-10), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn projector_extremes_and_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = nalgebra::DMatrix::from_fn(50, 50, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let hd = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let h = SparseOperator::from_dense(&hd, true, "h");
        let (vals, _) = eigh(&hd);
        let zero = spectral_projector(&h, vals[0] - 1.0, Side::AtMost).unwrap();
        assert!(zero.max_abs() < 1e-12);
        let id = spectral_projector(&h, vals[49], Side::AtMost).unwrap();
        assert!(id.max_abs_diff(&SparseOperator::identity(50)).unwrap() < 1e-10);
        let tau = vals[20];
        let p = spectral_projector(&h, tau, Side::AtMost).unwrap();
        let p2 = p.matmul(&p).unwrap();
        assert!(p2.max_abs_diff(&p).unwrap() < 1e-10);
        assert!(p.hermiticity_error() < 1e-10);
        let php = p.matmul(&h).unwrap().matmul(&p).unwrap();
        let (pv, _) = eigh(&php.to_dense());
        let mut expect: Vec<f64> = vals[..21].to_vec();
        expect.extend(std::iter::repeat(0.0).take(29));
        expect.sort_by(|a, b| a.total_cmp(b));
        for (x, y) in pv.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn subset_hamiltonians() {
        let spec = standard_bose_hubbard(3, 0.5, 1.0, Boundary::Open).unwrap();
        let s = FockSpace::uniform(3, 3).unwrap();
        let full = build_hamiltonian(&spec, &s).unwrap();
        let all = subset_hamiltonian(&spec, &s, &[0, 1, 2]).unwrap();
        assert!(full.max_abs_diff(&all).unwrap() == 0.0);
        let (sub, h1) = subset_hamiltonian_reduced(&spec, &s, &[1]).unwrap();
        assert_eq!(sub.dim(), 4);
        let sd = ground_state(&h1, 2, 1e-12).unwrap();
        assert!(sd.e0.abs() < 1e-12);
        assert!(matches!(subset_hamiltonian(&spec, &s, &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn subset_energy_monotone() {
        let spec = standard_bose_hubbard(4, 0.4, 1.0, Boundary::Open).unwrap();
        let s = FockSpace::uniform(4, 3).unwrap();
        for (x, xb) in [(vec![1], vec![0, 1]), (vec![0, 1], vec![0, 1, 2, 3]), (vec![1, 2], vec![1, 2, 3])] {
            let rep = subset_energy_check(&spec, &s, &x, &xb).unwrap();
            assert_eq!(rep.status(), crate::report::Status::Pass);
        }
        assert!(subset_energy_check(&spec, &s, &[3], &[0, 1]).is_err());
    }
}
