use bosonlab::agsp::{ChebyshevAgsp, Pipeline, PipelineConfig};
use bosonlab::entanglement::{mps_compress, schmidt_decompose};
use bosonlab::fock::{commutator, phi_op, pi_op, total_number_op, FockSpace, SparseOperator};
use bosonlab::linalg::LinearOp;
use bosonlab::models::{build_hamiltonian, standard_bose_hubbard, standard_phi4, Boundary};
use bosonlab::spectra::{energy, ground_state, spectral_projector, Side};
use bosonlab::C64;
use proptest::prelude::*;

fn unit_vector(raw: &[(f64, f64)]) -> Vec<C64> {
    let v: Vec<C64> = raw.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

fn boundary(periodic: bool) -> Boundary {
    if periodic {
        Boundary::Periodic
    } else {
        Boundary::Open
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mixed_radix_round_trip(cutoffs in prop::collection::vec(0usize..6, 1..5), pick in 0.0f64..1.0) {
        let s = FockSpace::new(cutoffs).unwrap();
        let idx = ((s.dim() as f64 * pick) as usize).min(s.dim() - 1);
        let occ = s.decode(idx);
        prop_assert_eq!(s.encode(&occ).unwrap(), idx);
        prop_assert_eq!(s.total_occupation(idx), occ.iter().sum::<usize>());
    }

    #[test]
    fn bose_hubbard_hermitian_and_number_conserving(
        l in 1usize..4, c in 1usize..5, j in -1.0f64..1.0, u in 0.0f64..3.0, periodic: bool,
    ) {
        let spec = standard_bose_hubbard(l, j, u, boundary(periodic)).unwrap();
        let space = FockSpace::uniform(l, c).unwrap();
        let h = build_hamiltonian(&spec, &space).unwrap();
        prop_assert!(h.hermiticity_error() <= 1e-12);
        let n = total_number_op(&space);
        prop_assert!(commutator(&h, &n).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn phi4_hermitian_and_parity_even(l in 1usize..3, c in 2usize..9, lambda in 0.0f64..2.0, gamma in -1.0f64..1.0) {
        let spec = standard_phi4(l, lambda, gamma).unwrap();
        let space = FockSpace::uniform(l, c).unwrap();
        let h = build_hamiltonian(&spec, &space).unwrap();
        let scale = h.max_abs().max(1.0);
        prop_assert!(h.hermiticity_error() <= 1e-12 * scale);
        let parity: Vec<C64> = (0..space.dim())
            .map(|i| if space.total_occupation(i) % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) })
            .collect();
        let p = SparseOperator::diagonal(&parity, "P");
        let php = p.matmul(&h).unwrap().matmul(&p).unwrap();
        prop_assert!(php.max_abs_diff(&h).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn interior_ccr(l in 1usize..3, c in 2usize..7, i in 0usize..2, k in 0usize..2) {
        let (i, k) = (i % l, k % l);
        let space = FockSpace::uniform(l, c).unwrap();
        let comm = commutator(&phi_op(&space, i).unwrap(), &pi_op(&space, k).unwrap()).unwrap();
        let expect = if i == k {
            SparseOperator::identity(space.dim()).scale(C64::new(0.0, 1.0))
        } else {
            SparseOperator::zeros(space.dim())
        };
        let mask = space.interior_mask(1);
        prop_assert!(comm.max_abs_diff_on(&expect, &mask).unwrap() <= 1e-12);
    }

    #[test]
    fn ground_energy_is_variational(
        j in 0.0f64..0.6, u in 0.2f64..2.0,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
    ) {
        let spec = standard_bose_hubbard(3, j, u, Boundary::Open).unwrap();
        let space = FockSpace::uniform(3, 3).unwrap();
        let h = build_hamiltonian(&spec, &space).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        for (e, r) in sd.low_eigs.iter().map(|p| p.0).zip(sd.low_eigs.iter().map(|p| p.1)) {
            prop_assert!(r <= 1e-10 * e.abs().max(1.0));
        }
        let psi = unit_vector(&raw);
        prop_assert!(sd.e0 <= energy(&h, &psi) + 1e-12);
    }

    #[test]
    fn spectral_projector_is_projector(j in 0.0f64..0.5, threshold in -0.5f64..2.0) {
        let spec = standard_bose_hubbard(2, j, 1.0, Boundary::Open).unwrap();
        let h = build_hamiltonian(&spec, &FockSpace::uniform(2, 4).unwrap()).unwrap();
        let p = spectral_projector(&h, threshold, Side::AtMost).unwrap();
        prop_assert!(p.matmul(&p).unwrap().max_abs_diff(&p).unwrap() <= 1e-10);
        prop_assert!(p.hermiticity_error() <= 1e-10);
    }

    #[test]
    fn chebyshev_filter_is_linear(
        m in 1usize..12,
        u in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25),
        v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25),
        a in -2.0f64..2.0, b in -2.0f64..2.0,
    ) {
        let spec = standard_bose_hubbard(2, 0.2, 1.0, Boundary::Open).unwrap();
        let h = build_hamiltonian(&spec, &FockSpace::uniform(2, 4).unwrap()).unwrap();
        let sd = ground_state(&h, 2, 1e-12).unwrap();
        let k = ChebyshevAgsp::new(&h, sd.e0, sd.gap, 40.0, m).unwrap();
        let (u, v) = (unit_vector(&u), unit_vector(&v));
        let (ca, cb) = (C64::new(a, 0.0), C64::new(0.0, b));
        let mix: Vec<C64> = u.iter().zip(&v).map(|(x, y)| ca * x + cb * y).collect();
        let lhs = k.apply(&mix);
        let (ku, kv) = (k.apply(&u), k.apply(&v));
        let err = lhs.iter().zip(ku.iter().zip(&kv)).map(|(l, (x, y))| (l - ca * x - cb * y).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10);
    }

    #[test]
    fn mps_deltas_are_schmidt_tails(
        d in 1usize..6,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 243),
    ) {
        let space = FockSpace::uniform(5, 2).unwrap();
        let psi = unit_vector(&raw);
        let mps = mps_compress(&psi, &space, d).unwrap();
        for (x, &delta) in (1..5).zip(&mps.deltas) {
            let tail = schmidt_decompose(&psi, &space, x).unwrap().tail(d);
            prop_assert!((tail - delta).abs() <= 1e-12);
        }
    }
}

fn displacement(eps0: f64, tau: f64) -> f64 {
    let cfg = PipelineConfig {
        spec: standard_bose_hubbard(4, 0.3, 1.0, Boundary::Open).unwrap(),
        ambient_cutoff: 5,
        eps0,
        a: 1.0,
        b: 2.0,
        q: 2,
        l: 1,
        tau,
        alpha_bar_default: 2.0,
        seed: 5,
    };
    Pipeline::run(&cfg).unwrap().total_displacement().unwrap()
}

// smaller ε₀ raises the cutoffs
#[test]
fn displacement_does_not_grow_with_tau_or_cutoffs() {
    let mut last = f64::INFINITY;
    for tau in [2.5, 5.0, 20.0, 100.0] {
        let d = displacement(0.1, tau);
        assert!(d <= last + 1e-12, "τ={tau}: displacement {d} after {last}");
        last = d;
    }
    let mut last = f64::INFINITY;
    for eps0 in [0.1, 0.03, 0.01, 0.003] {
        let d = displacement(eps0, 100.0);
        assert!(d <= last + 1e-12, "ε₀={eps0}: displacement {d} after {last}");
        last = d;
    }
}
