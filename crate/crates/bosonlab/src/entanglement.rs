//! Schmidt decompositions, entanglement entropy, MPS truncation and the
//! area-law report.

use crate::error::{Error, Result};
use crate::fock::{norm, FockSpace};
use crate::linalg::{svd, trace_norm_hermitian};
use crate::models::{Family, ModelSpec};
use crate::report::CheckReport;
use crate::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Singular values at or below this count as zero.
pub const SCHMIDT_FLOOR: f64 = 1e-12;
/// Largest reshaped matrix (entries) handed to the dense SVD.
pub const SVD_BUDGET: usize = 1 << 24;

/// Reshape at a bipartition; index i = l + dl·r.
pub fn bipartite(v: &[C64], dl: usize, dr: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dl, dr, |i, j| v[i + dl * j])
}

fn flatten(m: &DMatrix<C64>) -> Vec<C64> {
    let dl = m.nrows();
    (0..dl * m.ncols()).map(|i| m[(i % dl, i / dl)]).collect()
}

fn split(space: &FockSpace, cut: usize) -> Result<(usize, usize)> {
    if cut == 0 || cut >= space.n_sites() {
        return Err(Error::InvalidArgument(format!("cut {cut} must lie strictly inside 0..{}", space.n_sites())));
    }
    let dl = space.stride(cut);
    let dr = space.dim() / dl;
    if dl * dr > SVD_BUDGET {
        return Err(Error::Budget(format!("{dl}×{dr} reshape exceeds the SVD budget")));
    }
    Ok((dl, dr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    /// Sites 0..cut form the left block.
    pub cut: usize,
    pub coefficients: Vec<f64>,
    pub rank: usize,
    /// Set when the input had to be normalized.
    pub renormalized: bool,
}

impl SchmidtSpectrum {
    pub fn from_values(cut: usize, mut coefficients: Vec<f64>) -> Self {
        coefficients.sort_by(|a, b| b.total_cmp(a));
        let rank = coefficients.iter().filter(|&&x| x > SCHMIDT_FLOOR).count();
        Self { cut, coefficients, rank, renormalized: false }
    }

    /// −Σλ²ln λ², in nats.
    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy(self) / std::f64::consts::LN_2
    }

    /// δ_D = Σ_{j>D} λ_j².
    pub fn tail(&self, d: usize) -> f64 {
        self.coefficients.iter().skip(d).map(|x| x * x).sum()
    }
}

pub fn entropy(spectrum: &SchmidtSpectrum) -> f64 {
    spectrum
        .coefficients
        .iter()
        .map(|&l| l * l)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

pub fn schmidt_decompose(state: &[C64], space: &FockSpace, cut: usize) -> Result<SchmidtSpectrum> {
    if state.len() != space.dim() {
        return Err(Error::DimensionMismatch(state.len(), space.dim()));
    }
    let (dl, dr) = split(space, cut)?;
    let nrm = norm(state);
    if nrm == 0.0 {
        return Err(Error::InvalidArgument("zero state".into()));
    }
    let mut s = SchmidtSpectrum::from_values(cut, crate::linalg::singular_values(&bipartite(state, dl, dr)));
    let renormalized = (nrm - 1.0).abs() > 1e-10;
    if renormalized {
        s.coefficients.iter_mut().for_each(|x| *x /= nrm);
        s.rank = s.coefficients.iter().filter(|&&x| x > SCHMIDT_FLOOR).count();
    }
    s.renormalized = renormalized;
    Ok(s)
}

/// Schmidt spectra at every interior cut.
pub fn entanglement_profile(state: &[C64], space: &FockSpace) -> Result<Vec<SchmidtSpectrum>> {
    (1..space.n_sites()).into_par_iter().map(|c| schmidt_decompose(state, space, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsApprox {
    pub bond_dim: usize,
    /// δ_{x,D} at cuts 1..n, from the spectra of the input state.
    pub deltas: Vec<f64>,
    /// Weight discarded by the sweep at each cut.
    pub sweep_discarded: Vec<f64>,
    pub error_bound: f64,
    pub distance: f64,
    /// Trace distance of single-site reduced states, per site.
    pub reduced_distances: Vec<f64>,
    #[serde(skip)]
    pub state: Vec<C64>,
}

fn single_site_rdm(v: &[C64], space: &FockSpace, site: usize) -> DMatrix<C64> {
    let d = space.cutoff(site) + 1;
    let sl = space.stride(site);
    let sr = space.dim() / (sl * d);
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for r in 0..sr {
        for l in 0..sl {
            let base = l + sl * d * r;
            for a in 0..d {
                let va = v[base + sl * a];
                if va == C64::default() {
                    continue;
                }
                for b in 0..d {
                    rho[(a, b)] += va * v[base + sl * b].conj();
                }
            }
        }
    }
    rho
}

/// Left-to-right SVD sweep keeping D Schmidt vectors at each bond. The
/// result is not renormalized.
pub fn mps_compress(state: &[C64], space: &FockSpace, d: usize) -> Result<MpsApprox> {
    if d < 1 {
        return Err(Error::InvalidArgument("bond dimension must be ≥ 1".into()));
    }
    let spectra = entanglement_profile(state, space)?;
    let deltas: Vec<f64> = spectra.iter().map(|s| s.tail(d)).collect();
    let nrm = norm(state);
    let psi: Vec<C64> = state.iter().map(|x| x / nrm).collect();
    let mut cur = psi.clone();
    let mut sweep_discarded = Vec::with_capacity(deltas.len());
    for cut in 1..space.n_sites() {
        let (dl, dr) = split(space, cut)?;
        let m = bipartite(&cur, dl, dr);
        let (u, s, _) = svd(&m);
        let keep = d.min(s.len());
        sweep_discarded.push(s.iter().skip(keep).map(|x| x * x).sum());
        let ud = u.columns(0, keep);
        let proj = &ud * (ud.adjoint() * &m);
        cur = flatten(&proj);
    }
    let diff: Vec<C64> = psi.iter().zip(&cur).map(|(a, b)| a - b).collect();
    let distance = norm(&diff);
    let reduced_distances = (0..space.n_sites())
        .map(|i| trace_norm_hermitian(&(single_site_rdm(&psi, space, i) - single_site_rdm(&cur, space, i))))
        .collect();
    let error_bound = 2.0 * deltas.iter().sum::<f64>();
    Ok(MpsApprox { bond_dim: d, deltas, sweep_discarded, error_bound, distance, reduced_distances, state: cur })
}

/// Checks on one compression. The checked forms are ‖ψ−M‖ ≤ √(2Σδ) and
/// ‖ρ_X−ρ_X(M)‖₁ ≤ 2√(2Σδ); the forms linear in Σδ are reported as info.
pub fn mps_checks(mps: &MpsApprox) -> CheckReport {
    let sum: f64 = mps.deltas.iter().sum();
    let root = (2.0 * sum).sqrt();
    let mut rep = CheckReport::new(format!("mps_D{}", mps.bond_dim));
    rep.le("global_distance", mps.distance, root, 1e-9, 1e-10);
    for (i, &t) in mps.reduced_distances.iter().enumerate() {
        rep.le(format!("site{i}_reduced"), t, 2.0 * root, 1e-9, 1e-10);
    }
    for (x, (&sw, &dl)) in mps.sweep_discarded.iter().zip(&mps.deltas).enumerate() {
        rep.le(format!("cut{}_sweep_tail", x + 1), sw, dl, 1e-9, 1e-12);
    }
    rep.info("global_distance_linear", mps.distance, mps.error_bound, "");
    let worst = mps.reduced_distances.iter().copied().fold(0.0, f64::max);
    rep.info("reduced_linear", worst, mps.error_bound, "");
    rep
}

fn random_rank_state(dl: usize, dr: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let mut g = |n, m| DMatrix::from_fn(n, m, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let a: DMatrix<C64> = g(dl, r);
    let b: DMatrix<C64> = g(r, dr);
    let m = a * b;
    let n = m.norm();
    m / C64::new(n, 0.0)
}

/// Σ_{m>r}μ_m² ≤ ‖ψ−ψ′‖² over random rank-r ψ′, and equality at the
/// rank-r SVD truncation.
pub fn eckart_young_check(state: &[C64], space: &FockSpace, cut: usize, rank: usize, trials: usize, seed: u64) -> Result<CheckReport> {
    let (dl, dr) = split(space, cut)?;
    let spec = schmidt_decompose(state, space, cut)?;
    let psi = bipartite(state, dl, dr) / C64::new(norm(state), 0.0);
    let tail = spec.tail(rank);
    let mut rep = CheckReport::new(format!("eckart_young_cut{cut}_r{rank}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u, s, vt) = svd(&psi);
    let keep = rank.min(s.len());
    let mut best = DMatrix::<C64>::zeros(dl, dr);
    for j in 0..keep {
        best += u.column(j) * vt.row(j) * C64::new(s[j], 0.0);
    }
    for t in 0..trials {
        // random rank-r states, some drawn near the optimum
        let mut cand = random_rank_state(dl, dr, rank.max(1), &mut rng);
        if t % 2 == 1 {
            let w = rng.gen::<f64>();
            cand = &best * C64::new(1.0 - w, 0.0) + cand * C64::new(w * 0.1, 0.0);
            let full = DMatrix::<C64>::from_fn(dl, dr, |i, j| cand[(i, j)]);
            let (cu, cs, cvt) = svd(&full);
            cand = DMatrix::zeros(dl, dr);
            for j in 0..keep {
                cand += cu.column(j) * cvt.row(j) * C64::new(cs[j], 0.0);
            }
        }
        rep.le(format!("trial{t}"), tail, (&psi - &cand).norm_squared(), 1e-10, 1e-12);
    }
    let opt = (&psi - &best).norm_squared();
    rep.le("svd_truncation_upper", opt, tail, 0.0, 1e-10);
    rep.le("svd_truncation_lower", tail, opt, 0.0, 1e-10);
    let bn = best.norm();
    if bn > 0.0 {
        let renorm = (&psi - &best / C64::new(bn, 0.0)).norm_squared();
        rep.le("renormalized_truncation", tail, renorm, 1e-10, 1e-12);
    }
    Ok(rep)
}

/// Exponents (υ, χ) of the area-law formula for a model family.
pub fn area_law_exponents(spec: &ModelSpec) -> Result<(f64, f64)> {
    let k = spec.k as f64;
    match spec.family {
        Family::BoseHubbardClass => Ok((0.0, k / 2.0)),
        Family::Phi4Class => Ok((k * k / 4.0, k * k / 2.0)),
        Family::Explicit => Err(Error::Hypothesis("no area-law exponents for explicit models".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaLawRow {
    pub gap: f64,
    pub entropy: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// S_L against C₀Δ^{−(1+2/ᾱ)(υ+1)}[ln(1/Δ)]^{4+3/ᾱ+χ(1+2/ᾱ)}. The log is
/// floored at 1 so gaps ≥ 1/e still give a finite value.
pub fn area_law_row(entropy: f64, gap: f64, alpha_bar: f64, upsilon: f64, chi: f64, c0: f64) -> Result<AreaLawRow> {
    if !(gap > 0.0) {
        return Err(Error::Degenerate);
    }
    let inv = if alpha_bar.is_finite() { 1.0 / alpha_bar } else { 0.0 };
    let p = (1.0 + 2.0 * inv) * (upsilon + 1.0);
    let q = 4.0 + 3.0 * inv + chi * (1.0 + 2.0 * inv);
    let bound = c0 * gap.powf(-p) * (1.0 / gap).ln().max(1.0).powf(q);
    Ok(AreaLawRow { gap, entropy, bound, ratio: entropy / bound })
}

pub fn area_law_report(
    state: &[C64],
    space: &FockSpace,
    cut: usize,
    gap: f64,
    spec: &ModelSpec,
    alpha_bar: f64,
    c0: f64,
) -> Result<(AreaLawRow, CheckReport)> {
    let sch = schmidt_decompose(state, space, cut)?;
    let (upsilon, chi) = area_law_exponents(spec)?;
    let row = area_law_row(sch.entropy(), gap, alpha_bar, upsilon, chi, c0)?;
    let (dl, dr) = split(space, cut)?;
    let mut rep = CheckReport::new("area_law");
    rep.le("entropy_max", row.entropy, (dl.min(dr) as f64).ln(), 1e-10, 1e-12);
    rep.info("entropy_vs_formula", row.entropy, row.bound, format!("C0={c0}, ratio={:.3e}", row.ratio));
    Ok((row, rep))
}
