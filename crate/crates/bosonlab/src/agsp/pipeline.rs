use super::constants::{AgspConstants, GBar};
use crate::error::{Error, Result};
use crate::fock::{inner, norm, FockSpace, SparseOperator};
use crate::linalg::{eigh, hermitian_norm, to_dense_op};
use crate::models::{build_hamiltonian, build_terms, interaction_constant_g, ModelSpec, TermSpec};
use crate::report::CheckReport;
use crate::spectra::{fock_start_vector, ground_state_with, SolveOptions, SpectralData, DENSE_THRESHOLD};
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Per-site cutoffs N_x = ⌈𝔟^{−𝔞}[log(1/ε₀)+log(|x|³+1)]^𝔞⌉, x the distance from the cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub eps0: f64,
    pub a: f64,
    pub b: f64,
    /// First site of the right half.
    pub cut: usize,
    pub cutoffs: Vec<usize>,
}

impl TruncationSchedule {
    pub fn new(n_sites: usize, cut: usize, eps0: f64, a: f64, b: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 1.0) || a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidArgument(format!("schedule needs ε₀ ∈ (0,1), 𝔞,𝔟 > 0; got {eps0}, {a}, {b}")));
        }
        if cut == 0 || cut >= n_sites {
            return Err(Error::InvalidArgument(format!("cut {cut} must lie strictly inside 0..{n_sites}")));
        }
        let cutoffs = (0..n_sites).map(|i| Self::n_x(eps0, a, b, Self::distance(i, cut))).collect();
        Ok(Self { eps0, a, b, cut, cutoffs })
    }

    pub fn distance(site: usize, cut: usize) -> usize {
        if site < cut {
            cut - 1 - site
        } else {
            site - cut
        }
    }

    pub fn n_x(eps0: f64, a: f64, b: f64, x: usize) -> usize {
        let xf = x as f64;
        let v = b.powf(-a) * ((1.0 / eps0).ln() + (xf * xf * xf + 1.0).ln()).powf(a);
        (v.ceil() as usize).max(1)
    }

    pub fn check_ambient(&self, ambient: &FockSpace) -> Result<()> {
        for (i, &n) in self.cutoffs.iter().enumerate() {
            if n > ambient.cutoff(i) {
                return Err(Error::BeyondCutoff { n, cutoff: ambient.cutoff(i) });
            }
        }
        Ok(())
    }
}

/// Edge block B₀, q blocks of length l, edge block B_{q+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDecomposition {
    pub q: usize,
    pub l: usize,
    pub blocks: Vec<Vec<usize>>,
    /// First site of the right half R = ∪_{s>q/2} B_s.
    pub cut: usize,
}

impl BlockDecomposition {
    pub fn new(n_sites: usize, q: usize, l: usize) -> Result<Self> {
        if q < 2 || q % 2 != 0 {
            return Err(Error::InvalidArgument(format!("q must be even and ≥ 2, got {q}")));
        }
        if l == 0 || n_sites < q * l + 2 {
            return Err(Error::InvalidArgument(format!("{n_sites} sites cannot hold {q} blocks of {l} plus two edge blocks")));
        }
        let left = (n_sites - q * l) / 2;
        let mut blocks = vec![(0..left).collect::<Vec<_>>()];
        for s in 0..q {
            blocks.push((left + s * l..left + (s + 1) * l).collect());
        }
        blocks.push((left + q * l..n_sites).collect());
        Ok(Self { q, l, blocks, cut: left + q / 2 * l })
    }

    pub fn block_of(&self, site: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(&site)).expect("site outside decomposition")
    }

    /// Number of blocks on the left of the cut.
    pub fn left_blocks(&self) -> usize {
        self.q / 2 + 1
    }

    /// (min block, max block) touched by a term.
    pub fn span(&self, t: &TermSpec) -> (usize, usize) {
        let bs: Vec<usize> = t.sites().iter().map(|&s| self.block_of(s)).collect();
        (*bs.iter().min().unwrap_or(&0), *bs.iter().max().unwrap_or(&0))
    }
}

/// Terms restricted to `region`, reindexed to positions within it.
fn reindex(terms: &[TermSpec], region: &[usize]) -> Vec<TermSpec> {
    terms
        .iter()
        .filter(|t| t.sites().iter().all(|s| region.contains(s)))
        .map(|t| {
            let mut t = t.clone();
            for f in &mut t.factors {
                f.0 = region.iter().position(|&s| s == f.0).unwrap();
            }
            t
        })
        .collect()
}

/// Embeds `op`, acting on the contiguous sites first..first+n of `space`
/// (local index mixed-radix with `first` fastest), into the full space.
pub fn embed_local_dense(space: &FockSpace, first: usize, n: usize, op: &DMatrix<C64>) -> Result<SparseOperator> {
    if first + n > space.n_sites() {
        return Err(Error::SiteOutOfRange { site: first + n - 1, n_sites: space.n_sites() });
    }
    let stride = space.stride(first);
    let local: usize = (first..first + n).map(|s| space.cutoff(s) + 1).product();
    if op.nrows() != local || op.ncols() != local {
        return Err(Error::DimensionMismatch(op.nrows(), local));
    }
    let mut trip = Vec::new();
    for g in 0..space.dim() {
        let loc = (g / stride) % local;
        let rest = g - loc * stride;
        for r in 0..local {
            let v = op[(r, loc)];
            if v != C64::default() {
                trip.push((rest + r * stride, g, v));
            }
        }
    }
    Ok(SparseOperator::from_triplets(space.dim(), trip, false, "embedded"))
}

/// Applies ⊗_s M_s (block 0 fastest) to a vector in the product of the
/// column spaces; `mats[s]` is rows_s × cols_s.
pub fn kron_apply(mats: &[DMatrix<C64>], x: &[C64]) -> Vec<C64> {
    let mut dims: Vec<usize> = mats.iter().map(|m| m.ncols()).collect();
    assert_eq!(dims.iter().product::<usize>(), x.len());
    let mut t = x.to_vec();
    for (s, m) in mats.iter().enumerate() {
        let before: usize = dims[..s].iter().product();
        let after: usize = dims[s + 1..].iter().product();
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut out = vec![C64::default(); before * rows * after];
        for c in 0..after {
            for k in 0..cols {
                for i in 0..rows {
                    let mik = m[(i, k)];
                    if mik == C64::default() {
                        continue;
                    }
                    let (src, dst) = (before * (k + cols * c), before * (i + rows * c));
                    for a in 0..before {
                        out[dst + a] += mik * t[src + a];
                    }
                }
            }
        }
        dims[s] = rows;
        t = out;
    }
    t
}

/// min_θ ‖a − e^{iθ}b‖ for unit vectors, evaluated as a direct difference
/// so that small distances keep full precision.
pub fn aligned_distance(a: &[C64], b: &[C64]) -> f64 {
    let ov = inner(b, a);
    let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
    a.iter().zip(b).map(|(x, y)| (x - ph * y).norm_sqr()).sum::<f64>().sqrt()
}

fn solve(h: &SparseOperator, space: &FockSpace, seed: u64) -> Result<SpectralData> {
    let opts = SolveOptions { n_eigs: 2, tol: 1e-11, seed, start: Some(fock_start_vector(space, seed)), ..Default::default() };
    ground_state_with(h, &opts)
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub spec: ModelSpec,
    pub ambient_cutoff: usize,
    pub eps0: f64,
    pub a: f64,
    pub b: f64,
    pub q: usize,
    pub l: usize,
    pub tau: f64,
    /// ᾱ for models without a long-range decay profile.
    pub alpha_bar_default: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BosonTruncationReport {
    pub checks: CheckReport,
    pub gap: f64,
    pub gap_bar: f64,
    pub displacement: f64,
    pub eps_omega: f64,
    pub eps_h: f64,
    pub tail_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTruncationReport {
    pub checks: CheckReport,
    pub dropped_terms: usize,
    pub delta_norm: f64,
    pub bound: f64,
    pub gap_t: f64,
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCutoffReport {
    pub checks: CheckReport,
    pub tau: f64,
    pub tau_s: Vec<f64>,
    pub kept: Vec<usize>,
    pub reduced_dim: usize,
    pub displacement: f64,
    pub gap_tilde: f64,
    pub width: f64,
    pub width_bound_local: f64,
    pub width_bound: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu_rel_err: f64,
}

/// Output of the three truncation stages plus the data the AGSP stage needs.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub schedule: TruncationSchedule,
    pub blocks: BlockDecomposition,
    pub constants: AgspConstants,
    pub boson: BosonTruncationReport,
    pub interaction: InteractionTruncationReport,
    pub cutoff: EnergyCutoffReport,
    pub ambient: FockSpace,
    pub ambient_ground: Vec<C64>,
    pub reduced: FockSpace,
    /// Block radices of ran Π̃: "site" s of this space is block s.
    pub block_space: FockSpace,
    pub block_bases: Vec<DMatrix<C64>>,
    pub h_tilde: SparseOperator,
    /// Full spectrum of H̃ ascending.
    pub tilde_spectrum: Vec<f64>,
    pub tilde_ground: Vec<C64>,
}

/// Manifest form of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub schedule: TruncationSchedule,
    pub blocks: BlockDecomposition,
    pub constants: AgspConstants,
    pub boson: BosonTruncationReport,
    pub interaction: InteractionTruncationReport,
    pub cutoff: EnergyCutoffReport,
    /// ‖Ω − Ω̃‖ measured end to end in the ambient space.
    pub total_displacement: f64,
}

pub const TILDE_BUDGET: usize = 2500;

impl Pipeline {
    pub fn run(cfg: &PipelineConfig) -> Result<Self> {
        let spec = &cfg.spec;
        spec.validate()?;
        let l_sites = spec.n_sites;
        let blocks = BlockDecomposition::new(l_sites, cfg.q, cfg.l)?;
        let schedule = TruncationSchedule::new(l_sites, blocks.cut, cfg.eps0, cfg.a, cfg.b)?;
        let ambient = FockSpace::uniform(l_sites, cfg.ambient_cutoff)?;
        schedule.check_ambient(&ambient)?;
        let reduced = FockSpace::new(schedule.cutoffs.clone())?;
        let alpha_bar = spec.alpha_bar(cfg.alpha_bar_default);
        let n_max = *schedule.cutoffs.iter().max().unwrap();
        let g = interaction_constant_g(spec, n_max, alpha_bar)?;
        let gbar = GBar::new(g, spec.k, cfg.a, cfg.b, cfg.eps0)?;
        let constants = AgspConstants::new(spec.k, cfg.q, cfg.l, alpha_bar, gbar)?;

        // stage 1: boson-number truncation
        let h_amb = build_hamiltonian(spec, &ambient)?;
        let sd = solve(&h_amb, &ambient, cfg.seed)?;
        if sd.degenerate {
            return Err(Error::Degenerate);
        }
        let h_bar = build_hamiltonian(spec, &reduced)?;
        let sd_bar = solve(&h_bar, &reduced, cfg.seed)?;
        let emb = ambient.embedding_of(&reduced)?;
        let boson = boson_stage(&sd, &sd_bar, &h_bar, &ambient, &reduced, &emb, &schedule)?;

        // stage 2: drop terms between non-adjacent blocks
        let (kept, dropped): (Vec<TermSpec>, Vec<TermSpec>) = spec.terms.iter().cloned().partition(|t| {
            let (lo, hi) = blocks.span(t);
            hi - lo <= 1
        });
        let h_t = build_terms(&kept, &reduced, "H_t")?;
        let sd_t = solve(&h_t, &reduced, cfg.seed)?;
        if sd_t.degenerate {
            return Err(Error::Degenerate);
        }
        let interaction = interaction_stage(&dropped, &reduced, &sd_bar, &sd_t, &constants, cfg.seed)?;

        // stage 3: block energy cutoff, H̃ on ran Π̃
        let (cutoff, block_space, block_bases, h_tilde, tilde_spectrum, tilde_ground) =
            cutoff_stage(&kept, &reduced, &blocks, &sd_t, &constants, cfg.tau)?;

        Ok(Self {
            schedule,
            blocks,
            constants,
            boson,
            interaction,
            cutoff,
            ambient,
            ambient_ground: sd.ground_vector,
            reduced,
            block_space,
            block_bases,
            h_tilde,
            tilde_spectrum,
            tilde_ground,
        })
    }

    /// Embeds a vector of ran Π̃ into the ambient space.
    pub fn to_ambient(&self, x: &[C64]) -> Result<Vec<C64>> {
        let red = kron_apply(&self.block_bases, x);
        let emb = self.ambient.embedding_of(&self.reduced)?;
        let mut out = vec![C64::default(); self.ambient.dim()];
        for (i, &g) in emb.iter().enumerate() {
            out[g] = red[i];
        }
        Ok(out)
    }

    pub fn total_displacement(&self) -> Result<f64> {
        Ok(aligned_distance(&self.ambient_ground, &self.to_ambient(&self.tilde_ground)?))
    }

    pub fn summary(&self) -> Result<PipelineSummary> {
        Ok(PipelineSummary {
            schedule: self.schedule.clone(),
            blocks: self.blocks.clone(),
            constants: self.constants.clone(),
            boson: self.boson.clone(),
            interaction: self.interaction.clone(),
            cutoff: self.cutoff.clone(),
            total_displacement: self.total_displacement()?,
        })
    }

    /// All stage checks merged.
    pub fn checks(&self) -> CheckReport {
        let mut r = CheckReport::new("pipeline");
        r.merge(self.boson.checks.clone());
        r.merge(self.interaction.checks.clone());
        r.merge(self.cutoff.checks.clone());
        r
    }
}

fn boson_stage(
    sd: &SpectralData,
    sd_bar: &SpectralData,
    h_bar: &SparseOperator,
    ambient: &FockSpace,
    reduced: &FockSpace,
    emb: &[usize],
    schedule: &TruncationSchedule,
) -> Result<BosonTruncationReport> {
    let omega = &sd.ground_vector;
    let mut bar_amb = vec![C64::default(); ambient.dim()];
    for (i, &g) in emb.iter().enumerate() {
        bar_amb[g] = sd_bar.ground_vector[i];
    }
    let displacement = aligned_distance(omega, &bar_amb);
    let proj: Vec<C64> = emb.iter().map(|&g| omega[g]).collect();
    let pn2 = inner(&proj, &proj).re;
    let mut inside = vec![false; ambient.dim()];
    emb.iter().for_each(|&g| inside[g] = true);
    let eps_omega: f64 = omega.iter().zip(&inside).filter(|(_, &k)| !k).map(|(a, _)| a.norm_sqr()).sum();
    let eps_h = (h_bar.expectation(&proj).re / pn2 - sd.e0).max(0.0);
    let mut tail_sum = 0.0;
    for (site, &n) in schedule.cutoffs.iter().enumerate() {
        let p: f64 = omega
            .iter()
            .enumerate()
            .filter(|(idx, _)| ambient.occupation(*idx, site) > n)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        tail_sum += p.sqrt();
    }
    let scale = sd.e0.abs().max(1.0);
    let mut checks = CheckReport::new("boson_truncation");
    checks.le("projection_loss_vs_tail_sum", eps_omega.sqrt(), tail_sum, 1e-9, 1e-12);
    if sd_bar.gap > 0.0 {
        checks.le(
            "displacement",
            displacement,
            (2.0 * eps_omega).sqrt() + (2.0 * eps_h / sd_bar.gap).sqrt(),
            1e-8,
            1e-7,
        );
    } else {
        checks.skip("displacement", "truncated ground state degenerate");
    }
    checks.le("gap_lower", sd.gap - eps_h, sd_bar.gap, 1e-9, 1e-9 * scale);
    checks.le("ground_energy_variational", sd.e0, sd_bar.e0, 1e-10, 1e-10 * scale);
    if eps_omega <= 0.125 && eps_h <= sd.gap / 16.0 {
        checks.le("gap_three_quarters", 0.75 * sd.gap, sd_bar.gap, 1e-9, 1e-9 * scale);
    } else {
        checks.skip("gap_three_quarters", format!("outside the small-ε₀ regime (ε_Ω={eps_omega:.3e}, ε_H={eps_h:.3e})"));
    }
    checks.info("displacement_vs_tail_sum", displacement, tail_sum, "direct tail sums, informational");
    let _ = reduced;
    Ok(BosonTruncationReport {
        checks,
        gap: sd.gap,
        gap_bar: sd_bar.gap,
        displacement,
        eps_omega,
        eps_h,
        tail_sum,
    })
}

fn interaction_stage(
    dropped: &[TermSpec],
    reduced: &FockSpace,
    sd_bar: &SpectralData,
    sd_t: &SpectralData,
    constants: &AgspConstants,
    seed: u64,
) -> Result<InteractionTruncationReport> {
    let delta_norm = if dropped.is_empty() {
        0.0
    } else {
        let dh = build_terms(dropped, reduced, "δH_t")?;
        hermitian_norm(&dh, DENSE_THRESHOLD, 1e-10, seed)?
    };
    let bound = constants.interaction_bound();
    let displacement = aligned_distance(&sd_bar.ground_vector, &sd_t.ground_vector);
    let scale = sd_bar.e0.abs().max(1.0);
    let mut checks = CheckReport::new("interaction_truncation");
    checks.le("delta_norm", delta_norm, bound, 1e-8, 1e-12);
    checks.le("gap_lower", sd_bar.gap - 2.0 * delta_norm, sd_t.gap, 1e-9, 1e-9 * scale);
    if 4.0 * delta_norm < sd_bar.gap {
        checks.le("displacement", displacement, delta_norm / (sd_bar.gap - 4.0 * delta_norm), 1e-8, 1e-8);
    } else {
        checks.skip("displacement", "4‖δH_t‖ ≥ Δ̄");
    }
    Ok(InteractionTruncationReport {
        checks,
        dropped_terms: dropped.len(),
        delta_norm,
        bound,
        gap_t: sd_t.gap,
        displacement,
    })
}

type CutoffOut = (EnergyCutoffReport, FockSpace, Vec<DMatrix<C64>>, SparseOperator, Vec<f64>, Vec<C64>);

fn cutoff_stage(
    kept: &[TermSpec],
    reduced: &FockSpace,
    blocks: &BlockDecomposition,
    sd_t: &SpectralData,
    constants: &AgspConstants,
    tau: f64,
) -> Result<CutoffOut> {
    let nb = blocks.blocks.len();
    let mut local_spaces = Vec::with_capacity(nb);
    let mut spectra = Vec::with_capacity(nb);
    let mut min_block_gap = f64::INFINITY;
    for b in &blocks.blocks {
        let sp = reduced.restrict(b)?;
        if sp.dim() > DENSE_THRESHOLD {
            return Err(Error::Budget(format!("block dimension {} exceeds {DENSE_THRESHOLD}", sp.dim())));
        }
        let h = build_terms(&reindex(kept, b), &sp, "h_s")?;
        let (vals, vecs) = eigh(&h.to_dense());
        if let Some(g) = vals.iter().find(|&&v| v > vals[0] + 1e-12 * vals[0].abs().max(1.0)).map(|v| v - vals[0]) {
            min_block_gap = min_block_gap.min(g);
        }
        local_spaces.push(sp);
        spectra.push((vals, vecs));
    }
    if tau < min_block_gap {
        return Err(Error::InvalidArgument(format!(
            "τ = {tau} is below the smallest block gap {min_block_gap:.4e}; Π̃ would keep only block ground states"
        )));
    }
    let mut tau_s = Vec::with_capacity(nb);
    let mut kept_counts = Vec::with_capacity(nb);
    let mut bases = Vec::with_capacity(nb);
    let mut checks = CheckReport::new("energy_cutoff");
    for (s, (vals, vecs)) in spectra.iter().enumerate() {
        let ts = vals[0] + tau;
        let r = vals.iter().filter(|&&v| v <= ts).count();
        let v = vecs.columns(0, r).into_owned();
        let p = &v * v.adjoint();
        let idem = (&p * &p - &p).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let herm = (&p - p.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        checks.le(format!("block{s}_projector_idempotent"), idem, 1e-10, 0.0, 0.0);
        checks.le(format!("block{s}_projector_hermitian"), herm, 1e-10, 0.0, 0.0);
        tau_s.push(ts);
        kept_counts.push(r);
        bases.push(v);
    }
    let block_space = FockSpace::new(kept_counts.iter().map(|&r| r - 1).collect())?;
    let dim = block_space.dim();
    if dim > TILDE_BUDGET {
        return Err(Error::Budget(format!("ran Π̃ has dimension {dim} > {TILDE_BUDGET}")));
    }
    // H̃ = V†H_tV: block terms are diagonal in the kept eigenbases, adjacent
    // pairs are compressed on the two-block space.
    let mut trip: Vec<(usize, usize, C64)> = Vec::new();
    for (s, (vals, _)) in spectra.iter().enumerate() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            kept_counts[s],
            vals[..kept_counts[s]].iter().map(|&x| C64::new(x, 0.0)),
        ));
        trip.extend(embed_local_dense(&block_space, s, 1, &d)?.triplets());
    }
    let mut pair_norm_sum = 0.0;
    for s in 0..nb - 1 {
        let region: Vec<usize> = blocks.blocks[s].iter().chain(&blocks.blocks[s + 1]).copied().collect();
        let cross: Vec<TermSpec> = kept
            .iter()
            .filter(|t| {
                let (lo, hi) = blocks.span(t);
                lo == s && hi == s + 1
            })
            .cloned()
            .collect();
        if cross.is_empty() {
            continue;
        }
        let sp = reduced.restrict(&region)?;
        let h = build_terms(&reindex(&cross, &region), &sp, "h_s,s+1")?.to_dense();
        pair_norm_sum += eigh(&h).0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let v = bases[s + 1].kronecker(&bases[s]);
        let c = v.adjoint() * h * &v;
        trip.extend(embed_local_dense(&block_space, s, 2, &c)?.triplets());
    }
    let mut h_tilde = SparseOperator::from_triplets(dim, trip, false, "H̃_t");
    h_tilde.hermitian = h_tilde.hermiticity_error() <= 1e-12 * h_tilde.max_abs().max(1.0);
    let (spec_vals, spec_vecs) = eigh(&to_dense_op(&h_tilde));
    let e0 = spec_vals[0];
    let gap_tilde = if spec_vals.len() > 1 { spec_vals[1] - e0 } else { f64::INFINITY };
    let mut ground: Vec<C64> = spec_vecs.column(0).iter().copied().collect();
    let nrm = norm(&ground);
    ground.iter_mut().for_each(|x| *x /= nrm);
    let embedded = kron_apply(&bases, &ground);
    let displacement = aligned_distance(&sd_t.ground_vector, &embedded);
    let width = spec_vals.last().unwrap() - e0;
    let width_bound_local = (nb as f64) * tau + 2.0 * pair_norm_sum;
    let width_bound = constants.width_bound(tau);
    let (eps1, eps2) = constants.cutoff_errors(tau);
    let scale = e0.abs().max(1.0);
    checks.le("width_local", width, width_bound_local, 1e-9, 1e-9 * scale);
    checks.le("width", width, width_bound, 1e-9, 1e-9 * scale);
    checks.le("ground_energy_variational", sd_t.e0, e0, 1e-10, 1e-10 * scale);
    checks.le("mu_quadrature_rel_err", constants.mu_rel_err, 1e-6, 0.0, 0.0);
    if eps1 * eps1 <= 0.5 {
        let gt = sd_t.gap;
        checks.le(
            "displacement",
            displacement,
            2f64.sqrt() * eps1 + (2.0 * gt).sqrt() / (gt - 2.0 * eps2 * eps2) * eps2,
            1e-8,
            1e-10,
        );
        checks.le("gap_lower", (1.0 - eps1 * eps1) * gt - 2.0 * eps2 * eps2, gap_tilde, 1e-9, 1e-9 * scale);
    } else {
        let why = format!("ε₁² ≤ 1/2 fails (ε₁ = {eps1:.3e}) at τ = {tau}");
        checks.skip("displacement", why.clone());
        checks.skip("gap_lower", why);
    }
    let report = EnergyCutoffReport {
        checks,
        tau,
        tau_s,
        kept: kept_counts,
        reduced_dim: dim,
        displacement,
        gap_tilde,
        width,
        width_bound_local,
        width_bound,
        eps1,
        eps2,
        mu1: constants.mu1,
        mu2: constants.mu2,
        mu_rel_err: constants.mu_rel_err,
    };
    Ok((report, block_space, bases, h_tilde, spec_vals, ground))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::embed_product;
    use crate::models::{long_range_bose_hubbard, standard_bose_hubbard, Boundary};
    use crate::report::Status;

    #[test]
    fn schedule_shape() {
        let s = TruncationSchedule::new(6, 3, 0.01, 1.0, 2.0).unwrap();
        assert_eq!(s.cutoffs, vec![4, 3, 3, 3, 3, 4]);
        for w in s.cutoffs[..3].windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(TruncationSchedule::new(6, 0, 0.01, 1.0, 2.0).is_err());
        let amb = FockSpace::uniform(6, 3).unwrap();
        assert!(matches!(s.check_ambient(&amb), Err(Error::BeyondCutoff { .. })));
    }

    #[test]
    fn blocks_partition() {
        let b = BlockDecomposition::new(6, 2, 2).unwrap();
        assert_eq!(b.blocks, vec![vec![0], vec![1, 2], vec![3, 4], vec![5]]);
        assert_eq!(b.cut, 3);
        assert!(BlockDecomposition::new(6, 3, 1).is_err());
        assert!(BlockDecomposition::new(6, 0, 1).is_err());
        assert!(BlockDecomposition::new(5, 2, 2).is_err());
    }

    #[test]
    fn embed_local_matches_product() {
        let sp = FockSpace::new(vec![1, 2, 1]).unwrap();
        let a = crate::fock::local_op(crate::fock::OpKind::B, 2);
        let b = crate::fock::local_op(crate::fock::OpKind::N, 1);
        let direct = embed_product(&sp, &[(1, &a), (2, &b)]).unwrap();
        let local = b.to_dense().kronecker(&a.to_dense());
        let via = embed_local_dense(&sp, 1, 2, &local).unwrap();
        assert!(direct.max_abs_diff(&via).unwrap() < 1e-15);
    }

    #[test]
    fn kron_apply_matches_dense() {
        let m0 = DMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let m1 = DMatrix::from_fn(2, 2, |i, j| C64::new((i * 2 + j) as f64, -1.0));
        let x: Vec<C64> = (0..4).map(|i| C64::new(i as f64, 0.5)).collect();
        let dense = m1.kronecker(&m0) * nalgebra::DVector::from_vec(x.clone());
        let got = kron_apply(&[m0, m1], &x);
        for (g, d) in got.iter().zip(dense.iter()) {
            assert!((g - d).norm() < 1e-13);
        }
    }

    fn nn_config(tau: f64) -> PipelineConfig {
        PipelineConfig {
            spec: standard_bose_hubbard(4, 0.1, 1.0, Boundary::Open).unwrap(),
            ambient_cutoff: 3,
            eps0: 0.1,
            a: 1.0,
            b: 2.0,
            q: 2,
            l: 1,
            tau,
            alpha_bar_default: 2.0,
            seed: 7,
        }
    }

    #[test]
    fn nearest_neighbour_trivial_stages() {
        let p = Pipeline::run(&nn_config(100.0)).unwrap();
        assert_eq!(p.interaction.dropped_terms, 0);
        assert_eq!(p.interaction.delta_norm, 0.0);
        // τ above every block width keeps everything
        assert_eq!(p.cutoff.reduced_dim, p.reduced.dim());
        assert!(p.cutoff.displacement < 1e-8);
        assert_ne!(p.checks().status(), Status::BoundViolation, "{:?}", p.checks().violations());
    }

    #[test]
    fn full_cutoffs_reproduce_ambient() {
        let mut cfg = nn_config(100.0);
        cfg.b = 1.0;
        let p = Pipeline::run(&cfg).unwrap();
        assert_eq!(p.schedule.cutoffs, vec![3; 4]);
        assert!(p.boson.displacement < 1e-8);
        assert!(p.boson.eps_omega.abs() < 1e-14);
    }

    #[test]
    fn long_range_stages_hold() {
        let cfg = PipelineConfig {
            spec: long_range_bose_hubbard(6, 4.0, 0.2, 1.0).unwrap(),
            ambient_cutoff: 4,
            eps0: 0.01,
            a: 1.0,
            b: 2.0,
            q: 2,
            l: 2,
            tau: 1.5,
            alpha_bar_default: 2.0,
            seed: 3,
        };
        let p = Pipeline::run(&cfg).unwrap();
        assert!(p.interaction.dropped_terms > 0);
        let c = p.checks();
        assert_ne!(c.status(), Status::BoundViolation, "{:?}", c.violations());
        assert!(p.total_displacement().unwrap() < 0.5);
    }
}
