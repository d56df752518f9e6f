//! Declarative Hamiltonians for the Bose-Hubbard and φ⁴ families and the
//! interaction constants the concentration bounds are stated in.

use crate::error::{Error, Result};
use crate::fock::{embed_product, local_product, FockSpace, OpKind, SparseOperator};
use crate::linalg::{eigh, spectral_norm};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    BoseHubbardClass,
    Phi4Class,
    Explicit,
}

/// Which part of the model a term belongs to; the constants are sums over
/// specific parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermRole {
    /// H₀: general polynomial in b, b†.
    Coupling,
    /// V₊: positive polynomial in n̂.
    Positive,
    /// U_i n̂_i^{k/2}.
    Repulsion,
    /// μ_i π_i².
    Kinetic,
    /// Monomial of 𝓕(φ).
    Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub coefficient: C64,
    pub factors: Vec<(usize, OpKind)>,
    pub hermitian_conjugate_included: bool,
    pub role: TermRole,
}

impl TermSpec {
    pub fn new(coefficient: f64, factors: Vec<(usize, OpKind)>, role: TermRole) -> Self {
        Self { coefficient: C64::new(coefficient, 0.0), factors, hermitian_conjugate_included: false, role }
    }

    pub fn with_hc(mut self) -> Self {
        self.hermitian_conjugate_included = true;
        self
    }

    pub fn degree(&self) -> usize {
        self.factors.iter().map(|(_, k)| k.degree()).sum()
    }

    pub fn sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.factors.iter().map(|&(x, _)| x).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Number of monomials counted by the constant definitions (the term and
    /// its conjugate, when included).
    fn multiplicity(&self) -> f64 {
        if self.hermitian_conjugate_included {
            2.0
        } else {
            1.0
        }
    }

    /// Sum of |coefficients| after expanding φ and π into b, b†.
    fn expanded_weight(&self) -> f64 {
        let n_quad = self.factors.iter().filter(|(_, k)| matches!(k, OpKind::Phi | OpKind::Pi)).count();
        self.coefficient.norm() * 2f64.powf(n_quad as f64 / 2.0)
    }

    pub fn adjoint(&self) -> TermSpec {
        TermSpec {
            coefficient: self.coefficient.conj(),
            factors: self.factors.iter().rev().map(|&(s, k)| (s, k.adjoint())).collect(),
            hermitian_conjugate_included: false,
            role: self.role,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRange {
    pub alpha: f64,
    pub j0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub n_sites: usize,
    pub k: usize,
    pub terms: Vec<TermSpec>,
    pub onsite_repulsion: Vec<f64>,
    pub mu: Vec<f64>,
    pub long_range: Option<LongRange>,
    pub boundary: Boundary,
}

fn bond_list(l: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<(usize, usize)> = (0..l.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && l > 2 {
        b.push((l - 1, 0));
    }
    b
}

/// H = Σ_⟨ij⟩ J(b_i b_j† + h.c.) + U Σ n̂(n̂−1), split as U n̂² (repulsion)
/// plus −U n̂ and the hopping (coupling part).
pub fn standard_bose_hubbard(l: usize, j: f64, u: f64, boundary: Boundary) -> Result<ModelSpec> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let mut terms = Vec::new();
    for (a, b) in bond_list(l, boundary) {
        if j != 0.0 {
            terms.push(TermSpec::new(j, vec![(a, OpKind::B), (b, OpKind::Bdag)], TermRole::Coupling).with_hc());
        }
    }
    push_onsite_bh(&mut terms, l, u);
    Ok(ModelSpec {
        family: Family::BoseHubbardClass,
        n_sites: l,
        k: 4,
        terms,
        onsite_repulsion: vec![u; l],
        mu: vec![],
        long_range: None,
        boundary,
    })
}

fn push_onsite_bh(terms: &mut Vec<TermSpec>, l: usize, u: f64) {
    for i in 0..l {
        terms.push(TermSpec::new(u, vec![(i, OpKind::NPow(2))], TermRole::Repulsion));
        if u != 0.0 {
            terms.push(TermSpec::new(-u, vec![(i, OpKind::N)], TermRole::Coupling));
        }
    }
}

/// Decay profile J̄(r) = 1/((r²+1)(r^ᾱ+1)), with J̄(0)=1.
pub fn jbar_profile(r: f64, alpha_bar: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        1.0 / ((r * r + 1.0) * (r.powf(alpha_bar) + 1.0))
    }
}

/// All-pairs hopping J(r) = J₀/((r²+1)(r^{α−2}+1)) on an open chain.
pub fn long_range_bose_hubbard(l: usize, alpha: f64, j0: f64, u: f64) -> Result<ModelSpec> {
    if alpha <= 2.0 {
        return Err(Error::Hypothesis(format!("decay exponent α={alpha} must exceed 2")));
    }
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let mut terms = Vec::new();
    for a in 0..l {
        for b in a + 1..l {
            let jr = j0 * jbar_profile((b - a) as f64, alpha - 2.0);
            terms.push(TermSpec::new(jr, vec![(a, OpKind::B), (b, OpKind::Bdag)], TermRole::Coupling).with_hc());
        }
    }
    push_onsite_bh(&mut terms, l, u);
    Ok(ModelSpec {
        family: Family::BoseHubbardClass,
        n_sites: l,
        k: 4,
        terms,
        onsite_repulsion: vec![u; l],
        mu: vec![],
        long_range: Some(LongRange { alpha, j0 }),
        boundary: Boundary::Open,
    })
}

/// H = Σ(π² + φ² + λφ⁴) + γ Σ_⟨ij⟩ φ_iφ_j on an open chain.
pub fn standard_phi4(l: usize, lambda: f64, gamma: f64) -> Result<ModelSpec> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let mut terms = Vec::new();
    for i in 0..l {
        terms.push(TermSpec::new(1.0, vec![(i, OpKind::Pi), (i, OpKind::Pi)], TermRole::Kinetic));
        terms.push(TermSpec::new(1.0, vec![(i, OpKind::Phi), (i, OpKind::Phi)], TermRole::Potential));
        if lambda != 0.0 {
            terms.push(TermSpec::new(lambda, vec![(i, OpKind::Phi); 4], TermRole::Potential));
        }
    }
    if gamma != 0.0 {
        for (a, b) in bond_list(l, Boundary::Open) {
            terms.push(TermSpec::new(gamma, vec![(a, OpKind::Phi), (b, OpKind::Phi)], TermRole::Potential));
        }
    }
    let k = if lambda != 0.0 { 4 } else { 2 };
    Ok(ModelSpec {
        family: Family::Phi4Class,
        n_sites: l,
        k,
        terms,
        onsite_repulsion: vec![],
        mu: vec![1.0; l],
        long_range: None,
        boundary: Boundary::Open,
    })
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            for &(s, _) in &t.factors {
                if s >= self.n_sites {
                    return Err(Error::SiteOutOfRange { site: s, n_sites: self.n_sites });
                }
            }
            if t.degree() > self.k {
                return Err(Error::DegreeViolation { degree: t.degree(), k: self.k });
            }
        }
        Ok(())
    }

    /// Repulsive condition U_i > 5 J̄_{i,k} at every site.
    pub fn is_repulsive(&self) -> bool {
        let c = extract_constants(self);
        self.family == Family::BoseHubbardClass
            && (0..self.n_sites).all(|i| {
                let u = self.onsite_repulsion.get(i).copied().unwrap_or(0.0);
                u > 0.0 && u > 5.0 * c.jbar[i][self.k]
            })
    }

    /// Every φ-monomial of even total degree and no odd π content.
    pub fn has_parity_symmetry(&self) -> bool {
        self.terms.iter().all(|t| {
            let odd = t
                .factors
                .iter()
                .filter(|(_, k)| matches!(k, OpKind::Phi | OpKind::Pi | OpKind::B | OpKind::Bdag))
                .count();
            odd % 2 == 0
        })
    }

    /// Terms whose sites all lie in `region`.
    pub fn restricted_terms(&self, region: &[usize]) -> Vec<TermSpec> {
        self.terms.iter().filter(|t| t.sites().iter().all(|s| region.contains(s))).cloned().collect()
    }

    /// Alias used by the decay-dependent constants: ᾱ = α − 2 for the
    /// long-range family, otherwise the supplied default.
    pub fn alpha_bar(&self, default: f64) -> f64 {
        self.long_range.map(|lr| lr.alpha - 2.0).unwrap_or(default)
    }
}

/// Assemble one term, with its conjugate when flagged, as Π h Π.
pub fn build_term(term: &TermSpec, space: &FockSpace) -> Result<SparseOperator> {
    let mut by_site: BTreeMap<usize, Vec<OpKind>> = BTreeMap::new();
    for &(s, k) in &term.factors {
        space.check_site(s)?;
        by_site.entry(s).or_default().push(k);
    }
    let locals: Vec<(usize, SparseOperator)> =
        by_site.into_iter().map(|(s, ks)| (s, local_product(&ks, space.cutoff(s)))).collect();
    let refs: Vec<(usize, &SparseOperator)> = locals.iter().map(|(s, o)| (*s, o)).collect();
    let mut op = if refs.is_empty() {
        SparseOperator::identity(space.dim())
    } else {
        embed_product(space, &refs)?
    };
    op = op.scale(term.coefficient);
    if term.hermitian_conjugate_included {
        op = op.add(&op.adjoint())?;
    }
    Ok(op)
}

fn assemble(terms: &[TermSpec], space: &FockSpace, name: &str) -> Result<SparseOperator> {
    let mut trip = Vec::new();
    for t in terms {
        trip.extend(build_term(t, space)?.triplets());
    }
    let mut h = SparseOperator::from_triplets(space.dim(), trip, false, name);
    let err = h.hermiticity_error();
    let scale = h.max_abs().max(1.0);
    h.hermitian = err <= 1e-12 * scale;
    Ok(h)
}

pub fn build_hamiltonian(spec: &ModelSpec, space: &FockSpace) -> Result<SparseOperator> {
    if spec.n_sites != space.n_sites() {
        return Err(Error::DimensionMismatch(spec.n_sites, space.n_sites()));
    }
    spec.validate()?;
    assemble(&spec.terms, space, "H")
}

/// Σ of the given terms on `space` (sites must exist in `space`).
pub fn build_terms(terms: &[TermSpec], space: &FockSpace, name: &str) -> Result<SparseOperator> {
    assemble(terms, space, name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub k: usize,
    /// J̄_{i,k₁}, indexed [site][k₁] for k₁ = 0..=k.
    pub jbar: Vec<Vec<f64>>,
    pub jcal: f64,
    /// v̄_{k₁} for k₁ = 0..=k/2 (number of n̂ factors).
    pub vbar: Vec<f64>,
    pub fbar: f64,
    pub mu_bar: f64,
    pub fbar_prime: f64,
    pub u: Vec<f64>,
}

impl ModelConstants {
    pub fn jbar_k(&self, site: usize) -> f64 {
        self.jbar[site][self.k]
    }
}

pub fn extract_constants(spec: &ModelSpec) -> ModelConstants {
    let l = spec.n_sites;
    let k = spec.k;
    let mut jbar = vec![vec![0.0; k + 1]; l];
    let mut vbar_site = vec![vec![0.0; k / 2 + 1]; l];
    let mut fbar_site = vec![0.0; l];
    for t in &spec.terms {
        let w = t.expanded_weight() * t.multiplicity();
        let d = t.degree().min(k);
        for s in t.sites() {
            match t.role {
                TermRole::Coupling => jbar[s][d] += w,
                TermRole::Positive => {
                    let nn: usize = t
                        .factors
                        .iter()
                        .map(|(_, kk)| match kk {
                            OpKind::N => 1,
                            OpKind::NPow(p) => *p as usize,
                            _ => 0,
                        })
                        .sum();
                    vbar_site[s][nn.min(k / 2)] += t.coefficient.norm() * t.multiplicity();
                }
                TermRole::Potential => fbar_site[s] += t.coefficient.norm() * t.multiplicity(),
                TermRole::Repulsion | TermRole::Kinetic => {}
            }
        }
    }
    let jcal = (0..l)
        .map(|i| (1..=k).map(|k1| jbar[i][k1] * (1.0 + ((2 * k1) as f64).powi(k1 as i32))).sum::<f64>())
        .fold(0.0, f64::max);
    let vbar = (0..=k / 2).map(|k1| (0..l).map(|i| vbar_site[i][k1]).fold(0.0, f64::max)).collect();
    let fbar = fbar_site.iter().copied().fold(0.0, f64::max);
    let mu_bar = spec.mu.iter().copied().fold(0.0, f64::max);
    ModelConstants {
        k,
        jbar,
        jcal,
        vbar,
        fbar,
        mu_bar,
        fbar_prime: fbar.max(mu_bar / 2.0),
        u: spec.onsite_repulsion.clone(),
    }
}

/// Local-norm constant g: the smallest value with
/// Σ_{Z∋i} ‖h_Z Π_{Z,≤N}‖ ≤ g N^{k/2} for N = 1..=n_max and
/// ‖Σ_{Z ⊇ {i,j}} h_Z Π_{≤N}‖ ≤ g N^{k/2} J̄(|i−j|) for pairs.
/// Norms are evaluated on the local cutoff N + degree so the image is exact.
pub fn interaction_constant_g(spec: &ModelSpec, n_max: usize, alpha_bar: f64) -> Result<f64> {
    let mut groups: BTreeMap<Vec<usize>, Vec<TermSpec>> = BTreeMap::new();
    for t in &spec.terms {
        groups.entry(t.sites()).or_default().push(t.clone());
    }
    let half_k = spec.k as f64 / 2.0;
    let mut g: f64 = 0.0;
    for n in 1..=n_max {
        let mut per_site = vec![0.0; spec.n_sites];
        let nk = (n as f64).powf(half_k);
        for (sites, terms) in &groups {
            let nz = restricted_norm(sites, terms, n)?;
            for &s in sites {
                per_site[s] += nz;
            }
            if sites.len() == 2 {
                let d = (sites[1] - sites[0]) as f64;
                let jb = jbar_profile(d, alpha_bar);
                if jb > 0.0 {
                    g = g.max(nz / (nk * jb));
                }
            }
        }
        for v in per_site {
            g = g.max(v / nk);
        }
    }
    Ok(g)
}

/// ‖h Π_{≤N}‖ for a group of terms supported on `sites`.
fn restricted_norm(sites: &[usize], terms: &[TermSpec], n: usize) -> Result<f64> {
    let deg = terms.iter().map(|t| t.degree()).max().unwrap_or(0);
    let local = FockSpace::uniform(sites.len(), n + deg)?;
    let remapped: Vec<TermSpec> = terms
        .iter()
        .map(|t| {
            let mut t = t.clone();
            for f in &mut t.factors {
                f.0 = sites.iter().position(|&s| s == f.0).unwrap();
            }
            t
        })
        .collect();
    let h = assemble(&remapped, &local, "h_Z")?.to_dense();
    let cols: Vec<usize> = (0..local.dim()).filter(|&i| local.decode(i).iter().all(|&x| x <= n)).collect();
    let sub = DMatrix::from_fn(local.dim(), cols.len(), |r, c| h[(r, cols[c])]);
    Ok(spectral_norm(&sub))
}

/// Smallest eigenvalue of the positive-polynomial part on the truncated space,
/// a numerical spot check of V₊ ⪰ 0.
pub fn positive_part_min_eigenvalue(spec: &ModelSpec, space: &FockSpace) -> Result<f64> {
    let terms: Vec<TermSpec> = spec.terms.iter().filter(|t| t.role == TermRole::Positive).cloned().collect();
    let v = assemble(&terms, space, "V+")?;
    Ok(eigh(&v.to_dense()).0.first().copied().unwrap_or(0.0))
}
