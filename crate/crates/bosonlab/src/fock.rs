//! Truncated bosonic Fock spaces and a compressed-row sparse operator type.
//!
//! Operators are hard-truncated: matrix elements that would reference an
//! occupation above the cutoff are absent. Products of site-local factors in a
//! model term are formed on an enlarged local cutoff before truncation, so the
//! assembled term equals `Π h Π` exactly.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const PAR_THRESHOLD: usize = 1 << 13;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockSpace {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::InvalidArgument("Fock space needs at least one site".into()));
        }
        let mut strides = Vec::with_capacity(cutoffs.len());
        let mut dim: usize = 1;
        for &n in &cutoffs {
            strides.push(dim);
            dim = dim
                .checked_mul(n + 1)
                .ok_or_else(|| Error::Budget("Fock dimension overflows usize".into()))?;
        }
        Ok(Self { cutoffs, strides, dim })
    }

    pub fn uniform(n_sites: usize, cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff; n_sites])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn cutoff(&self, site: usize) -> usize {
        self.cutoffs[site]
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            Err(Error::SiteOutOfRange { site, n_sites: self.n_sites() })
        } else {
            Ok(())
        }
    }

    pub fn encode(&self, occ: &[usize]) -> Result<usize> {
        if occ.len() != self.n_sites() {
            return Err(Error::DimensionMismatch(occ.len(), self.n_sites()));
        }
        let mut idx = 0;
        for (x, &n) in occ.iter().enumerate() {
            if n > self.cutoffs[x] {
                return Err(Error::BeyondCutoff { n, cutoff: self.cutoffs[x] });
            }
            idx += n * self.strides[x];
        }
        Ok(idx)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        debug_assert!(index < self.dim);
        self.cutoffs
            .iter()
            .map(|&n| {
                let d = index % (n + 1);
                index /= n + 1;
                d
            })
            .collect()
    }

    #[inline]
    pub fn occupation(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % (self.cutoffs[site] + 1)
    }

    pub fn total_occupation(&self, index: usize) -> usize {
        self.decode(index).iter().sum()
    }

    /// Basis indices whose occupations all satisfy `n_x <= N_x - margin`.
    pub fn interior_mask(&self, margin: usize) -> Vec<bool> {
        (0..self.dim)
            .map(|i| {
                self.decode(i)
                    .iter()
                    .zip(&self.cutoffs)
                    .all(|(&n, &c)| n + margin <= c)
            })
            .collect()
    }

    /// Position in `self` of every basis state of `inner`; `inner` must have
    /// the same number of sites and cutoffs no larger than `self`.
    pub fn embedding_of(&self, inner: &FockSpace) -> Result<Vec<usize>> {
        if inner.n_sites() != self.n_sites() {
            return Err(Error::DimensionMismatch(inner.n_sites(), self.n_sites()));
        }
        for (a, b) in inner.cutoffs.iter().zip(&self.cutoffs) {
            if a > b {
                return Err(Error::BeyondCutoff { n: *a, cutoff: *b });
            }
        }
        Ok((0..inner.dim).map(|i| self.encode(&inner.decode(i)).unwrap()).collect())
    }

    /// Reduced space on an ordered subset of sites.
    pub fn restrict(&self, sites: &[usize]) -> Result<FockSpace> {
        for &s in sites {
            self.check_site(s)?;
        }
        FockSpace::new(sites.iter().map(|&s| self.cutoffs[s]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    B,
    Bdag,
    N,
    Phi,
    Pi,
    NPow(u32),
}

impl OpKind {
    /// Degree in creation/annihilation operators: b, b†, φ, π count 1, n̂ counts 2.
    pub fn degree(self) -> usize {
        match self {
            OpKind::B | OpKind::Bdag | OpKind::Phi | OpKind::Pi => 1,
            OpKind::N => 2,
            OpKind::NPow(p) => 2 * p as usize,
        }
    }

    pub fn adjoint(self) -> OpKind {
        match self {
            OpKind::B => OpKind::Bdag,
            OpKind::Bdag => OpKind::B,
            k => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    pub hermitian: bool,
    pub name: String,
}

impl SparseOperator {
    /// Duplicate entries are summed and exact zeros dropped.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, C64)>,
        hermitian: bool,
        name: impl Into<String>,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != C64::new(0.0, 0.0) {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { dim, row_ptr, col_idx: keep_cols, values: keep_vals, hermitian, name: name.into() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, vec![], true, "0")
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim], "I")
    }

    pub fn diagonal(diag: &[C64], name: impl Into<String>) -> Self {
        let herm = diag.iter().all(|z| z.im == 0.0);
        let t = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), t, herm, name)
    }

    pub fn from_dense(m: &DMatrix<C64>, hermitian: bool, name: impl Into<String>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut t = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), t, hermitian, name)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                out.push((r, c, v));
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let kernel = |(r, yr): (usize, &mut C64)| {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        };
        if self.dim >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn expectation(&self, x: &[C64]) -> C64 {
        let y = self.apply(x);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, t, self.hermitian, format!("({})†", self.name))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.hermitian = self.hermitian && s.im == 0.0;
        if s == C64::new(0.0, 0.0) {
            return Self::zeros(self.dim);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut t = self.triplets();
        t.extend(other.triplets());
        Ok(Self::from_triplets(
            self.dim,
            t,
            self.hermitian && other.hermitian,
            format!("{}+{}", self.name, other.name),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let rows: Vec<Vec<(usize, usize, C64)>> = (0..self.dim)
            .into_par_iter()
            .map(|r| {
                let mut acc: std::collections::BTreeMap<usize, C64> = Default::default();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_default() += a * b;
                    }
                }
                acc.into_iter().map(|(c, v)| (r, c, v)).collect()
            })
            .collect();
        Ok(Self::from_triplets(
            self.dim,
            rows.into_iter().flatten().collect(),
            false,
            format!("{}·{}", self.name, other.name),
        ))
    }

    pub fn pow(&self, p: u32) -> Self {
        let mut out = Self::identity(self.dim);
        for _ in 0..p {
            out = out.matmul(self).unwrap();
        }
        out.hermitian = self.hermitian;
        out.name = format!("({})^{}", self.name, p);
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Max entry deviation restricted to rows and columns where `mask` holds.
    pub fn max_abs_diff_on(&self, other: &Self, mask: &[bool]) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d
            .triplets()
            .into_iter()
            .filter(|&(r, c, _)| mask[r] && mask[c])
            .map(|(_, _, v)| v.norm())
            .fold(0.0, f64::max))
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    /// Keep entries with both indices below `new_dim`.
    pub fn truncate(&self, new_dim: usize) -> Self {
        let t = self.triplets().into_iter().filter(|&(r, c, _)| r < new_dim && c < new_dim).collect();
        Self::from_triplets(new_dim, t, self.hermitian, self.name.clone())
    }

    /// Principal submatrix on the given basis indices, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            pos[i] = k;
        }
        let mut t = Vec::new();
        for (k, &r) in indices.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    t.push((k, pos[c], v));
                }
            }
        }
        Self::from_triplets(indices.len(), t, self.hermitian, self.name.clone())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            Err(Error::DimensionMismatch(self.dim, other.dim))
        } else {
            Ok(())
        }
    }
}

/// Single-site operator on occupations `0..=cutoff`, hard-truncated.
pub fn local_op(kind: OpKind, cutoff: usize) -> SparseOperator {
    let d = cutoff + 1;
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = Vec::new();
    match kind {
        OpKind::B => {
            for n in 1..d {
                t.push((n - 1, n, C64::new((n as f64).sqrt(), 0.0)));
            }
        }
        OpKind::Bdag => {
            for n in 1..d {
                t.push((n, n - 1, C64::new((n as f64).sqrt(), 0.0)));
            }
        }
        OpKind::N => {
            for n in 0..d {
                t.push((n, n, C64::new(n as f64, 0.0)));
            }
        }
        OpKind::NPow(p) => {
            for n in 0..d {
                t.push((n, n, C64::new((n as f64).powi(p as i32), 0.0)));
            }
        }
        OpKind::Phi => {
            for n in 1..d {
                let a = (n as f64).sqrt() * s2;
                t.push((n - 1, n, C64::new(a, 0.0)));
                t.push((n, n - 1, C64::new(a, 0.0)));
            }
        }
        OpKind::Pi => {
            for n in 1..d {
                let a = (n as f64).sqrt() * s2;
                t.push((n - 1, n, C64::new(0.0, -a)));
                t.push((n, n - 1, C64::new(0.0, a)));
            }
        }
    }
    let herm = !matches!(kind, OpKind::B | OpKind::Bdag);
    SparseOperator::from_triplets(d, t, herm, format!("{kind:?}"))
}

/// Ordered product of single-site factors, formed on `cutoff + degree` and
/// then truncated to `0..=cutoff`.
pub fn local_product(kinds: &[OpKind], cutoff: usize) -> SparseOperator {
    let margin: usize = kinds.iter().map(|k| k.degree()).sum();
    let big = cutoff + margin;
    let mut acc = SparseOperator::identity(big + 1);
    for &k in kinds {
        acc = acc.matmul(&local_op(k, big)).unwrap();
    }
    let herm = acc.hermiticity_error() == 0.0;
    let mut out = acc.truncate(cutoff + 1);
    out.hermitian = herm;
    out
}

fn columns(op: &SparseOperator) -> Vec<Vec<(usize, C64)>> {
    let mut cols = vec![Vec::new(); op.dim()];
    for (r, c, v) in op.triplets() {
        cols[c].push((r, v));
    }
    cols
}

/// Tensor product of site-local operators on distinct sites, identity elsewhere.
pub fn embed_product(space: &FockSpace, factors: &[(usize, &SparseOperator)]) -> Result<SparseOperator> {
    let mut seen = vec![false; space.n_sites()];
    for &(s, op) in factors {
        space.check_site(s)?;
        if seen[s] {
            return Err(Error::InvalidArgument(format!("site {s} repeated in embed_product")));
        }
        seen[s] = true;
        if op.dim() != space.cutoff(s) + 1 {
            return Err(Error::DimensionMismatch(op.dim(), space.cutoff(s) + 1));
        }
    }
    let cols: Vec<_> = factors.iter().map(|(_, op)| columns(op)).collect();
    let triplets: Vec<(usize, usize, C64)> = (0..space.dim())
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut acc = vec![(j, C64::new(1.0, 0.0))];
            for (f, &(s, _)) in factors.iter().enumerate() {
                let n = space.occupation(j, s);
                let stride = space.stride(s);
                let mut next = Vec::with_capacity(acc.len() * cols[f][n].len());
                for &(row, val) in &acc {
                    for &(r, v) in &cols[f][n] {
                        next.push((row + r * stride - n * stride, val * v));
                    }
                }
                acc = next;
            }
            acc.into_iter().map(move |(r, v)| (r, j, v))
        })
        .collect();
    let herm = factors.iter().all(|(_, op)| op.hermitian);
    let name = factors
        .iter()
        .map(|(s, op)| format!("{}_{}", op.name, s))
        .collect::<Vec<_>>()
        .join("⊗");
    Ok(SparseOperator::from_triplets(space.dim(), triplets, herm, name))
}

pub fn embed(site_op: &SparseOperator, space: &FockSpace, site: usize) -> Result<SparseOperator> {
    embed_product(space, &[(site, site_op)])
}

fn site_op(space: &FockSpace, site: usize, kind: OpKind) -> Result<SparseOperator> {
    space.check_site(site)?;
    let op = local_op(kind, space.cutoff(site));
    Ok(embed(&op, space, site)?.with_name(format!("{kind:?}_{site}")))
}

pub fn annihilation_op(space: &FockSpace, site: usize) -> Result<SparseOperator> {
    site_op(space, site, OpKind::B)
}

pub fn creation_op(space: &FockSpace, site: usize) -> Result<SparseOperator> {
    site_op(space, site, OpKind::Bdag)
}

pub fn number_op(space: &FockSpace, site: usize) -> Result<SparseOperator> {
    site_op(space, site, OpKind::N)
}

pub fn phi_op(space: &FockSpace, site: usize) -> Result<SparseOperator> {
    site_op(space, site, OpKind::Phi)
}

pub fn pi_op(space: &FockSpace, site: usize) -> Result<SparseOperator> {
    site_op(space, site, OpKind::Pi)
}

pub fn total_number_op(space: &FockSpace) -> SparseOperator {
    let d: Vec<C64> = (0..space.dim()).map(|i| C64::new(space.total_occupation(i) as f64, 0.0)).collect();
    SparseOperator::diagonal(&d, "N_tot")
}

/// Ordered product of already truncated operators.
pub fn compose(ops: &[&SparseOperator]) -> Result<SparseOperator> {
    let first = ops.first().ok_or_else(|| Error::InvalidArgument("compose of empty list".into()))?;
    let mut acc = (*first).clone();
    for op in &ops[1..] {
        acc = acc.matmul(op)?;
    }
    Ok(acc)
}

pub fn commutator(a: &SparseOperator, b: &SparseOperator) -> Result<SparseOperator> {
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    Ok(ab.sub(&ba)?.with_name(format!("[{},{}]", a.name, b.name)))
}

/// Dense matrix-vector helpers shared across modules.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
