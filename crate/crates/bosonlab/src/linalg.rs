//! Dense helpers and iterative eigensolvers (thick-restart Lanczos, Davidson)
//! for Hermitian operators.

use crate::error::{Error, Result};
use crate::fock::{inner, norm, SparseOperator};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[C64], y: &mut [C64]);

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// Real part of the diagonal, when cheap to read off.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOp for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        SparseOperator::apply_into(self, x, y)
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..SparseOperator::dim(self)).map(|r| self.get(r, r).re).collect())
    }
}

impl LinearOp for DMatrix<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let v = self * DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.diagonal().iter().map(|z| z.re).collect())
    }
}

/// Wraps a closure as a linear operator.
pub struct FnOp<F: Fn(&[C64], &mut [C64]) + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[C64], &mut [C64]) + Sync> LinearOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        (self.f)(x, y)
    }
}

struct Negated<'a, A: LinearOp + ?Sized>(&'a A);

impl<A: LinearOp + ?Sized> LinearOp for Negated<'_, A> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.0.apply_into(x, y);
        for v in y.iter_mut() {
            *v = -*v;
        }
    }
}

pub fn to_dense_op<A: LinearOp + ?Sized>(op: &A) -> DMatrix<C64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![C64::default(); n];
    let mut col = vec![C64::default(); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        op.apply_into(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = C64::default();
    }
    m
}

/// Eigen-decomposition of a Hermitian matrix, ascending; real input takes a
/// real-symmetric path.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = if herm.iter().all(|z| z.im == 0.0) {
        let re = herm.map(|z| z.re);
        let e = SymmetricEigen::new(re);
        (e.eigenvalues.as_slice().to_vec(), e.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let e = SymmetricEigen::new(herm);
        (e.eigenvalues.as_slice().to_vec(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        sorted_vecs.set_column(k, &vecs.column(i));
    }
    (sorted_vals, sorted_vecs)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s = m.clone().singular_values().as_slice().to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Thin SVD with singular values sorted descending: (U, s, V†).
pub fn svd(m: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>, DMatrix<C64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values.as_slice().to_vec();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut uu = DMatrix::zeros(u.nrows(), s.len());
    let mut vv = DMatrix::zeros(s.len(), vt.ncols());
    for (k, &i) in order.iter().enumerate() {
        uu.set_column(k, &u.column(i));
        vv.set_row(k, &vt.row(i));
    }
    (uu, order.iter().map(|&i| s[i]).collect(), vv)
}

/// Spectral norm of a dense matrix.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &DMatrix<C64>) -> f64 {
    eigh(m).0.iter().map(|x| x.abs()).sum()
}

/// Iterative method above the dense threshold. `Auto` takes Davidson when the
/// operator exposes its diagonal and Lanczos otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Auto,
    Lanczos,
    Davidson,
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_matvecs: usize,
    pub basis_size: usize,
    pub seed: u64,
    pub start: Option<Vec<C64>>,
    pub method: Method,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_matvecs: 200_000, basis_size: 0, seed: 0x5eed, start: None, method: Method::Auto }
    }
}

#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub restarts: usize,
}

pub fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for v in basis {
            let h = inner(v, w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= h * vi;
            }
        }
    }
}

/// Lowest `nev` eigenpairs of a Hermitian operator by thick-restart Lanczos
/// with full reorthogonalization. Convergence: residual ≤ tol·max(1,|θ|), or
/// the rounding floor 64ε·max|θ| when that is larger.
pub fn lanczos_lowest<A: LinearOp + ?Sized>(op: &A, nev: usize, opts: &LanczosOptions) -> Result<EigPairs> {
    with_deflation(op.dim(), nev, opts, |nev, locked, start, rng| lanczos_run(op, nev, opts, locked, start, rng))
}

/// Lowest `nev` eigenpairs by Davidson iteration with the diagonal
/// preconditioner (diag(A) − θ)⁻¹. Same convergence test as Lanczos; much
/// faster when the diagonal spans many orders of magnitude.
pub fn davidson_lowest<A: LinearOp + ?Sized>(op: &A, diag: &[f64], nev: usize, opts: &LanczosOptions) -> Result<EigPairs> {
    if diag.len() != op.dim() {
        return Err(Error::InvalidArgument(format!("diagonal of length {} for dimension {}", diag.len(), op.dim())));
    }
    with_deflation(op.dim(), nev, opts, |nev, locked, start, rng| davidson_run(op, diag, nev, opts, locked, start, rng))
}

/// A single subspace run sees one direction per degenerate eigenspace, so
/// after convergence the search is repeated in the orthogonal complement of
/// the converged vectors until that complement has nothing lower.
fn with_deflation<F>(n: usize, nev: usize, opts: &LanczosOptions, mut run: F) -> Result<EigPairs>
where
    F: FnMut(usize, &[Vec<C64>], Option<Vec<C64>>, &mut ChaCha8Rng) -> Result<EigPairs>,
{
    if nev == 0 || nev > n {
        return Err(Error::InvalidArgument(format!("nev={nev} for dimension {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = run(nev, &[], opts.start.clone(), &mut rng)?;
    while best.vectors.len() < n {
        // random phases on the caller's start keep its envelope
        let start = opts.start.as_ref().map(|s| {
            s.iter().map(|&x| x * C64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU)).collect()
        });
        let probe = run(1, &best.vectors, start, &mut rng)?;
        best.matvecs += probe.matvecs;
        best.restarts += probe.restarts;
        let top = best.values[nev - 1];
        let theta = probe.values[0];
        if theta >= top - opts.tol * top.abs().max(1.0) {
            break;
        }
        let mut pairs: Vec<(f64, Vec<C64>, f64)> = best
            .values
            .drain(..)
            .zip(best.vectors.drain(..))
            .zip(best.residuals.drain(..))
            .map(|((v, x), r)| (v, x, r))
            .collect();
        pairs.extend(probe.values.into_iter().zip(probe.vectors).zip(probe.residuals).map(|((v, x), r)| (v, x, r)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.truncate(nev);
        for (v, x, r) in pairs {
            best.values.push(v);
            best.vectors.push(x);
            best.residuals.push(r);
        }
    }
    Ok(best)
}

fn start_vector(start: Option<Vec<C64>>, dim: usize, locked: &[Vec<C64>], rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v0 = match start {
        Some(s) if s.len() == dim && norm(&s) > 0.0 => s,
        _ => random_unit_vector(dim, rng),
    };
    orthogonalize(&mut v0, locked);
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);
    v0
}

fn combine(y: &DMatrix<C64>, i: usize, src: &[Vec<C64>], dim: usize) -> Vec<C64> {
    let mut x = vec![C64::default(); dim];
    for (a, v) in src.iter().enumerate() {
        let c = y[(a, i)];
        if c != C64::default() {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += c * vi;
            }
        }
    }
    x
}

fn projected(basis: &[Vec<C64>], images: &[Vec<C64>]) -> DMatrix<C64> {
    let k = basis.len();
    let mut g = DMatrix::<C64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let h = inner(&basis[a], &images[b]);
            g[(a, b)] = h;
            g[(b, a)] = h.conj();
        }
        g[(a, a)] = C64::new(g[(a, a)].re, 0.0);
    }
    g
}

/// Residuals cannot drop below rounding in A·x.
fn converged_at(rnorm: f64, theta: f64, tol: f64, floor: f64) -> bool {
    rnorm <= (tol * theta.abs().max(1.0)).max(floor)
}

fn rounding_floor(theta: &[f64]) -> f64 {
    64.0 * f64::EPSILON * theta.iter().fold(0.0_f64, |a, t| a.max(t.abs()))
}

fn davidson_run<A: LinearOp + ?Sized>(
    op: &A,
    diag: &[f64],
    nev: usize,
    opts: &LanczosOptions,
    locked: &[Vec<C64>],
    start: Option<Vec<C64>>,
    rng: &mut ChaCha8Rng,
) -> Result<EigPairs> {
    let dim = op.dim();
    let n = dim - locked.len();
    let m = if opts.basis_size > 0 { opts.basis_size } else { (4 * nev + 24).max(40) }.min(n);
    let keep = (2 * nev).max(nev + 2).min(m.saturating_sub(nev)).max(nev.min(m));

    let v0 = start_vector(start, dim, locked, rng);
    let mut images = vec![op.apply(&v0)];
    let mut basis = vec![v0];
    let mut matvecs = 1;
    let mut restarts = 0;
    loop {
        let k = basis.len();
        let (theta, y) = eigh(&projected(&basis, &images));
        let nr = nev.min(k);
        let nkeep = keep.min(k);
        let mut xs = Vec::with_capacity(nkeep);
        let mut axs = Vec::with_capacity(nkeep);
        let mut res = Vec::with_capacity(nr);
        for i in 0..nkeep {
            let x = combine(&y, i, &basis, dim);
            let ax = combine(&y, i, &images, dim);
            if i < nr {
                res.push(ax.iter().zip(&x).map(|(a, b)| a - theta[i] * b).collect::<Vec<C64>>());
            }
            xs.push(x);
            axs.push(ax);
        }
        let rnorms: Vec<f64> = res.iter().map(|r| norm(r)).collect();
        let floor = rounding_floor(&theta);
        let ok = |i: usize| converged_at(rnorms[i], theta[i], opts.tol, floor);
        if (nr == nev && (0..nev).all(ok)) || k == n {
            return Ok(EigPairs {
                values: theta[..nev].to_vec(),
                vectors: xs.into_iter().take(nev).collect(),
                residuals: rnorms,
                matvecs,
                restarts,
            });
        }
        if matvecs >= opts.max_matvecs {
            let worst = rnorms.iter().copied().fold(0.0, f64::max);
            return Err(Error::NotConverged { iterations: matvecs, residual: worst });
        }
        let mut candidates = Vec::new();
        for i in (0..nr).filter(|&i| !ok(i)) {
            let shift_floor = 1e-10 * theta[i].abs().max(1.0);
            let inv: Vec<f64> = diag
                .iter()
                .map(|&d| {
                    let den = d - theta[i];
                    1.0 / if den.abs() < shift_floor { shift_floor.copysign(den) } else { den }
                })
                .collect();
            // Olsen correction: plain M⁻¹r equals x on decoupled eigen-directions
            // of the diagonal and would never separate them
            let mr: Vec<C64> = res[i].iter().zip(&inv).map(|(r, &m)| r * m).collect();
            let mx: Vec<C64> = xs[i].iter().zip(&inv).map(|(x, &m)| x * m).collect();
            let den = inner(&xs[i], &mx);
            let eps = if den.norm() > 1e-300 { inner(&xs[i], &mr) / den } else { C64::default() };
            let t: Vec<C64> = mr.iter().zip(&mx).map(|(a, b)| a - eps * b).collect();
            candidates.push([t, res[i].clone()]);
        }
        if k + candidates.len() > m {
            restarts += 1;
            for x in &mut xs {
                orthogonalize(x, locked);
            }
            basis = xs;
            images = axs;
        }
        let mut added = 0;
        for pair in candidates {
            for mut w in pair {
                let before = norm(&w);
                orthogonalize(&mut w, &basis);
                orthogonalize(&mut w, locked);
                let nw = norm(&w);
                if nw > 1e-8 * before && basis.len() < n {
                    w.iter_mut().for_each(|x| *x /= nw);
                    images.push(op.apply(&w));
                    basis.push(w);
                    matvecs += 1;
                    added += 1;
                    break;
                }
            }
        }
        if added == 0 {
            let mut w = random_unit_vector(dim, rng);
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, locked);
            let nw = norm(&w);
            w.iter_mut().for_each(|x| *x /= nw);
            images.push(op.apply(&w));
            basis.push(w);
            matvecs += 1;
        }
    }
}

/// One thick-restart run restricted to the complement of `locked`.
fn lanczos_run<A: LinearOp + ?Sized>(
    op: &A,
    nev: usize,
    opts: &LanczosOptions,
    locked: &[Vec<C64>],
    start: Option<Vec<C64>>,
    rng: &mut ChaCha8Rng,
) -> Result<EigPairs> {
    let n = op.dim() - locked.len();
    let m = if opts.basis_size > 0 { opts.basis_size } else { (2 * nev + 30).max(48) }.min(n);
    let keep = (nev + (m - nev) / 3).min(m - 1).max(nev.min(m - 1));

    let mut basis: Vec<Vec<C64>> = vec![start_vector(start, op.dim(), locked, rng)];
    let mut images: Vec<Vec<C64>> = Vec::new();
    let mut matvecs = 0;
    let mut restarts = 0;

    loop {
        // extend to m vectors, keeping A·v for each
        while basis.len() < m || images.len() < basis.len() {
            let j = images.len();
            let av = op.apply(&basis[j]);
            matvecs += 1;
            images.push(av.clone());
            if basis.len() < m {
                let mut w = av;
                orthogonalize(&mut w, &basis);
                orthogonalize(&mut w, locked);
                let mut nw = norm(&w);
                let scale = norm(&images[j]).max(1e-300);
                let mut tries = 0;
                while nw <= 1e-12 * scale && tries < 5 {
                    w = random_unit_vector(op.dim(), rng);
                    orthogonalize(&mut w, &basis);
                    orthogonalize(&mut w, locked);
                    nw = norm(&w);
                    tries += 1;
                }
                if nw <= 1e-14 {
                    break;
                }
                w.iter_mut().for_each(|x| *x /= nw);
                basis.push(w);
            }
        }
        let k = basis.len();
        let (theta, y) = eigh(&projected(&basis, &images));
        let ritz = |i: usize, src: &[Vec<C64>]| combine(&y, i, src, op.dim());
        let nkeep = keep.min(k);
        let mut xs = Vec::with_capacity(nkeep);
        let mut axs = Vec::with_capacity(nkeep);
        let mut res = Vec::with_capacity(nkeep);
        for i in 0..nkeep {
            let x = ritz(i, &basis);
            let ax = ritz(i, &images);
            let r: Vec<C64> = ax.iter().zip(&x).map(|(a, b)| a - theta[i] * b).collect();
            res.push(r);
            xs.push(x);
            axs.push(ax);
        }
        let rnorms: Vec<f64> = res.iter().map(|r| norm(r)).collect();
        let floor = rounding_floor(&theta);
        let ok = |i: usize| converged_at(rnorms[i], theta[i], opts.tol, floor);
        let converged = (0..nev).all(ok);
        let last_res = (0..nev).map(|i| rnorms[i]).fold(0.0, f64::max);
        if converged || k == n {
            return Ok(EigPairs {
                values: theta[..nev].to_vec(),
                vectors: xs.into_iter().take(nev).collect(),
                residuals: rnorms[..nev].to_vec(),
                matvecs,
                restarts,
            });
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::NotConverged { iterations: matvecs, residual: last_res });
        }
        restarts += 1;
        // thick restart: kept Ritz vectors plus the residual direction of the
        // first unconverged one
        let first_bad = (0..nev).find(|&i| !ok(i)).unwrap_or(0);
        let mut next = res[first_bad].clone();
        // Lanczos amplifies any drift back into the locked (lower) directions
        for x in &mut xs {
            orthogonalize(x, locked);
        }
        basis = xs;
        images = axs;
        orthogonalize(&mut next, &basis);
        orthogonalize(&mut next, locked);
        let nn = norm(&next);
        if nn <= 1e-14 {
            next = random_unit_vector(op.dim(), rng);
            orthogonalize(&mut next, &basis);
            orthogonalize(&mut next, locked);
        }
        let nn = norm(&next);
        next.iter_mut().for_each(|x| *x /= nn);
        basis.push(next);
    }
}

/// Lowest eigenpairs, dense below `dense_threshold`.
pub fn lowest_eigenpairs<A: LinearOp + ?Sized>(
    op: &A,
    nev: usize,
    dense_threshold: usize,
    opts: &LanczosOptions,
) -> Result<(EigPairs, &'static str)> {
    let n = op.dim();
    if n <= dense_threshold {
        let m = to_dense_op(op);
        let (vals, vecs) = eigh(&m);
        let nev = nev.min(n);
        let vectors: Vec<Vec<C64>> = (0..nev).map(|i| vecs.column(i).iter().copied().collect()).collect();
        let residuals = vectors
            .iter()
            .zip(&vals)
            .map(|(v, &e)| {
                let av = op.apply(v);
                norm(&av.iter().zip(v).map(|(a, b)| a - e * b).collect::<Vec<_>>())
            })
            .collect();
        Ok((EigPairs { values: vals[..nev].to_vec(), vectors, residuals, matvecs: n, restarts: 0 }, "dense"))
    } else {
        match (opts.method, op.diagonal()) {
            (Method::Lanczos, _) | (Method::Auto, None) => Ok((lanczos_lowest(op, nev, opts)?, "lanczos")),
            (_, Some(d)) => Ok((davidson_lowest(op, &d, nev, opts)?, "davidson")),
            (Method::Davidson, None) => Err(Error::InvalidArgument("Davidson needs the operator diagonal".into())),
        }
    }
}

/// Largest |eigenvalue| of a Hermitian operator. Exact below the dense
/// threshold, otherwise the larger of the two extremal Lanczos Ritz values
/// converged to relative tolerance `tol`.
pub fn hermitian_norm<A: LinearOp + ?Sized>(op: &A, dense_threshold: usize, tol: f64, seed: u64) -> Result<f64> {
    let n = op.dim();
    if n == 0 {
        return Ok(0.0);
    }
    if n <= dense_threshold {
        let (vals, _) = eigh(&to_dense_op(op));
        return Ok(vals.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }
    let opts = LanczosOptions { tol, seed, ..Default::default() };
    let lo = lanczos_lowest(op, 1, &opts)?.values[0];
    let hi = -lanczos_lowest(&Negated(op), 1, &opts)?.values[0];
    Ok(lo.abs().max(hi.abs()))
}
