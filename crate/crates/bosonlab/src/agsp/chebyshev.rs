use crate::error::{Error, Result};
use crate::linalg::LinearOp;
use crate::C64;

/// K(m, H) = T_m[(2(H−E₀) − (W+Δ))/(W−Δ)] / T_m[−(W+Δ)/(W−Δ)], applied
/// through the Chebyshev three-term recurrence. Iterates are kept divided
/// by T_j at the normalization point, so no intermediate overflows.
pub struct ChebyshevAgsp<'a, A: LinearOp + ?Sized> {
    h: &'a A,
    pub e0: f64,
    pub gap: f64,
    /// Upper estimate of ‖H − E₀‖.
    pub width: f64,
    pub m: usize,
    a0: f64,
    ratios: Vec<f64>,
}

impl<'a, A: LinearOp + ?Sized> ChebyshevAgsp<'a, A> {
    pub fn new(h: &'a A, e0: f64, gap: f64, width: f64, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidArgument("Chebyshev degree m must be ≥ 1".into()));
        }
        if !(gap > 0.0) {
            return Err(Error::Degenerate);
        }
        if !(width > gap) {
            return Err(Error::InvalidArgument(format!("width {width} must exceed the gap {gap}")));
        }
        let a0 = -(width + gap) / (width - gap);
        // ρ_j = T_j(a₀)/T_{j−1}(a₀)
        let mut ratios = vec![f64::NAN, a0];
        for j in 2..=m {
            let prev = ratios[j - 1];
            ratios.push(2.0 * a0 - 1.0 / prev);
        }
        Ok(Self { h, e0, gap, width, m, a0, ratios })
    }

    /// ‖K(1−P)‖ bound 2exp(−2m√(Δ/W)).
    pub fn error_bound(&self) -> f64 {
        2.0 * (-2.0 * self.m as f64 * (self.gap / self.width).sqrt()).exp()
    }

    fn shifted(&self, x: f64) -> f64 {
        (2.0 * x - (self.width + self.gap)) / (self.width - self.gap)
    }

    /// K evaluated at an energy offset x = E − E₀.
    pub fn scalar(&self, x: f64) -> f64 {
        let t = self.shifted(x);
        let mut prev = 1.0;
        let mut cur = t / self.a0;
        for j in 1..self.m {
            let next = (2.0 * t * cur - prev / self.ratios[j]) / self.ratios[j + 1];
            prev = cur;
            cur = next;
        }
        cur
    }

    fn shifted_apply(&self, v: &[C64], out: &mut [C64]) {
        self.h.apply_into(v, out);
        let s = 2.0 / (self.width - self.gap);
        let c = (2.0 * self.e0 + self.width + self.gap) / (self.width - self.gap);
        for (o, x) in out.iter_mut().zip(v) {
            *o = *o * s - *x * c;
        }
    }
}

impl<A: LinearOp + ?Sized> LinearOp for ChebyshevAgsp<'_, A> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let n = v.len();
        let mut prev = v.to_vec();
        let mut cur = vec![C64::default(); n];
        self.shifted_apply(v, &mut cur);
        cur.iter_mut().for_each(|x| *x /= self.a0);
        let mut tmp = vec![C64::default(); n];
        for j in 1..self.m {
            self.shifted_apply(&cur, &mut tmp);
            let (rj, rj1) = (self.ratios[j], self.ratios[j + 1]);
            for i in 0..n {
                tmp[i] = (tmp[i] * 2.0 - prev[i] / rj) / rj1;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut tmp);
        }
        out.copy_from_slice(&cur);
    }
}
