//! Interval statistics served from compensated prefix sums and a sparse
//! minimum table, so that every query over a [`GridInterval`] costs O(1).

use crate::grid::{GridInterval, StepFunction};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Compensated (Neumaier) sum of a sequence.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let (s, e) = two_sum(sum, v);
        sum = s;
        comp += e;
    }
    sum + comp
}

/// Prefix sums kept as an unevaluated pair (high part, accumulated error) so
/// that range differences do not suffer from cancellation against a large
/// running total.
#[derive(Debug, Clone)]
pub struct PrefixSum {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl PrefixSum {
    pub fn new<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let values = values.into_iter();
        let (lower, _) = values.size_hint();
        let mut hi = Vec::with_capacity(lower + 1);
        let mut lo = Vec::with_capacity(lower + 1);
        hi.push(0.0);
        lo.push(0.0);
        let (mut s, mut c) = (0.0, 0.0);
        for v in values {
            let (ns, e) = two_sum(s, v);
            s = ns;
            c += e;
            hi.push(s);
            lo.push(c);
        }
        Self { hi, lo }
    }

    /// Sum of the values in cells `start..end`.
    #[inline]
    pub fn range(&self, start: usize, end: usize) -> f64 {
        (self.hi[end] - self.hi[start]) + (self.lo[end] - self.lo[start])
    }

    pub fn len(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Range sums over values that may contain `+∞` (cells of a non-integrable
/// closed form). A range containing an infinite cell sums to `+∞`.
#[derive(Debug, Clone)]
pub struct ExtendedSum {
    finite: PrefixSum,
    infinite: Vec<u32>,
}

impl ExtendedSum {
    pub fn new(values: &[f64]) -> Self {
        let finite = PrefixSum::new(values.iter().map(|v| if v.is_finite() { *v } else { 0.0 }));
        let mut infinite = Vec::with_capacity(values.len() + 1);
        infinite.push(0);
        let mut count = 0;
        for v in values {
            if !v.is_finite() {
                count += 1;
            }
            infinite.push(count);
        }
        Self { finite, infinite }
    }

    #[inline]
    pub fn range(&self, start: usize, end: usize) -> f64 {
        if self.infinite[end] > self.infinite[start] {
            f64::INFINITY
        } else {
            self.finite.range(start, end)
        }
    }

    #[inline]
    pub fn average(&self, i: GridInterval) -> f64 {
        self.range(i.start, i.end) / i.len() as f64
    }
}

/// Sparse table answering range-minimum queries in O(1) after
/// O(n log n) preprocessing.
#[derive(Debug, Clone)]
pub struct SparseMin {
    levels: Vec<Vec<f64>>,
}

impl SparseMin {
    pub fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=values.len() - 2 * width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Minimum over `start..end`; `end > start`.
    #[inline]
    pub fn min(&self, start: usize, end: usize) -> f64 {
        debug_assert!(end > start);
        let len = end - start;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let row = &self.levels[k];
        row[start].min(row[end - (1 << k)])
    }
}

/// Precomputed statistics of one step function: signed sums, sums of
/// `|v|^q` for a configured list of exponents, and cell minima.
#[derive(Debug, Clone)]
pub struct IntervalStats {
    h: f64,
    sum: PrefixSum,
    abs_powers: Vec<(f64, PrefixSum)>,
    min: SparseMin,
}

impl IntervalStats {
    pub fn new(f: &StepFunction) -> Self {
        Self::with_powers(f, &[])
    }

    /// Also tabulates `Σ|v|^q` for every `q` in `qs` (q = 1 gives `Σ|v|`).
    pub fn with_powers(f: &StepFunction, qs: &[f64]) -> Self {
        let values = f.values();
        let abs_powers = qs
            .iter()
            .map(|&q| (q, PrefixSum::new(values.iter().map(|v| abs_pow(*v, q)))))
            .collect();
        Self {
            h: f.grid().h(),
            sum: PrefixSum::new(values.iter().copied()),
            abs_powers,
            min: SparseMin::new(values),
        }
    }

    pub fn integral(&self, i: GridInterval) -> f64 {
        self.h * self.sum.range(i.start, i.end)
    }

    pub fn average(&self, i: GridInterval) -> f64 {
        self.sum.range(i.start, i.end) / i.len() as f64
    }

    pub fn min(&self, i: GridInterval) -> f64 {
        self.min.min(i.start, i.end)
    }

    /// `Σ|v|^q` over the interval's cells, if `q` was tabulated.
    pub fn abs_power_sum(&self, i: GridInterval, q: f64) -> Option<f64> {
        self.abs_powers
            .iter()
            .find(|(p, _)| *p == q)
            .map(|(_, ps)| ps.range(i.start, i.end).max(0.0))
    }

    /// `(average |v|^q)^{1/q}`, if `q` was tabulated.
    pub fn power_mean(&self, i: GridInterval, q: f64) -> Option<f64> {
        self.abs_power_sum(i, q)
            .map(|s| (s / i.len() as f64).powf(1.0 / q))
    }

    /// `(h Σ|v|^q)^{1/q}`, if `q` was tabulated.
    pub fn lq_norm(&self, i: GridInterval, q: f64) -> Option<f64> {
        self.abs_power_sum(i, q).map(|s| (self.h * s).powf(1.0 / q))
    }
}

#[inline]
pub(crate) fn abs_pow(v: f64, q: f64) -> f64 {
    if q == 1.0 {
        v.abs()
    } else {
        v.abs().powf(q)
    }
}

/// Relative-with-floor tolerance used by every audit comparison.
pub const REL_TOL: f64 = 1e-9;
pub const ABS_TOL: f64 = 1e-12;

/// Tolerance for comparing quantities of magnitude `scale`.
#[inline]
pub fn tolerance(scale: f64) -> f64 {
    if scale.is_finite() {
        REL_TOL * scale.abs() + ABS_TOL
    } else {
        ABS_TOL
    }
}

/// `true` when `a ≤ b` up to [`tolerance`]; infinities compare exactly.
#[inline]
pub fn le_tol(a: f64, b: f64) -> bool {
    if b == f64::INFINITY {
        return true;
    }
    a <= b + tolerance(a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_min_matches_scan() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect();
        let t = SparseMin::new(&v);
        for s in 0..v.len() {
            for e in s + 1..=v.len() {
                let naive = v[s..e].iter().copied().fold(f64::INFINITY, f64::min);
                assert_eq!(t.min(s, e), naive, "[{s},{e})");
            }
        }
    }

    #[test]
    fn prefix_sum_survives_cancellation() {
        // A huge value early on would wipe out small tail sums in a plain prefix.
        let mut v = vec![1e12];
        v.extend(std::iter::repeat_n(1e-3, 1000));
        let p = PrefixSum::new(v.iter().copied());
        let tail = p.range(1, 1001);
        assert!((tail - 1.0).abs() < 1e-12, "{tail}");
    }

    #[test]
    fn compensated_sum_is_exact_on_integers() {
        assert_eq!(compensated_sum((1..=1000).map(|i| i as f64)), 500500.0);
    }
}
