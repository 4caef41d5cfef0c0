//! The power-log family `p_k ∝ k^{-a} (ln k)^{-b}` on `2..=k_max`.
//!
//! Small `k` are tabulated; beyond `BODY_END` the support is cut into dyadic
//! blocks whose masses come from Euler–Maclaurin with a Gauss–Legendre
//! integral. A draw picks a block by mass and then accepts a uniform candidate
//! inside the block against the (decreasing) weight.

use rand::Rng;
use std::sync::OnceLock;

pub(crate) const BODY_END: u64 = 1024;

/// Relative mass allowed beyond the truncation point.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
struct Block {
    lo: u64,
    hi: u64,
    cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLogTail {
    pub a: f64,
    pub b: f64,
    pub k_max: u64,
    body_cdf: Vec<f64>,
    blocks: Vec<Block>,
    total: f64,
}

#[inline]
pub(crate) fn weight(a: f64, b: f64, k: f64) -> f64 {
    k.powf(-a) * k.ln().powf(-b)
}

fn weight_derivative(a: f64, b: f64, x: f64) -> f64 {
    let l = x.ln();
    -weight(a, b, x) / x * (a + b / l)
}

fn gauss_legendre() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 24usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

/// `int_lo^hi x^{-a} (ln x)^{-b} dx`, integrated in `u = ln x`.
fn block_integral(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let (ul, uh) = (lo.ln(), hi.ln());
    let (mid, half) = (0.5 * (ul + uh), 0.5 * (uh - ul));
    gauss_legendre()
        .iter()
        .map(|&(x, w)| {
            let u = mid + half * x;
            w * (u * (1.0 - a)).exp() * u.powf(-b)
        })
        .sum::<f64>()
        * half
}

/// `sum_{k=lo}^{hi} k^{-a} (ln k)^{-b}` for `lo >= BODY_END`.
fn block_sum(a: f64, b: f64, lo: u64, hi: u64) -> f64 {
    let (l, h) = (lo as f64, hi as f64);
    block_integral(a, b, l, h)
        + 0.5 * (weight(a, b, l) + weight(a, b, h))
        + (weight_derivative(a, b, h) - weight_derivative(a, b, l)) / 12.0
}

fn dyadic_blocks(k_max: u64) -> impl Iterator<Item = (u64, u64)> {
    let mut lo = BODY_END;
    std::iter::from_fn(move || {
        if lo > k_max {
            return None;
        }
        let hi = (2 * lo - 1).min(k_max);
        let out = (lo, hi);
        lo = hi + 1;
        Some(out)
    })
}

/// `sum_{k=2}^{k_max} k^{-a} (ln k)^{-b}`; `a` may be any real here.
pub fn power_sum(a: f64, b: f64, k_max: u64) -> f64 {
    let body: f64 = (2..BODY_END.min(k_max + 1)).map(|k| weight(a, b, k as f64)).sum();
    body + dyadic_blocks(k_max).map(|(lo, hi)| block_sum(a, b, lo, hi)).sum::<f64>()
}

/// Largest support point; keeps every block bound and multiplicity inside `u64`.
pub const MAX_SUPPORT: u64 = (1 << 62) - 1;

/// Smallest dyadic block end beyond which the first-moment mass
/// `sum k^{1-a} (ln k)^{-b}` is below [`TRUNCATION_TOLERANCE`] in relative terms,
/// or [`MAX_SUPPORT`]. The first moment governs the size-biased law, which is
/// far heavier than the law itself. Requires `a >= 2`, `b >= 0`.
pub fn truncation_point(a: f64, b: f64) -> u64 {
    let a1 = a - 1.0;
    let mut partial: f64 = (2..BODY_END).map(|k| weight(a1, b, k as f64)).sum();
    let mut lo = BODY_END;
    loop {
        let hi = 2 * lo - 1;
        if hi >= MAX_SUPPORT {
            return MAX_SUPPORT;
        }
        partial += block_sum(a1, b, lo, hi);
        let l = (hi as f64).ln();
        let tail_bound = if a1 > 1.0 {
            l.powf(-b) * (hi as f64).powf(1.0 - a1) / (a1 - 1.0)
        } else if b > 1.0 {
            l.powf(1.0 - b) / (b - 1.0)
        } else {
            f64::INFINITY
        };
        if tail_bound < TRUNCATION_TOLERANCE * partial {
            return hi;
        }
        lo = hi + 1;
    }
}

impl PowerLogTail {
    /// Requires `a > 0` and `b >= 0` so the weights decrease on `k >= 2`.
    pub fn new(a: f64, b: f64, k_max: u64) -> Self {
        let mut body_cdf = Vec::with_capacity(BODY_END as usize);
        let mut acc = 0.0;
        for k in 2..BODY_END.min(k_max + 1) {
            acc += weight(a, b, k as f64);
            body_cdf.push(acc);
        }
        let mut blocks = Vec::new();
        for (lo, hi) in dyadic_blocks(k_max) {
            acc += block_sum(a, b, lo, hi);
            blocks.push(Block { lo, hi, cumulative: acc });
        }
        Self { a, b, k_max, body_cdf, blocks, total: acc }
    }

    /// Normalizing constant `sum_k k^{-a} (ln k)^{-b}`.
    pub fn normalizer(&self) -> f64 {
        self.total
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k < 2 || k > self.k_max {
            0.0
        } else {
            weight(self.a, self.b, k as f64) / self.total
        }
    }

    /// `E[K^p]` under this law.
    pub fn moment(&self, p: f64) -> f64 {
        power_sum(self.a - p, self.b, self.k_max) / self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = rng.random::<f64>() * self.total;
        let body_total = self.body_cdf.last().copied().unwrap_or(0.0);
        if u < body_total {
            let i = self.body_cdf.partition_point(|&c| c <= u);
            return 2 + i.min(self.body_cdf.len() - 1) as u64;
        }
        let j = self.blocks.partition_point(|blk| blk.cumulative <= u).min(self.blocks.len() - 1);
        let Block { lo, hi, .. } = self.blocks[j];
        let top = weight(self.a, self.b, lo as f64);
        loop {
            let k = rng.random_range(lo..=hi);
            if rng.random::<f64>() * top <= weight(self.a, self.b, k as f64) {
                return k;
            }
        }
    }
}
