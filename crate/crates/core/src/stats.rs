//! Small statistics helpers shared by the simulators and the test suites.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().copied().collect::<Neumaier>().value() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).collect::<Neumaier>().value() / (n - 1) as f64
    } else {
        0.0
    };
    MeanSe { mean, se: (var / n as f64).sqrt(), n }
}

/// Mean with a batch-means standard error, for serially correlated sequences.
pub fn batch_mean_se(xs: &[f64], batches: usize) -> MeanSe {
    let size = xs.len() / batches.max(1);
    if size < 2 {
        return mean_se(xs);
    }
    let means: Vec<f64> = xs.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let m = mean_se(&means);
    MeanSe { mean: mean_se(xs).mean, se: m.se, n: xs.len() }
}

/// Pearson correlation; `None` when either sample is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean_se(x).mean, mean_se(y).mean);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Roundoff allowance added to every standard-error band so that degenerate
/// (zero-variance) samples compare equal to their target.
pub const ROUNDOFF: f64 = 1e-12;

/// `|estimate - target| <= k se + ROUNDOFF`, returning the standardized gap.
pub fn within_se(m: &MeanSe, target: f64, k: f64) -> (bool, f64) {
    let gap = (m.mean - target).abs();
    let z = if m.se > 0.0 { gap / m.se } else if gap <= ROUNDOFF { 0.0 } else { f64::INFINITY };
    (gap <= k * m.se + ROUNDOFF, z)
}

/// Two estimates compared with a combined standard error.
pub fn two_sample_z(a: &MeanSe, b: &MeanSe) -> (f64, f64) {
    let gap = (a.mean - b.mean).abs();
    let se = (a.se * a.se + b.se * b.se).sqrt();
    (gap, se)
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Maximum distance between the empirical CDFs of two samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample Kolmogorov distance.
pub fn ks_threshold(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.63 * ((n + m) / (n * m)).sqrt()
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
