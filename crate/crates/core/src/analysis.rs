//! Post-processing of trial populations: penetration bins, quadratic
//! least-squares fits and empirical PDFs.
//!
//! Fits take the penetration ratio as a fraction (0.40, not 40); percent
//! only appears at the IO boundary.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::metrics::ImpactMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single sample.
    pub std_dev: f64,
}

impl MetricStats {
    /// Order-independent: values are sorted before summation.
    fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        if n == 0 {
            return MetricStats::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            math::sqrt(ss / (n - 1) as f64)
        } else {
            0.0
        };
        MetricStats { mean, std_dev }
    }
}

/// Trials whose penetration ratio falls in `[lower_pct, upper_pct)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaBin {
    pub index: i64,
    pub lower_pct: f64,
    pub upper_pct: f64,
    pub count: usize,
    pub gamma_pct: MetricStats,
    pub e_loss_kwh: MetricStats,
    pub v_d: MetricStats,
    pub f_r_tot_kwh: MetricStats,
}

impl GammaBin {
    pub fn midpoint_pct(&self) -> f64 {
        0.5 * (self.lower_pct + self.upper_pct)
    }
}

/// Index of the bin `[k·w, (k+1)·w)` containing `gamma_pct`.
pub fn bin_index(gamma_pct: f64, bin_width_pct: f64) -> i64 {
    math::floor(gamma_pct / bin_width_pct) as i64
}

/// Group samples by achieved penetration; empty bins are omitted.
pub fn bin_by_gamma(samples: &[ImpactMetrics], bin_width_pct: f64) -> Result<Vec<GammaBin>> {
    if !(bin_width_pct.is_finite() && bin_width_pct > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width_pct}")));
    }
    let mut groups: BTreeMap<i64, Vec<&ImpactMetrics>> = BTreeMap::new();
    for m in samples {
        groups.entry(bin_index(m.gamma_pct, bin_width_pct)).or_default().push(m);
    }
    Ok(groups
        .into_iter()
        .map(|(k, ms)| {
            let stats = |f: fn(&ImpactMetrics) -> f64| MetricStats::of(ms.iter().map(|m| f(m)).collect());
            GammaBin {
                index: k,
                lower_pct: k as f64 * bin_width_pct,
                upper_pct: (k + 1) as f64 * bin_width_pct,
                count: ms.len(),
                gamma_pct: stats(|m| m.gamma_pct),
                e_loss_kwh: stats(|m| m.e_loss_kwh),
                v_d: stats(|m| m.v_d),
                f_r_tot_kwh: stats(|m| m.f_r_tot_kwh),
            }
        })
        .collect())
}

/// `m(x) = a2·x² + a1·x + a0` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Observed abscissa range.
    pub x_min: f64,
    pub x_max: f64,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a2 * x + self.a1) * x + self.a0
    }
}

/// Ordinary least squares on the Vandermonde system, solved by Householder QR.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("fit points", "non-finite coordinate"));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::RankDeficient(xs.len()));
    }
    let n = points.len();

    // column-major n×3 design matrix
    let mut a = vec![0.0; 3 * n];
    let mut rhs: Vec<f64> = points.iter().map(|p| p.1).collect();
    for (r, &(x, _)) in points.iter().enumerate() {
        a[r] = 1.0;
        a[n + r] = x;
        a[2 * n + r] = x * x;
    }
    for k in 0..3 {
        let col = k * n;
        let norm = math::sqrt(a[col + k..col + n].iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::RankDeficient(k));
        }
        let alpha = if a[col + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[col + k..col + n].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..3 {
            let cj = j * n;
            let dot: f64 = v.iter().zip(&a[cj + k..cj + n]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vv;
            for (dst, vi) in a[cj + k..cj + n].iter_mut().zip(&v) {
                *dst -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&rhs[k..]).map(|(p, q)| p * q).sum();
        let f = 2.0 * dot / vv;
        for (dst, vi) in rhs[k..].iter_mut().zip(&v) {
            *dst -= f * vi;
        }
    }
    // back substitution on the 3×3 upper triangle
    let r = |i: usize, j: usize| a[j * n + i];
    let mut coef = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = rhs[i];
        for j in i + 1..3 {
            s -= r(i, j) * coef[j];
        }
        if r(i, i) == 0.0 {
            return Err(Error::RankDeficient(i));
        }
        coef[i] = s / r(i, i);
    }
    let [a0, a1, a2] = coef;

    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y) in points {
        let e = y - ((a2 * x + a1) * x + a0);
        ss_res += e * e;
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(FitResult {
        a2,
        a1,
        a0,
        r_squared,
        n_points: n,
        x_min: xs[0],
        x_max: xs[xs.len() - 1],
    })
}

/// Vertex of a convex fit, clamped to the observed range.
pub fn find_minimum_gamma(fit: &FitResult) -> Result<f64> {
    if !(fit.a2 > 0.0) {
        return Err(Error::NonConvex(fit.a2));
    }
    Ok((-fit.a1 / (2.0 * fit.a2)).clamp(fit.x_min, fit.x_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinRule {
    /// Bin width `2·IQR·n^(-1/3)`, never fewer than `min_bins` bins.
    FreedmanDiaconis { min_bins: usize },
    Fixed(usize),
}

impl Default for BinRule {
    fn default() -> Self {
        BinRule::FreedmanDiaconis { min_bins: 10 }
    }
}

/// Minimum sample count accepted by [`empirical_pdf`].
pub const MIN_PDF_SAMPLES: usize = 30;

/// Histogram normalized to unit area plus raw-sample moments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalPdf {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std_dev: f64,
    /// Moment coefficient of skewness `m3 / m2^1.5`.
    pub skewness: f64,
    pub n_samples: usize,
}

impl EmpiricalPdf {
    /// Σ density·width; 1 up to rounding.
    pub fn area(&self) -> f64 {
        self.densities.iter().zip(self.bin_edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum()
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn empirical_pdf(samples: &[f64], rule: BinRule) -> Result<EmpiricalPdf> {
    let n = samples.len();
    if n < MIN_PDF_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_PDF_SAMPLES, got: n });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("pdf samples", "non-finite sample"));
    }
    let nf = n as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let mean = if hi > lo { samples.iter().sum::<f64>() / nf } else { lo };
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let std_dev = math::sqrt(m2 / (nf - 1.0));
    let (m2, m3) = (m2 / nf, m3 / nf);
    let skewness = if m2 > 0.0 { m3 / (m2 * math::sqrt(m2)) } else { 0.0 };

    let bin_edges = if hi > lo {
        let bins = match rule {
            BinRule::Fixed(b) => b.max(1),
            BinRule::FreedmanDiaconis { min_bins } => {
                let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
                let h = 2.0 * iqr / math::cbrt(nf);
                let fd = if h > 0.0 { math::ceil((hi - lo) / h) as usize } else { 0 };
                fd.min(n).max(min_bins.max(1))
            }
        };
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|k| lo + k as f64 * width).collect();
        edges.push(hi);
        edges
    } else {
        let half = 0.5 * if lo != 0.0 { math::fabs(lo) * 1e-6 } else { 1e-6 };
        vec![lo - half, lo + half]
    };

    let bins = bin_edges.len() - 1;
    let mut counts = vec![0usize; bins];
    let width0 = bin_edges[1] - bin_edges[0];
    for &x in &sorted {
        let k = if bins == 1 { 0 } else { (math::floor((x - bin_edges[0]) / width0) as usize).min(bins - 1) };
        counts[k] += 1;
    }
    let densities = counts
        .iter()
        .zip(bin_edges.windows(2))
        .map(|(&c, w)| c as f64 / (nf * (w[1] - w[0])))
        .collect();

    Ok(EmpiricalPdf { bin_edges, densities, counts, mean, std_dev, skewness, n_samples: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(gamma: f64, e: f64) -> ImpactMetrics {
        ImpactMetrics { gamma_pct: gamma, e_loss_kwh: e, v_d: e / 1000.0, f_r_tot_kwh: 0.0 }
    }

    #[test]
    fn single_bin_of_identical_records() {
        let bins = bin_by_gamma(&[m(0.0, 50.0); 4], 5.0).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].count, 4);
        assert_eq!(bins[0].e_loss_kwh, MetricStats { mean: 50.0, std_dev: 0.0 });
    }

    #[test]
    fn two_bins_of_single_samples() {
        let bins = bin_by_gamma(&[m(10.0, 3.0), m(20.0, 7.0)], 5.0).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!((bins[0].lower_pct, bins[0].upper_pct), (10.0, 15.0));
        assert_eq!(bins[0].e_loss_kwh.mean, 3.0);
        assert_eq!(bins[1].e_loss_kwh.mean, 7.0);
        assert_eq!(bins[1].e_loss_kwh.std_dev, 0.0);
        assert!(bin_by_gamma(&[], 0.0).is_err());
    }

    #[test]
    fn bin_means_follow_a_quadratic() {
        // metric = γ² sampled uniformly in each bin; the bin mean of γ² over
        // [a, a+w) is the midpoint value plus w²/12
        let w = 5.0;
        let samples: Vec<ImpactMetrics> =
            (0..700).map(|k| k as f64 * 0.1).map(|g| m(g, g * g)).collect();
        for bin in bin_by_gamma(&samples, w).unwrap() {
            let mid = bin.midpoint_pct();
            let err = (bin.e_loss_kwh.mean - mid * mid).abs();
            assert!(err <= w * w, "bin {}: {err}", bin.index);
        }
    }

    fn eq13(x: f64) -> f64 {
        0.012 * x * x - 0.01 * x + 0.023
    }

    #[test]
    fn recovers_voltage_curve_coefficients() {
        let pts: Vec<(f64, f64)> = (0..=14).map(|k| k as f64 * 0.05).map(|x| (x, eq13(x))).collect();
        let fit = fit_quadratic(&pts).unwrap();
        assert!((fit.a2 - 0.012).abs() < 1e-9);
        assert!((fit.a1 + 0.01).abs() < 1e-9);
        assert!((fit.a0 - 0.023).abs() < 1e-9);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn recovers_loss_curve_coefficients() {
        let f = |x: f64| 3.9e3 * x * x - 1e4 * x + 2.5e4;
        let pts: Vec<(f64, f64)> = (0..=14).map(|k| k as f64 * 0.05).map(|x| (x, f(x))).collect();
        let fit = fit_quadratic(&pts).unwrap();
        assert!((fit.a2 / 3.9e3 - 1.0).abs() < 1e-6);
        assert!((fit.a1 / -1e4 - 1.0).abs() < 1e-6);
        assert!((fit.a0 / 2.5e4 - 1.0).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn three_points_interpolate() {
        let pts = [(0.1, 2.0), (0.4, -1.0), (0.9, 5.0)];
        let fit = fit_quadratic(&pts).unwrap();
        for (x, y) in pts {
            assert!((fit.eval(x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficiency() {
        assert_eq!(fit_quadratic(&[(0.1, 1.0), (0.1, 2.0), (0.2, 3.0), (0.2, 1.0)]), Err(Error::RankDeficient(2)));
        assert_eq!(fit_quadratic(&[(0.0, 1.0); 5]), Err(Error::RankDeficient(1)));
    }

    #[test]
    fn vertex_examples() {
        let fit = FitResult { a2: 0.012, a1: -0.01, a0: 0.023, r_squared: 1.0, n_points: 15, x_min: 0.0, x_max: 0.7 };
        assert!((find_minimum_gamma(&fit).unwrap() - 0.01 / 0.024).abs() < 1e-15);
        let unit = FitResult { a2: 1.0, a1: -2.0, a0: 0.0, x_max: 3.0, ..fit };
        assert_eq!(find_minimum_gamma(&unit).unwrap(), 1.0);
        let clamp = FitResult { x_max: 0.5, ..unit };
        assert_eq!(find_minimum_gamma(&clamp).unwrap(), 0.5);
        let concave = FitResult { a2: -1.0, ..unit };
        assert_eq!(find_minimum_gamma(&concave), Err(Error::NonConvex(-1.0)));
    }

    #[test]
    fn constant_samples_make_one_bin() {
        let pdf = empirical_pdf(&[0.37; 40], BinRule::default()).unwrap();
        assert_eq!(pdf.densities.len(), 1);
        assert_eq!(pdf.std_dev, 0.0);
        assert_eq!(pdf.skewness, 0.0);
        assert!((pdf.area() - 1.0).abs() < 1e-9);
        assert!(matches!(empirical_pdf(&[1.0; 29], BinRule::default()), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn normal_draws_have_expected_moments() {
        // Box–Muller from a seeded stream; the generator parameters are the oracle
        use rand::Rng;
        let (mu, sigma, n) = (3.0, 0.5, 10_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = 1.0 - rng.random::<f64>();
                let u2: f64 = rng.random();
                mu + sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
            })
            .collect();
        let pdf = empirical_pdf(&xs, BinRule::default()).unwrap();
        let se_mean = sigma / (n as f64).sqrt();
        let se_std = sigma / (2.0 * (n as f64 - 1.0)).sqrt();
        assert!((pdf.mean - mu).abs() < 3.0 * se_mean);
        assert!((pdf.std_dev - sigma).abs() < 3.0 * se_std);
        assert!(pdf.skewness.abs() < 0.1);
        assert!(pdf.densities.len() >= 10);
        assert!((pdf.area() - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn unit_area(xs in proptest::collection::vec(-1e3..1e3f64, 30..300)) {
            let pdf = empirical_pdf(&xs, BinRule::default()).unwrap();
            prop_assert!((pdf.area() - 1.0).abs() < 1e-9);
            prop_assert!(pdf.densities.iter().all(|&d| d >= 0.0));
            prop_assert_eq!(pdf.counts.iter().sum::<usize>(), xs.len());
        }

        #[test]
        fn moments_match_direct_computation(xs in proptest::collection::vec(0.0..10.0f64, 30..200)) {
            let pdf = empirical_pdf(&xs, BinRule::Fixed(7)).unwrap();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
            prop_assert!((pdf.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            prop_assert!((pdf.std_dev - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1.0));
            if m2 > 0.0 {
                prop_assert!((pdf.skewness - m3 / m2.powf(1.5)).abs() <= 1e-10);
            }
        }

        #[test]
        fn fit_scales_with_the_metric(c in 0.1..100.0f64, a2 in -5.0..5.0f64, a1 in -5.0..5.0f64, a0 in -5.0..5.0f64) {
            let pts: Vec<(f64, f64)> = (0..12).map(|k| k as f64 / 11.0).map(|x| (x, a2 * x * x + a1 * x + a0 + 0.1 * (7.0 * x).sin())).collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, c * y)).collect();
            let f = fit_quadratic(&pts).unwrap();
            let g = fit_quadratic(&scaled).unwrap();
            for (p, q) in [(f.a2, g.a2), (f.a1, g.a1), (f.a0, g.a0)] {
                prop_assert!((c * p - q).abs() <= 1e-9 * (c * p).abs().max(c));
            }
        }

        #[test]
        fn bins_ignore_record_order(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xs: Vec<ImpactMetrics> = (0..60).map(|k| m((k * 7 % 50) as f64 * 1.3, (k * 13 % 17) as f64 * 0.37)).collect();
            let a = bin_by_gamma(&xs, 5.0).unwrap();
            xs.shuffle(&mut rng);
            let b = bin_by_gamma(&xs, 5.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
