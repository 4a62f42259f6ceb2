//! Histogram entropy and the chi-squared uniformity test.

use super::FeatureError;

/// Equal-width bins over the integer range `[0, range)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Binning {
    pub range: u32,
    pub bins: u32,
}

impl Binning {
    pub const fn new(range: u32, bins: u32) -> Self {
        Binning { range, bins }
    }

    /// Bin of `x`; values at or past the range end land in the last bin.
    pub fn bin(&self, x: u32) -> usize {
        let x = x.min(self.range - 1) as u64;
        (x * self.bins as u64 / self.range as u64) as usize
    }

    pub fn histogram(&self, samples: &[u32]) -> Vec<u64> {
        let mut h = vec![0u64; self.bins as usize];
        for &s in samples {
            h[self.bin(s)] += 1;
        }
        h
    }
}

pub const BINS: u32 = 15;

/// Minute-of-hour or second-of-minute: 15 bins of width 4.
pub const SIXTY: Binning = Binning::new(60, BINS);
/// Capped hour component 0..=14: one bin per hour.
pub const HOURS: Binning = Binning::new(15, BINS);

/// Shannon entropy in bits of the binned samples.
pub fn entropy(samples: &[u32], binning: Binning) -> Result<f64, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::Undefined("entropy of an empty sample"));
    }
    let n = samples.len() as f64;
    Ok(binning
        .histogram(samples)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquared {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Pearson goodness of fit against the uniform distribution over the bins.
pub fn chi_squared(samples: &[u32], binning: Binning) -> Result<ChiSquared, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::Undefined("chi-squared of an empty sample"));
    }
    let expected = samples.len() as f64 / binning.bins as f64;
    let statistic: f64 = binning
        .histogram(samples)
        .into_iter()
        .map(|o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let df = binning.bins - 1;
    Ok(ChiSquared {
        statistic,
        df,
        p_value: chi_squared_sf(statistic, df as f64),
    })
}

/// Upper tail `P(X >= x)` of the chi-squared distribution.
pub fn chi_squared_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized lower incomplete gamma by its power series (good for `x < a + 1`).
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma by Lentz's continued fraction (good for `x >= a + 1`).
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (h.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q needs a > 0");
    if x <= 0.0 {
        return 1.0;
    }
    let q = if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    };
    q.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Q(k, y) for integer k is the Poisson CDF: e^-y sum_{i<k} y^i / i!.
    fn poisson_q(k: u32, y: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..k {
            term *= y / i as f64;
            sum += term;
        }
        (-y).exp() * sum
    }

    #[test]
    fn matches_integer_closed_form() {
        for i in 0..=400 {
            let x = i as f64 * 0.25;
            let got = chi_squared_sf(x, 14.0);
            let want = poisson_q(7, x / 2.0);
            assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn critical_value_gives_five_percent() {
        let p = chi_squared_sf(23.68, 14.0);
        assert!((p - 0.0500).abs() < 1e-4, "{p}");
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut f = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - f.ln()).abs() < 1e-10, "n={n}");
            f *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[0; 50], SIXTY).unwrap(), 0.0);
        let uniform: Vec<u32> = (0..60).collect();
        assert!((entropy(&uniform, SIXTY).unwrap() - 15f64.log2()).abs() < 1e-12);
        let coin: Vec<u32> = (0..20).map(|i| if i % 2 == 0 { 1 } else { 30 }).collect();
        assert!((entropy(&coin, SIXTY).unwrap() - 1.0).abs() < 1e-12);
        assert!(entropy(&[], SIXTY).is_err());
    }

    #[test]
    fn chi_squared_cases() {
        let uniform: Vec<u32> = (0..120).map(|i| i % 60).collect();
        let c = chi_squared(&uniform, SIXTY).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.p_value, 1.0);
        let n = 90;
        let c = chi_squared(&vec![7; n], SIXTY).unwrap();
        assert!((c.statistic - 14.0 * n as f64).abs() < 1e-9);
        assert!(c.p_value < 1e-100);
        assert_eq!(c.df, 14);
    }

    #[test]
    fn hour_binning_is_identity() {
        for h in 0..15 {
            assert_eq!(HOURS.bin(h), h as usize);
        }
        assert_eq!(HOURS.bin(99), 14);
        assert_eq!(SIXTY.bin(3), 0);
        assert_eq!(SIXTY.bin(4), 1);
        assert_eq!(SIXTY.bin(59), 14);
    }
}
