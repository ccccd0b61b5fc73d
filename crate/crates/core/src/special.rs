//! Special functions used by the statistics code: log-gamma, regularized
//! incomplete gamma, chi-square quantiles, digamma and the Kolmogorov
//! distribution.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Lower regularized incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_p needs a > 0");
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Upper regularized incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q needs a > 0");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_quantile(p: f64, dof: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "chi2 quantile needs p in (0, 1)");
    assert!(dof > 0.0, "chi2 quantile needs dof > 0");
    // Wilson-Hilferty start, then safeguarded Newton on the CDF.
    let z = normal_quantile(p);
    let c = 2.0 / (9.0 * dof);
    let mut x = (dof * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-8);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..200 {
        let f = chi2_cdf(x, dof) - p;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let k = 0.5 * dof;
        let ln_pdf = (k - 1.0) * (0.5 * x).ln() - 0.5 * x - ln_gamma(k) - 2f64.ln();
        let pdf = ln_pdf.exp();
        let mut next = if pdf > 0.0 { x - f / pdf } else { f64::NAN };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1.0) };
        }
        if (next - x).abs() <= 1e-14 * x.max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Standard normal quantile (Acklam's rational approximation, refined by one
/// Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let plow = 0.024_25;
    let x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

pub fn normal_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 - 0.5 * gamma_q(0.5, 0.5 * x * x)
    } else {
        0.5 * gamma_q(0.5, 0.5 * x * x)
    }
}

pub fn digamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let f = 1.0 / (x * x);
    acc + x.ln() - 0.5 / x
        - f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f / 132.0))))
}

/// Survival function of the Kolmogorov distribution,
/// `P(sqrt(n) D_n > lambda)` as `n -> infinity`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        kolmogorov_survival_small(lambda)
    } else {
        kolmogorov_survival_large(lambda)
    }
}

// Small-argument form, converges fast below ~1.2.
fn kolmogorov_survival_small(lambda: f64) -> f64 {
    let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
    let s: f64 = (0..50).map(|k| y.powi((2 * k + 1) * (2 * k + 1))).sum();
    1.0 - (2.0 * PI).sqrt() / lambda * s
}

fn kolmogorov_survival_large(lambda: f64) -> f64 {
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-12);
    }

    // Tabulated upper-tail critical values of the chi-square distribution.
    #[test]
    fn chi2_table() {
        let cases = [
            (0.95, 1.0, 3.841_459),
            (0.95, 10.0, 18.307_038),
            (0.99, 10.0, 23.209_251),
            (0.05, 10.0, 3.940_299),
            (0.975, 100.0, 129.561_197),
            (0.025, 100.0, 74.221_927),
            (0.5, 2.0, 1.386_294),
        ];
        for (p, k, expected) in cases {
            assert_abs_diff_eq!(chi2_quantile(p, k), expected, epsilon = 1e-5 * expected);
            assert_abs_diff_eq!(chi2_cdf(expected, k), p, epsilon = 1e-6);
        }
    }

    #[test]
    fn chi2_large_dof_round_trip() {
        for &k in &[19_999.0, 2_999.0, 99.0] {
            for &p in &[0.0015, 0.5, 0.9985] {
                let x = chi2_quantile(p, k);
                assert_abs_diff_eq!(chi2_cdf(x, k), p, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn normal_quantile_values() {
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(normal_quantile(0.9985), 2.967_737_925_342_49, epsilon = 1e-9);
    }

    #[test]
    fn digamma_values() {
        // psi(1) = -gamma_E, psi(1/2) = -gamma_E - 2 ln 2.
        let euler = 0.577_215_664_901_532_9;
        assert_abs_diff_eq!(digamma(1.0), -euler, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(0.5), -euler - 2.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn kolmogorov_values() {
        // Classical critical values: 1.358 (5%) and 1.628 (1%).
        assert_abs_diff_eq!(kolmogorov_survival(1.358_1), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_survival(1.627_6), 0.01, epsilon = 1e-4);
        // The two series agree where both converge.
        for lambda in [0.9, 1.18, 1.4] {
            assert_abs_diff_eq!(kolmogorov_survival_small(lambda), kolmogorov_survival_large(lambda), epsilon = 1e-12);
        }
    }
}
