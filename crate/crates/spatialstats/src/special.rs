//! Scalar special functions backing the Matern covariance family.

use std::f64::consts::PI;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 8] = [
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in LANCZOS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const MAX_ITER: usize = 10_000;
const EPS: f64 = f64::EPSILON;

/// Chebyshev fits for the Temme gamma combinations, |x| <= 1/2.
///
/// Returns (gam1, gam2, 1/Gamma(1+x), 1/Gamma(1-x)) with
/// gam1 = [1/Gamma(1-x) - 1/Gamma(1+x)] / (2x) and
/// gam2 = [1/Gamma(1-x) + 1/Gamma(1+x)] / 2.
fn temme_gammas(x: f64) -> (f64, f64, f64, f64) {
    const C1: [f64; 7] = [
        -1.142022680371168,
        6.5165112670737e-3,
        3.087090173086e-4,
        -3.4706269649e-6,
        6.9437664e-9,
        3.67795e-11,
        -1.356e-13,
    ];
    const C2: [f64; 8] = [
        1.843740587300905,
        -7.68528408447867e-2,
        1.2719271366546e-3,
        -4.9717367042e-6,
        -3.31261198e-8,
        2.423096e-10,
        -1.702e-13,
        -1.49e-15,
    ];
    let t = 8.0 * x * x - 1.0;
    let gam1 = chebyshev(&C1, t);
    let gam2 = chebyshev(&C2, t);
    let gampl = gam2 - x * gam1;
    let gammi = gam2 + x * gam1;
    (gam1, gam2, gampl, gammi)
}

/// Chebyshev series on [-1, 1].
fn chebyshev(coeffs: &[f64], x: f64) -> f64 {
    let (mut d, mut dd) = (0.0, 0.0);
    let x2 = 2.0 * x;
    for &c in coeffs.iter().skip(1).rev() {
        let sv = d;
        d = x2 * d - dd + c;
        dd = sv;
    }
    x * d - dd + 0.5 * coeffs[0]
}

/// Modified Bessel function of the second kind, K_nu(x), for nu >= 0, x > 0.
///
/// Temme's series for x < 2 and Steed's continued fraction otherwise, with
/// upward recurrence in the order. Relative accuracy is near machine
/// precision over the parameter ranges used by the Matern family.
pub(crate) fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x > 0.0, "bessel_k requires nu >= 0 and x > 0");
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64; // |mu| <= 1/2
    let mu2 = mu * mu;
    let xi = 1.0 / x;

    let (mut k_mu, mut k_mu1); // K_mu, K_{mu+1}
    if x < 2.0 {
        // Temme series
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let e = e.exp();
        let mut p = 0.5 * e / gampl;
        let mut q = 0.5 / (e * gammi);
        let mut c = 1.0;
        let d = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..=MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= d / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        debug_assert!(converged, "Temme series failed to converge");
        k_mu = sum;
        k_mu1 = sum1 * 2.0 * xi;
    } else {
        // Steed's continued fraction (CF2)
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = delh;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..=MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h = a1 * h;
        k_mu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        k_mu1 = k_mu * (mu + x + 0.5 - h) * xi;
    }

    // recur upward from mu to nu
    for l in 1..=nl {
        let k_next = (mu + l as f64) * 2.0 * xi * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = k_next;
    }
    k_mu
}
