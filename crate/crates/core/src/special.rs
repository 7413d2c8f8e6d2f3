//! Special functions: log-gamma, digamma, regularized incomplete gamma, log-sum-exp.
//!
//! All routines are generic over [`Real`] and evaluated in log space where the
//! direct form would overflow. Accuracy targets are those of `f64`; the `f32`
//! instantiations inherit the same algorithms at single precision.

use crate::num::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
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

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += T::lit(c) / (x + T::from_usize(i).unwrap());
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::TAU()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// `ln n!`.
pub fn ln_factorial<T: Real>(n: u64) -> T {
    if n < 2 {
        T::zero()
    } else {
        ln_gamma(T::from_count(n) + T::one())
    }
}

/// `ln Γ(x + n) − ln Γ(x)` for `x > 0`; exact product form for small `n`.
pub fn ln_gamma_ratio<T: Real>(x: T, n: u64) -> T {
    if n <= 32 {
        let mut acc = T::zero();
        for m in 0..n {
            acc += (x + T::from_count(m)).ln();
        }
        return acc;
    }
    // shift into the Stirling range, then difference the expansion termwise
    // so nothing of size ln Γ(x) is ever subtracted
    let (mut x, mut n, mut acc) = (x, n, T::zero());
    while x < T::lit(15.0) && n > 0 {
        acc += x.ln();
        x += T::one();
        n -= 1;
    }
    let nn = T::from_count(n);
    let y = x + nn;
    acc + (x - T::lit(0.5)) * (nn / x).ln_1p() + nn * (y.ln() - T::one()) + stirling_err(y) - stirling_err(x)
}

/// Digamma `ψ(x)` for `x > 0`.
pub fn digamma<T: Real>(x: T) -> T {
    let mut x = x;
    let mut acc = T::zero();
    let ten = T::lit(10.0);
    while x < ten {
        acc -= x.recip();
        x += T::one();
    }
    acc + x.ln() - T::lit(0.5) / x - digamma_tail(x)
}

/// `ln x − 1/(2x) − ψ(x)` for `x ≥ 10`.
fn digamma_tail<T: Real>(x: T) -> T {
    let f = (x * x).recip();
    f * (T::lit(1.0 / 12.0)
        - f * (T::lit(1.0 / 120.0)
            - f * (T::lit(1.0 / 252.0)
                - f * (T::lit(1.0 / 240.0) - f * (T::lit(1.0 / 132.0) - f * T::lit(691.0 / 32760.0))))))
}

/// `ψ(x + n) − ψ(x)`; exact harmonic sum for small `n`.
pub fn digamma_diff<T: Real>(x: T, n: u64) -> T {
    let (mut x, mut n, mut acc) = (x, n, T::zero());
    while n > 0 && (n <= 32 || x < T::lit(10.0)) {
        acc += x.recip();
        x += T::one();
        n -= 1;
    }
    if n == 0 {
        return acc;
    }
    let nn = T::from_count(n);
    let y = x + nn;
    acc + (nn / x).ln_1p() + T::lit(0.5) * nn / (x * y) - (digamma_tail(y) - digamma_tail(x))
}

/// `ln(1 + d) − d`, accurate for small `|d|`.
pub fn ln1p_mx<T: Real>(d: T) -> T {
    if d.abs() > T::lit(0.25) {
        return d.ln_1p() - d;
    }
    // -d^2/2 + d^3/3 - d^4/4 + ...
    let mut term = d;
    let mut acc = T::zero();
    let tiny = T::epsilon() * T::lit(0.01);
    for k in 2..200u32 {
        term = -term * d;
        let contrib = term / T::from_u32(k).unwrap();
        acc += contrib;
        if contrib.abs() <= tiny * acc.abs() {
            break;
        }
    }
    acc
}

/// Stirling remainder `ln Γ(a) − [(a − ½) ln a − a + ½ ln 2π]`.
fn stirling_err<T: Real>(a: T) -> T {
    if a >= T::lit(15.0) {
        let r = a.recip();
        let r2 = r * r;
        r * (T::lit(1.0 / 12.0) - r2 * (T::lit(1.0 / 360.0) - r2 * (T::lit(1.0 / 1260.0) - r2 * T::lit(1.0 / 1680.0))))
    } else {
        ln_gamma(a) - ((a - T::lit(0.5)) * a.ln() - a + T::lit(0.5) * T::TAU().ln())
    }
}

/// `ln(x^a e^{-x} / Γ(a))`, stable for large `a` with `x ≈ a`.
fn ln_gamma_prefactor<T: Real>(a: T, x: T) -> T {
    if a >= T::lit(15.0) {
        let d = (x - a) / a;
        a * ln1p_mx(d) + T::lit(0.5) * (a.ln() - T::TAU().ln()) - stirling_err(a)
    } else {
        a * x.ln() - x - ln_gamma(a)
    }
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))` with `P + Q = 1`.
///
/// Series expansion below `x < a + 1`, Lentz continued fraction above.
pub fn gamma_pq<T: Real>(a: T, x: T) -> (T, T) {
    if x <= T::zero() {
        return (T::zero(), T::one());
    }
    if x.is_infinite() {
        return (T::one(), T::zero());
    }
    let eps = T::epsilon();
    let max_iter = 1000 + (20.0 * a.as_f64().sqrt()) as usize;
    let pref = ln_gamma_prefactor(a, x);
    if x < a + T::one() {
        let mut ap = a;
        let mut del = a.recip();
        let mut sum = del;
        for _ in 0..max_iter {
            ap += T::one();
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * eps {
                break;
            }
        }
        let p = (pref + sum.ln()).exp().min(T::one());
        (p, T::one() - p)
    } else {
        let fpmin = T::min_positive_value() / eps;
        let mut b = x + T::one() - a;
        let mut c = fpmin.recip();
        let mut d = b.recip();
        let mut h = d;
        for i in 1..max_iter {
            let fi = T::from_usize(i).unwrap();
            let an = -fi * (fi - a);
            b += T::lit(2.0);
            d = an * d + b;
            if d.abs() < fpmin {
                d = fpmin;
            }
            c = b + an / c;
            if c.abs() < fpmin {
                c = fpmin;
            }
            d = d.recip();
            let del = d * c;
            h *= del;
            if (del - T::one()).abs() < eps {
                break;
            }
        }
        let q = (pref + h.ln()).exp().min(T::one());
        (T::one() - q, q)
    }
}

/// `ln Σ exp(v_i)`; `-∞` for an empty or all-`-∞` slice.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}
