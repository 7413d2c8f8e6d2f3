//! Log probability mass functions used by the marginal likelihoods.

use crate::num::Real;
use crate::special::{gamma_pq, ln_factorial, ln_gamma_ratio};

/// `ln f_pois(n | mu)`, with `f_pois(0 | 0) = 1`.
pub fn poisson_ln_pmf<T: Real>(n: u64, mu: T) -> T {
    if mu <= T::zero() {
        return if n == 0 { T::zero() } else { T::neg_infinity() };
    }
    if n == 0 {
        return -mu;
    }
    T::from_count(n) * mu.ln() - mu - ln_factorial::<T>(n)
}

/// `ln f_NB(n | size r, prob θ)` with `θ = 1 / (1 + eh)`.
///
/// This is the marginal of `Poisson(e λ)` under `λ ~ Gamma(shape r, scale h)`;
/// the product `eh = e · h` is passed directly so `ln θ = −ln(1 + eh)` stays exact
/// for tiny scales.
pub fn nb_ln_pmf<T: Real>(n: u64, r: T, eh: T) -> T {
    let l1p = eh.ln_1p();
    if n == 0 {
        return -r * l1p;
    }
    ln_gamma_ratio(r, n) - ln_factorial::<T>(n) - r * l1p + T::from_count(n) * (eh.ln() - l1p)
}

/// CDF of `Gamma(shape, rate)` at `x`.
pub fn gamma_cdf<T: Real>(shape: T, rate: T, x: T) -> T {
    gamma_pq(shape, rate * x).0
}

/// Survival `P(X ≥ x)` of `Gamma(shape, rate)`.
pub fn gamma_sf<T: Real>(shape: T, rate: T, x: T) -> T {
    gamma_pq(shape, rate * x).1
}
