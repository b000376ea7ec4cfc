//! Success-count tail probabilities.
//!
//! For `T` independent Bernoulli trials with success probabilities
//! `rho_1..rho_T` (a Poisson-binomial count), this module evaluates
//! `Pr{#successes >= k}` three ways:
//!
//! * [`exact_tail`]: an `O(T k)` dynamic program over success counts with a
//!   compensated sink accumulator; exact up to floating-point rounding.
//! * [`monte_carlo_tail`]: seeded, chunk-substreamed sampling; bit-for-bit
//!   reproducible for a given `(rho, k, samples, seed)` at any thread count.
//! * [`binomial_tail`]: the identically-distributed special case, evaluated
//!   by the same dynamic program.
//!
//! [`inverse_normal_cdf`] provides the standard-normal quantile used by the
//! closed-form constant policy.

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, tag};

/// Samples per Monte Carlo work chunk. Each chunk gets its own substream,
/// which is what makes parallel runs scheduling-independent.
const MC_CHUNK: u64 = 4096;

/// How a tail value was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailEstimate {
    Exact {
        value: f64,
    },
    MonteCarlo {
        /// Hit fraction; always an integer multiple of `1 / samples`.
        value: f64,
        samples: u64,
        /// Plug-in standard error `sqrt(value (1 - value) / samples)`.
        std_error: f64,
        seed: u64,
    },
}

impl TailEstimate {
    pub fn value(&self) -> f64 {
        match self {
            TailEstimate::Exact { value } | TailEstimate::MonteCarlo { value, .. } => *value,
        }
    }

    pub fn std_error(&self) -> f64 {
        match self {
            TailEstimate::Exact { .. } => 0.0,
            TailEstimate::MonteCarlo { std_error, .. } => *std_error,
        }
    }
}

/// Smallest integer count no less than `T * alpha`.
///
/// `T * alpha` that is integral up to 1e-9 relative slack is used as-is;
/// anything else rounds up.
pub fn k_threshold(t: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if t == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let ta = t as f64 * alpha;
    let nearest = ta.round();
    let k = if nearest >= 1.0 && (ta - nearest).abs() <= 1e-9 * ta.max(1.0) {
        nearest
    } else {
        ta.ceil()
    };
    Ok(k as usize)
}

fn validate_probs(rho: &[f64]) -> Result<()> {
    if let Some(i) = rho.iter().position(|p| !(*p >= 0.0 && *p <= 1.0)) {
        return Err(Error::Domain(format!(
            "trial probability [{i}] = {} is outside [0, 1]",
            rho[i]
        )));
    }
    Ok(())
}

/// Exact `Pr{#successes >= k}` for independent non-identical trials.
///
/// State: probabilities of exactly `0..k-1` successes so far, plus an
/// absorbing "reached k" sink accumulated with Kahan compensation.
///
/// ```
/// use robust_crowdsense::tail::exact_tail;
///
/// // three fair trials: 4 of 8 outcomes have at least two successes
/// let tail = exact_tail(&[0.5, 0.5, 0.5], 2)?;
/// assert!((tail - 0.5).abs() < 1e-15);
/// # Ok::<(), robust_crowdsense::Error>(())
/// ```
pub fn exact_tail(rho: &[f64], k: usize) -> Result<f64> {
    validate_probs(rho)?;
    if k > rho.len() {
        return Err(Error::Domain(format!(
            "k = {k} exceeds the number of trials {}",
            rho.len()
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }

    let mut below = vec![0.0f64; k]; // below[j] = Pr{exactly j successes so far}
    below[0] = 1.0;
    let mut sink = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation for the sink
    for &p in rho {
        let q = 1.0 - p;
        // mass promoted past k-1 is absorbed
        let promoted = below[k - 1] * p;
        let y = promoted - comp;
        let t = sink + y;
        comp = (t - sink) - y;
        sink = t;
        for j in (1..k).rev() {
            below[j] = below[j] * q + below[j - 1] * p;
        }
        below[0] *= q;
    }
    Ok(sink.clamp(0.0, 1.0))
}

/// Binomial tail `Pr{Bin(T, p) >= k}`, by definition equal to the
/// Poisson-binomial tail of the constant vector.
pub fn binomial_tail(t: usize, p: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "trial probability must lie in [0, 1], got {p}"
        )));
    }
    exact_tail(&vec![p; t], k)
}

/// Seeded Monte Carlo estimate of `Pr{#successes >= k}`.
///
/// The sample budget is split into fixed-size chunks; chunk `c` draws from
/// the substream `(seed, MC_CHUNK tag, c)` and chunk hit counts are summed
/// as integers, so the estimate is identical no matter how the chunks are
/// scheduled.
pub fn monte_carlo_tail(rho: &[f64], k: usize, samples: u64, seed: u64) -> Result<TailEstimate> {
    validate_probs(rho)?;
    if k > rho.len() {
        return Err(Error::Domain(format!(
            "k = {k} exceeds the number of trials {}",
            rho.len()
        )));
    }
    if samples == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let counts = exec::map_indexed(chunks as usize, |c| {
        let c = c as u64;
        let mut rng = rng::substream(seed, &[tag::MC_CHUNK, c]);
        let lo = c * MC_CHUNK;
        let hi = (lo + MC_CHUNK).min(samples);
        let mut hits = 0u64;
        for _ in lo..hi {
            let mut successes = 0usize;
            for &p in rho {
                if rng::uniform_f64(&mut rng) < p {
                    successes += 1;
                }
            }
            if successes >= k {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = counts.iter().sum();
    let value = hits as f64 / samples as f64;
    Ok(TailEstimate::MonteCarlo {
        value,
        samples,
        std_error: (value * (1.0 - value) / samples as f64).sqrt(),
        seed,
    })
}

// --- standard-normal CDF and quantile ---------------------------------

/// erf via the three-regime rational approximations of Cody (1969);
/// relative error below 1e-15 across the double range. Coefficients are
/// kept digit-for-digit as published.
#[allow(clippy::excessive_precision)]
fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= 0.46875 {
        const A: [f64; 5] = [
            3.16112374387056560e0,
            1.13864154151050156e2,
            3.77485237685302021e2,
            3.20937758913846947e3,
            1.85777706184603153e-1,
        ];
        const B: [f64; 4] = [
            2.36012909523441209e1,
            2.44024637934444173e2,
            1.28261652607737228e3,
            2.84423683343917062e3,
        ];
        let y = x * x;
        let mut num = A[4] * y;
        let mut den = y;
        for i in 0..3 {
            num = (num + A[i]) * y;
            den = (den + B[i]) * y;
        }
        return x * (num + A[3]) / (den + B[3]);
    }
    1.0 - erfc_positive(x)
}

/// erfc for x >= 0.46875.
#[allow(clippy::excessive_precision)]
fn erfc_positive(x: f64) -> f64 {
    debug_assert!(x >= 0.46875);
    if x <= 4.0 {
        const C: [f64; 9] = [
            5.64188496988670089e-1,
            8.88314979438837594e0,
            6.61191906371416295e1,
            2.98635138197400131e2,
            8.81952221241769090e2,
            1.71204761263407058e3,
            2.05107837782607147e3,
            1.23033935479799725e3,
            2.15311535474403846e-8,
        ];
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * x;
        let mut den = x;
        for i in 0..7 {
            num = (num + C[i]) * x;
            den = (den + D[i]) * x;
        }
        let ratio = (num + C[7]) / (den + D[7]);
        return exp_neg_sq(x) * ratio;
    }
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    if x >= 26.6 {
        return 0.0; // underflows double precision
    }
    let y = 1.0 / (x * x);
    let mut num = P[5] * y;
    let mut den = y;
    for i in 0..4 {
        num = (num + P[i]) * y;
        den = (den + Q[i]) * y;
    }
    let ratio = y * (num + P[4]) / (den + Q[4]);
    let inv_sqrt_pi = 0.5 * std::f64::consts::FRAC_2_SQRT_PI;
    exp_neg_sq(x) * (inv_sqrt_pi - ratio) / x
}

/// exp(-x^2) computed with the split trick to limit cancellation for large x.
fn exp_neg_sq(x: f64) -> f64 {
    let xi = (x * 16.0).trunc() / 16.0;
    let delta = (x - xi) * (x + xi);
    (-xi * xi).exp() * (-delta).exp()
}

/// Standard-normal CDF, via erf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Acklam's rational approximation to the standard-normal quantile,
/// absolute error about 1.15e-9 before refinement.
#[allow(clippy::excessive_precision)]
fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996e0,
        3.754408661907416e0,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard-normal quantile: the `x` with `normal_cdf(x) = beta`, to well
/// within 1e-8 (rational approximation plus one Newton step against the
/// erf-based forward CDF).
pub fn inverse_normal_cdf(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!(
            "quantile argument must lie strictly inside (0, 1), got {beta}"
        )));
    }
    let x = acklam_quantile(beta);
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf <= f64::MIN_POSITIVE {
        return Ok(x);
    }
    Ok(x - (normal_cdf(x) - beta) / pdf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_threshold_examples() {
        assert_eq!(k_threshold(10, 0.8).unwrap(), 8);
        assert_eq!(k_threshold(10, 0.75).unwrap(), 8); // ceil(7.5)
        assert_eq!(k_threshold(70, 1.0).unwrap(), 70);
        assert_eq!(k_threshold(3, 1e-9).unwrap(), 1);
        assert!(k_threshold(10, 0.0).is_err());
        assert!(k_threshold(10, 1.1).is_err());
    }

    #[test]
    fn exact_tail_examples() {
        assert_eq!(exact_tail(&[0.3, 0.7], 0).unwrap(), 1.0);
        assert_eq!(exact_tail(&[1.0, 1.0, 1.0], 3).unwrap(), 1.0);
        assert!((exact_tail(&[0.5, 0.5, 0.5], 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((exact_tail(&[0.5, 0.5], 1).unwrap() - 0.75).abs() < 1e-15);
        assert!(exact_tail(&[0.5], 2).is_err());
        assert!(exact_tail(&[1.5], 1).is_err());
    }

    /// Brute-force reference: enumerate all 2^T outcomes.
    fn enumerated_tail(rho: &[f64], k: usize) -> f64 {
        let t = rho.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << t) {
            if (mask.count_ones() as usize) < k {
                continue;
            }
            let mut p = 1.0;
            for (i, &r) in rho.iter().enumerate() {
                p *= if mask >> i & 1 == 1 { r } else { 1.0 - r };
            }
            total += p;
        }
        total
    }

    #[test]
    fn exact_tail_matches_enumeration() {
        let mut rng = crate::rng::substream(11, &[1]);
        for _ in 0..50 {
            let t = 1 + (crate::rng::uniform_f64(&mut rng) * 10.0) as usize;
            let rho: Vec<f64> = (0..t).map(|_| crate::rng::uniform_f64(&mut rng)).collect();
            for k in 0..=t {
                let dp = exact_tail(&rho, k).unwrap();
                let brute = enumerated_tail(&rho, k);
                assert!(
                    (dp - brute).abs() <= 1e-12,
                    "T={t} k={k}: dp={dp} enum={brute}"
                );
            }
        }
    }

    #[test]
    fn binomial_tail_examples() {
        assert_eq!(binomial_tail(4, 1.0, 4).unwrap(), 1.0);
        assert!((binomial_tail(2, 0.5, 1).unwrap() - 0.75).abs() < 1e-15);
        // frozen from an independent high-precision evaluation
        assert!((binomial_tail(70, 0.95, 63).unwrap() - 0.976639269295).abs() < 1e-10);
        let consts = vec![0.95; 70];
        assert!(
            (binomial_tail(70, 0.95, 63).unwrap() - exact_tail(&consts, 63).unwrap()).abs()
                <= 1e-15
        );
    }

    #[test]
    fn monte_carlo_edge_cases() {
        let est = monte_carlo_tail(&[1.0; 5], 5, 1000, 1).unwrap();
        assert_eq!(est.value(), 1.0);
        let est = monte_carlo_tail(&[0.0; 5], 1, 1000, 1).unwrap();
        assert_eq!(est.value(), 0.0);
    }

    #[test]
    fn monte_carlo_close_to_exact() {
        let rho = [0.5, 0.5, 0.5];
        let est = monte_carlo_tail(&rho, 2, 100_000, 424242).unwrap();
        let se = est.std_error();
        assert!((est.value() - 0.5).abs() <= 3.0 * se.max(1e-4));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let rho = [0.3, 0.8, 0.6, 0.1];
        let a = monte_carlo_tail(&rho, 2, 9999, 7).unwrap();
        let b = monte_carlo_tail(&rho, 2, 9999, 7).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_tail(&rho, 2, 9999, 8).unwrap();
        assert_ne!(a.value(), c.value());
        if let TailEstimate::MonteCarlo { value, samples, .. } = a {
            let scaled = value * samples as f64;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_normal_anchors() {
        // frozen from an independent high-precision quantile oracle
        assert!(inverse_normal_cdf(0.5).unwrap().abs() < 1e-12);
        let cases = [
            (0.75, 0.674489750196),
            (0.91, 1.340755033690),
            (0.95, 1.644853626951),
            (0.975, 1.959963984540),
            (0.98, 2.053748910632),
            (0.99, 2.326347874041),
            (0.999, 3.090232306168),
        ];
        for (beta, want) in cases {
            let got = inverse_normal_cdf(beta).unwrap();
            assert!((got - want).abs() < 1e-8, "beta={beta}: {got} vs {want}");
            let sym = inverse_normal_cdf(1.0 - beta).unwrap();
            assert!((sym + want).abs() < 1e-8);
        }
    }

    #[test]
    fn inverse_normal_round_trip() {
        for i in 0..=8 {
            let beta = 0.91 + 0.01 * i as f64;
            let x = inverse_normal_cdf(beta).unwrap();
            assert!((normal_cdf(x) - beta).abs() <= 1e-8, "beta={beta}");
        }
        for beta in [1e-6, 0.1, 0.3, 0.7, 0.9999, 1.0 - 1e-9] {
            let x = inverse_normal_cdf(beta).unwrap();
            assert!((normal_cdf(x) - beta).abs() <= 1e-8, "beta={beta}");
        }
    }

    #[test]
    fn inverse_normal_domain() {
        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
        assert!(inverse_normal_cdf(-0.5).is_err());
    }
}
