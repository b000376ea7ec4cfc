//! Shared test oracles, all deliberately independent of the solver paths
//! they check. Not every test target uses every helper.
#![allow(dead_code)]

use robust_crowdsense::model::BiddingCurve;
use robust_crowdsense::rng;
use robust_crowdsense::solver::PaymentTerm;

/// Exhaustive grid minimization of `sum_i r_i c_i x_i^(p_i+1)` subject to
/// `sum x_i >= gamma`, `x_i in [0, 1]`. All free coordinates range over the
/// grid `{0, step, ..., 1}`; the last coordinate is the smallest grid value
/// restoring feasibility (optimal since every term increases). Costs are
/// tabulated per level and each loop level breaks once the running partial
/// cost passes the incumbent, which is sound because costs increase in the
/// level index.
pub fn grid_search_budgeted(terms: &[PaymentTerm], gamma: f64, step: f64) -> f64 {
    let n = terms.len();
    assert!((1..=4).contains(&n), "oracle restricted to tiny instances");
    let levels = (1.0 / step).round() as usize;
    let tables: Vec<Vec<f64>> = terms
        .iter()
        .map(|term| {
            (0..=levels)
                .map(|i| {
                    let x = i as f64 / levels as f64;
                    term.r * term.curve.scale() * x.powf(term.curve.exponent() + 1.0)
                })
                .collect()
        })
        .collect();
    // total grid mass required, in level units
    let needed_levels = (gamma * levels as f64 - 1e-9).ceil().max(0.0) as usize;

    fn scan(
        tables: &[Vec<f64>],
        depth: usize,
        levels: usize,
        mass_so_far: usize,
        cost_so_far: f64,
        needed: usize,
        best: &mut f64,
    ) {
        if depth == tables.len() - 1 {
            let last = needed.saturating_sub(mass_so_far);
            if last <= levels {
                let total = cost_so_far + tables[depth][last];
                if total < *best {
                    *best = total;
                }
            }
            return;
        }
        for i in 0..=levels {
            let cost = cost_so_far + tables[depth][i];
            if cost >= *best {
                break; // costs only grow with the level index
            }
            scan(tables, depth + 1, levels, mass_so_far + i, cost, needed, best);
        }
    }

    let mut best = f64::INFINITY;
    scan(&tables, 0, levels, 0, 0.0, needed_levels, &mut best);
    best
}

/// `Pr{#successes >= k}` by full 2^T enumeration.
pub fn enumerated_tail(rho: &[f64], k: usize) -> f64 {
    let t = rho.len();
    assert!(t <= 20);
    let mut total = 0.0;
    for mask in 0u32..(1u32 << t) {
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

/// Deterministic random-problem generator for the solver suites:
/// `n` terms with `r in [1, 36]`, `scale in [1, 6]`, `exponent in [1, 4]`.
pub fn random_terms(seed: u64, case: u64, n: usize) -> Vec<PaymentTerm> {
    let mut rng = rng::substream(seed, &[0x7e57, case]);
    (0..n)
        .map(|_| {
            let r = 1 + (rng::uniform_f64(&mut rng) * 36.0) as u32;
            let scale = 1.0 + rng::uniform_f64(&mut rng) * 5.0;
            let exponent = 1.0 + rng::uniform_f64(&mut rng) * 3.0;
            PaymentTerm::new(r.min(36), BiddingCurve::new(scale, exponent).unwrap())
        })
        .collect()
}

/// Largest budget for which no coordinate of the water-filled solution is
/// clamped at 1 (strict-monotonicity statements only hold interior).
pub fn interior_budget_cap(terms: &[PaymentTerm]) -> f64 {
    use robust_crowdsense::solver::Integrand;
    let nu_min = terms
        .iter()
        .map(|t| t.marginal(1.0))
        .fold(f64::INFINITY, f64::min);
    terms.iter().map(|t| t.inverse_marginal(nu_min)).sum()
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}
