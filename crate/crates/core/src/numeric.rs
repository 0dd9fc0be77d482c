//! Small numerical helpers shared by the analytic models.

/// Exponents above this magnitude are combined in log space.
pub(crate) const LOG_SPACE_THRESHOLD: f64 = 20.0;

/// `ln(sum_i w_i exp(x_i))` for non-negative weights; zero-weight terms are skipped.
pub(crate) fn ln_weighted_exp_sum(terms: &[(f64, f64)]) -> f64 {
    let max = terms
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, x)| w * (x - max).exp())
        .sum();
    max + sum.ln()
}

/// `sum_i w_i exp(x_i)`, switching to log space when any active exponent is large.
pub(crate) fn weighted_exp_sum(terms: &[(f64, f64)]) -> f64 {
    if needs_log_space(terms) {
        ln_weighted_exp_sum(terms).exp()
    } else {
        terms.iter().map(|(w, x)| w * x.exp()).sum()
    }
}

/// Ratio of two weighted exponential sums, evaluated without intermediate overflow.
pub(crate) fn weighted_exp_ratio(num: &[(f64, f64)], den: &[(f64, f64)]) -> f64 {
    if needs_log_space(num) || needs_log_space(den) {
        (ln_weighted_exp_sum(num) - ln_weighted_exp_sum(den)).exp()
    } else {
        let n: f64 = num.iter().map(|(w, x)| w * x.exp()).sum();
        let d: f64 = den.iter().map(|(w, x)| w * x.exp()).sum();
        n / d
    }
}

fn needs_log_space(terms: &[(f64, f64)]) -> bool {
    terms
        .iter()
        .any(|(w, x)| *w > 0.0 && x.abs() > LOG_SPACE_THRESHOLD)
}

/// Median of a slice (NaN-free); averages the two middle values for even lengths.
pub(crate) fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_matches_direct_in_overlap() {
        let num = [(0.3, 1.5), (0.7, -2.0)];
        let den = [(0.3, 0.5), (0.7, -1.0)];
        let direct = (0.3 * 1.5f64.exp() + 0.7 * (-2.0f64).exp())
            / (0.3 * 0.5f64.exp() + 0.7 * (-1.0f64).exp());
        let logged = (ln_weighted_exp_sum(&num) - ln_weighted_exp_sum(&den)).exp();
        assert!((direct - logged).abs() < 1e-14 * direct);
        assert!((weighted_exp_ratio(&num, &den) - direct).abs() < 1e-15);
    }

    #[test]
    fn huge_exponents_stay_finite() {
        let r = weighted_exp_ratio(
            &[(0.5, 800.0), (0.5, -800.0)],
            &[(0.5, 400.0), (0.5, -400.0)],
        );
        assert!((r.ln() - 400.0).abs() < 1e-9);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
