//! Truncated number-basis oracle for the squeezed coherent state.
//!
//! The state `S(r) D(α) |0⟩` is annihilated by `a cosh r + a† sinh r − α`,
//! which gives the amplitude recurrence
//!
//! ```text
//! cosh r √(n+1) c_{n+1} = α c_n − sinh r √n c_{n−1}
//! ```
//!
//! The recurrence is run past the requested cutoff so the probability mass
//! left outside the truncation can be measured and reported. Nothing here
//! uses the closed-form moments.

use num_complex::Complex64;

use super::{check_range, PhotonMoments, QuantumError, SqueezedCoherentParams};

/// Largest tail mass accepted by [`number_distribution`].
pub const TAIL_TOLERANCE: f64 = 1e-10;

const RESCALE_THRESHOLD: f64 = 1e150;

/// Photon-number distribution truncated to `0..cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    pub probabilities: Vec<f64>,
    /// Mass found at `n >= cutoff` (estimated over an extended basis).
    pub tail_mass: f64,
}

impl FockDistribution {
    pub fn moments(&self) -> PhotonMoments {
        moments_of(&self.probabilities)
    }
}

/// Mean and variance of a number distribution, accumulated around the mean.
pub fn moments_of(probabilities: &[f64]) -> PhotonMoments {
    let total: f64 = probabilities.iter().sum();
    let mean = probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum::<f64>()
        / total;
    let variance = probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    PhotonMoments::from_mean_variance(mean, variance)
}

/// Number distribution of the displaced squeezed state, truncated at `cutoff`.
///
/// Fails when more than [`TAIL_TOLERANCE`] of the probability lies at or
/// beyond `cutoff`.
pub fn number_distribution(
    s: &SqueezedCoherentParams,
    cutoff: usize,
) -> Result<FockDistribution, QuantumError> {
    let extended = cutoff + cutoff.max(256);
    let alpha = Complex64::from_polar(s.alpha_mag(), s.phase());
    let (ch, sh) = (s.r().cosh(), s.r().sinh());

    let mut probs = Vec::with_capacity(extended);
    let mut prev = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1.0, 0.0);
    // Probabilities already pushed are rescaled together with the amplitudes.
    for n in 0..extended {
        probs.push(cur.norm_sqr());
        let next = (alpha * cur - prev * (sh * (n as f64).sqrt())) / (ch * ((n + 1) as f64).sqrt());
        prev = cur;
        cur = next;
        let scale = cur.norm().max(prev.norm());
        if scale > RESCALE_THRESHOLD {
            prev /= scale;
            cur /= scale;
            let s2 = scale * scale;
            probs.iter_mut().for_each(|p| *p /= s2);
        }
    }

    let total: f64 = probs.iter().sum();
    let tail_mass = probs[cutoff.min(extended)..].iter().sum::<f64>() / total;
    if tail_mass > TAIL_TOLERANCE {
        return Err(QuantumError::TruncationTail {
            cutoff,
            tail_mass,
            tolerance: TAIL_TOLERANCE,
        });
    }
    probs.truncate(cutoff);
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(FockDistribution {
        probabilities: probs,
        tail_mass,
    })
}

/// Empirical moments of the truncated number distribution.
pub fn fock_oracle_moments(
    s: &SqueezedCoherentParams,
    cutoff: usize,
) -> Result<PhotonMoments, QuantumError> {
    Ok(number_distribution(s, cutoff)?.moments())
}

/// Exact binomial thinning of a number distribution by a beam splitter of transmittance `eta`.
pub fn thin_distribution(probabilities: &[f64], eta: f64) -> Result<Vec<f64>, QuantumError> {
    check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
    let len = probabilities.len();
    let mut out = vec![0.0; len];
    if eta == 0.0 {
        out[0] = probabilities.iter().sum();
        return Ok(out);
    }
    if eta == 1.0 {
        return Ok(probabilities.to_vec());
    }
    let (ln_eta, ln_loss) = (eta.ln(), (1.0 - eta).ln());
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..len).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    for (n, &p) in probabilities.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            let ln_binom = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
            *slot += p * (ln_binom + k as f64 * ln_eta + (n - k) as f64 * ln_loss).exp();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{apply_loss, squeezed_moments};

    fn params(a: f64, phi: f64, r: f64) -> SqueezedCoherentParams {
        SqueezedCoherentParams::new(a, phi, r).unwrap()
    }

    #[test]
    fn vacuum() {
        let m = fock_oracle_moments(&params(0.0, 0.0, 0.0), 10).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.0);
    }

    #[test]
    fn coherent_poisson() {
        let m = fock_oracle_moments(&params(2.0, 0.0, 0.0), 60).unwrap();
        assert!((m.mean - 4.0).abs() < 1e-8);
        assert!((m.variance - 4.0).abs() < 1e-8);
    }

    #[test]
    fn displaced_squeezed_agrees_with_closed_form() {
        let s = params(2.0, 0.0, 0.5);
        let oracle = fock_oracle_moments(&s, 80).unwrap();
        let closed = squeezed_moments(&s);
        assert!((oracle.mean - closed.mean).abs() / closed.mean < 1e-6);
        assert!((oracle.variance - closed.variance).abs() / closed.variance < 1e-6);
        // Values frozen in the closed-form unit tests.
        assert!((oracle.mean - 1.743_058).abs() < 1e-6);
        assert!((oracle.variance - 1.231_890).abs() < 1e-6);
    }

    #[test]
    fn squeezed_vacuum_has_only_even_numbers() {
        let d = number_distribution(&params(0.0, 0.0, 0.8), 120).unwrap();
        for (n, p) in d.probabilities.iter().enumerate() {
            if n % 2 == 1 {
                assert!(*p < 1e-30, "odd photon number {n} has probability {p}");
            }
        }
    }

    #[test]
    fn rejects_short_cutoff() {
        let err =
            number_distribution(&params(5.0, std::f64::consts::FRAC_PI_2, 1.0), 50).unwrap_err();
        match err {
            QuantumError::TruncationTail {
                cutoff, tail_mass, ..
            } => {
                assert_eq!(cutoff, 50);
                assert!(tail_mass > TAIL_TOLERANCE);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tail_mass_is_reported() {
        let d = number_distribution(&params(2.0, 0.0, 0.0), 60).unwrap();
        assert!(d.tail_mass < 1e-40);
        let sum: f64 = d.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn thinning_matches_loss_map() {
        let s = params(3.0, 0.0, 0.1);
        let d = number_distribution(&s, 120).unwrap();
        let before = d.moments();
        let eta = 0.7225;
        let thinned = moments_of(&thin_distribution(&d.probabilities, eta).unwrap());
        let predicted = apply_loss(before, eta).unwrap();
        assert!((thinned.mean - predicted.mean).abs() < 1e-10 * predicted.mean);
        assert!((thinned.fano - predicted.fano).abs() < 1e-10);
    }

    #[test]
    fn thinning_monte_carlo_beam_splitter() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        // Sample n from the oracle distribution, then route each photon through the beam splitter.
        let s = params(3.0, 0.0, 0.1);
        let d = number_distribution(&s, 120).unwrap();
        let cdf: Vec<f64> = d
            .probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let eta = 0.7225;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 200_000;
        let mut counts = Vec::with_capacity(trials);
        for _ in 0..trials {
            let u: f64 = rng.random();
            let n = cdf.partition_point(|c| *c < u);
            let k = (0..n).filter(|_| rng.random::<f64>() < eta).count();
            counts.push(k as f64);
        }
        let mean = counts.iter().sum::<f64>() / trials as f64;
        let var = counts.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let predicted = apply_loss(d.moments(), eta).unwrap();
        // Fano estimator standard error is about sqrt(2/N) for near-Gaussian counts.
        let se = (2.0 / trials as f64).sqrt();
        assert!(
            (var / mean - predicted.fano).abs() < 4.0 * se,
            "{} vs {}",
            var / mean,
            predicted.fano
        );
    }
}
