//! Two-stage receiver.
//!
//! Each segment is first tested for silence by comparing its sample mean against `0` and
//! `h * mu`. Active segments are then split into `L`/`H` by comparing the empirical variance
//! with the log-likelihood-ratio threshold. If both segments look silent, the one with the
//! larger activity margin is forced active, so `(S, S)` is never emitted.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, RxFrame};
use crate::error::{CoreError, Result};
use crate::modem::{map_pair_to_bits, BitTriplet, LinkConfig, StatePair, TernaryState};

/// Sufficient statistics of one received segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    /// Sample mean.
    pub mean: Complex64,
    /// Empirical variance with divisor `N`.
    pub variance: f64,
    /// `|mean| - |mean - h mu|`; negative means the mean is closer to zero.
    pub activity_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionResult {
    pub states: StatePair,
    pub bits: BitTriplet,
    /// Both segments initially looked silent and one was forced active.
    pub refined: bool,
}

pub fn segment_stats(
    segment: &[Complex64],
    h: ChannelRealization,
    cfg: &LinkConfig,
) -> Result<SegmentStats> {
    if segment.len() != cfg.n() {
        return Err(CoreError::LengthMismatch {
            expected: cfg.n(),
            actual: segment.len(),
        });
    }
    Ok(stats_unchecked(segment, h.h * cfg.mu()))
}

fn stats_unchecked(segment: &[Complex64], reference: Complex64) -> SegmentStats {
    let n = segment.len() as f64;
    let mean = segment.iter().sum::<Complex64>() / n;
    let variance = segment.iter().map(|y| (y - mean).norm_sqr()).sum::<f64>() / n;
    SegmentStats {
        mean,
        variance,
        activity_margin: mean.norm() - (mean - reference).norm(),
    }
}

/// `true` declares the segment silent. A zero margin counts as active.
pub fn silent_test(stats: &SegmentStats) -> bool {
    stats.activity_margin < 0.0
}

/// LRT threshold between two zero-mean complex Gaussian variances `var_low < var_high`:
/// `ln(var_high / var_low) * var_high * var_low / (var_high - var_low)`.
///
/// Equal variances return their common value, the limit of the expression.
pub fn lrt_threshold_from_variances(var_low: f64, var_high: f64) -> f64 {
    if var_low <= 0.0 {
        // Only reachable on a noiseless link in a complete fade.
        return 0.0;
    }
    let excess = (var_high - var_low) / var_low;
    if excess == 0.0 {
        return var_low;
    }
    // ln(r) / (r - 1) with r = 1 + excess, stable as excess -> 0.
    var_high * excess.ln_1p() / excess
}

/// Variance threshold for the current channel.
pub fn lrt_threshold(h: ChannelRealization, cfg: &LinkConfig) -> f64 {
    let u = h.power();
    let sigma_w2 = cfg.sigma_w2();
    lrt_threshold_from_variances(u * cfg.sigma_l2() + sigma_w2, u * cfg.sigma_h2() + sigma_w2)
}

/// `H` when the variance strictly exceeds `tau`, otherwise `L`.
pub fn variance_test(stats: &SegmentStats, tau: f64) -> TernaryState {
    if stats.variance > tau {
        TernaryState::H
    } else {
        TernaryState::L
    }
}

pub fn demodulate(rx: &RxFrame, cfg: &LinkConfig) -> Result<DetectionResult> {
    let n = cfg.n();
    let samples = rx.samples();
    if samples.len() != 2 * n {
        return Err(CoreError::LengthMismatch {
            expected: 2 * n,
            actual: samples.len(),
        });
    }
    let h = rx.h_used();
    let reference = h.h * cfg.mu();
    let stats = [
        stats_unchecked(&samples[..n], reference),
        stats_unchecked(&samples[n..], reference),
    ];
    let mut silent = [silent_test(&stats[0]), silent_test(&stats[1])];
    let refined = silent[0] && silent[1];
    if refined {
        let forced = if stats[1].activity_margin > stats[0].activity_margin {
            1
        } else {
            0
        };
        silent[forced] = false;
    }

    let tau = lrt_threshold(h, cfg);
    let decide = |i: usize| {
        if silent[i] {
            TernaryState::S
        } else {
            variance_test(&stats[i], tau)
        }
    };
    let states = StatePair::new(decide(0), decide(1))
        .expect("the refinement step leaves at least one segment active");
    Ok(DetectionResult {
        states,
        bits: map_pair_to_bits(states),
        refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cfg(n: usize) -> LinkConfig {
        LinkConfig::new(n, 1.0, 1.0, 10.0, 10.0).unwrap()
    }

    #[test]
    fn stats_of_silence() {
        let s = segment_stats(&[c(0.0); 4], ChannelRealization::real(1.0), &cfg(4)).unwrap();
        assert_eq!(s.mean, c(0.0));
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.activity_margin, -1.0);
        assert!(silent_test(&s));
    }

    #[test]
    fn stats_hand_computed() {
        let s = segment_stats(&[c(0.0), c(2.0)], ChannelRealization::real(1.0), &cfg(2)).unwrap();
        assert_eq!(s.mean, c(1.0));
        assert_eq!(s.variance, 1.0);
        assert_eq!(s.activity_margin, 1.0);

        let k = Complex64::new(0.4, -1.2);
        let s = segment_stats(&[k; 5], ChannelRealization::real(1.0), &cfg(5)).unwrap();
        assert!(s.variance < 1e-30);
    }

    #[test]
    fn stats_length_checked() {
        let err = segment_stats(&[c(0.0); 3], ChannelRealization::real(1.0), &cfg(4));
        assert_eq!(
            err,
            Err(CoreError::LengthMismatch {
                expected: 4,
                actual: 3
            })
        );
    }

    #[test]
    fn silent_test_decisions() {
        let h = ChannelRealization::new(Complex64::new(0.6, 0.8));
        let at = |mean: Complex64| segment_stats(&[mean; 2], h, &cfg(2)).unwrap();
        assert!(silent_test(&at(c(0.0))));
        assert!(!silent_test(&at(h.h)));
        // Midpoint: equidistant, declared active.
        let mid = at(h.h / 2.0);
        assert_eq!(mid.activity_margin, 0.0);
        assert!(!silent_test(&mid));
    }

    #[test]
    fn threshold_values() {
        assert_relative_eq!(
            lrt_threshold_from_variances(1.0, 2.0),
            2.0 * 2f64.ln(),
            max_relative = 1e-15
        );
        let e = std::f64::consts::E;
        assert_relative_eq!(
            lrt_threshold_from_variances(1.0, e),
            e / (e - 1.0),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            lrt_threshold_from_variances(1.0, 10.0),
            10f64.ln() * 10.0 / 9.0,
            max_relative = 1e-15
        );
        assert_eq!(lrt_threshold_from_variances(0.5, 0.5), 0.5);
    }

    #[test]
    fn threshold_is_continuous_in_a_deep_fade() {
        let cfg = cfg(10);
        let sigma_w2 = cfg.sigma_w2();
        assert_eq!(lrt_threshold(ChannelRealization::real(0.0), &cfg), sigma_w2);
        let mut previous = f64::INFINITY;
        for k in 1..12 {
            let gain = 10f64.powi(-k);
            let tau = lrt_threshold(ChannelRealization::real(gain), &cfg);
            let gap = (tau - sigma_w2).abs();
            assert!(gap <= previous);
            previous = gap;
        }
        assert!(previous < 1e-15);
    }

    #[test]
    fn threshold_sits_between_the_variances() {
        let cfg = cfg(10);
        for gain in [1e-3, 0.1, 1.0, 3.0] {
            let h = ChannelRealization::real(gain);
            let u = h.power();
            let tau = lrt_threshold(h, &cfg);
            assert!(tau > u * cfg.sigma_l2() + cfg.sigma_w2());
            assert!(tau < u * cfg.sigma_h2() + cfg.sigma_w2());
        }
    }

    #[test]
    fn variance_boundary_is_low() {
        let stats = |variance| SegmentStats {
            mean: c(1.0),
            variance,
            activity_margin: 1.0,
        };
        let tau = 10f64.ln() * 10.0 / 9.0;
        assert_eq!(variance_test(&stats(tau), tau), TernaryState::L);
        assert_eq!(variance_test(&stats(tau + 1e-12), tau), TernaryState::H);
        assert_eq!(variance_test(&stats(3.0), tau), TernaryState::H);
    }

    #[test]
    fn noiseless_frame_is_recovered() {
        // (L, S) with a zero-variance active block: mean exactly h*mu.
        let cfg = LinkConfig::new(4, 1.0, 1.0, 10.0, f64::INFINITY).unwrap();
        let mut samples = vec![c(1.0); 4];
        samples.extend([c(0.0); 4]);
        let rx = RxFrame::new(samples, ChannelRealization::real(1.0));
        let out = demodulate(&rx, &cfg).unwrap();
        assert_eq!(out.states.to_string(), "(L,S)");
        assert_eq!(out.bits.bits(), [0, 0, 1]);
        assert!(!out.refined);
    }

    #[test]
    fn double_silence_forces_one_block() {
        let cfg = cfg(2);
        let h = ChannelRealization::real(1.0);
        let rx = RxFrame::new(vec![c(0.0); 4], h);
        let out = demodulate(&rx, &cfg).unwrap();
        assert!(out.refined);
        assert_eq!(out.states.active_blocks(), 1);
        // Equal margins: block 1 wins.
        assert!(out.states.first().is_active());

        // Block 2 is closer to h*mu, so it is the one forced active.
        let rx = RxFrame::new(vec![c(0.0), c(0.0), c(0.3), c(0.3)], h);
        let out = demodulate(&rx, &cfg).unwrap();
        assert!(out.refined);
        assert_eq!(out.states.first(), TernaryState::S);
        assert!(out.states.second().is_active());
    }

    #[test]
    fn frame_length_checked() {
        let rx = RxFrame::new(vec![c(0.0); 5], ChannelRealization::real(1.0));
        assert!(matches!(
            demodulate(&rx, &cfg(2)),
            Err(CoreError::LengthMismatch {
                expected: 4,
                actual: 5
            })
        ));
    }
}
