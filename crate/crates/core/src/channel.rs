//! Quasi-static Rayleigh fading with complex AWGN: `r = h s + w`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::modem::{LinkConfig, TxFrame};

/// Channel coefficient for one frame, known at the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
}

impl ChannelRealization {
    pub fn new(h: Complex64) -> Self {
        ChannelRealization { h }
    }

    /// Real coefficient `h = gain`.
    pub fn real(gain: f64) -> Self {
        ChannelRealization::new(Complex64::new(gain, 0.0))
    }

    /// Power gain `|h|^2`.
    pub fn power(&self) -> f64 {
        self.h.norm_sqr()
    }
}

/// Received interval plus the coefficient that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RxFrame {
    samples: Vec<Complex64>,
    h_used: ChannelRealization,
}

impl RxFrame {
    /// Wraps externally produced samples. The length must be even (two blocks).
    pub fn new(samples: Vec<Complex64>, h_used: ChannelRealization) -> Self {
        RxFrame { samples, h_used }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn h_used(&self) -> ChannelRealization {
        self.h_used
    }
}

/// Draws `h ~ CN(0, 1)`.
pub fn draw_rayleigh<R: Rng + ?Sized>(rng: &mut R) -> ChannelRealization {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    ChannelRealization::new(Complex64::new(scale * re, scale * im))
}

/// Adds `CN(0, sigma_w2)` noise to every sample of `samples`.
pub(crate) fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], sigma_w2: f64, rng: &mut R) {
    if sigma_w2 == 0.0 {
        return;
    }
    let scale = (sigma_w2 / 2.0).sqrt();
    for y in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *y += Complex64::new(scale * re, scale * im);
    }
}

/// Passes a frame through the channel. The same `h` applies to both blocks.
pub fn apply_channel<R: Rng + ?Sized>(
    tx: &TxFrame,
    h: ChannelRealization,
    cfg: &LinkConfig,
    rng: &mut R,
) -> RxFrame {
    let mut samples: Vec<Complex64> = tx.samples().iter().map(|x| h.h * x).collect();
    add_awgn(&mut samples, cfg.sigma_w2(), rng);
    RxFrame { samples, h_used: h }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{modulate, BitTriplet, StatePair, TernaryState};
    use crate::rng::substream;

    #[test]
    fn rayleigh_draw_statistics() {
        let mut rng = substream(11, &[]);
        let draws = 1_000_000;
        let mut power = 0.0;
        let mut above_one = 0u32;
        let mut phasor = Complex64::new(0.0, 0.0);
        for _ in 0..draws {
            let h = draw_rayleigh(&mut rng).h;
            let u = h.norm_sqr();
            power += u;
            above_one += (u > 1.0) as u32;
            phasor += h / h.norm();
        }
        let n = draws as f64;
        assert!((power / n - 1.0).abs() < 0.003, "E|h|^2 = {}", power / n);
        let tail = above_one as f64 / n;
        assert!(
            (tail - (-1f64).exp()).abs() < 0.002,
            "P(|h|^2 > 1) = {tail}"
        );
        assert!((phasor / n).norm() < 0.005);
    }

    fn quiet_cfg(n: usize) -> LinkConfig {
        LinkConfig::new(n, 1.0, 1.0, 10.0, f64::INFINITY).unwrap()
    }

    #[test]
    fn noiseless_silence_stays_zero() {
        let cfg = quiet_cfg(4);
        let mut rng = substream(1, &[]);
        let tx = TxFrame::from_parts(vec![Complex64::new(0.0, 0.0); 8], StatePair::ALL[0]);
        let rx = apply_channel(&tx, draw_rayleigh(&mut rng), &cfg, &mut rng);
        assert!(rx.samples().iter().all(|y| *y == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn identity_channel() {
        let cfg = quiet_cfg(3);
        let tx = TxFrame::from_parts(vec![Complex64::new(1.0, 0.0); 6], StatePair::ALL[0]);
        let rx = apply_channel(
            &tx,
            ChannelRealization::real(1.0),
            &cfg,
            &mut substream(1, &[]),
        );
        assert_eq!(rx.samples(), tx.samples());
        assert_eq!(rx.samples().len(), 6);
    }

    #[test]
    fn noise_power_on_silent_block() {
        // sigma_l2 = 2 at 0 dB gives sigma_w2 = 2.
        let cfg = LinkConfig::new(1_000_000, 1.0, 2.0, 10.0, 0.0).unwrap();
        let mut rng = substream(5, &[]);
        let tx = modulate(BitTriplet::new(false, true, true), &cfg, &mut rng);
        assert_eq!(tx.states().first(), TernaryState::S);
        let rx = apply_channel(&tx, ChannelRealization::real(1.0), &cfg, &mut rng);
        let silent = &rx.samples()[..cfg.n()];
        let p = silent.iter().map(|y| y.norm_sqr()).sum::<f64>() / cfg.n() as f64;
        // Var|w|^2 = 4, so the standard error is 0.002.
        assert!((p - 2.0).abs() < 0.01, "E|r|^2 = {p}");
    }

    #[test]
    fn channel_is_constant_over_the_frame() {
        let cfg = quiet_cfg(5);
        let mut rng = substream(9, &[]);
        let tx = modulate(BitTriplet::new(false, false, false), &cfg, &mut rng);
        let h = ChannelRealization::new(Complex64::new(0.3, -0.7));
        let rx = apply_channel(&tx, h, &cfg, &mut rng);
        for (y, x) in rx.samples().iter().zip(tx.samples()) {
            assert!((y - h.h * x).norm() < 1e-15);
        }
    }
}
