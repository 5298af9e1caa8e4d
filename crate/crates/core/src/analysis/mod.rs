//! Closed-form bit error probability.
//!
//! At a fixed channel coefficient each segment has a 3x3 transition kernel built from
//! mean-stage and variance-stage error probabilities. Two independent kernels give a
//! preliminary pair distribution, the `(S, S)` mass is moved onto legal pairs the way the
//! receiver repairs it, and Hamming-weighted errors give the conditional BEP. The Rayleigh
//! average integrates that against the exponential density of `|h|^2`.
//!
//! The variance stage treats the empirical variance as Gaussian with mean `s2` and
//! variance `s2^2 / N`, which tightens as `N` grows.

pub mod quadrature;

use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;

use crate::detector::lrt_threshold_from_variances;
use crate::error::{CoreError, Result};
use crate::modem::{map_pair_to_bits, LinkConfig, StatePair, TernaryState};
use quadrature::{integrate, Integral, QuadratureOptions};

/// Upper limit of the fading integral; the dropped tail weighs at most `e^-23 < 1.1e-10`.
pub const RAYLEIGH_UPPER_LIMIT: f64 = 23.0;

/// `P(Z > x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `Q(num / den)`, taking the step limit when `den` is zero.
fn q_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        q_function(num / den)
    } else if num > 0.0 {
        0.0
    } else if num < 0.0 {
        1.0
    } else {
        0.5
    }
}

/// Per-segment error probabilities at a fixed channel coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageProbs {
    /// Silent segment declared active.
    pub p_sa: f64,
    /// Low-variance segment declared silent.
    pub p_ls: f64,
    /// High-variance segment declared silent.
    pub p_hs: f64,
    /// Active low-variance segment classified high.
    pub p_lh: f64,
    /// Active high-variance segment classified low.
    pub p_hl: f64,
    /// Silent segment, once declared active, classified high.
    pub p_sh: f64,
}

impl StageProbs {
    pub fn perfect() -> Self {
        StageProbs::uniform(0.0)
    }

    /// Every probability set to `p`.
    pub fn uniform(p: f64) -> Self {
        StageProbs {
            p_sa: p,
            p_ls: p,
            p_hs: p,
            p_lh: p,
            p_hl: p,
            p_sh: p,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.p_sa, self.p_ls, self.p_hs, self.p_lh, self.p_hl, self.p_sh,
        ]
    }

    /// L/H outcome of a forced-active segment that was sent in `state`, as `(P(L), P(H))`.
    fn classify(&self, state: TernaryState) -> (f64, f64) {
        match state {
            TernaryState::S => (1.0 - self.p_sh, self.p_sh),
            TernaryState::L => (1.0 - self.p_lh, self.p_lh),
            TernaryState::H => (self.p_hl, 1.0 - self.p_hl),
        }
    }
}

static ZERO_MEAN_WARNED: AtomicBool = AtomicBool::new(false);

pub fn stage_probs(h: Complex64, cfg: &LinkConfig) -> StageProbs {
    if cfg.mu() == 0.0 && !ZERO_MEAN_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "mu = 0: the silent test cannot separate states, mean-stage probabilities are 1/2"
        );
    }
    let u = h.norm_sqr();
    let sqrt_n = (cfg.n() as f64).sqrt();
    let sigma_w2 = cfg.sigma_w2();
    let var_low = u * cfg.sigma_l2() + sigma_w2;
    let var_high = u * cfg.sigma_h2() + sigma_w2;
    let tau = lrt_threshold_from_variances(var_low, var_high);
    let mean_distance = h.norm() * cfg.mu() * sqrt_n;

    StageProbs {
        p_sa: q_ratio(mean_distance, (2.0 * sigma_w2).sqrt()),
        p_ls: q_ratio(mean_distance, (2.0 * var_low).sqrt()),
        p_hs: q_ratio(mean_distance, (2.0 * var_high).sqrt()),
        p_lh: q_ratio(tau - var_low, var_low / sqrt_n),
        p_hl: q_ratio(var_high - tau, var_high / sqrt_n),
        p_sh: q_ratio(tau - sigma_w2, sigma_w2 / sqrt_n),
    }
}

/// `P(detected = t | sent = u)` for one segment, indexed by [`TernaryState::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionKernel {
    rows: [[f64; 3]; 3],
}

impl TransitionKernel {
    pub fn get(&self, sent: TernaryState, detected: TernaryState) -> f64 {
        self.rows[sent.index()][detected.index()]
    }

    pub fn row(&self, sent: TernaryState) -> [f64; 3] {
        self.rows[sent.index()]
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.rows
    }
}

pub fn transition_kernel(sp: &StageProbs) -> TransitionKernel {
    // Columns: S, L, H.
    TransitionKernel {
        rows: [
            [1.0 - sp.p_sa, sp.p_sa * (1.0 - sp.p_sh), sp.p_sa * sp.p_sh],
            [
                sp.p_ls,
                (1.0 - sp.p_ls) * (1.0 - sp.p_lh),
                (1.0 - sp.p_ls) * sp.p_lh,
            ],
            [
                sp.p_hs,
                (1.0 - sp.p_hs) * sp.p_hl,
                (1.0 - sp.p_hs) * (1.0 - sp.p_hl),
            ],
        ],
    }
}

/// Final detected-pair probabilities for one transmitted pair, indexed like
/// [`StatePair::ALL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistribution {
    probs: [f64; 8],
}

impl PairDistribution {
    /// Builds the distribution from stage probabilities.
    ///
    /// The preliminary joint law is the product of the two kernel rows. Its `(S, S)` mass is
    /// handed to the transmitted active blocks: with one active block that block is forced,
    /// with two each is forced half the time. A forced block is then classified `L`/`H`
    /// with its own confusion probabilities.
    pub fn from_stage_probs(tx: StatePair, sp: &StageProbs) -> Self {
        let kernel = transition_kernel(sp);
        let first = kernel.row(tx.first());
        let second = kernel.row(tx.second());
        let mut probs = [0.0; 8];
        for pair in StatePair::ALL {
            probs[pair.index()] = first[pair.first().index()] * second[pair.second().index()];
        }

        let silent_mass = first[TernaryState::S.index()] * second[TernaryState::S.index()];
        let active: Vec<usize> = (0..2).filter(|&i| tx.states()[i].is_active()).collect();
        let share = silent_mass / active.len() as f64;
        for &block in &active {
            let (p_low, p_high) = sp.classify(tx.states()[block]);
            for (state, p) in [(TernaryState::L, p_low), (TernaryState::H, p_high)] {
                let target = if block == 0 {
                    StatePair::new(state, TernaryState::S)
                } else {
                    StatePair::new(TernaryState::S, state)
                }
                .expect("one block is active");
                probs[target.index()] += share * p;
            }
        }
        PairDistribution { probs }
    }

    pub fn prob(&self, pair: StatePair) -> f64 {
        self.probs[pair.index()]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StatePair, f64)> + '_ {
        StatePair::ALL.into_iter().zip(self.probs.iter().copied())
    }
}

pub fn pair_distribution(tx: StatePair, h: Complex64, cfg: &LinkConfig) -> PairDistribution {
    PairDistribution::from_stage_probs(tx, &stage_probs(h, cfg))
}

/// Conditional BEP from stage probabilities: mean normalised Hamming distance over the eight
/// equiprobable transmitted pairs.
pub fn conditional_bep_from(sp: &StageProbs) -> f64 {
    let mut total = 0.0;
    for tx in StatePair::ALL {
        let sent = map_pair_to_bits(tx);
        let dist = PairDistribution::from_stage_probs(tx, sp);
        for (detected, p) in dist.iter() {
            let errors = sent.hamming(map_pair_to_bits(detected));
            total += errors as f64 / 3.0 * p;
        }
    }
    total / 8.0
}

pub fn conditional_bep(h: Complex64, cfg: &LinkConfig) -> f64 {
    conditional_bep_from(&stage_probs(h, cfg))
}

/// Averages `p_b(sqrt(u))` against the `Exp(1)` density of `u = |h|^2` on
/// `[0, RAYLEIGH_UPPER_LIMIT]`.
pub fn average_of<F: Fn(f64) -> f64>(p_b: F, opts: &QuadratureOptions) -> Result<Integral> {
    integrate(
        |u: f64| p_b(u.sqrt()) * (-u).exp(),
        0.0,
        RAYLEIGH_UPPER_LIMIT,
        opts,
    )
}

pub fn average_bep_with(cfg: &LinkConfig, opts: &QuadratureOptions) -> Result<Integral> {
    average_of(|gain| conditional_bep(Complex64::new(gain, 0.0), cfg), opts)
}

/// Rayleigh-averaged BEP with the default quadrature settings (absolute tolerance `1e-10`).
pub fn average_bep(cfg: &LinkConfig) -> Result<f64> {
    let integral = average_bep_with(cfg, &QuadratureOptions::default())?;
    if !integral.value.is_finite() {
        return Err(CoreError::Quadrature {
            estimate: integral.value,
            error: integral.error,
            tolerance: QuadratureOptions::default().abs_tol,
            subdivisions: integral.subdivisions,
        });
    }
    Ok(integral.value)
}
