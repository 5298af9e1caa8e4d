//! Fast internal consistency checks, run by `tnoisemod selftest`.

use std::fmt::Write as _;

use tnoisemod::analysis::average_bep_with;
use tnoisemod::analysis::quadrature::QuadratureOptions;
use tnoisemod::detector::lrt_threshold_from_variances;
use tnoisemod::montecarlo::ternary_avg_energy_per_pair;
use tnoisemod::rng::substream;
use tnoisemod::{
    apply_channel, demodulate, lrt_threshold, map_bits_to_pair, map_pair_to_bits, modulate,
    pair_distribution, q_function, stage_probs, transition_kernel, BitTriplet, ChannelRealization,
    Complex64, LinkConfig, StatePair,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// `|h|` from 1e-4 to 1e2, log spaced, at a few phases.
fn channel_grid() -> Vec<Complex64> {
    let mut grid = Vec::new();
    for k in 0..=60 {
        let gain = 10f64.powf(-4.0 + 6.0 * k as f64 / 60.0);
        for phase in [0.0, 1.0, 2.5] {
            grid.push(Complex64::from_polar(gain, phase));
        }
    }
    grid
}

fn links() -> Vec<LinkConfig> {
    let mut out = Vec::new();
    for n in [100, 200, 400] {
        for mu in [0.57, 0.77, 1.0] {
            for delta in [0.0, 10.0, 20.0, 30.0] {
                out.push(LinkConfig::new(n, mu, 1.0, 10.0, delta).expect("valid link"));
            }
        }
    }
    out
}

pub fn run() -> Vec<Check> {
    let mut checks = Vec::new();

    let q0 = q_function(0.0);
    checks.push(check(
        "Q(0) = 1/2",
        (q0 - 0.5).abs() <= 1e-12,
        format!("Q(0) = {q0:.15}"),
    ));

    let symmetry = (0..=200)
        .map(|i| {
            let x = i as f64 * 0.05;
            (q_function(x) + q_function(-x) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    checks.push(check(
        "Q(x) + Q(-x) = 1",
        symmetry <= 1e-15,
        format!("max deviation {symmetry:.1e} on [0, 10]"),
    ));

    let q90 = q_function(1.2815515655);
    checks.push(check(
        "Q(1.2815515655) = 0.1",
        (q90 - 0.1).abs() <= 1e-9,
        format!("{q90:.12}"),
    ));

    let mut row_dev: f64 = 0.0;
    let mut mass_dev: f64 = 0.0;
    for cfg in links() {
        for h in channel_grid() {
            let kernel = transition_kernel(&stage_probs(h, &cfg));
            for row in kernel.rows() {
                row_dev = row_dev.max((row.iter().sum::<f64>() - 1.0).abs());
            }
            for tx in StatePair::ALL {
                mass_dev = mass_dev.max((pair_distribution(tx, h, &cfg).total() - 1.0).abs());
            }
        }
    }
    checks.push(check(
        "kernel rows sum to 1",
        row_dev < 1e-12,
        format!("max deviation {row_dev:.1e}"),
    ));
    checks.push(check(
        "pair distributions sum to 1",
        mass_dev < 1e-12,
        format!("max deviation {mass_dev:.1e}"),
    ));

    let round_trip = BitTriplet::ALL
        .iter()
        .all(|&b| map_pair_to_bits(map_bits_to_pair(b)) == b);
    checks.push(check(
        "mapping table is a bijection",
        round_trip,
        "8 triplets".into(),
    ));

    let loose = QuadratureOptions::default();
    let tight = QuadratureOptions {
        abs_tol: loose.abs_tol / 2.0,
        ..loose
    };
    let mut quad_dev: f64 = 0.0;
    let mut quad_err = None;
    for cfg in links() {
        match (
            average_bep_with(&cfg, &loose),
            average_bep_with(&cfg, &tight),
        ) {
            (Ok(a), Ok(b)) => quad_dev = quad_dev.max((a.value - b.value).abs()),
            (Err(e), _) | (_, Err(e)) => quad_err = Some(e.to_string()),
        }
    }
    checks.push(match quad_err {
        Some(e) => check("quadrature stable under tolerance halving", false, e),
        None => check(
            "quadrature stable under tolerance halving",
            quad_dev < 1e-8,
            format!("max |change| {quad_dev:.1e}"),
        ),
    });

    let cfg = LinkConfig::new(200, 1.0, 1.0, 10.0, 10.0).expect("valid link");
    let sigma_w2 = cfg.sigma_w2();
    let gap = lrt_threshold(ChannelRealization::real(1e-9), &cfg) - sigma_w2;
    let at_zero = lrt_threshold(ChannelRealization::real(0.0), &cfg);
    checks.push(check(
        "threshold continuous as |h| -> 0",
        gap.abs() < 1e-12 && at_zero == sigma_w2,
        format!("tau(1e-9) - sigma_w^2 = {gap:.1e}, tau(0) = {at_zero}"),
    ));

    let tau = lrt_threshold_from_variances(1.0, 10.0);
    let expected = 10f64.ln() * 10.0 / 9.0;
    checks.push(check(
        "threshold closed form",
        (tau - expected).abs() <= 1e-14,
        format!("tau(1, 10) = {tau:.15}"),
    ));

    // (6/8)(sigma_L^2 + sigma_H^2 + 2 mu^2) per unit of N.
    let energy = ternary_avg_energy_per_pair(&cfg.with_n(2).expect("valid link")) / 2.0;
    checks.push(check(
        "energy per interval",
        (energy - 9.75).abs() < 1e-12,
        format!("{energy} per unit N (expected 9.75)"),
    ));

    let clean = LinkConfig::new(1000, 2.0, 1.0, 10.0, 60.0).expect("valid link");
    let mut errors = 0;
    for (t, bits) in BitTriplet::ALL.iter().enumerate() {
        let mut rng = substream(0x5e1f, &[t as u64]);
        let h = ChannelRealization::new(Complex64::from_polar(1.0, 0.3 * t as f64));
        let tx = modulate(*bits, &clean, &mut rng);
        let rx = apply_channel(&tx, h, &clean, &mut rng);
        match demodulate(&rx, &clean) {
            Ok(d) if d.bits == *bits => {}
            _ => errors += 1,
        }
    }
    checks.push(check(
        "clean link round trip",
        errors == 0,
        format!("{errors} of 8 triplets wrong"),
    ));

    checks
}

/// Fixed-width pass/fail table.
pub fn render(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status}  {:width$}  {}", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let checks = run();
        let failures: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failures.is_empty(), "{failures:?}");
        assert!(render(&checks).ends_with(" checks, 0 failed\n"));
    }

    #[test]
    fn failures_are_reported() {
        let table = render(&[check("a", true, "x".into()), check("bb", false, "y".into())]);
        assert_eq!(table, "PASS  a   x\nFAIL  bb  y\n2 checks, 1 failed\n");
    }
}
