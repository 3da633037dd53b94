//! Coarse grid search that freezes the shipped default imperfection set.
//!
//! Pinned by independent reasoning: PBS extinction 1e-3 (a 30 dB fiber
//! PBS), modulator phase noise 0.015 rad RMS, detector polarization
//! dependence 0.02, mean photon number 0.5 at 40 dB channel loss, 1 ns
//! dark-count gate, lead-fiber phase pi/2 (which nulls the extinction
//! leak in the check basis).  The one free knob left is the dark-count
//! rate; this script sweeps it and picks the value whose 15 h key-basis
//! mean QBER lands closest to 0.175% while the 5.5 h check-basis mean
//! stays below 0.15%.
//!
//! Run with `cargo run --release --example fit_imperfections`; the chosen
//! value ships as the `snspd.dark_hz` default and the full table is
//! recorded in the repository docs.

use ipognac_sim::config::ExperimentConfig;
use ipognac_sim::harness::run_experiment;

fn run_mean_qber(dark_hz: f64, basis: &str, duration_s: f64) -> f64 {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("snspd.dark_hz", format!("{dark_hz}")),
        ("receiver.basis", basis.to_string()),
        ("run.duration_s", format!("{duration_s}")),
        ("run.mode", "fast".to_string()),
    ] {
        cfg.set(k, &v).expect("fit keys are valid");
    }
    let out = run_experiment(&cfg).expect("fit configs validate");
    out.summary
        .mean_qber
        .expect("fit runs always collect sifted events")
}

fn main() {
    let key_target = 0.00175;
    let check_bound = 0.0015;
    println!("dark_hz  mean_Q_K     mean_Q_C     |Q_K - 0.175%|");
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for step in 0..=20 {
        let dark_hz = 3.0 * step as f64;
        let qk = run_mean_qber(dark_hz, "K", 15.0 * 3600.0);
        let qc = run_mean_qber(dark_hz, "C", 5.5 * 3600.0);
        let miss = (qk - key_target).abs();
        let feasible = qc < check_bound;
        println!(
            "{dark_hz:7.1}  {:.6e}  {:.6e}  {:.3e}{}",
            qk,
            qc,
            miss,
            if feasible { "" } else { "  (check basis out of bound)" }
        );
        if feasible && best.map(|(_, _, _, m)| miss < m).unwrap_or(true) {
            best = Some((dark_hz, qk, qc, miss));
        }
    }
    match best {
        Some((dark_hz, qk, qc, _)) => {
            println!();
            println!("chosen: snspd.dark_hz = {dark_hz}");
            println!("  mean Q_K over 15 h   = {qk:.6e} (target 1.75e-3, band [1e-3, 2.5e-3])");
            println!("  mean Q_C over 5.5 h  = {qc:.6e} (bound 1.5e-3)");
        }
        None => println!("no feasible dark-count rate found"),
    }
}
