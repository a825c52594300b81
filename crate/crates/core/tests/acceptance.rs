//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any fail.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use pdn_loop::compensator::{lead_corner, parallel_resistance, rcomp_for_f0};
use pdn_loop::emit::{render, Artifact, Format};
use pdn_loop::injection::measure_loop_gain;
use pdn_loop::measured::parse_measured;
use pdn_loop::pdn::{CapBank, CapBranch};
use pdn_loop::stability::{self, log_grid, margins_batch, margins_of, sweep, Band, Verdict};
use pdn_loop::transient::simulate_step;
use pdn_loop::{Error, Execution, TransferFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
    TransferFunction::from_coeffs(num, den).unwrap()
}

fn resistor_arithmetic() -> Outcome {
    let r = rcomp_for_f0(100.0, 4.7e-6, 2000.0).map_err(|e| e.to_string())?;
    let boundary = rcomp_for_f0(100.0, 4.7e-6, 338.63);
    check(
        (r - 20.3824).abs() <= 0.01 && matches!(boundary, Err(Error::InfeasibleCorner { .. })),
        format!("R_comp(100, 4.7u, 2k) = {r:.4} ohm; 338.63 Hz -> {:?}", boundary.map_err(|e| e.to_string())),
    )
}

fn analytic_margins() -> Outcome {
    let band = Band::new(1e-3, 100.0, 200).unwrap();
    let cubic = margins_of(&tf(&[8.0], &[1.0, 3.0, 3.0, 1.0]), &band).map_err(|e| e.to_string())?;
    let f_gm = cubic.gm_at_hz.unwrap_or(f64::NAN);
    let f_want = 3f64.sqrt() / (2.0 * PI);
    let second = margins_of(&tf(&[1.0], &[0.0, 1.0, 1.0]), &band).map_err(|e| e.to_string())?;
    check(
        cubic.gain_margin_db.abs() <= 0.05
            && (f_gm / f_want - 1.0).abs() <= 0.005
            && (second.phase_margin_deg - 51.83).abs() <= 0.2,
        format!(
            "8/(s+1)^3: GM {:.4} dB at {f_gm:.5} Hz; 1/(s(s+1)): PM {:.3} deg",
            cubic.gain_margin_db, second.phase_margin_deg
        ),
    )
}

fn fixture_reproduction() -> Outcome {
    let c = common::fixture();
    let m = c.loop_model().map_err(|e| e.to_string())?;
    let u = margins_of(&m.loop_gain().unwrap(), &c.sweep).map_err(|e| e.to_string())?;
    let mc = m.with_lead(Some(&common::reference_lead())).unwrap();
    let k = margins_of(&mc.loop_gain().unwrap(), &c.sweep).map_err(|e| e.to_string())?;
    let fc = u.pm_at_hz.unwrap_or(f64::NAN);
    let fp = u.gm_at_hz.unwrap_or(f64::NAN);
    let fpk = k.phase_crossover_hz().into_iter().fold(f64::INFINITY, f64::min);
    check(
        (fc / 5040.0 - 1.0).abs() <= 0.10
            && (u.phase_margin_deg - 13.0).abs() <= 5.0
            && (fp / 6050.0 - 1.0).abs() <= 0.10
            && (u.gain_margin_db - 3.2).abs() <= 1.0
            && k.gain_margin_db >= 15.0
            && k.phase_margin_deg >= 45.0
            && fpk > 12e3,
        format!(
            "uncompensated {fc:.0} Hz / PM {:.2} deg / {fp:.0} Hz / GM {:.2} dB; \
             compensated GM {:.2} dB, PM {:.2} deg, phase crossover {fpk:.0} Hz",
            u.phase_margin_deg, u.gain_margin_db, k.gain_margin_db, k.phase_margin_deg
        ),
    )
}

fn transient_before_after() -> Outcome {
    let c = common::fixture();
    let step = c.step.unwrap();
    let m = c.loop_model().unwrap();
    let u_report = margins_of(&m.loop_gain().unwrap(), &c.sweep).map_err(|e| e.to_string())?;
    let f_pc = u_report.gm_at_hz.unwrap_or(f64::NAN);
    let zu = m.closed_loop_output_impedance().unwrap();
    let zc = m
        .with_lead(Some(&common::reference_lead()))
        .unwrap()
        .closed_loop_output_impedance()
        .unwrap();
    let u = simulate_step(&zu, &step).map_err(|e| e.to_string())?.metrics;
    let k = simulate_step(&zc, &step).map_err(|e| e.to_string())?.metrics;
    let want_ss = zc.dc_value().unwrap() * step.delta_amps();
    let ss_err = (k.steady_state_droop_v - want_ss).abs() / want_ss.abs();
    let peak = k.peak_droop_v.abs();
    check(
        u.crossings >= 3
            && (u.ringing_freq_hz / f_pc - 1.0).abs() <= 0.25
            && k.crossings < 3
            && ss_err <= 0.005
            && (0.030..=0.120).contains(&peak),
        format!(
            "uncompensated: {} crossings, ringing {:.0} Hz vs phase crossover {f_pc:.0} Hz; \
             compensated: {} crossings, steady {:.2} mV (Zcl(0)*dI {:.2} mV), peak {:.2} mV",
            u.crossings,
            u.ringing_freq_hz,
            k.crossings,
            k.steady_state_droop_v * 1e3,
            want_ss * 1e3,
            peak * 1e3
        ),
    )
}

fn injection_oracle() -> Outcome {
    let c = common::fixture();
    let freqs = log_grid(10.0, 1e7, 100.0 / 6.0);
    let freqs = &freqs[..100];
    let mut worst = 0.0f64;
    let mut identical = true;
    for lead in [None, Some(common::reference_lead())] {
        let m = c.loop_model().unwrap().with_lead(lead.as_ref()).unwrap();
        let t = m.loop_gain().unwrap();
        let small = measure_loop_gain(&m, freqs, 1e-3).map_err(|e| e.to_string())?;
        let big = measure_loop_gain(&m, freqs, 1.0).map_err(|e| e.to_string())?;
        identical &= small.response == big.response;
        for (f, v) in freqs.iter().zip(small.response.values()) {
            let want: Complex64 = t.evaluate(*f).unwrap();
            worst = worst.max((v - want).norm() / want.norm());
        }
    }
    check(
        freqs.len() == 100 && worst < 1e-9 && identical,
        format!("100 frequencies, max relative deviation {worst:.2e}, 1 mV vs 1 V bit-identical: {identical}"),
    )
}

fn margin_pole_correspondence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let plants: Vec<_> = (0..500).map(|_| common::family_member(&mut rng)).collect();
    let loops: Vec<TransferFunction> = plants
        .iter()
        .map(|p| p.loop_model().and_then(|m| m.loop_gain()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let band = common::fixture().sweep;
    let reports = margins_batch(&loops, &band, Execution::default());
    let (mut stable, mut unstable, mut marginal, mut errors, mut bad) = (0, 0, 0, 0, 0);
    for r in &reports {
        match r {
            Err(_) => errors += 1,
            Ok(r) => match r.verdict() {
                Verdict::Marginal => marginal += 1,
                v => {
                    let by_margin = v == Verdict::Stable;
                    if by_margin {
                        stable += 1
                    } else {
                        unstable += 1
                    }
                    if Some(by_margin) != r.pole_stable {
                        bad += 1;
                    }
                }
            },
        }
    }
    check(
        errors == 0 && bad == 0 && stable + unstable + marginal == 500,
        format!(
            "500 plants: {stable} stable, {unstable} unstable, {marginal} marginal, {errors} errors, {bad} counterexamples"
        ),
    )
}

fn monotone_destabilisation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut plants = vec![common::fixture()];
    plants.extend((0..50).map(|_| common::tolerance_member(&mut rng, 1.25)));
    let caps = log_grid(100e-6, 10e-3, 20.0);
    let mut violations = 0;
    let mut checked = 0;
    for base in &plants {
        let mut prev = f64::INFINITY;
        for &cap in &caps {
            let mut p = base.clone();
            p.bank = Some(CapBank::single(CapBranch::ideal(cap).unwrap(), 1).unwrap());
            let t = p.loop_model().and_then(|m| m.loop_gain()).map_err(|e| e.to_string())?;
            let pm = stability::margins(&sweep(&t, &p.sweep).map_err(|e| e.to_string())?).phase_margin_deg;
            if pm > prev {
                violations += 1;
            }
            prev = pm;
            checked += 1;
        }
    }
    check(
        violations == 0,
        format!("{} plants x {} capacitances ({checked} points), {violations} increases", plants.len(), caps.len()),
    )
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r_int = (rng.gen_range(1f64.ln()..1e4f64.ln())).exp();
        let c = (rng.gen_range(1e-9f64.ln()..1e-3f64.ln())).exp();
        let boundary = lead_corner(r_int, c).unwrap();
        let f0 = boundary * (1.0 + 10f64.powf(rng.gen_range(-3.0..4.0)));
        let r = rcomp_for_f0(r_int, c, f0).map_err(|e| e.to_string())?;
        let back = lead_corner(parallel_resistance(r, r_int), c).unwrap();
        worst = worst.max((back / f0 - 1.0).abs());
    }
    let t = tf(&[1.0], &[0.0, 1.0, 1.0]);
    let b = sweep(&t, &Band::new(1e-3, 100.0, 200).unwrap()).unwrap();
    let text = render(&Artifact::Bode(&b), Format::Csv).map_err(|e| e.to_string())?;
    let a = stability::margins(&b);
    let back = parse_measured(&text).and_then(|m| m.margins()).map_err(|e| e.to_string())?;
    let dgm = (a.gain_margin_db - back.gain_margin_db).abs();
    let dgm = if dgm.is_nan() { 0.0 } else { dgm };
    let dpm = (a.phase_margin_deg - back.phase_margin_deg).abs();
    check(
        worst <= 1e-9 && dgm <= 0.01 && dpm <= 0.05,
        format!("corner/resistor worst relative error {worst:.2e} over 1000 triples; CSV round trip dGM {dgm:.2e} dB, dPM {dpm:.2e} deg"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("lead resistor arithmetic", resistor_arithmetic),
        ("analytic margin oracles", analytic_margins),
        ("calibrated fixture reproduction", fixture_reproduction),
        ("transient before/after", transient_before_after),
        ("injection oracle", injection_oracle),
        ("margin/pole correspondence", margin_pole_correspondence),
        ("monotone destabilisation", monotone_destabilisation),
        ("round trips", round_trips),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} {name}: PASS ({secs:.2}s) {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.2}s) {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
