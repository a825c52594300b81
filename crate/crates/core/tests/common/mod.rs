#![allow(dead_code)]

use pdn_loop::config::{load_config, AnalysisConfig};
use pdn_loop::loop_model::LeadNetwork;
use pdn_loop::pdn::{BankEntry, CapBank, CapBranch};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/internal_supply.json")
}

pub fn fixture() -> AnalysisConfig {
    load_config(fixture_path()).expect("fixture loads")
}

/// 4.7 uF with the 20 ohm snapped resistor.
pub fn reference_lead() -> LeadNetwork {
    LeadNetwork {
        r_comp: 20.0,
        c_comp: 4.7e-6,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Lead-free plant with every template and sense parameter within
/// `1/spread ..= spread` of the fixture value (log-uniform).
pub fn tolerance_member(rng: &mut ChaCha8Rng, spread: f64) -> AnalysisConfig {
    let mut c = fixture();
    let mut k = || log_uniform(rng, 1.0 / spread, spread);
    let t = &mut c.template;
    t.dc_gain *= k();
    t.error_amp_pole_hz *= k();
    t.lc_corner_hz *= k();
    t.lc_quality *= k();
    t.filter_capacitance *= k();
    t.output_resistance *= k();
    let d = c.sense.distribution.as_mut().unwrap();
    d.resistance *= k();
    d.inductance *= k();
    c.sense.load_r *= k();
    c.sense.lead = None;
    c
}

/// A random member of the broad fixture family: template, bank and sense
/// parameters scaled over wide ranges, half of them with a lead network.
/// Wide enough that both stable and unstable loops are common.
pub fn family_member(rng: &mut ChaCha8Rng) -> AnalysisConfig {
    let mut c = fixture();
    let t = &mut c.template;
    t.dc_gain *= log_uniform(rng, 0.2, 5.0);
    t.error_amp_pole_hz *= log_uniform(rng, 0.5, 2.0);
    t.lc_corner_hz *= log_uniform(rng, 0.5, 2.0);
    t.lc_quality = rng.gen_range(0.25..1.0);
    t.output_resistance *= log_uniform(rng, 0.5, 2.0);

    let base = c.bank.as_ref().unwrap().entries()[0].branch;
    let branch = CapBranch::new(
        base.capacitance * log_uniform(rng, 0.5, 2.0),
        base.esr * log_uniform(rng, 0.5, 2.0),
        base.esl * log_uniform(rng, 0.5, 2.0),
    )
    .unwrap();
    c.bank = Some(CapBank::new(vec![BankEntry { branch, count: rng.gen_range(1..=30) }]).unwrap());

    let d = c.sense.distribution.as_mut().unwrap();
    d.resistance *= log_uniform(rng, 0.5, 2.0);
    d.inductance *= log_uniform(rng, 0.5, 2.0);
    c.sense.load_r *= log_uniform(rng, 0.5, 2.0);
    if rng.gen_bool(0.5) {
        c.sense.lead = Some(LeadNetwork {
            r_comp: log_uniform(rng, 5.0, 100.0),
            c_comp: log_uniform(rng, 1e-6, 10e-6),
        });
    }
    c
}
