//! Browser bindings: three interactive views over the core engines.
//!
//! Every export returns a JSON string (an `{"error": ...}` envelope on
//! failure) so the page needs no generated TypeScript and no framework.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use tandem::montecarlo::{
    estimate_correlators, histogram_time_delays, sample_events, select_window, EventRecord,
    RunConfig,
};
use tandem::pathspace::{ArmLengths, PhaseSettings, Sign};
use tandem::predict::{
    ms_correlators, ms_joint, qm_correlators, qm_joint, Correlators, PredictionTable, Theory,
    Timing,
};
use tandem::relativity::SetupGeometry;

#[wasm_bindgen]
pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn parse_timing(timing: &str) -> Option<Timing> {
    match timing {
        "t1" => Some(Timing::T1),
        "t2" => Some(Timing::T2),
        "t3" => Some(Timing::T3),
        _ => None,
    }
}

#[derive(Serialize)]
struct TableView {
    label: String,
    timing: Option<String>,
    joint: [[f64; 2]; 2],
    marginal: [f64; 2],
    correlators: CorrelatorView,
    valid: bool,
    negatives: Vec<String>,
}

#[derive(Serialize)]
struct CorrelatorView {
    e_sigma_omega: f64,
    e_sigma: f64,
    e_omega: f64,
}

impl From<Correlators> for CorrelatorView {
    fn from(c: Correlators) -> Self {
        Self {
            e_sigma_omega: c.e_sigma_omega,
            e_sigma: c.e_sigma,
            e_omega: c.e_omega,
        }
    }
}

fn table_view(label: &str, table: &PredictionTable, correlators: Correlators) -> TableView {
    let mut joint = [[0.0; 2]; 2];
    let mut marginal = [0.0; 2];
    for sigma in Sign::BOTH {
        for omega in Sign::BOTH {
            joint[sigma.index()][omega.index()] = table.joint(sigma, omega);
        }
        marginal[sigma.index()] = table.marginal_sigma(sigma);
    }
    TableView {
        label: label.to_string(),
        timing: table.timing.map(|t| t.to_string()),
        joint,
        marginal,
        correlators: correlators.into(),
        valid: table.validity.valid,
        negatives: table
            .validity
            .negative_entries
            .iter()
            .map(|e| format!("joint({}1,{}1) = {:.6}", e.sigma, e.omega, e.value))
            .collect(),
    }
}

/// Joint tables and correlators of every engine at one phase setting.
#[wasm_bindgen]
pub fn predict_tables(alpha: f64, beta: f64, gamma: f64) -> String {
    let phases = PhaseSettings::new(alpha, beta, gamma);
    let mut engines = vec![table_view(
        "QM",
        &qm_joint(&phases),
        qm_correlators(&phases),
    )];
    for timing in Timing::ALL {
        engines.push(table_view(
            &format!("MS {timing}"),
            &ms_joint(timing, &phases),
            ms_correlators(timing, &phases),
        ));
    }
    #[derive(Serialize)]
    struct Out {
        alpha: f64,
        beta: f64,
        gamma: f64,
        engines: Vec<TableView>,
    }
    serde_json::to_string(&Out {
        alpha: phases.alpha(),
        beta: phases.beta(),
        gamma: phases.gamma(),
        engines,
    })
    .unwrap_or_else(|e| error_json(&e.to_string()))
}

/// Sweep one phase over [0, 2pi] and tabulate a correlator for QM and MS.
#[wasm_bindgen]
pub fn scan_correlators(
    parameter: &str,
    quantity: &str,
    timing: &str,
    alpha: f64,
    beta: f64,
    gamma: f64,
    steps: u32,
) -> String {
    let Some(timing) = parse_timing(timing) else {
        return error_json("timing must be t1, t2 or t3");
    };
    if !(2..=4096).contains(&steps) {
        return error_json("steps must lie in 2..=4096");
    }
    let pick = |c: &Correlators| match quantity {
        "e_sigma_omega" => Some(c.e_sigma_omega),
        "e_sigma" => Some(c.e_sigma),
        "e_omega" => Some(c.e_omega),
        _ => None,
    };
    if pick(&qm_correlators(&PhaseSettings::zero())).is_none() {
        return error_json("quantity must be e_sigma_omega, e_sigma or e_omega");
    }

    let tau = std::f64::consts::TAU;
    let mut values = Vec::new();
    let mut qm = Vec::new();
    let mut ms = Vec::new();
    let mut ms_valid = Vec::new();
    for k in 0..steps {
        let value = tau * k as f64 / (steps - 1) as f64;
        let (a, b, g) = match parameter {
            "alpha" => (value, beta, gamma),
            "beta" => (alpha, value, gamma),
            "gamma" => (alpha, beta, value),
            _ => return error_json("parameter must be alpha, beta or gamma"),
        };
        let phases = PhaseSettings::new(a, b, g);
        values.push(value);
        qm.push(pick(&qm_correlators(&phases)).unwrap());
        ms.push(pick(&ms_correlators(timing, &phases)).unwrap());
        ms_valid.push(ms_joint(timing, &phases).validity.valid);
    }
    #[derive(Serialize)]
    struct Out {
        parameter: String,
        quantity: String,
        timing: String,
        values: Vec<f64>,
        qm: Vec<f64>,
        ms: Vec<f64>,
        ms_valid: Vec<bool>,
    }
    serde_json::to_string(&Out {
        parameter: parameter.to_string(),
        quantity: quantity.to_string(),
        timing: timing.to_string(),
        values,
        qm,
        ms,
        ms_valid,
    })
    .unwrap_or_else(|e| error_json(&e.to_string()))
}

/// Seeded Monte Carlo run: time-delay spectrum plus windowed estimates.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_spectrum(
    theory: &str,
    timing: &str,
    alpha: f64,
    beta: f64,
    gamma: f64,
    trials: u32,
    seed: u32,
    jitter_ps: f64,
) -> String {
    let theory = match theory {
        "qm" => Theory::Qm,
        "ms" => Theory::Ms,
        _ => return error_json("theory must be qm or ms"),
    };
    let timing = match theory {
        Theory::Qm => None,
        Theory::Ms => match parse_timing(timing) {
            Some(t) => Some(t),
            None => return error_json("MS runs need timing t1, t2 or t3"),
        },
    };
    if !(1..=2_000_000).contains(&trials) {
        return error_json("trials must lie in 1..=2000000");
    }
    if !(0.0..=500.0).contains(&jitter_ps) {
        return error_json("jitter must lie in 0..=500 ps");
    }
    let arms = match ArmLengths::new(2.0, 1.7, 0.5) {
        Ok(arms) => arms,
        Err(e) => return error_json(&e.to_string()),
    };
    let geometry = match SetupGeometry::at_rest(arms, -5.0, 5.0, 6.0) {
        Ok(g) => g,
        Err(e) => return error_json(&e.to_string()),
    };
    let config = RunConfig {
        theory,
        timing,
        phases: PhaseSettings::new(alpha, beta, gamma),
        geometry,
        trials: trials as u64,
        seed: seed as u64,
        jitter_sigma_s: jitter_ps * 1e-12,
        window_center_s: 0.0,
        window_width_s: 4e-10,
    };
    let events: Vec<EventRecord> = match sample_events(&config) {
        Ok(stream) => stream.collect(),
        Err(e) => return error_json(&e.to_string()),
    };
    let spectrum = match histogram_time_delays(&events, 0.05e-9, arms.peak_separation_s()) {
        Ok(s) => s,
        Err(e) => return error_json(&e.to_string()),
    };
    let selected: Vec<&EventRecord> =
        select_window(&events, config.window_center_s, config.window_width_s).collect();
    let report = match estimate_correlators(selected) {
        Ok(r) => r,
        Err(e) => return error_json(&e.to_string()),
    };
    let expected = match theory {
        Theory::Qm => qm_correlators(&config.phases),
        Theory::Ms => ms_correlators(timing.unwrap(), &config.phases),
    };

    #[derive(Serialize)]
    struct Bin {
        delay_ns: f64,
        count: u64,
    }
    #[derive(Serialize)]
    struct EstimateView {
        value: f64,
        std_error: f64,
        expected: f64,
    }
    #[derive(Serialize)]
    struct Out {
        trials: u64,
        coincidences: u64,
        lost: u64,
        bins: Vec<Bin>,
        peak_ns: Vec<f64>,
        selected: u64,
        e_sigma_omega: EstimateView,
        e_sigma: EstimateView,
        e_omega: EstimateView,
    }
    let coincidences = spectrum.total_coincidences;
    serde_json::to_string(&Out {
        trials: config.trials,
        coincidences,
        lost: config.trials - coincidences,
        bins: spectrum
            .bins()
            .map(|(center, count)| Bin {
                delay_ns: center * 1e9,
                count,
            })
            .collect(),
        peak_ns: spectrum.peaks.iter().map(|p| p.center_s * 1e9).collect(),
        selected: report.selected_events,
        e_sigma_omega: EstimateView {
            value: report.e_sigma_omega.value,
            std_error: report.e_sigma_omega.std_error,
            expected: expected.e_sigma_omega,
        },
        e_sigma: EstimateView {
            value: report.e_sigma.value,
            std_error: report.e_sigma.std_error,
            expected: expected.e_sigma,
        },
        e_omega: EstimateView {
            value: report.e_omega.value,
            std_error: report.e_omega.std_error,
            expected: expected.e_omega,
        },
    })
    .unwrap_or_else(|e| error_json(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_tables_serializes_all_engines() {
        let json = predict_tables(0.0, 0.0, 0.0);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["engines"].as_array().unwrap().len(), 4);
        assert_eq!(value["engines"][0]["label"], "QM");
        // T2 at zero phases is flagged invalid.
        assert_eq!(value["engines"][2]["valid"], false);
    }

    #[test]
    fn scan_rejects_bad_arguments() {
        assert!(scan_correlators("delta", "e_sigma", "t2", 0.0, 0.0, 0.0, 10).contains("error"));
        assert!(scan_correlators("beta", "e_sigma", "t9", 0.0, 0.0, 0.0, 10).contains("error"));
    }

    #[test]
    fn simulate_round_trips_small_run() {
        let json = simulate_spectrum("qm", "", 0.0, 0.0, 0.0, 20_000, 7, 0.0);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value.get("error").is_none(), "{json}");
        assert_eq!(value["peak_ns"].as_array().unwrap().len(), 4);
        let e = value["e_sigma_omega"]["value"].as_f64().unwrap();
        assert!((e - 2.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn ms_invalid_domain_reports_error_envelope() {
        let json = simulate_spectrum("ms", "t2", 0.0, 0.0, 0.0, 1000, 7, 0.0);
        assert!(json.contains("error"), "{json}");
    }
}
