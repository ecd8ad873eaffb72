//! Cross-module oracle checks: the closed-form engines against brute-force
//! amplitude enumeration, and the chain constructions against their printed
//! closed forms, over phase grids.

use tandem::pathspace::{channel_distribution, subensemble_joint, OutcomePorts, Sign, Subensemble};
use tandem::predict::{
    ms_joint, qm_correlators, qm_joint, t2_amplitude_rule, t3_chain, PhaseGrid, Timing,
};

const EPS: f64 = 1e-12;

#[test]
fn closed_form_matches_enumeration_on_a_grid() {
    for phases in PhaseGrid::new(12).points() {
        let table = qm_joint(&phases);
        for ports in OutcomePorts::all() {
            let enumerated = subensemble_joint(Subensemble::Long, ports, &phases).unwrap();
            assert!(
                (table.joint(ports.sigma, ports.omega) - enumerated).abs() < EPS,
                "mismatch at {phases:?} {ports:?}"
            );
        }
    }
}

#[test]
fn both_interfering_subensembles_share_the_joint_form() {
    for phases in PhaseGrid::new(8).points() {
        for ports in OutcomePorts::all() {
            let long = subensemble_joint(Subensemble::Long, ports, &phases).unwrap();
            let short = subensemble_joint(Subensemble::Short, ports, &phases).unwrap();
            assert!((long - short).abs() < EPS);
        }
    }
}

#[test]
fn correlator_closed_forms_match_table_ratios_on_a_grid() {
    for phases in PhaseGrid::new(10).points() {
        let closed = qm_correlators(&phases);
        let ratio = qm_joint(&phases).correlators();
        assert!((closed.e_sigma_omega - ratio.e_sigma_omega).abs() < EPS);
        assert!((closed.e_sigma - ratio.e_sigma).abs() < EPS);
        assert!((closed.e_omega - ratio.e_omega).abs() < EPS);
    }
}

#[test]
fn t1_chain_reproduces_qm_on_a_grid() {
    for phases in PhaseGrid::new(10).points() {
        let ms = ms_joint(Timing::T1, &phases);
        let qm = qm_joint(&phases);
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                assert!((ms.joint(sigma, omega) - qm.joint(sigma, omega)).abs() < EPS);
            }
        }
    }
}

#[test]
fn t2_and_t3_alternate_routes_agree_on_a_grid() {
    for phases in PhaseGrid::new(8).points() {
        let t2 = ms_joint(Timing::T2, &phases);
        let t3 = ms_joint(Timing::T3, &phases);
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                assert!(
                    (t2.joint(sigma, omega) - t2_amplitude_rule(sigma, omega, &phases)).abs() < EPS
                );
                assert!((t3.joint(sigma, omega) - t3_chain(sigma, omega, &phases)).abs() < EPS);
            }
        }
    }
}

#[test]
fn every_engine_conserves_the_subpopulation_weight() {
    for phases in PhaseGrid::new(8).points() {
        assert!((qm_joint(&phases).total() - 3.0 / 16.0).abs() < EPS);
        for timing in Timing::ALL {
            assert!((ms_joint(timing, &phases).total() - 3.0 / 16.0).abs() < EPS);
        }
    }
}

#[test]
fn channel_measure_stays_normalized_and_nonnegative() {
    for phases in PhaseGrid::new(8).points() {
        let channels = channel_distribution(&phases);
        let total: f64 = channels.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < EPS);
        for (channel, p) in channels {
            assert!(
                p > -EPS,
                "negative weight {p} for {channel:?} at {phases:?}"
            );
        }
    }
}
