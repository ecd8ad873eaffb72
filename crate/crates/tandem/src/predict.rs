//! Closed-form prediction engines for both theories.
//!
//! Quantum mechanics superposes the amplitudes of each interfering
//! subensemble regardless of timing. Multisimultaneity instead builds the
//! joint statistics from a causal chain over the beam-splitter impacts:
//! a *before* impact picks its output port 50-50 independent of any phase,
//! while a *non-before* impact picks its port from the amplitude-ratio
//! conditional of its indistinguishability class. The resulting tables
//! depend on the timing class of the setup; quantum mechanics' never do.
//!
//! All joint tables refer to the windowed subpopulation `L` (total weight
//! 3/16), as do the correlation coefficients, which are normalized ratios
//! over that subpopulation.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pathspace::{self, Arm, ExitPort, OutcomePorts, PhaseSettings, Sign, Subensemble};
use crate::relativity::{ImpactLabel, SplitterId, TimingClass};
use crate::{Error, Result};

/// Which prediction engine produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theory {
    Qm,
    Ms,
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theory::Qm => "QM",
            Theory::Ms => "MS",
        })
    }
}

/// The three timing classes Multisimultaneity states outcome rules for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Timing {
    /// (b11, a21 a22): photon 1 decides first everywhere; reproduces QM.
    T1,
    /// (b11, b21 a22): both first impacts are before; only BS22 combines
    /// amplitudes, under a rule with no quantum-mechanical counterpart.
    T2,
    /// (a11\[21\], b21 a22): non-before impacts on both sides, all splitters
    /// at rest.
    T3,
}

impl Timing {
    pub const ALL: [Timing; 3] = [Timing::T1, Timing::T2, Timing::T3];

    /// The before/non-before tuple this timing denotes.
    pub fn label(self) -> &'static str {
        match self {
            Timing::T1 => "(b11, a21 a22)",
            Timing::T2 => "(b11, b21 a22)",
            Timing::T3 => "(a11[21], b21 a22)",
        }
    }

    /// Map a classified timing onto a supported class, if any.
    ///
    /// The a11\[22\] family and mixed before/non-before combinations carry no
    /// stated outcome rule and are rejected rather than guessed at.
    pub fn from_class(class: &TimingClass) -> Result<Timing> {
        use ImpactLabel::{Before, NonBefore};
        let timing = match (&class.bs11, &class.bs21, &class.bs22) {
            (
                Before,
                NonBefore {
                    reference: SplitterId::Bs11,
                },
                NonBefore {
                    reference: SplitterId::Bs11,
                },
            ) => Timing::T1,
            (
                Before,
                Before,
                NonBefore {
                    reference: SplitterId::Bs11,
                },
            ) => Timing::T2,
            (
                NonBefore {
                    reference: SplitterId::Bs21,
                },
                Before,
                NonBefore {
                    reference: SplitterId::Bs11,
                },
            ) => Timing::T3,
            _ => return Err(Error::UnsupportedTiming(class.to_string())),
        };
        Ok(timing)
    }
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A joint entry that fell below zero, with its location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeEntry {
    pub sigma: Sign,
    pub omega: Sign,
    pub value: f64,
}

/// Whether every joint entry is a genuine probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableValidity {
    pub valid: bool,
    pub negative_entries: Vec<NegativeEntry>,
}

/// Joint outcome probabilities over the windowed subpopulation `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub theory: Theory,
    pub timing: Option<Timing>,
    pub phases: PhaseSettings,
    joint: [[f64; 2]; 2],
    marginal_sigma: [f64; 2],
    pub validity: TableValidity,
}

/// Entries this far below zero are genuine negativity rather than rounding
/// noise from the closed-form evaluation.
const VALIDITY_EPS: f64 = 1e-12;

impl PredictionTable {
    fn new(
        theory: Theory,
        timing: Option<Timing>,
        phases: PhaseSettings,
        joint: [[f64; 2]; 2],
        marginal_sigma: [f64; 2],
    ) -> Self {
        let mut negative_entries = Vec::new();
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                let value = joint[sigma.index()][omega.index()];
                if value < -VALIDITY_EPS {
                    negative_entries.push(NegativeEntry {
                        sigma,
                        omega,
                        value,
                    });
                }
            }
        }
        let validity = TableValidity {
            valid: negative_entries.is_empty(),
            negative_entries,
        };
        Self {
            theory,
            timing,
            phases,
            joint,
            marginal_sigma,
            validity,
        }
    }

    /// P(sigma, omega) within subpopulation L.
    pub fn joint(&self, sigma: Sign, omega: Sign) -> f64 {
        self.joint[sigma.index()][omega.index()]
    }

    /// Selective marginal: photon 1 in D1(sigma), pair in subpopulation L,
    /// photon 2 anywhere.
    pub fn marginal_sigma(&self, sigma: Sign) -> f64 {
        self.marginal_sigma[sigma.index()]
    }

    /// Total subpopulation-L weight, 3/16 for every engine.
    pub fn total(&self) -> f64 {
        Sign::BOTH
            .iter()
            .flat_map(|&s| Sign::BOTH.map(|o| self.joint(s, o)))
            .sum()
    }

    /// Correlation coefficients from this table's joint entries (the ratio
    /// definitions). The closed-form engines agree with these; keeping the
    /// ratio route separate lets tests check that they do.
    pub fn correlators(&self) -> Correlators {
        let mut num_so = 0.0;
        let mut num_s = 0.0;
        let mut num_o = 0.0;
        let mut den = 0.0;
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                let p = self.joint(sigma, omega);
                num_so += sigma.value() * omega.value() * p;
                num_s += sigma.value() * p;
                num_o += omega.value() * p;
                den += p;
            }
        }
        Correlators {
            e_sigma_omega: num_so / den,
            e_sigma: num_s / den,
            e_omega: num_o / den,
        }
    }
}

/// Correlation coefficients over the windowed subpopulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlators {
    pub e_sigma_omega: f64,
    pub e_sigma: f64,
    pub e_omega: f64,
}

/// Quantum-mechanical joint probabilities for subpopulation L:
/// `(1/64)[3 + 2s cos(a+b) + 2sw cos(a+g) + 2w cos(g-b)]`.
pub fn qm_joint(phases: &PhaseSettings) -> PredictionTable {
    let (a, b, g) = (phases.alpha(), phases.beta(), phases.gamma());
    let mut joint = [[0.0; 2]; 2];
    let mut marginal = [0.0; 2];
    for sigma in Sign::BOTH {
        let s = sigma.value();
        for omega in Sign::BOTH {
            let w = omega.value();
            joint[sigma.index()][omega.index()] = (3.0
                + 2.0 * s * (a + b).cos()
                + 2.0 * s * w * (a + g).cos()
                + 2.0 * w * (g - b).cos())
                / 64.0;
        }
        marginal[sigma.index()] = (3.0 + 2.0 * s * (a + b).cos()) / 32.0;
    }
    PredictionTable::new(Theory::Qm, None, *phases, joint, marginal)
}

/// Quantum-mechanical correlation coefficients, closed forms.
pub fn qm_correlators(phases: &PhaseSettings) -> Correlators {
    let (a, b, g) = (phases.alpha(), phases.beta(), phases.gamma());
    Correlators {
        e_sigma_omega: 2.0 / 3.0 * (a + g).cos(),
        e_sigma: 2.0 / 3.0 * (a + b).cos(),
        e_omega: 2.0 / 3.0 * (g - b).cos(),
    }
}

/// Multisimultaneity joint probabilities for a supported timing class.
///
/// T1 is built from the causal chain, not aliased to the QM engine; it
/// nevertheless reproduces the QM table. T2 and T3 are the stated closed
/// forms. Entries below zero are reported through the validity flag rather
/// than clamped: exposing the pathological phase regions is the point.
pub fn ms_joint(timing: Timing, phases: &PhaseSettings) -> PredictionTable {
    match timing {
        Timing::T1 => t1_chain_table(phases),
        Timing::T2 => t2_table(phases),
        Timing::T3 => t3_table(phases),
    }
}

/// Multisimultaneity correlation coefficients, closed forms.
pub fn ms_correlators(timing: Timing, phases: &PhaseSettings) -> Correlators {
    let (a, b, g) = (phases.alpha(), phases.beta(), phases.gamma());
    match timing {
        Timing::T1 => ms_joint(Timing::T1, phases).correlators(),
        Timing::T2 => Correlators {
            e_sigma_omega: 2.0 / 3.0 * (a + g).cos(),
            e_sigma: 0.0,
            e_omega: 2.0 / 3.0 * (g - b).cos(),
        },
        Timing::T3 => Correlators {
            e_sigma_omega: 2.0 / 9.0 * ((a + g).cos() + 2.0 * (a + b).cos() * (g - b).cos()),
            e_sigma: 2.0 / 3.0 * (a + b).cos(),
            e_omega: 2.0 / 3.0 * (g - b).cos(),
        },
    }
}

/// Probability that photon 2's observable part leaves BS21 by the given port
/// in a non-before impact, given photon 1 already produced sigma at a before
/// impact. Amplitude-ratio over the matched prefixes (L,L) and (l,l):
/// `(1 +/- sigma cos(alpha+beta))/2`.
pub(crate) fn nonbefore_port_conditional(
    exit: ExitPort,
    sigma: Sign,
    phases: &PhaseSettings,
) -> f64 {
    let sum = |port: ExitPort| {
        (pathspace::truncated_amplitude(Arm::Long, Arm::Long, port, sigma, phases)
            + pathspace::truncated_amplitude(Arm::Short, Arm::Short, port, sigma, phases))
        .norm_sqr()
    };
    let s = sum(ExitPort::S);
    let r = sum(ExitPort::R);
    match exit {
        ExitPort::S => s / (s + r),
        ExitPort::R => r / (s + r),
    }
}

/// Conditional for omega at a non-before BS22 impact when the full
/// three-path subensemble is indistinguishable: the amplitude-ratio of the
/// coherent sums, normalized over omega.
pub(crate) fn full_coherence_omega_conditional(
    subensemble: Subensemble,
    sigma: Sign,
    omega: Sign,
    phases: &PhaseSettings,
) -> f64 {
    let joint = |o: Sign| {
        pathspace::subensemble_joint(subensemble, OutcomePorts::new(sigma, o), phases)
            .expect("interfering subensemble")
    };
    joint(omega) / (joint(Sign::Plus) + joint(Sign::Minus))
}

/// Conditional for omega at BS22 under the T2 rule, `P(omega | sigma)` over
/// the windowed subpopulation: `(1/6)[3 + 2sw cos(a+g) + 2w cos(g-b)]`.
/// Shared by both interfering subensembles. Can leave [0, 1] where the T2
/// table goes negative; samplers must check.
pub(crate) fn t2_omega_conditional(sigma: Sign, omega: Sign, phases: &PhaseSettings) -> f64 {
    let table = t2_table(phases);
    table.joint(sigma, omega) / table.marginal_sigma(sigma)
}

/// Sigma conditional of a non-before BS11 impact given photon 2's realized
/// BS21 port, for the matched pairs: amplitude-ratio over the port's
/// truncated sums, normalized over sigma. Port `s` gives
/// `(1 + sigma cos(a+b))/2`, port `r` the complementary fringe.
pub(crate) fn sigma_conditional_given_port(
    exit: ExitPort,
    sigma: Sign,
    phases: &PhaseSettings,
) -> f64 {
    let sum = |s: Sign| {
        (pathspace::truncated_amplitude(Arm::Long, Arm::Long, exit, s, phases)
            + pathspace::truncated_amplitude(Arm::Short, Arm::Short, exit, s, phases))
        .norm_sqr()
    };
    sum(sigma) / (sum(Sign::Plus) + sum(Sign::Minus))
}

/// Timing (b11, a21 a22) via the causal chain.
///
/// Pair priors are 1/4 per first-arm combination. The before impact at BS11
/// is 50-50. At BS21 the matched pairs undergo a non-before impact with the
/// amplitude-ratio port conditional; the mixed pair (l,L) is distinguishable
/// there and splits 50-50. The second-interferometer arm is a plain 50-50
/// passage, and omega follows the full-coherence conditional at BS22.
fn t1_chain_table(phases: &PhaseSettings) -> PredictionTable {
    let mut joint = [[0.0; 2]; 2];
    let mut marginal = [0.0; 2];
    for sigma in Sign::BOTH {
        // sigma and subpopulation L: two matched pairs need the long second
        // arm, the mixed pair (l,L) the short one, each with prob 1/2.
        let port_s = nonbefore_port_conditional(ExitPort::S, sigma, phases);
        let matched = 2.0 * (0.25 * 0.5 * port_s * 0.5);
        let mixed = 0.25 * 0.5 * 0.5 * 0.5;
        let weight = matched + mixed;
        marginal[sigma.index()] = weight;
        for omega in Sign::BOTH {
            joint[sigma.index()][omega.index()] =
                weight * full_coherence_omega_conditional(Subensemble::Long, sigma, omega, phases);
        }
    }
    PredictionTable::new(Theory::Ms, Some(Timing::T1), *phases, joint, marginal)
}

/// Timing (b11, b21 a22) closed form:
/// `(1/64)[3 + 2sw cos(a+g) + 2w cos(g-b)]`, marginal 3/32 for all phases.
fn t2_table(phases: &PhaseSettings) -> PredictionTable {
    let (a, b, g) = (phases.alpha(), phases.beta(), phases.gamma());
    let mut joint = [[0.0; 2]; 2];
    for sigma in Sign::BOTH {
        let s = sigma.value();
        for omega in Sign::BOTH {
            let w = omega.value();
            joint[sigma.index()][omega.index()] =
                (3.0 + 2.0 * s * w * (a + g).cos() + 2.0 * w * (g - b).cos()) / 64.0;
        }
    }
    PredictionTable::new(
        Theory::Ms,
        Some(Timing::T2),
        *phases,
        joint,
        [3.0 / 32.0; 2],
    )
}

/// The BS22 amplitude rule behind the T2 closed form: the path via (L,LsL)
/// keeps coherence with (l,Lsl) and (l,Lsl) with (l,lsL), but the pair
/// differing in both first arms has lost theirs. Used as a cross-check for
/// the closed form.
pub fn t2_amplitude_rule(sigma: Sign, omega: Sign, phases: &PhaseSettings) -> f64 {
    let ports = OutcomePorts::new(sigma, omega);
    let amp = |p1: Arm, q1: Arm, q2: Arm| {
        pathspace::joint_amplitude(&pathspace::PathPair::detected(p1, q1, q2), ports, phases)
            .expect("detected path")
    };
    let lsl_full = amp(Arm::Long, Arm::Long, Arm::Long); // (L,LsL)
    let short_first = amp(Arm::Short, Arm::Long, Arm::Short); // (l,Lsl)
    let short_last = amp(Arm::Short, Arm::Short, Arm::Long); // (l,lsL)
    lsl_full.norm_sqr()
        + (short_first + short_last).norm_sqr()
        + 2.0 * (lsl_full * short_first.conj()).re
}

/// Timing (a11[21], b21 a22) closed form:
/// `(1/192)[9 + 6s cos(a+b) + 2sw cos(a+g) + 6w cos(g-b) + 4sw cos(a+b)cos(g-b)]`.
fn t3_table(phases: &PhaseSettings) -> PredictionTable {
    let (a, b, g) = (phases.alpha(), phases.beta(), phases.gamma());
    let c_ab = (a + b).cos();
    let c_ag = (a + g).cos();
    let c_gb = (g - b).cos();
    let mut joint = [[0.0; 2]; 2];
    let mut marginal = [0.0; 2];
    for sigma in Sign::BOTH {
        let s = sigma.value();
        for omega in Sign::BOTH {
            let w = omega.value();
            joint[sigma.index()][omega.index()] = (9.0
                + 6.0 * s * c_ab
                + 2.0 * s * w * c_ag
                + 6.0 * w * c_gb
                + 4.0 * s * w * c_ab * c_gb)
                / 192.0;
        }
        marginal[sigma.index()] = (3.0 + 2.0 * s * c_ab) / 32.0;
    }
    PredictionTable::new(Theory::Ms, Some(Timing::T3), *phases, joint, marginal)
}

/// The T3 causal chain, used as a cross-check for the closed form.
///
/// For matched pairs the port photon 1 takes at BS11 conditions on photon
/// 2's BS21 port, while photon 2's omega conditions on the counterfactual
/// before-value sigma' photon 1 would have produced, summed 50-50. The
/// mixed pair is distinguishable at BS11 and behaves as a before impact.
pub fn t3_chain(sigma: Sign, omega: Sign, phases: &PhaseSettings) -> f64 {
    let omega_cond = |s: Sign| {
        let table = t2_table(phases);
        table.joint(s, omega) / table.marginal_sigma(s)
    };
    let sigma_cond = nonbefore_port_conditional(ExitPort::S, sigma, phases);

    // Matched pairs (L,L) and (l,l): prior 1/4 each, port s and the
    // subpopulation-L arm each 1/2 x 1/2, counterfactual sigma' summed.
    let matched: f64 = 2.0
        * Sign::BOTH
            .iter()
            .map(|&sigma_cf| 0.25 * 0.5 * (0.5 * 0.5) * sigma_cond * omega_cond(sigma_cf))
            .sum::<f64>();
    // Mixed pair (l,L): before-impact sigma 1/2, port and arm 1/2 x 1/2.
    let mixed = 0.25 * 0.5 * (0.5 * 0.5) * omega_cond(sigma);
    matched + mixed
}

/// Rates in the two-detector thought experiment with D2(+) and D2(-) in
/// relative motion: if each detector's firing cannot depend on the other's,
/// each fires independently with probability 1/2 when photon 2 arrives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorLinkRates {
    pub both_fire: f64,
    pub neither_fires: f64,
    pub exactly_one: f64,
}

/// The frame-independence argument against detector-detector links: both
/// detectors fire together 25% of the time and neither fires 25% of the
/// time, violating one photon-one count.
pub fn detector_link_rates() -> DetectorLinkRates {
    DetectorLinkRates {
        both_fire: 0.25,
        neither_fires: 0.25,
        exactly_one: 0.5,
    }
}

/// The two discriminating experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Moving BS11 arranges timing T2; at alpha = beta = 0 QM predicts
    /// E_sigma = 2/3 while Multisimultaneity predicts 0.
    MotionExperiment,
    /// All splitters at rest arrange timing T3; at alpha = gamma = 0 QM
    /// predicts E_sigma_omega = 2/3 for every beta while Multisimultaneity
    /// predicts (2/9)(1 + 2 cos^2 beta).
    RestExperiment,
}

/// One compared point of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub beta: f64,
    pub qm: f64,
    pub ms: f64,
}

/// Side-by-side predictions for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub timing: Timing,
    pub quantity: &'static str,
    pub constraint: &'static str,
    pub rows: Vec<ScenarioRow>,
}

/// Predictions of the motion experiment at its stated phases.
pub fn motion_experiment_point() -> ScenarioRow {
    let phases = PhaseSettings::zero();
    ScenarioRow {
        beta: 0.0,
        qm: qm_correlators(&phases).e_sigma,
        ms: ms_correlators(Timing::T2, &phases).e_sigma,
    }
}

/// Predictions of the rest experiment at one beta.
pub fn rest_experiment_point(beta: f64) -> ScenarioRow {
    let phases = PhaseSettings::new(0.0, beta, 0.0);
    ScenarioRow {
        beta,
        qm: qm_correlators(&phases).e_sigma_omega,
        ms: ms_correlators(Timing::T3, &phases).e_sigma_omega,
    }
}

/// Contradictory predictions for the requested scenario. The rest
/// experiment is sampled over half a beta period, covering the extremes at
/// beta = 0 and beta = pi/2.
pub fn scenario_report(scenario: Scenario) -> ScenarioReport {
    match scenario {
        Scenario::MotionExperiment => ScenarioReport {
            scenario,
            timing: Timing::T2,
            quantity: "E_sigma",
            constraint: "alpha = beta = 0",
            rows: vec![motion_experiment_point()],
        },
        Scenario::RestExperiment => ScenarioReport {
            scenario,
            timing: Timing::T3,
            quantity: "E_sigma_omega",
            constraint: "alpha = gamma = 0",
            rows: (0..=8)
                .map(|k| rest_experiment_point(k as f64 * TAU / 16.0))
                .collect(),
        },
    }
}

/// Uniform grid over the three phases, `steps` points per axis.
#[derive(Debug, Clone, Copy)]
pub struct PhaseGrid {
    pub steps: usize,
}

impl PhaseGrid {
    pub fn new(steps: usize) -> Self {
        Self { steps }
    }

    /// Iterate all grid points.
    pub fn points(&self) -> impl Iterator<Item = PhaseSettings> + '_ {
        let n = self.steps;
        (0..n).flat_map(move |i| {
            (0..n).flat_map(move |j| {
                (0..n).map(move |k| {
                    PhaseSettings::new(
                        i as f64 * TAU / n as f64,
                        j as f64 * TAU / n as f64,
                        k as f64 * TAU / n as f64,
                    )
                })
            })
        })
    }
}

/// Outcome of the no-signaling audit for one engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoSignalingReport {
    pub theory: Theory,
    pub timing: Option<Timing>,
    pub grid_steps: usize,
    /// Largest deviation of the non-selective marginal P(sigma=+1) from 1/2.
    pub max_nonselective_deviation: f64,
    /// Range of the selective (windowed) marginal of sigma=+1 over the grid.
    pub selective_min: f64,
    pub selective_max: f64,
    /// Whether the selective marginal varies with the phases at all.
    pub selective_phase_dependent: bool,
}

/// Non-selective probability that photon 1 lands in D1(sigma), summing all
/// subensembles and the lost branch. Identically 1/2 for every engine and
/// timing: selective marginals may leak phase dependence, non-selective
/// ones never do, which is what forbids superluminal signaling.
pub fn nonselective_marginal(
    theory: Theory,
    timing: Option<Timing>,
    sigma: Sign,
    phases: &PhaseSettings,
) -> Result<f64> {
    match theory {
        Theory::Qm => Ok(qm_nonselective_marginal(sigma, phases)),
        Theory::Ms => {
            let timing = timing.ok_or_else(|| {
                Error::UnsupportedTiming("MS requires an explicit timing class".into())
            })?;
            Ok(ms_nonselective_marginal(timing, sigma, phases))
        }
    }
}

fn qm_nonselective_marginal(sigma: Sign, phases: &PhaseSettings) -> f64 {
    pathspace::channel_distribution(phases)
        .into_iter()
        .filter_map(|(channel, p)| match channel {
            pathspace::Channel::Coincident { sigma: s, .. } if s == sigma => Some(p),
            pathspace::Channel::Undetected { sigma: s, .. } if s == sigma => Some(p),
            _ => None,
        })
        .sum()
}

/// Chain-level sigma marginal for an MS engine, summing the detected
/// subensembles, the flat outer peaks and the lost branch.
fn ms_nonselective_marginal(timing: Timing, sigma: Sign, phases: &PhaseSettings) -> f64 {
    let table = ms_joint(timing, phases);
    // Subpopulations L and l share the same chain and hence the same
    // selective marginal; the two single-path peaks are flat.
    let interfering = 2.0 * table.marginal_sigma(sigma);
    let outer = 2.0 * (2.0 / 64.0);
    let lost = match timing {
        // Non-before BS21 impact: matched pairs take the r port with the
        // complementary amplitude-ratio conditional, the mixed pairs 50-50.
        Timing::T1 => {
            let port_r = nonbefore_port_conditional(ExitPort::R, sigma, phases);
            2.0 * (0.25 * 0.5 * port_r) + 2.0 * (0.25 * 0.5 * 0.5)
        }
        // Before BS21 impact: every pair takes the r port 50-50.
        Timing::T2 => 4.0 * (0.25 * 0.5 * 0.5),
        // BS11's non-before impact conditions on the actual BS21 port, so
        // r-exits carry the complementary fringe for matched pairs.
        Timing::T3 => {
            let sigma_given_r = sigma_conditional_given_port(ExitPort::R, sigma, phases);
            2.0 * (0.25 * 0.5 * sigma_given_r) + 2.0 * (0.25 * 0.5 * 0.5)
        }
    };
    interfering + outer + lost
}

/// Audit that the non-selective sigma marginal stays at 1/2 across a phase
/// grid, and report how the selective marginal moves.
pub fn no_signaling_audit(
    theory: Theory,
    timing: Option<Timing>,
    grid: PhaseGrid,
) -> Result<NoSignalingReport> {
    let mut max_dev: f64 = 0.0;
    let mut sel_min = f64::INFINITY;
    let mut sel_max = f64::NEG_INFINITY;
    for phases in grid.points() {
        let p = nonselective_marginal(theory, timing, Sign::Plus, &phases)?;
        max_dev = max_dev.max((p - 0.5).abs());
        let selective = match theory {
            Theory::Qm => qm_joint(&phases).marginal_sigma(Sign::Plus),
            Theory::Ms => {
                ms_joint(timing.expect("checked above"), &phases).marginal_sigma(Sign::Plus)
            }
        };
        sel_min = sel_min.min(selective);
        sel_max = sel_max.max(selective);
    }
    Ok(NoSignalingReport {
        theory,
        timing,
        grid_steps: grid.steps,
        max_nonselective_deviation: max_dev,
        selective_min: sel_min,
        selective_max: sel_max,
        selective_phase_dependent: sel_max - sel_min > 1e-9,
    })
}
