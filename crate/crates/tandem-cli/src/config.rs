//! Experiment configuration files: a strict, self-describing TOML schema.
//!
//! Unknown keys are fatal so that an experiment definition on disk means
//! exactly what it says. Loading re-validates every physical invariant
//! through the core constructors, and `emit` produces a canonical rendering
//! that reloads to an identical configuration.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use tandem::montecarlo::RunConfig;
use tandem::pathspace::{ArmLengths, PhaseSettings};
use tandem::predict::{Theory, Timing};
use tandem::relativity::{BeamSplitterSpec, SetupGeometry, SplitterId};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arms: ArmsSection,
    pub phases: PhasesSection,
    pub splitters: Vec<SplitterSection>,
    pub delays: DelaysSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsSection {
    /// Long arm, meters.
    #[serde(rename = "L")]
    pub long: f64,
    /// Short arm, meters.
    #[serde(rename = "l")]
    pub short: f64,
    /// Link fiber between photon 2's interferometers, meters.
    pub s: f64,
    /// Pair coherence length, meters; `L - l` must exceed it.
    pub coherence_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasesSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitterSection {
    /// One of `BS11`, `BS21`, `BS22`.
    pub id: String,
    /// Lab coordinate, meters.
    pub position: f64,
    /// Fraction of c along the axis, |v| < 1.
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaysSection {
    /// Photon-1 delay line, seconds.
    pub photon1: f64,
    /// Photon-2 delay line, seconds.
    pub photon2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub theory: TheoryField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingField>,
    pub trials: u64,
    pub seed: u64,
    /// Detector timing jitter sigma, seconds.
    pub jitter: f64,
    /// Coincidence window center over t2 - t1, seconds.
    pub window_center: f64,
    /// Coincidence window full width, seconds.
    pub window_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TheoryField {
    Qm,
    Ms,
}

impl TheoryField {
    pub fn to_core(self) -> Theory {
        match self {
            TheoryField::Qm => Theory::Qm,
            TheoryField::Ms => Theory::Ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TimingField {
    T1,
    T2,
    T3,
}

impl TimingField {
    pub fn to_core(self) -> Timing {
        match self {
            TimingField::T1 => Timing::T1,
            TimingField::T2 => Timing::T2,
            TimingField::T3 => Timing::T3,
        }
    }
}

impl ExperimentConfig {
    /// Parse and physically validate a configuration file.
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parse from TOML text; unknown keys are fatal.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config error: {e}")))?;
        // Surface invariant violations at load time, not first use.
        config.arm_lengths()?;
        config.geometry()?;
        Ok(config)
    }

    /// Canonical TOML rendering; `parse(emit(x)) == x`.
    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn arm_lengths(&self) -> Result<ArmLengths, CliError> {
        let arms = ArmLengths::new(self.arms.long, self.arms.short, self.arms.s)?;
        if !arms.exceeds_coherence(self.arms.coherence_length) {
            eprintln!(
                "warning: arm difference {} m does not exceed the coherence length {} m; \
                 the subensembles will not be cleanly distinguishable",
                arms.path_difference_m(),
                self.arms.coherence_length
            );
        }
        Ok(arms)
    }

    pub fn phase_settings(&self) -> PhaseSettings {
        PhaseSettings::new(self.phases.alpha, self.phases.beta, self.phases.gamma)
    }

    pub fn geometry(&self) -> Result<SetupGeometry, CliError> {
        let arms = ArmLengths::new(self.arms.long, self.arms.short, self.arms.s)?;
        if self.splitters.len() != 3 {
            return Err(CliError::Config(format!(
                "expected exactly 3 splitters, got {}",
                self.splitters.len()
            )));
        }
        let mut specs = Vec::with_capacity(3);
        for s in &self.splitters {
            let id = match s.id.as_str() {
                "BS11" => SplitterId::Bs11,
                "BS21" => SplitterId::Bs21,
                "BS22" => SplitterId::Bs22,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown splitter id {other:?}; expected BS11, BS21 or BS22"
                    )))
                }
            };
            specs.push(BeamSplitterSpec::new(id, s.position, s.velocity)?);
        }
        Ok(SetupGeometry::new(
            [specs[0], specs[1], specs[2]],
            arms,
            self.delays.photon1,
            self.delays.photon2,
            0.0,
        )?)
    }

    /// Assemble the run configuration, applying command-line overrides.
    pub fn run_config(
        &self,
        theory: Option<TheoryField>,
        timing: Option<TimingField>,
        trials: Option<u64>,
        seed: Option<u64>,
    ) -> Result<RunConfig, CliError> {
        let config = RunConfig {
            theory: theory.unwrap_or(self.run.theory).to_core(),
            timing: timing.or(self.run.timing).map(TimingField::to_core),
            phases: self.phase_settings(),
            geometry: self.geometry()?,
            trials: trials.unwrap_or(self.run.trials),
            seed: seed.unwrap_or(self.run.seed),
            jitter_sigma_s: self.run.jitter,
            window_center_s: self.run.window_center,
            window_width_s: self.run.window_width,
        };
        config.validate()?;
        Ok(config)
    }
}
