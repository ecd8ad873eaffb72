//! Beam-splitter impact schedules and before/non-before classification.
//!
//! Everything lives on one lab axis: each splitter has a position and a
//! constant velocity (fraction of c). The photons travel fibers, so impact
//! *times* follow from realized path lengths and delay lines, while impact
//! *positions* are the splitter coordinates; a splitter's velocity only
//! selects the inertial frame in which its impact orders the others.
//!
//! An impact on a splitter is *non-before* another photon's impact when, in
//! the first splitter's rest frame, the other impact happened no later and
//! the realized paths are indistinguishable (the pair belongs to one of the
//! interfering subensembles). Otherwise it is a *before* impact. Timing
//! classes collect the three labels; Multisimultaneity's predictions depend
//! on them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pathspace::{classify_subensemble, Arm, ArmLengths, PathPair};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// The three recombiners that decide outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitterId {
    Bs11,
    Bs21,
    Bs22,
}

impl SplitterId {
    pub const ALL: [SplitterId; 3] = [SplitterId::Bs11, SplitterId::Bs21, SplitterId::Bs22];

    /// Which photon impacts this splitter.
    pub fn photon(self) -> u8 {
        match self {
            SplitterId::Bs11 => 1,
            SplitterId::Bs21 | SplitterId::Bs22 => 2,
        }
    }

    /// Short subscript form: `11`, `21`, `22`.
    pub fn subscript(self) -> &'static str {
        match self {
            SplitterId::Bs11 => "11",
            SplitterId::Bs21 => "21",
            SplitterId::Bs22 => "22",
        }
    }
}

impl fmt::Display for SplitterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BS{}", self.subscript())
    }
}

/// Position and state of motion of one beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterSpec {
    pub id: SplitterId,
    /// Lab coordinate of the impact on the single axis, meters.
    pub position_m: f64,
    /// Signed velocity along the axis as a fraction of c, |v| < 1.
    pub velocity_c: f64,
}

impl BeamSplitterSpec {
    pub fn new(id: SplitterId, position_m: f64, velocity_c: f64) -> Result<Self> {
        if !position_m.is_finite() || !velocity_c.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "{id}: position and velocity must be finite"
            )));
        }
        if velocity_c.abs() >= 1.0 {
            return Err(Error::InvalidGeometry(format!(
                "{id}: |velocity| must be below c, got {velocity_c}"
            )));
        }
        Ok(Self {
            id,
            position_m,
            velocity_c,
        })
    }

    /// A splitter at rest.
    pub fn at_rest(id: SplitterId, position_m: f64) -> Self {
        Self {
            id,
            position_m,
            velocity_c: 0.0,
        }
    }
}

/// Full spatial and timing arrangement of one experiment.
///
/// Photon 1's lead fiber from the source to its interferometer has length
/// `L + s`, which puts subpopulation L at time difference zero when the
/// delay lines are equal; the delay lines then shift each photon's whole
/// impact chain rigidly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetupGeometry {
    bs11: BeamSplitterSpec,
    bs21: BeamSplitterSpec,
    bs22: BeamSplitterSpec,
    pub arms: ArmLengths,
    pub delay_photon1_s: f64,
    pub delay_photon2_s: f64,
    pub emission_time_s: f64,
}

impl SetupGeometry {
    pub fn new(
        splitters: [BeamSplitterSpec; 3],
        arms: ArmLengths,
        delay_photon1_s: f64,
        delay_photon2_s: f64,
        emission_time_s: f64,
    ) -> Result<Self> {
        let find = |id: SplitterId| -> Result<BeamSplitterSpec> {
            let mut matches = splitters.iter().filter(|s| s.id == id);
            let spec = matches
                .next()
                .copied()
                .ok_or_else(|| Error::InvalidGeometry(format!("missing splitter {id}")))?;
            if matches.next().is_some() {
                return Err(Error::InvalidGeometry(format!("duplicate splitter {id}")));
            }
            Ok(spec)
        };
        if delay_photon1_s < 0.0 || delay_photon2_s < 0.0 {
            return Err(Error::InvalidGeometry(
                "delay lines must be non-negative".into(),
            ));
        }
        for s in &splitters {
            // Re-validate: BeamSplitterSpec can be built literally.
            BeamSplitterSpec::new(s.id, s.position_m, s.velocity_c)?;
        }
        Ok(Self {
            bs11: find(SplitterId::Bs11)?,
            bs21: find(SplitterId::Bs21)?,
            bs22: find(SplitterId::Bs22)?,
            arms,
            delay_photon1_s,
            delay_photon2_s,
            emission_time_s,
        })
    }

    /// Convenience constructor with all splitters at rest and zero delays.
    pub fn at_rest(
        arms: ArmLengths,
        bs11_position_m: f64,
        bs21_position_m: f64,
        bs22_position_m: f64,
    ) -> Result<Self> {
        Self::new(
            [
                BeamSplitterSpec::at_rest(SplitterId::Bs11, bs11_position_m),
                BeamSplitterSpec::at_rest(SplitterId::Bs21, bs21_position_m),
                BeamSplitterSpec::at_rest(SplitterId::Bs22, bs22_position_m),
            ],
            arms,
            0.0,
            0.0,
            0.0,
        )
    }

    pub fn splitter(&self, id: SplitterId) -> &BeamSplitterSpec {
        match id {
            SplitterId::Bs11 => &self.bs11,
            SplitterId::Bs21 => &self.bs21,
            SplitterId::Bs22 => &self.bs22,
        }
    }

    /// Lab detection time of photon 1 for the given realized arm.
    pub fn photon1_detection_s(&self, arm: Arm) -> f64 {
        let arm_m = match arm {
            Arm::Short => self.arms.short_m(),
            Arm::Long => self.arms.long_m(),
        };
        let lead_m = self.arms.long_m() + self.arms.link_m();
        self.emission_time_s + self.delay_photon1_s + (lead_m + arm_m) / SPEED_OF_LIGHT
    }

    /// Lab detection time of photon 2 for the given realized arms.
    pub fn photon2_detection_s(&self, first: Arm, second: Arm) -> f64 {
        self.photon2_bs21_s(first)
            + (self.arms.link_m()
                + match second {
                    Arm::Short => self.arms.short_m(),
                    Arm::Long => self.arms.long_m(),
                })
                / SPEED_OF_LIGHT
    }

    fn photon2_bs21_s(&self, first: Arm) -> f64 {
        let arm_m = match first {
            Arm::Short => self.arms.short_m(),
            Arm::Long => self.arms.long_m(),
        };
        self.emission_time_s + self.delay_photon2_s + arm_m / SPEED_OF_LIGHT
    }
}

/// One photon arrival at one splitter, in lab coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactEvent {
    pub splitter: SplitterId,
    pub lab_time_s: f64,
    pub lab_position_m: f64,
    /// The joint path whose realized segments produced this arrival.
    pub path: PathPair,
}

/// Time of an event in the inertial frame of an observer moving with
/// `observer_velocity_c` along the axis: `gamma (t - v x / c^2)`.
pub fn lorentz_time(event: &ImpactEvent, observer_velocity_c: f64) -> Result<f64> {
    if observer_velocity_c.abs() >= 1.0 {
        return Err(Error::InvalidGeometry(format!(
            "observer velocity must be below c, got {observer_velocity_c}"
        )));
    }
    let gamma = 1.0 / (1.0 - observer_velocity_c * observer_velocity_c).sqrt();
    Ok(gamma * (event.lab_time_s - observer_velocity_c * event.lab_position_m / SPEED_OF_LIGHT))
}

/// Lab-frame impact events of one realized path: photon 1 at BS11, photon 2
/// at BS21 and BS22, in that order.
pub fn impact_schedule(geometry: &SetupGeometry, path: &PathPair) -> Result<[ImpactEvent; 3]> {
    let Some(second) = path.photon2_second_arm else {
        return Err(Error::LostPath {
            operation: "impact_schedule",
        });
    };
    let t11 = geometry.photon1_detection_s(path.photon1_arm);
    let t21 = geometry.photon2_bs21_s(path.photon2_first_arm);
    let t22 = geometry.photon2_detection_s(path.photon2_first_arm, second);
    if t22 <= t21 {
        return Err(Error::InvalidGeometry(format!(
            "photon 2 chain out of order: T21 = {t21} s, T22 = {t22} s"
        )));
    }
    let event = |splitter: SplitterId, lab_time_s: f64| ImpactEvent {
        splitter,
        lab_time_s,
        lab_position_m: geometry.splitter(splitter).position_m,
        path: *path,
    };
    Ok([
        event(SplitterId::Bs11, t11),
        event(SplitterId::Bs21, t21),
        event(SplitterId::Bs22, t22),
    ])
}

/// Before/non-before label of one impact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImpactLabel {
    /// No other-photon impact precedes this one in its splitter's frame, or
    /// the paths are distinguishable: the port choice is 50-50.
    Before,
    /// The referenced other-photon splitter was hit no later in this
    /// splitter's frame with indistinguishability guaranteed.
    NonBefore { reference: SplitterId },
}

impl ImpactLabel {
    fn render(self, own: SplitterId) -> String {
        match self {
            ImpactLabel::Before => format!("b{}", own.subscript()),
            // The reference is spelled out only where it is ambiguous,
            // i.e. for BS11 which may refer to either BS21 or BS22.
            ImpactLabel::NonBefore { reference } if own == SplitterId::Bs11 => {
                format!("a{}[{}]", own.subscript(), reference.subscript())
            }
            ImpactLabel::NonBefore { .. } => format!("a{}", own.subscript()),
        }
    }
}

/// The per-splitter labels of one experiment (or one path).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimingClass {
    pub bs11: ImpactLabel,
    pub bs21: ImpactLabel,
    pub bs22: ImpactLabel,
}

impl fmt::Display for TimingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {} {})",
            self.bs11.render(SplitterId::Bs11),
            self.bs21.render(SplitterId::Bs21),
            self.bs22.render(SplitterId::Bs22)
        )
    }
}

/// Classify each impact of one realized path as before or non-before.
///
/// For every splitter, the other photon's impacts are Lorentz-transformed
/// into that splitter's rest frame; the latest one at or before the own
/// impact becomes the non-before reference, provided the path belongs to an
/// interfering subensemble. Same-photon impacts never serve as references.
pub fn classify_impacts(geometry: &SetupGeometry, path: &PathPair) -> Result<TimingClass> {
    let events = impact_schedule(geometry, path)?;
    let indistinguishable = classify_subensemble(path).is_interfering();
    let label_for = |own: SplitterId| -> Result<ImpactLabel> {
        let own_event = events
            .iter()
            .find(|e| e.splitter == own)
            .expect("schedule covers all splitters");
        let v = geometry.splitter(own).velocity_c;
        let own_time = lorentz_time(own_event, v)?;
        let mut latest: Option<(f64, SplitterId)> = None;
        for event in &events {
            if event.splitter.photon() == own.photon() {
                continue;
            }
            let t = lorentz_time(event, v)?;
            if t <= own_time && latest.is_none_or(|(best, _)| t > best) {
                latest = Some((t, event.splitter));
            }
        }
        Ok(match latest {
            Some((_, reference)) if indistinguishable => ImpactLabel::NonBefore { reference },
            _ => ImpactLabel::Before,
        })
    };
    Ok(TimingClass {
        bs11: label_for(SplitterId::Bs11)?,
        bs21: label_for(SplitterId::Bs21)?,
        bs22: label_for(SplitterId::Bs22)?,
    })
}

/// Timing classification of a whole geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ClassificationOutcome {
    /// Every subpopulation-L path yields the same labels.
    Unanimous(TimingClass),
    /// Arrival times are path-dependent enough to flip labels between paths.
    Mixed(Vec<(PathPair, TimingClass)>),
}

impl ClassificationOutcome {
    pub fn is_unanimous(&self) -> bool {
        matches!(self, ClassificationOutcome::Unanimous(_))
    }
}

/// Classify all subpopulation-L paths and aggregate.
///
/// The closed-form engines assume one timing class per experiment; this
/// checks that assumption instead of taking it for granted. A `Mixed`
/// outcome is a value, not an error: it means the geometry's margins are
/// smaller than the arm-length spread.
pub fn canonical_timing(geometry: &SetupGeometry) -> Result<ClassificationOutcome> {
    let per_path: Vec<(PathPair, TimingClass)> = crate::pathspace::Subensemble::Long
        .paths()
        .into_iter()
        .map(|path| classify_impacts(geometry, &path).map(|t| (path, t)))
        .collect::<Result<_>>()?;
    let first = per_path[0].1;
    if per_path.iter().all(|(_, t)| *t == first) {
        Ok(ClassificationOutcome::Unanimous(first))
    } else {
        Ok(ClassificationOutcome::Mixed(per_path))
    }
}
