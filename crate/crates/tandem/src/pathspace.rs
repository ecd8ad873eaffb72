//! Joint photon-pair paths, time-delay subensembles and complex amplitudes.
//!
//! Photon 1 crosses one unbalanced interferometer and is detected behind its
//! recombiner BS11. Photon 2 crosses two unbalanced interferometers in
//! series: leaving the first recombiner BS21 by the port that feeds the link
//! fiber (`s`) it reaches BS22 and detection; the other port (`r`) leaves the
//! apparatus undetected. Every interferometer has a long arm `L` and a short
//! arm `l` with `L - l` far beyond the pair coherence length, and all
//! splitters are 50-50.
//!
//! A detected pair is labelled by the joint path, e.g. `(l,Lsl)`: photon 1
//! short, photon 2 long then short. Time-resolved coincidence detection
//! resolves only the total length difference, so the eight detectable paths
//! fall into four subensembles; the two three-path subensembles interfere,
//! the two single-path ones do not.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Full-path amplitude magnitude: six 50-50 splitter passages.
const FULL_PATH_MAGNITUDE: f64 = 0.125;
/// Truncated-path amplitude magnitude: four passages, up to a BS21 port.
const PREFIX_MAGNITUDE: f64 = 0.25;

/// A dimensionless joint probability amplitude.
pub type JointAmplitude = Complex64;

/// Interferometer arm choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Short,
    Long,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Short, Arm::Long];

    fn letter(self) -> char {
        match self {
            Arm::Short => 'l',
            Arm::Long => 'L',
        }
    }
}

/// BS21 output ports: `S` feeds the second interferometer, `R` leaves the setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExitPort {
    S,
    R,
}

/// Detector sign at a recombiner output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    /// +1.0 or -1.0.
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Table index: `Plus` first.
    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Detector pair outcome: photon 1 in D1(sigma), photon 2 in D2(omega).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomePorts {
    pub sigma: Sign,
    pub omega: Sign,
}

impl OutcomePorts {
    pub fn new(sigma: Sign, omega: Sign) -> Self {
        Self { sigma, omega }
    }

    /// The four outcome combinations, (+,+) first.
    pub fn all() -> [OutcomePorts; 4] {
        [
            OutcomePorts::new(Sign::Plus, Sign::Plus),
            OutcomePorts::new(Sign::Plus, Sign::Minus),
            OutcomePorts::new(Sign::Minus, Sign::Plus),
            OutcomePorts::new(Sign::Minus, Sign::Minus),
        ]
    }
}

/// Physical arm lengths of the (identical) interferometers plus the link fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmLengths {
    long_m: f64,
    short_m: f64,
    link_m: f64,
}

impl ArmLengths {
    /// Requires `long > short > 0` and `link >= 0`.
    pub fn new(long_m: f64, short_m: f64, link_m: f64) -> Result<Self> {
        if !(long_m.is_finite() && short_m.is_finite() && link_m.is_finite()) {
            return Err(Error::InvalidGeometry("arm lengths must be finite".into()));
        }
        if short_m <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "short arm must be positive, got {short_m} m"
            )));
        }
        if long_m <= short_m {
            return Err(Error::InvalidGeometry(format!(
                "long arm ({long_m} m) must exceed short arm ({short_m} m)"
            )));
        }
        if link_m < 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "link segment must be non-negative, got {link_m} m"
            )));
        }
        Ok(Self {
            long_m,
            short_m,
            link_m,
        })
    }

    pub fn long_m(&self) -> f64 {
        self.long_m
    }

    pub fn short_m(&self) -> f64 {
        self.short_m
    }

    pub fn link_m(&self) -> f64 {
        self.link_m
    }

    /// Arm length difference `L - l` in meters.
    pub fn path_difference_m(&self) -> f64 {
        self.long_m - self.short_m
    }

    /// Smallest separation between spectrum peaks, `(L - l)/c` seconds.
    pub fn peak_separation_s(&self) -> f64 {
        self.path_difference_m() / SPEED_OF_LIGHT
    }

    /// True when `L - l` exceeds the pair coherence length, the regime the
    /// whole analysis assumes. Callers should warn when this fails.
    pub fn exceeds_coherence(&self, coherence_length_m: f64) -> bool {
        self.path_difference_m() > coherence_length_m
    }

    fn arm_m(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Short => self.short_m,
            Arm::Long => self.long_m,
        }
    }
}

/// The three adjustable phases, stored reduced to `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPhases", into = "RawPhases")]
pub struct PhaseSettings {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPhases {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl From<RawPhases> for PhaseSettings {
    fn from(raw: RawPhases) -> Self {
        PhaseSettings::new(raw.alpha, raw.beta, raw.gamma)
    }
}

impl From<PhaseSettings> for RawPhases {
    fn from(p: PhaseSettings) -> Self {
        RawPhases {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
        }
    }
}

impl PhaseSettings {
    /// alpha acts on photon 1's long arm, beta on photon 2's first long arm,
    /// gamma on photon 2's second long arm. Arbitrary inputs are reduced
    /// modulo 2pi.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha: alpha.rem_euclid(TAU),
            beta: beta.rem_euclid(TAU),
            gamma: gamma.rem_euclid(TAU),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// The joint path of one photon pair through the three interferometers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathPair {
    pub photon1_arm: Arm,
    pub photon2_first_arm: Arm,
    pub photon2_exit: ExitPort,
    /// Present exactly when `photon2_exit == S`.
    pub photon2_second_arm: Option<Arm>,
}

impl PathPair {
    /// A detectable path: photon 2 leaves BS21 by port `s`.
    pub fn detected(photon1_arm: Arm, photon2_first_arm: Arm, photon2_second_arm: Arm) -> Self {
        Self {
            photon1_arm,
            photon2_first_arm,
            photon2_exit: ExitPort::S,
            photon2_second_arm: Some(photon2_second_arm),
        }
    }

    /// A lost path: photon 2 leaves BS21 by the unused port `r`.
    pub fn lost(photon1_arm: Arm, photon2_first_arm: Arm) -> Self {
        Self {
            photon1_arm,
            photon2_first_arm,
            photon2_exit: ExitPort::R,
            photon2_second_arm: None,
        }
    }

    pub fn is_detectable(&self) -> bool {
        self.photon2_exit == ExitPort::S
    }

    /// Compact code like `l_LsL` (detected) or `L_lr` (lost), safe for CSV.
    pub fn code(&self) -> String {
        match self.photon2_second_arm {
            Some(q2) => format!(
                "{}_{}s{}",
                self.photon1_arm.letter(),
                self.photon2_first_arm.letter(),
                q2.letter()
            ),
            None => format!(
                "{}_{}r",
                self.photon1_arm.letter(),
                self.photon2_first_arm.letter()
            ),
        }
    }
}

impl fmt::Display for PathPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.photon2_second_arm {
            Some(q2) => write!(
                f,
                "({},{}s{})",
                self.photon1_arm.letter(),
                self.photon2_first_arm.letter(),
                q2.letter()
            ),
            None => write!(
                f,
                "({},{}r)",
                self.photon1_arm.letter(),
                self.photon2_first_arm.letter()
            ),
        }
    }
}

/// Time-delay subensemble of a joint path, named by the total length
/// parameter that fixes the detected time difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subensemble {
    /// `2L - l`: the single path (l,LsL).
    TwoLongMinusShort,
    /// `L`: (L,LsL), (l,Lsl), (l,lsL); the window is usually set here.
    Long,
    /// `l`: (l,lsl), (L,Lsl), (L,lsL).
    Short,
    /// `2l - L`: the single path (L,lsl).
    TwoShortMinusLong,
    /// Photon 2 left BS21 by the unused port; no coincidence.
    Lost,
}

impl Subensemble {
    /// The four detected subensembles in descending time-difference order.
    pub const DETECTED: [Subensemble; 4] = [
        Subensemble::TwoLongMinusShort,
        Subensemble::Long,
        Subensemble::Short,
        Subensemble::TwoShortMinusLong,
    ];

    /// Whether the member paths interfere (three-path subensembles).
    pub fn is_interfering(self) -> bool {
        matches!(self, Subensemble::Long | Subensemble::Short)
    }

    /// Human label: `2L-l`, `L`, `l`, `2l-L` or `lost`.
    pub fn label(self) -> &'static str {
        match self {
            Subensemble::TwoLongMinusShort => "2L-l",
            Subensemble::Long => "L",
            Subensemble::Short => "l",
            Subensemble::TwoShortMinusLong => "2l-L",
            Subensemble::Lost => "lost",
        }
    }

    /// Parse a label produced by [`Subensemble::label`].
    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "2L-l" => Some(Subensemble::TwoLongMinusShort),
            "L" => Some(Subensemble::Long),
            "l" => Some(Subensemble::Short),
            "2l-L" => Some(Subensemble::TwoShortMinusLong),
            "lost" => Some(Subensemble::Lost),
            _ => None,
        }
    }

    /// Member paths of a detected subensemble, in enumeration order.
    pub fn paths(self) -> Vec<PathPair> {
        enumerate_detectable_paths()
            .into_iter()
            .filter(|p| classify_subensemble(p) == self)
            .collect()
    }
}

impl fmt::Display for Subensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The eight detectable path pairs in a stable order: photon-1 arm slowest,
/// then photon-2 first arm, then second arm, `Short` before `Long`.
pub fn enumerate_detectable_paths() -> Vec<PathPair> {
    let mut paths = Vec::with_capacity(8);
    for p1 in Arm::BOTH {
        for q1 in Arm::BOTH {
            for q2 in Arm::BOTH {
                paths.push(PathPair::detected(p1, q1, q2));
            }
        }
    }
    paths
}

/// The four lost path prefixes (photon 2 out by port `r`), same ordering.
pub fn enumerate_lost_paths() -> Vec<PathPair> {
    let mut paths = Vec::with_capacity(4);
    for p1 in Arm::BOTH {
        for q1 in Arm::BOTH {
            paths.push(PathPair::lost(p1, q1));
        }
    }
    paths
}

/// Subensemble of a joint path: the count of long arms on photon 2's side
/// minus photon 1's fixes the total length parameter.
pub fn classify_subensemble(path: &PathPair) -> Subensemble {
    let Some(q2) = path.photon2_second_arm else {
        return Subensemble::Lost;
    };
    let longs = |arm: Arm| (arm == Arm::Long) as i8;
    match longs(path.photon2_first_arm) + longs(q2) - longs(path.photon1_arm) {
        2 => Subensemble::TwoLongMinusShort,
        1 => Subensemble::Long,
        0 => Subensemble::Short,
        -1 => Subensemble::TwoShortMinusLong,
        _ => unreachable!(),
    }
}

/// Detected time difference t2 - t1 of a path, in seconds.
///
/// Photon 1's fixed lead fiber has length `L + s`, so subensemble `L` sits at
/// time difference zero; subensemble `l` at `(l-L)/c`, `2L-l` at `(L-l)/c`
/// and `2l-L` at `2(l-L)/c`.
pub fn time_signature(path: &PathPair, arms: &ArmLengths) -> Result<f64> {
    let Some(q2) = path.photon2_second_arm else {
        return Err(Error::LostPath {
            operation: "time_signature",
        });
    };
    let len1 = arms.arm_m(path.photon1_arm);
    let len2 = arms.arm_m(path.photon2_first_arm) + arms.link_m + arms.arm_m(q2);
    Ok((len2 - len1 - (arms.long_m + arms.link_m)) / SPEED_OF_LIGHT)
}

/// Complex joint amplitude of a detectable path and outcome pair.
///
/// Magnitude is 1/8 (six 50-50 passages). The phase gauge: each long arm
/// contributes its adjustable phase (alpha, beta or gamma), and the `-`
/// output port of a recombiner adds pi when the recombined arm is long.
/// Any gauge reproducing the subensemble-L joint probabilities is
/// observationally equivalent; this is the simplest one that does.
pub fn joint_amplitude(
    path: &PathPair,
    ports: OutcomePorts,
    phases: &PhaseSettings,
) -> Result<JointAmplitude> {
    let Some(q2) = path.photon2_second_arm else {
        return Err(Error::LostPath {
            operation: "joint_amplitude",
        });
    };
    let mut phase = 0.0;
    if path.photon1_arm == Arm::Long {
        phase += phases.alpha;
        if ports.sigma == Sign::Minus {
            phase += PI;
        }
    }
    if path.photon2_first_arm == Arm::Long {
        phase += phases.beta;
    }
    if q2 == Arm::Long {
        phase += phases.gamma;
        if ports.omega == Sign::Minus {
            phase += PI;
        }
    }
    Ok(Complex64::from_polar(FULL_PATH_MAGNITUDE, phase))
}

/// Amplitude of a path prefix ending at a BS21 output port.
///
/// Magnitude is 1/4 (four passages). Port `s` carries the plain beta phase
/// on the long arm; unitarity of the recombiner forces the complementary
/// port `r` to carry beta + pi, the conjugate fringe.
pub fn truncated_amplitude(
    photon1_arm: Arm,
    photon2_first_arm: Arm,
    exit: ExitPort,
    sigma: Sign,
    phases: &PhaseSettings,
) -> JointAmplitude {
    let mut phase = 0.0;
    if photon1_arm == Arm::Long {
        phase += phases.alpha;
        if sigma == Sign::Minus {
            phase += PI;
        }
    }
    if photon2_first_arm == Arm::Long {
        phase += phases.beta;
        if exit == ExitPort::R {
            phase += PI;
        }
    }
    Complex64::from_polar(PREFIX_MAGNITUDE, phase)
}

/// Joint probability of an outcome within one detected subensemble, by
/// coherent summation of its member-path amplitudes.
///
/// For the three-path subensembles this is the interference pattern; the
/// single-path subensembles give a flat 1/64 per outcome.
pub fn subensemble_joint(
    subensemble: Subensemble,
    ports: OutcomePorts,
    phases: &PhaseSettings,
) -> Result<f64> {
    if subensemble == Subensemble::Lost {
        return Err(Error::LostPath {
            operation: "subensemble_joint",
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for path in subensemble.paths() {
        sum += joint_amplitude(&path, ports, phases)?;
    }
    Ok(sum.norm_sqr())
}

/// Undetected-branch classes at BS21's unused port, grouped by the first-arm
/// difference that time-resolved detection of photon 1 could still expose.
/// Prefixes with equal first arms share the detectable timing signature and
/// interfere; the mixed prefixes are distinguishable singletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LostClass {
    /// (l,lr) with (L,Lr): interfering pair carrying the conjugate fringe.
    Matched,
    /// (l,Lr): photon 2 took the longer first arm.
    Photon2Longer,
    /// (L,lr): photon 1 took the longer arm.
    Photon1Longer,
}

impl LostClass {
    pub const ALL: [LostClass; 3] = [
        LostClass::Matched,
        LostClass::Photon2Longer,
        LostClass::Photon1Longer,
    ];

    /// Photon-1 arms compatible with this class, used for timestamping.
    pub fn photon1_arms(self) -> &'static [Arm] {
        match self {
            LostClass::Matched => &[Arm::Short, Arm::Long],
            LostClass::Photon2Longer => &[Arm::Short],
            LostClass::Photon1Longer => &[Arm::Long],
        }
    }
}

/// Probability that photon 2 is lost in the given class while photon 1 lands
/// in D1(sigma), from the truncated amplitudes.
///
/// The matched class sums to `(1 - sigma cos(alpha+beta))/8`: exactly the
/// fringe complementary to the port-`s` pair, which is what keeps the
/// non-selective marginal of sigma at 1/2 for every phase setting.
pub fn lost_class_probability(class: LostClass, sigma: Sign, phases: &PhaseSettings) -> f64 {
    match class {
        LostClass::Matched => {
            let sum = truncated_amplitude(Arm::Long, Arm::Long, ExitPort::R, sigma, phases)
                + truncated_amplitude(Arm::Short, Arm::Short, ExitPort::R, sigma, phases);
            sum.norm_sqr()
        }
        LostClass::Photon2Longer => {
            truncated_amplitude(Arm::Short, Arm::Long, ExitPort::R, sigma, phases).norm_sqr()
        }
        LostClass::Photon1Longer => {
            truncated_amplitude(Arm::Long, Arm::Short, ExitPort::R, sigma, phases).norm_sqr()
        }
    }
}

/// One exclusive outcome channel of a photon-pair trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Channel {
    /// Both photons detected; the subensemble fixes the time difference.
    Coincident {
        subensemble: Subensemble,
        sigma: Sign,
        omega: Sign,
    },
    /// Photon 2 left by BS21's unused port; only photon 1 detected.
    Undetected { class: LostClass, sigma: Sign },
}

/// The complete quantum-mechanical channel measure for one trial: sixteen
/// coincident channels (four subensembles, four outcomes) plus six
/// undetected ones. Probabilities sum to one for every phase setting.
pub fn channel_distribution(phases: &PhaseSettings) -> Vec<(Channel, f64)> {
    let mut channels = Vec::with_capacity(22);
    for subensemble in Subensemble::DETECTED {
        for ports in OutcomePorts::all() {
            let p =
                subensemble_joint(subensemble, ports, phases).expect("detected subensembles only");
            channels.push((
                Channel::Coincident {
                    subensemble,
                    sigma: ports.sigma,
                    omega: ports.omega,
                },
                p,
            ));
        }
    }
    for class in LostClass::ALL {
        for sigma in Sign::BOTH {
            channels.push((
                Channel::Undetected { class, sigma },
                lost_class_probability(class, sigma, phases),
            ));
        }
    }
    channels
}
