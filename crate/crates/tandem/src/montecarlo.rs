//! Seeded stochastic event generation, time-delay spectra and windowed
//! correlator estimation.
//!
//! Quantum mechanics assigns no path within an interfering subensemble, so
//! its sampler draws whole outcome channels from the exact channel measure.
//! Multisimultaneity is sampled at the trajectory level: the observable
//! part takes definite arms and ports, before impacts are 50-50 and
//! non-before impacts follow the amplitude-ratio conditionals.
//!
//! Generation is deterministic and chunk-stable: trials are grouped into
//! fixed chunks of [`TRIALS_PER_CHUNK`], each chunk drawing from its own
//! ChaCha8 stream derived from the run seed and the chunk index. Chunks can
//! therefore be produced in any order (or in parallel) and merged without
//! changing a single bit of the event stream.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pathspace::{self, Arm, Channel, PathPair, PhaseSettings, Sign, Subensemble};
use crate::predict::{self, Theory, Timing};
use crate::relativity::SetupGeometry;
use crate::{Error, Result};

/// Trials per RNG stream; fixed so chunking never affects the output.
pub const TRIALS_PER_CHUNK: u64 = 8192;

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub theory: Theory,
    /// Required when `theory` is MS, ignored for QM.
    pub timing: Option<Timing>,
    pub phases: PhaseSettings,
    pub geometry: SetupGeometry,
    pub trials: u64,
    pub seed: u64,
    /// Gaussian detector timing jitter, seconds; zero means ideal detectors.
    pub jitter_sigma_s: f64,
    /// Coincidence window over the measured time difference t2 - t1.
    pub window_center_s: f64,
    pub window_width_s: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidRunConfig("trials must be at least 1".into()));
        }
        if !self.jitter_sigma_s.is_finite() || self.jitter_sigma_s < 0.0 {
            return Err(Error::InvalidRunConfig(format!(
                "jitter sigma must be finite and non-negative, got {}",
                self.jitter_sigma_s
            )));
        }
        if !self.window_width_s.is_finite() || self.window_width_s <= 0.0 {
            return Err(Error::InvalidRunConfig(format!(
                "window width must be positive, got {}",
                self.window_width_s
            )));
        }
        if !self.window_center_s.is_finite() {
            return Err(Error::InvalidRunConfig(
                "window center must be finite".into(),
            ));
        }
        if self.theory == Theory::Ms && self.timing.is_none() {
            return Err(Error::InvalidRunConfig(
                "MS runs need an explicit timing class".into(),
            ));
        }
        Ok(())
    }
}

/// One generated photon-pair trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub trial: u64,
    /// The observable part's realized path (MS only; QM assigns none).
    pub path: Option<PathPair>,
    pub subensemble: Subensemble,
    pub sigma: Sign,
    /// Absent when photon 2 was lost.
    pub omega: Option<Sign>,
    pub t1_s: f64,
    /// Absent when photon 2 was lost.
    pub t2_s: Option<f64>,
}

impl EventRecord {
    pub fn is_coincident(&self) -> bool {
        self.t2_s.is_some()
    }

    /// Measured time difference t2 - t1, if both photons were detected.
    pub fn delay_s(&self) -> Option<f64> {
        self.t2_s.map(|t2| t2 - self.t1_s)
    }
}

/// Sample a quantum-mechanical run.
pub fn sample_qm(config: &RunConfig) -> Result<EventStream> {
    config.validate()?;
    if config.theory != Theory::Qm {
        return Err(Error::InvalidRunConfig(
            "sample_qm called with an MS configuration".into(),
        ));
    }
    Ok(EventStream::new(config, Sampler::qm(config)))
}

/// Sample a Multisimultaneity run.
///
/// Refuses to run when any chain probability leaves [0, 1] at the
/// configured phases; renormalizing would silently change the theory.
pub fn sample_ms(config: &RunConfig) -> Result<EventStream> {
    config.validate()?;
    if config.theory != Theory::Ms {
        return Err(Error::InvalidRunConfig(
            "sample_ms called with a QM configuration".into(),
        ));
    }
    let timing = config.timing.expect("validated above");
    check_sampling_domain(timing, &config.phases)?;
    Ok(EventStream::new(config, Sampler::ms(config, timing)))
}

/// Sample whichever theory the configuration selects.
pub fn sample_events(config: &RunConfig) -> Result<EventStream> {
    match config.theory {
        Theory::Qm => sample_qm(config),
        Theory::Ms => sample_ms(config),
    }
}

/// Every branch probability the trajectory sampler will use must be a
/// genuine probability. T3's omega draw runs through the T2 rule, so its
/// domain includes T2's.
fn check_sampling_domain(timing: Timing, phases: &PhaseSettings) -> Result<()> {
    let check = |t: Timing| -> Result<()> {
        let table = predict::ms_joint(t, phases);
        if let Some(entry) = table.validity.negative_entries.first() {
            return Err(Error::InvalidProbability {
                timing,
                sigma: entry.sigma,
                omega: entry.omega,
                value: entry.value,
            });
        }
        Ok(())
    };
    match timing {
        Timing::T1 => Ok(()),
        Timing::T2 => check(Timing::T2),
        Timing::T3 => {
            check(Timing::T3)?;
            check(Timing::T2)
        }
    }
}

/// Precomputed per-run sampling tables.
#[derive(Debug, Clone)]
enum Sampler {
    Qm {
        /// Cumulative channel measure; the last entry is the catch-all.
        cumulative: Vec<(f64, Channel)>,
        /// Member paths per interfering subensemble for timestamping.
        long_paths: Vec<PathPair>,
        short_paths: Vec<PathPair>,
    },
    Ms {
        timing: Timing,
        /// P(port s | sigma) at a non-before BS21 impact, matched pairs.
        port_s_given_sigma: [f64; 2],
        /// P(sigma = +1 | port) at a non-before BS11 impact (T3), matched
        /// pairs; indexed 0 = port s, 1 = port r.
        sigma_plus_given_port: [f64; 2],
        /// P(omega = +1 | sigma) under the T2 rule.
        omega_plus_t2: [f64; 2],
        /// P(omega = +1 | sigma) under full coherence, per subensemble
        /// (0 = L, 1 = l).
        omega_plus_full: [[f64; 2]; 2],
    },
}

impl Sampler {
    fn qm(config: &RunConfig) -> Self {
        let channels = pathspace::channel_distribution(&config.phases);
        let mut acc = 0.0;
        let cumulative = channels
            .into_iter()
            .map(|(channel, p)| {
                acc += p;
                (acc, channel)
            })
            .collect();
        Sampler::Qm {
            cumulative,
            long_paths: Subensemble::Long.paths(),
            short_paths: Subensemble::Short.paths(),
        }
    }

    fn ms(config: &RunConfig, timing: Timing) -> Self {
        let phases = &config.phases;
        let mut port_s_given_sigma = [0.0; 2];
        let mut omega_plus_t2 = [0.0; 2];
        let mut omega_plus_full = [[0.0; 2]; 2];
        for sigma in Sign::BOTH {
            port_s_given_sigma[sigma.index()] =
                predict::nonbefore_port_conditional(pathspace::ExitPort::S, sigma, phases);
            omega_plus_t2[sigma.index()] = predict::t2_omega_conditional(sigma, Sign::Plus, phases);
            for (i, subensemble) in [Subensemble::Long, Subensemble::Short]
                .into_iter()
                .enumerate()
            {
                omega_plus_full[i][sigma.index()] = predict::full_coherence_omega_conditional(
                    subensemble,
                    sigma,
                    Sign::Plus,
                    phases,
                );
            }
        }
        let sigma_plus_given_port = [
            predict::sigma_conditional_given_port(pathspace::ExitPort::S, Sign::Plus, phases),
            predict::sigma_conditional_given_port(pathspace::ExitPort::R, Sign::Plus, phases),
        ];
        Sampler::Ms {
            timing,
            port_s_given_sigma,
            sigma_plus_given_port,
            omega_plus_t2,
            omega_plus_full,
        }
    }
}

/// Iterator over the run's event records, in trial order.
#[derive(Debug)]
pub struct EventStream {
    sampler: Sampler,
    seed: u64,
    trials: u64,
    next_chunk: u64,
    buffer: VecDeque<EventRecord>,
    times: DetectionTimes,
    jitter: Option<Normal<f64>>,
}

/// Ideal detection times per realized arm combination.
#[derive(Debug, Clone)]
struct DetectionTimes {
    t1_by_arm: [f64; 2],
    t2_by_arms: [[f64; 2]; 2],
}

fn arm_index(arm: Arm) -> usize {
    match arm {
        Arm::Short => 0,
        Arm::Long => 1,
    }
}

impl DetectionTimes {
    fn new(geometry: &SetupGeometry) -> Self {
        let mut t1_by_arm = [0.0; 2];
        let mut t2_by_arms = [[0.0; 2]; 2];
        for first in Arm::BOTH {
            t1_by_arm[arm_index(first)] = geometry.photon1_detection_s(first);
            for second in Arm::BOTH {
                t2_by_arms[arm_index(first)][arm_index(second)] =
                    geometry.photon2_detection_s(first, second);
            }
        }
        Self {
            t1_by_arm,
            t2_by_arms,
        }
    }

    fn t1(&self, arm: Arm) -> f64 {
        self.t1_by_arm[arm_index(arm)]
    }

    fn t2(&self, first: Arm, second: Arm) -> f64 {
        self.t2_by_arms[arm_index(first)][arm_index(second)]
    }
}

impl EventStream {
    fn new(config: &RunConfig, sampler: Sampler) -> Self {
        // A zero-width Gaussian is the ideal-detector case; skip the draw
        // entirely rather than sampling a degenerate distribution.
        let jitter = (config.jitter_sigma_s > 0.0)
            .then(|| Normal::new(0.0, config.jitter_sigma_s).expect("validated sigma"));
        Self {
            sampler,
            seed: config.seed,
            trials: config.trials,
            next_chunk: 0,
            buffer: VecDeque::new(),
            times: DetectionTimes::new(&config.geometry),
            jitter,
        }
    }

    fn chunk(&self, chunk_index: u64) -> Vec<EventRecord> {
        let start = chunk_index * TRIALS_PER_CHUNK;
        let count = TRIALS_PER_CHUNK.min(self.trials - start);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk_index + 1);
        (0..count)
            .map(|i| self.one_trial(start + i, &mut rng))
            .collect()
    }

    fn one_trial(&self, trial: u64, rng: &mut ChaCha8Rng) -> EventRecord {
        match &self.sampler {
            Sampler::Qm {
                cumulative,
                long_paths,
                short_paths,
            } => {
                let u: f64 = rng.random();
                let channel = cumulative
                    .iter()
                    .find(|(acc, _)| u < *acc)
                    .map(|(_, c)| *c)
                    .unwrap_or(cumulative.last().expect("non-empty").1);
                match channel {
                    Channel::Coincident {
                        subensemble,
                        sigma,
                        omega,
                    } => {
                        // Timestamps need a concrete arm realization; QM
                        // assigns none, so draw a member path uniformly.
                        let member = match subensemble {
                            Subensemble::Long => long_paths[rng.random_range(0..long_paths.len())],
                            Subensemble::Short => {
                                short_paths[rng.random_range(0..short_paths.len())]
                            }
                            Subensemble::TwoLongMinusShort => {
                                PathPair::detected(Arm::Short, Arm::Long, Arm::Long)
                            }
                            Subensemble::TwoShortMinusLong => {
                                PathPair::detected(Arm::Long, Arm::Short, Arm::Short)
                            }
                            Subensemble::Lost => unreachable!("coincident channel"),
                        };
                        self.coincident_record(trial, None, subensemble, member, sigma, omega, rng)
                    }
                    Channel::Undetected { class, sigma } => {
                        let arms = class.photon1_arms();
                        let arm = if arms.len() == 1 {
                            arms[0]
                        } else {
                            arms[rng.random_range(0..arms.len())]
                        };
                        self.lost_record(trial, None, arm, sigma, rng)
                    }
                }
            }
            Sampler::Ms {
                timing,
                port_s_given_sigma,
                sigma_plus_given_port,
                omega_plus_t2,
                omega_plus_full,
            } => {
                let coin_arm = |rng: &mut ChaCha8Rng| {
                    if rng.random::<bool>() {
                        Arm::Long
                    } else {
                        Arm::Short
                    }
                };
                let coin_sign = |rng: &mut ChaCha8Rng| {
                    if rng.random::<bool>() {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    }
                };
                let bernoulli_sign = |rng: &mut ChaCha8Rng, p_plus: f64| {
                    if rng.random::<f64>() < p_plus {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    }
                };

                // The observable parts take definite arms with prior 1/4
                // per first-arm combination.
                let p1 = coin_arm(rng);
                let q1 = coin_arm(rng);
                let matched = p1 == q1;

                match timing {
                    Timing::T1 => {
                        // Before impact at BS11 fixes sigma 50-50, then the
                        // BS21 port: amplitude conditional for matched
                        // pairs, 50-50 for the distinguishable mixed ones.
                        let sigma = coin_sign(rng);
                        let to_s = if matched {
                            rng.random::<f64>() < port_s_given_sigma[sigma.index()]
                        } else {
                            rng.random::<bool>()
                        };
                        if !to_s {
                            return self.lost_record(
                                trial,
                                Some(PathPair::lost(p1, q1)),
                                p1,
                                sigma,
                                rng,
                            );
                        }
                        let q2 = coin_arm(rng);
                        let path = PathPair::detected(p1, q1, q2);
                        let subensemble = pathspace::classify_subensemble(&path);
                        let omega = match subensemble {
                            Subensemble::Long => {
                                bernoulli_sign(rng, omega_plus_full[0][sigma.index()])
                            }
                            Subensemble::Short => {
                                bernoulli_sign(rng, omega_plus_full[1][sigma.index()])
                            }
                            // Distinguishable at BS22: a before impact.
                            _ => coin_sign(rng),
                        };
                        self.coincident_record(
                            trial,
                            Some(path),
                            subensemble,
                            path,
                            sigma,
                            omega,
                            rng,
                        )
                    }
                    Timing::T2 => {
                        // Both BS11 and BS21 are before impacts.
                        let sigma = coin_sign(rng);
                        let to_s = rng.random::<bool>();
                        if !to_s {
                            return self.lost_record(
                                trial,
                                Some(PathPair::lost(p1, q1)),
                                p1,
                                sigma,
                                rng,
                            );
                        }
                        let q2 = coin_arm(rng);
                        let path = PathPair::detected(p1, q1, q2);
                        let subensemble = pathspace::classify_subensemble(&path);
                        let omega = if subensemble.is_interfering() {
                            bernoulli_sign(rng, omega_plus_t2[sigma.index()])
                        } else {
                            coin_sign(rng)
                        };
                        self.coincident_record(
                            trial,
                            Some(path),
                            subensemble,
                            path,
                            sigma,
                            omega,
                            rng,
                        )
                    }
                    Timing::T3 => {
                        // BS21 is a before impact; BS11's non-before impact
                        // then conditions on the realized port.
                        let to_s = rng.random::<bool>();
                        if !to_s {
                            let sigma = if matched {
                                bernoulli_sign(rng, sigma_plus_given_port[1])
                            } else {
                                coin_sign(rng)
                            };
                            return self.lost_record(
                                trial,
                                Some(PathPair::lost(p1, q1)),
                                p1,
                                sigma,
                                rng,
                            );
                        }
                        let q2 = coin_arm(rng);
                        let path = PathPair::detected(p1, q1, q2);
                        let subensemble = pathspace::classify_subensemble(&path);
                        if matched {
                            let sigma = bernoulli_sign(rng, sigma_plus_given_port[0]);
                            // Photon 2 takes account of the before-value
                            // photon 1 would have produced, not the actual
                            // one: an independent 50-50 counterfactual.
                            let sigma_cf = coin_sign(rng);
                            let omega = bernoulli_sign(rng, omega_plus_t2[sigma_cf.index()]);
                            self.coincident_record(
                                trial,
                                Some(path),
                                subensemble,
                                path,
                                sigma,
                                omega,
                                rng,
                            )
                        } else {
                            // Mixed pairs are distinguishable at BS11: a
                            // before impact whose actual value conditions
                            // omega.
                            let sigma = coin_sign(rng);
                            let omega = if subensemble.is_interfering() {
                                bernoulli_sign(rng, omega_plus_t2[sigma.index()])
                            } else {
                                coin_sign(rng)
                            };
                            self.coincident_record(
                                trial,
                                Some(path),
                                subensemble,
                                path,
                                sigma,
                                omega,
                                rng,
                            )
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn coincident_record(
        &self,
        trial: u64,
        path: Option<PathPair>,
        subensemble: Subensemble,
        realized: PathPair,
        sigma: Sign,
        omega: Sign,
        rng: &mut ChaCha8Rng,
    ) -> EventRecord {
        let second = realized.photon2_second_arm.expect("coincident path");
        let mut t1 = self.times.t1(realized.photon1_arm);
        let mut t2 = self.times.t2(realized.photon2_first_arm, second);
        if let Some(normal) = &self.jitter {
            t1 += normal.sample(rng);
            t2 += normal.sample(rng);
        }
        EventRecord {
            trial,
            path,
            subensemble,
            sigma,
            omega: Some(omega),
            t1_s: t1,
            t2_s: Some(t2),
        }
    }

    fn lost_record(
        &self,
        trial: u64,
        path: Option<PathPair>,
        photon1_arm: Arm,
        sigma: Sign,
        rng: &mut ChaCha8Rng,
    ) -> EventRecord {
        let mut t1 = self.times.t1(photon1_arm);
        if let Some(normal) = &self.jitter {
            t1 += normal.sample(rng);
        }
        EventRecord {
            trial,
            path,
            subensemble: Subensemble::Lost,
            sigma,
            omega: None,
            t1_s: t1,
            t2_s: None,
        }
    }
}

impl Iterator for EventStream {
    type Item = EventRecord;

    fn next(&mut self) -> Option<EventRecord> {
        if self.buffer.is_empty() {
            if self.next_chunk * TRIALS_PER_CHUNK >= self.trials {
                return None;
            }
            self.buffer = self.chunk(self.next_chunk).into();
            self.next_chunk += 1;
        }
        self.buffer.pop_front()
    }
}

/// One detected peak of the time-delay spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPeak {
    pub center_s: f64,
    pub count: u64,
    /// Share of all coincidences falling in the peak bin.
    pub fraction: f64,
}

/// Histogram of measured time differences t2 - t1 over coincident events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    bin_width_s: f64,
    bins: BTreeMap<i64, u64>,
    pub total_coincidences: u64,
    pub peaks: Vec<SpectrumPeak>,
}

impl Spectrum {
    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_s
    }

    /// Occupied bins as (center, count), in increasing delay order.
    pub fn bins(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.bins
            .iter()
            .map(move |(&idx, &count)| (idx as f64 * self.bin_width_s, count))
    }

    /// Count in the bin containing the given delay.
    pub fn count_at(&self, delay_s: f64) -> u64 {
        let idx = (delay_s / self.bin_width_s).round() as i64;
        self.bins.get(&idx).copied().unwrap_or(0)
    }
}

/// Build the coincidence time-delay spectrum.
///
/// `peak_separation_s` is the smallest expected distance between peaks,
/// `(L - l)/c` for the standard arrangement; the bin width must stay below
/// half of it so neighboring peaks cannot merge.
pub fn histogram_time_delays<'a, I>(
    events: I,
    bin_width_s: f64,
    peak_separation_s: f64,
) -> Result<Spectrum>
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    let max_allowed = peak_separation_s / 2.0;
    if !bin_width_s.is_finite() || bin_width_s <= 0.0 || bin_width_s >= max_allowed {
        return Err(Error::BinWidthTooCoarse {
            bin_width_s,
            max_allowed_s: max_allowed,
        });
    }
    let mut bins: BTreeMap<i64, u64> = BTreeMap::new();
    let mut total = 0u64;
    for event in events {
        if let Some(delay) = event.delay_s() {
            *bins
                .entry((delay / bin_width_s).round() as i64)
                .or_insert(0) += 1;
            total += 1;
        }
    }
    let peaks = detect_peaks(&bins, bin_width_s, total);
    Ok(Spectrum {
        bin_width_s,
        bins,
        total_coincidences: total,
        peaks,
    })
}

/// Local maxima above 5% of the tallest bin. With ideal detectors each peak
/// occupies a single bin; jitter spreads them, and the floor keeps shoulder
/// bins from being reported.
fn detect_peaks(bins: &BTreeMap<i64, u64>, bin_width_s: f64, total: u64) -> Vec<SpectrumPeak> {
    let Some(&max_count) = bins.values().max() else {
        return Vec::new();
    };
    let floor = (max_count / 20).max(1);
    bins.iter()
        .filter(|(&idx, &count)| {
            let left = bins.get(&(idx - 1)).copied().unwrap_or(0);
            let right = bins.get(&(idx + 1)).copied().unwrap_or(0);
            count >= floor && count >= left && count > right
        })
        .map(|(&idx, &count)| SpectrumPeak {
            center_s: idx as f64 * bin_width_s,
            count,
            fraction: count as f64 / total as f64,
        })
        .collect()
}

/// Retain coincident events whose measured delay falls inside the window.
pub fn select_window<'a, I>(
    events: I,
    center_s: f64,
    width_s: f64,
) -> impl Iterator<Item = &'a EventRecord>
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    assert!(width_s > 0.0, "window width must be positive");
    events.into_iter().filter(move |event| {
        event
            .delay_s()
            .is_some_and(|delay| (delay - center_s).abs() <= width_s / 2.0)
    })
}

/// Coincidence counts per outcome pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    counts: [[u64; 2]; 2],
}

impl CoincidenceCounts {
    pub fn get(&self, sigma: Sign, omega: Sign) -> u64 {
        self.counts[sigma.index()][omega.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// A point estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Windowed correlator estimates from coincidence counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub counts: CoincidenceCounts,
    pub selected_events: u64,
    pub e_sigma_omega: Estimate,
    pub e_sigma: Estimate,
    pub e_omega: Estimate,
}

/// Estimate the three correlation coefficients from the coincident events.
///
/// Each coefficient is a ratio of signed counts; writing it as 2p - 1 with
/// p the agreeing fraction gives the binomial standard error 2 sqrt(p(1-p)/N).
pub fn estimate_correlators<'a, I>(events: I) -> Result<EstimateReport>
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    let mut counts = CoincidenceCounts::default();
    for event in events {
        if let Some(omega) = event.omega {
            counts.counts[event.sigma.index()][omega.index()] += 1;
        }
    }
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptySelection);
    }
    let estimate = |agree: u64| {
        let n = total as f64;
        let p = agree as f64 / n;
        // Signed-count ratio keeps exact rationals exact; 2p - 1 would not.
        Estimate {
            value: (agree as f64 - (total - agree) as f64) / n,
            std_error: 2.0 * (p * (1.0 - p) / n).sqrt(),
        }
    };
    let r = |s: Sign, o: Sign| counts.get(s, o);
    Ok(EstimateReport {
        counts,
        selected_events: total,
        e_sigma_omega: estimate(r(Sign::Plus, Sign::Plus) + r(Sign::Minus, Sign::Minus)),
        e_sigma: estimate(r(Sign::Plus, Sign::Plus) + r(Sign::Plus, Sign::Minus)),
        e_omega: estimate(r(Sign::Plus, Sign::Plus) + r(Sign::Minus, Sign::Plus)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathspace::ArmLengths;
    use crate::relativity::SetupGeometry;

    fn geometry() -> SetupGeometry {
        SetupGeometry::at_rest(ArmLengths::new(2.0, 1.7, 0.5).unwrap(), -5.0, 5.0, 6.0).unwrap()
    }

    fn config(theory: Theory, timing: Option<Timing>, phases: PhaseSettings) -> RunConfig {
        RunConfig {
            theory,
            timing,
            phases,
            geometry: geometry(),
            trials: 200_000,
            seed: 7,
            jitter_sigma_s: 0.0,
            window_center_s: 0.0,
            window_width_s: 0.4e-9,
        }
    }

    fn within_sigmas(observed: f64, expected: f64, n: f64, sigmas: f64) -> bool {
        let se = (expected * (1.0 - expected) / n).sqrt();
        (observed - expected).abs() <= sigmas * se
    }

    #[test]
    fn same_seed_gives_identical_streams() {
        let cfg = config(Theory::Qm, None, PhaseSettings::zero());
        let a: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let b: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.trials as usize);
    }

    #[test]
    fn different_seeds_differ() {
        let cfg_a = config(Theory::Qm, None, PhaseSettings::zero());
        let mut cfg_b = cfg_a.clone();
        cfg_b.seed = 8;
        let a: Vec<EventRecord> = sample_qm(&cfg_a).unwrap().collect();
        let b: Vec<EventRecord> = sample_qm(&cfg_b).unwrap().collect();
        assert_ne!(a, b);
    }

    #[test]
    fn chunk_order_does_not_matter() {
        let mut cfg = config(
            Theory::Ms,
            Some(Timing::T1),
            PhaseSettings::new(0.4, 1.1, 2.0),
        );
        cfg.trials = 3 * TRIALS_PER_CHUNK + 17;
        let stream = sample_ms(&cfg).unwrap();
        let serial: Vec<EventRecord> = {
            let s = sample_ms(&cfg).unwrap();
            s.collect()
        };
        // Generate the chunks in reverse order and reassemble.
        let n_chunks = cfg.trials.div_ceil(TRIALS_PER_CHUNK);
        let mut chunks: Vec<Vec<EventRecord>> =
            (0..n_chunks).rev().map(|i| stream.chunk(i)).collect();
        chunks.reverse();
        let merged: Vec<EventRecord> = chunks.into_iter().flatten().collect();
        assert_eq!(serial, merged);
    }

    #[test]
    fn qm_windowed_frequencies_match_the_table() {
        let cfg = config(Theory::Qm, None, PhaseSettings::zero());
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let selected: Vec<&EventRecord> = select_window(&events, 0.0, cfg.window_width_s).collect();
        let n = selected.len() as f64;
        let pp = selected
            .iter()
            .filter(|e| e.sigma == Sign::Plus && e.omega == Some(Sign::Plus))
            .count() as f64;
        // Conditional on subpopulation L: (9/64)/(3/16) = 3/4.
        assert!(within_sigmas(pp / n, 0.75, n, 4.0));
        // All selected events are subpopulation L with ideal detectors.
        assert!(selected.iter().all(|e| e.subensemble == Subensemble::Long));
    }

    #[test]
    fn lost_fraction_is_one_half() {
        let cfg = config(Theory::Qm, None, PhaseSettings::new(0.9, 0.2, 1.4));
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let lost = events.iter().filter(|e| !e.is_coincident()).count() as f64;
        let n = events.len() as f64;
        assert!(within_sigmas(lost / n, 0.5, n, 4.0));
    }

    #[test]
    fn ms_t1_matches_qm_table_in_the_window() {
        let phases = PhaseSettings::new(0.3, 0.8, 1.9);
        let cfg = config(Theory::Ms, Some(Timing::T1), phases);
        let events: Vec<EventRecord> = sample_ms(&cfg).unwrap().collect();
        let selected: Vec<&EventRecord> = select_window(&events, 0.0, cfg.window_width_s).collect();
        let table = predict::qm_joint(&phases);
        let n = selected.len() as f64;
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                let expected = table.joint(sigma, omega) / table.total();
                let observed = selected
                    .iter()
                    .filter(|e| e.sigma == sigma && e.omega == Some(omega))
                    .count() as f64
                    / n;
                assert!(
                    within_sigmas(observed, expected, n, 4.0),
                    "({sigma},{omega}): {observed} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn ms_t2_refuses_invalid_phases() {
        let cfg = config(Theory::Ms, Some(Timing::T2), PhaseSettings::zero());
        let err = sample_ms(&cfg).unwrap_err();
        let Error::InvalidProbability {
            timing,
            sigma,
            omega,
            value,
        } = err
        else {
            panic!("expected InvalidProbability, got {err:?}");
        };
        assert_eq!(timing, Timing::T2);
        assert_eq!(sigma, Sign::Plus);
        assert_eq!(omega, Sign::Minus);
        assert!((value + 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn ms_t3_needs_the_t2_conditionals_in_range() {
        // T3's own closed form is fine at zero phases, but the chain's
        // omega conditional runs through the T2 rule, which is not.
        let cfg = config(Theory::Ms, Some(Timing::T3), PhaseSettings::zero());
        let err = sample_ms(&cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidProbability {
                timing: Timing::T3,
                ..
            }
        ));
    }

    #[test]
    fn ms_t3_valid_phases_match_its_table() {
        let phases = PhaseSettings::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let cfg = config(Theory::Ms, Some(Timing::T3), phases);
        let events: Vec<EventRecord> = sample_ms(&cfg).unwrap().collect();
        let selected: Vec<&EventRecord> = select_window(&events, 0.0, cfg.window_width_s).collect();
        let table = predict::ms_joint(Timing::T3, &phases);
        let n = selected.len() as f64;
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                let expected = table.joint(sigma, omega) / table.total();
                let observed = selected
                    .iter()
                    .filter(|e| e.sigma == sigma && e.omega == Some(omega))
                    .count() as f64
                    / n;
                assert!(
                    within_sigmas(observed, expected, n, 4.0),
                    "({sigma},{omega}): {observed} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn ms_t2_windowed_estimates_at_valid_phases() {
        // At alpha = gamma = 0, beta = pi/2 the T2 engine is valid; its
        // windowed E_sigma vanishes identically while E_omega tracks
        // (2/3)cos(gamma - beta) = 0 and E_sigma_omega stays at 2/3.
        let phases = PhaseSettings::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let cfg = config(Theory::Ms, Some(Timing::T2), phases);
        let events: Vec<EventRecord> = sample_ms(&cfg).unwrap().collect();
        let selected: Vec<&EventRecord> = select_window(&events, 0.0, cfg.window_width_s).collect();
        let report = estimate_correlators(selected).unwrap();
        assert!(report.e_sigma.value.abs() <= 4.0 * report.e_sigma.std_error);
        assert!(
            (report.e_sigma_omega.value - 2.0 / 3.0).abs() <= 4.0 * report.e_sigma_omega.std_error
        );
    }

    #[test]
    fn ms_timestamps_follow_the_realized_path() {
        let cfg = config(
            Theory::Ms,
            Some(Timing::T1),
            PhaseSettings::new(1.0, 0.5, 0.1),
        );
        for event in sample_ms(&cfg).unwrap().take(20_000) {
            let path = event.path.expect("MS records carry paths");
            match event.delay_s() {
                Some(delay) => {
                    let signature =
                        crate::pathspace::time_signature(&path, &cfg.geometry.arms).unwrap();
                    assert!(
                        (delay - signature).abs() < 1e-18,
                        "delay {delay} vs signature {signature}"
                    );
                }
                None => assert_eq!(event.subensemble, Subensemble::Lost),
            }
        }
    }

    #[test]
    fn nonselective_sigma_marginal_stays_flat() {
        for (theory, timing, phases) in [
            (Theory::Qm, None, PhaseSettings::new(0.2, 0.9, 2.2)),
            (
                Theory::Ms,
                Some(Timing::T1),
                PhaseSettings::new(0.2, 0.9, 2.2),
            ),
            (
                Theory::Ms,
                Some(Timing::T2),
                PhaseSettings::new(0.0, std::f64::consts::FRAC_PI_2, 0.0),
            ),
            (
                Theory::Ms,
                Some(Timing::T3),
                PhaseSettings::new(0.0, std::f64::consts::FRAC_PI_2, 0.0),
            ),
        ] {
            let cfg = config(theory, timing, phases);
            let events: Vec<EventRecord> = sample_events(&cfg).unwrap().collect();
            let plus = events.iter().filter(|e| e.sigma == Sign::Plus).count() as f64;
            let n = events.len() as f64;
            assert!(
                within_sigmas(plus / n, 0.5, n, 4.0),
                "{theory} {timing:?}: {}",
                plus / n
            );
        }
    }

    #[test]
    fn spectrum_shows_four_clean_peaks() {
        let cfg = config(Theory::Qm, None, PhaseSettings::zero());
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let separation = cfg.geometry.arms.peak_separation_s();
        let spectrum = histogram_time_delays(&events, 0.1e-9, separation).unwrap();
        // Ideal detectors put every count in exactly four bins.
        assert_eq!(spectrum.bins().count(), 4);
        assert_eq!(spectrum.peaks.len(), 4);
        assert!(spectrum.count_at(0.0) > 0);
        assert_eq!(spectrum.count_at(separation / 2.0), 0);
        let expected_centers = [-2.0 * separation, -separation, 0.0, separation];
        for (peak, expected) in spectrum.peaks.iter().zip(expected_centers) {
            assert!(
                (peak.center_s - expected).abs() <= spectrum.bin_width_s(),
                "peak at {} vs expected {expected}",
                peak.center_s
            );
        }
        // Weights 1 : 3 : 3 : 1 over the detected half.
        let n = spectrum.total_coincidences as f64;
        for (peak, expected) in spectrum.peaks.iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert!(within_sigmas(peak.count as f64 / n, expected, n, 4.0));
        }
    }

    #[test]
    fn jittered_spectrum_still_finds_the_peaks() {
        let mut cfg = config(Theory::Qm, None, PhaseSettings::zero());
        cfg.jitter_sigma_s = 0.05e-9;
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let separation = cfg.geometry.arms.peak_separation_s();
        let spectrum = histogram_time_delays(&events, 0.1e-9, separation).unwrap();
        assert!(spectrum.bins().count() > 4);
        assert_eq!(spectrum.peaks.len(), 4);
    }

    #[test]
    fn bin_width_must_resolve_peaks() {
        let cfg = config(Theory::Qm, None, PhaseSettings::zero());
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().take(100).collect();
        let separation = cfg.geometry.arms.peak_separation_s();
        let err = histogram_time_delays(&events, separation, separation).unwrap_err();
        assert!(matches!(err, Error::BinWidthTooCoarse { .. }));
    }

    #[test]
    fn window_selects_the_requested_subensemble() {
        let cfg = config(Theory::Qm, None, PhaseSettings::zero());
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let separation = cfg.geometry.arms.peak_separation_s();
        // Window on the subensemble-l peak at (l - L)/c.
        let selected: Vec<&EventRecord> = select_window(&events, -separation, 0.4e-9).collect();
        assert!(!selected.is_empty());
        assert!(selected.iter().all(|e| e.subensemble == Subensemble::Short));
        // An effectively infinite window keeps every coincidence.
        let all: Vec<&EventRecord> = select_window(&events, 0.0, 1.0).collect();
        assert_eq!(
            all.len(),
            events.iter().filter(|e| e.is_coincident()).count()
        );
    }

    #[test]
    fn estimates_from_exact_counts() {
        // Counts proportional to (9, 1, 1, 1) give E_sigma_omega = 2/3.
        let mut events = Vec::new();
        let mut push = |sigma, omega, copies: usize| {
            for _ in 0..copies {
                events.push(EventRecord {
                    trial: events.len() as u64,
                    path: None,
                    subensemble: Subensemble::Long,
                    sigma,
                    omega: Some(omega),
                    t1_s: 0.0,
                    t2_s: Some(0.0),
                });
            }
        };
        push(Sign::Plus, Sign::Plus, 90);
        push(Sign::Plus, Sign::Minus, 10);
        push(Sign::Minus, Sign::Plus, 10);
        push(Sign::Minus, Sign::Minus, 10);
        let report = estimate_correlators(&events).unwrap();
        assert_eq!(report.selected_events, 120);
        assert_eq!(report.e_sigma_omega.value, 2.0 / 3.0);
        assert_eq!(report.e_sigma.value, 2.0 / 3.0);
        assert_eq!(report.e_omega.value, 2.0 / 3.0);
        assert!(report.e_sigma_omega.std_error > 0.0);

        // Flat counts kill every correlator.
        let mut flat = Vec::new();
        for sigma in Sign::BOTH {
            for omega in Sign::BOTH {
                flat.push(EventRecord {
                    trial: 0,
                    path: None,
                    subensemble: Subensemble::Long,
                    sigma,
                    omega: Some(omega),
                    t1_s: 0.0,
                    t2_s: Some(0.0),
                });
            }
        }
        let report = estimate_correlators(&flat).unwrap();
        assert_eq!(report.e_sigma_omega.value, 0.0);
        assert_eq!(report.e_sigma.value, 0.0);
        assert_eq!(report.e_omega.value, 0.0);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let events: Vec<EventRecord> = Vec::new();
        assert!(matches!(
            estimate_correlators(&events).unwrap_err(),
            Error::EmptySelection
        ));
    }

    #[test]
    fn qm_estimator_recovers_the_correlator() {
        let phases = PhaseSettings::new(0.0, 0.4, 0.0);
        let cfg = config(Theory::Qm, None, phases);
        let events: Vec<EventRecord> = sample_qm(&cfg).unwrap().collect();
        let selected: Vec<&EventRecord> = select_window(&events, 0.0, cfg.window_width_s).collect();
        let report = estimate_correlators(selected).unwrap();
        let expected = predict::qm_correlators(&phases);
        assert!(
            (report.e_sigma_omega.value - expected.e_sigma_omega).abs()
                <= 4.0 * report.e_sigma_omega.std_error
        );
    }

    #[test]
    fn run_config_validation() {
        let mut cfg = config(Theory::Qm, None, PhaseSettings::zero());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = config(Theory::Qm, None, PhaseSettings::zero());
        cfg.window_width_s = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = config(Theory::Ms, Some(Timing::T1), PhaseSettings::zero());
        cfg.timing = None;
        assert!(cfg.validate().is_err());

        let mut cfg = config(Theory::Qm, None, PhaseSettings::zero());
        cfg.jitter_sigma_s = -1.0;
        assert!(cfg.validate().is_err());
    }
}
