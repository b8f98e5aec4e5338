//! Seeded synthetic CSI recordings, leave-one-velocity-out splits, and
//! ingestion of externally converted datasets.
//!
//! Each recording is a moving arm that shadows the static path and adds a
//! reflected path. The channel at subcarrier `k` and packet `t` is
//!
//! ```text
//! H = A0(k) * F(k, tau) * (1 + r(tau) * exp(-i*s*2*pi*k*m(tau)/S)) * exp(-i*2*pi*d(tau)*k/S)
//! F = |1 + rho(tau) * exp(-i*2*pi*k*delta(tau)/S)|
//! ```
//!
//! `F` is a real, frequency-selective attenuation that follows the activity's
//! trajectory template (`rho`, `delta`). The reflected path `(r, m)` has the
//! same strength and delay for every moving activity; only its direction
//! `s = +-1` depends on the activity. `d` is the path-length change since the
//! first packet and `tau = factor * t / T` is template time for the execution
//! speed. Amplitude and the true phase each get Gaussian noise. Hardware
//! impairments then add `alpha_t * k + beta_t` to the phase before wrapping
//! into (-pi, pi].
//!
//! Templates come in mirror pairs that share `F` and differ only in `s`:
//! amplitude tells the groups apart, while the direction of motion, which
//! separates the two members of a pair, is visible only in the phase. The
//! impairments drift with bounded per-packet steps so temporal unwrapping is
//! exact and sanitization removes precisely the injected linear term.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::csi::{ComplexCsi, CsiShape, Dataset, LabeledSample, Velocity};
use crate::csib;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Activity names in label order.
pub const ACTIVITY_NAMES: [&str; 8] = [
    "Arc",
    "Elbow",
    "Rectangle",
    "Silence",
    "SLFW",
    "SLRL",
    "SLUD",
    "Triangle",
];

/// Relative shadowing strength at full occlusion.
const RHO_SCALE: f64 = 0.3;
/// Strength of the reflected path shared by all moving activities.
const REFLECT_SCALE: f64 = 0.25;
/// Bound on the per-packet change of the impairment slope and offset.
const ALPHA_STEP: f64 = 0.015;
const BETA_STEP: f64 = 0.3;
/// Impairments at the first packet stay small so nothing wraps across subcarriers there.
const ALPHA_START: f64 = 0.005;
const BETA_START: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subcarriers: usize,
    pub timestamps: usize,
    /// Receiver channels per recording.
    pub channels: usize,
    pub classes: usize,
    pub samples_per_cell: usize,
    /// Template-time scale for V1, V2, V3.
    pub velocity_factors: [f64; 3],
    pub noise_std: f64,
    /// Impairment slope range in rad/subcarrier.
    pub alpha_range: (f64, f64),
    /// Impairment offset range in rad.
    pub beta_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subcarriers: 64,
            timestamps: 128,
            channels: 1,
            classes: 8,
            samples_per_cell: 40,
            velocity_factors: [0.5, 1.0, 2.0],
            noise_std: 0.05,
            alpha_range: (-0.2, 0.2),
            beta_range: (-PI, PI),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.subcarriers < 2 || self.timestamps < 2 || self.channels == 0 {
            return bad("need at least 2 subcarriers, 2 timestamps and 1 channel");
        }
        if !(2..=ACTIVITY_NAMES.len()).contains(&self.classes) {
            return bad("classes must lie in 2..=8");
        }
        if self.samples_per_cell == 0 {
            return bad("samples_per_cell must be positive");
        }
        let [f1, f2, f3] = self.velocity_factors;
        if !(f1 > 0.0 && f1 < f2 && f2 < f3) {
            return bad("velocity factors must be positive and strictly increasing");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be a finite nonnegative number");
        }
        let (alo, ahi) = self.alpha_range;
        let (blo, bhi) = self.beta_range;
        if !(alo <= -ALPHA_START && ahi >= ALPHA_START && blo <= -BETA_START && bhi >= BETA_START) {
            return bad("impairment ranges must contain the start region");
        }
        // The impairment's packet-to-packet change must leave ample room
        // below pi for motion and noise, or unwrapping would see false wraps.
        if ALPHA_STEP * self.subcarriers as f64 + BETA_STEP > 2.0 {
            return bad("too many subcarriers for wrap-free impairment drift");
        }
        Ok(())
    }

    pub fn shape(&self) -> CsiShape {
        CsiShape {
            subcarriers: self.subcarriers,
            timestamps: self.timestamps,
            channels: self.channels,
        }
    }
}

/// Noise-free and impairment-free quantities kept for one receiver channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTruth {
    /// `|H|` before noise.
    pub clean_amplitude: Array2<f64>,
    /// Phase of `H` before noise and impairments (unwrapped).
    pub clean_phase: Array2<f64>,
    /// True phase including noise, before impairments.
    pub true_phase: Array2<f64>,
    /// Per-packet impairment slope and offset.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub sample: LabeledSample,
    pub truth: Vec<ChannelTruth>,
}

/// Trajectory state at template time `tau`: shadowing strength in [0, 1],
/// shadowing delay in subcarrier cycles, and path-length change scale.
struct TemplateState {
    g: f64,
    delta: f64,
    d: f64,
}

/// Back-and-forth progress along a path, period 1.
fn sweep(tau: f64) -> f64 {
    1.0 - (2.0 * tau.rem_euclid(1.0) - 1.0).abs()
}

/// Loop progress, period 1.
fn cycle(tau: f64) -> f64 {
    tau.rem_euclid(1.0)
}

/// Direction of the reflected path: `+1`, `-1`, or `0` when nothing moves.
fn direction(class: usize) -> f64 {
    match class {
        3 => 0.0,
        1 | 5 | 7 => -1.0,
        _ => 1.0,
    }
}

/// Shadowing template; mirror pairs (0, 1), (4, 5), (6, 7) share it.
fn template(class: usize, tau: f64) -> TemplateState {
    let u = sweep(tau);
    let w = cycle(tau);
    match class {
        // arc: shadowing peaks mid-sweep while the delay grows
        0 | 1 => TemplateState {
            g: 0.3 + 0.7 * (PI * u).sin(),
            delta: 1.0 + 1.2 * u,
            d: 0.5 * (PI * u).sin(),
        },
        // rectangle: four straight legs around a loop
        2 => {
            let leg = (w * 4.0).floor() as usize;
            let f = w * 4.0 - leg as f64;
            let (x, y) = match leg {
                0 => (f, 0.0),
                1 => (1.0, f),
                2 => (1.0 - f, 1.0),
                _ => (0.0, 1.0 - f),
            };
            TemplateState {
                g: 0.35 + 0.6 * y,
                delta: 2.6 + 0.8 * x,
                d: 0.4 * (x + y),
            }
        }
        // silence: nothing moves
        3 => TemplateState {
            g: 0.0,
            delta: 1.0,
            d: 0.0,
        },
        // straight lines: shadowing ramps with distance
        4 | 5 => TemplateState {
            g: 0.2 + 0.8 * u,
            delta: 1.8,
            d: 0.6 * u,
        },
        6 | 7 => TemplateState {
            g: 0.6 + 0.4 * (2.0 * PI * u).cos(),
            delta: 0.6 + 0.8 * u,
            d: 0.3 * u,
        },
        _ => unreachable!("class index checked by SynthConfig::validate"),
    }
}

/// Reflected-path strength and delay, common to all moving activities.
fn reflection(tau: f64) -> (f64, f64) {
    let u = sweep(tau);
    (REFLECT_SCALE * (0.6 + 0.4 * u), 1.4 + 0.6 * u)
}

/// Bounded random walk that reflects off the range edges.
fn drift(rng: &mut SeededRng, n: usize, start: f64, step: f64, (lo, hi): (f64, f64)) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    let mut x = rng.uniform_range(-start, start);
    for _ in 0..n {
        v.push(x);
        x += rng.uniform_range(-step, step);
        if x > hi {
            x = 2.0 * hi - x;
        } else if x < lo {
            x = 2.0 * lo - x;
        }
    }
    v
}

fn synth_channel(
    cfg: &SynthConfig,
    class: usize,
    factor: f64,
    channel: usize,
    rng: &mut SeededRng,
) -> Result<(ComplexCsi, ChannelTruth)> {
    let (s, t) = (cfg.subcarriers, cfg.timestamps);
    let sf = s as f64;
    // per-recording variation: start offset, strength and delay jitter,
    // smooth static frequency response
    let tau0 = rng.uniform_range(0.0, 0.03);
    let g_jitter = rng.uniform_range(0.9, 1.1);
    let delta_jitter = rng.uniform_range(0.9, 1.1);
    let r_jitter = rng.uniform_range(0.9, 1.1);
    let dir = direction(class);
    let delta_shift = 0.25 * channel as f64;
    let ripple: Vec<(f64, f64)> = (0..2)
        .map(|_| (0.1 * rng.uniform(), rng.uniform_range(0.0, 2.0 * PI)))
        .collect();
    let a0: Vec<f64> = (1..=s)
        .map(|k| {
            1.0 + ripple
                .iter()
                .enumerate()
                .map(|(m, (a, p))| a * (2.0 * PI * (m + 1) as f64 * k as f64 / sf + p).cos())
                .sum::<f64>()
        })
        .collect();

    let tau_at = |ti: usize| tau0 + factor * ti as f64 / t as f64;
    let d_start = template(class, tau_at(0)).d;

    let mut clean_amplitude = Array2::zeros((s, t));
    let mut clean_phase = Array2::zeros((s, t));
    for ti in 0..t {
        let tau = tau_at(ti);
        let st = template(class, tau);
        let rho = RHO_SCALE * st.g * g_jitter;
        let delta = st.delta * delta_jitter + delta_shift;
        let (r, m) = reflection(tau);
        let r = r * dir.abs() * r_jitter;
        let d = st.d - d_start;
        for k in 1..=s {
            let kf = k as f64;
            let phi = 2.0 * PI * kf * delta / sf;
            let shadow = (1.0 + rho * phi.cos()).hypot(rho * phi.sin());
            // 1 + r * exp(-i s psi)
            let psi = dir * 2.0 * PI * kf * (m + delta_shift) / sf;
            let (re, im) = (1.0 + r * psi.cos(), -r * psi.sin());
            clean_amplitude[[k - 1, ti]] = a0[k - 1] * shadow * re.hypot(im);
            clean_phase[[k - 1, ti]] = im.atan2(re) - 2.0 * PI * d * kf / sf;
        }
    }

    let alpha = drift(rng, t, ALPHA_START, ALPHA_STEP, cfg.alpha_range);
    let beta = drift(rng, t, BETA_START, BETA_STEP, cfg.beta_range);
    let mut amplitude = clean_amplitude.clone();
    let mut true_phase = clean_phase.clone();
    let mut observed = Array2::zeros((s, t));
    for ti in 0..t {
        for k in 1..=s {
            let a = &mut amplitude[[k - 1, ti]];
            *a = (*a + cfg.noise_std * rng.normal()).abs();
            let th = &mut true_phase[[k - 1, ti]];
            *th += cfg.noise_std * rng.normal();
            observed[[k - 1, ti]] = *th + alpha[ti] * k as f64 + beta[ti];
        }
    }
    let csi = ComplexCsi::from_polar(&amplitude, &observed)?;
    Ok((
        csi,
        ChannelTruth {
            clean_amplitude,
            clean_phase,
            true_phase,
            alpha,
            beta,
        },
    ))
}

/// Generates recordings with their ground truth, ordered by velocity, then
/// class, then repetition. Sample `i` draws from its own stream derived from
/// `(seed, i)`.
pub fn generate_with_truth(cfg: &SynthConfig) -> Result<Vec<SyntheticSample>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(3 * cfg.classes * cfg.samples_per_cell);
    for (vi, velocity) in Velocity::ALL.into_iter().enumerate() {
        for class in 0..cfg.classes {
            for _ in 0..cfg.samples_per_cell {
                let index = out.len() as u64;
                let mut rng = SeededRng::derive(cfg.seed, index);
                let mut channels = Vec::with_capacity(cfg.channels);
                let mut truth = Vec::with_capacity(cfg.channels);
                for ch in 0..cfg.channels {
                    let (csi, tr) =
                        synth_channel(cfg, class, cfg.velocity_factors[vi], ch, &mut rng)?;
                    channels.push(csi);
                    truth.push(tr);
                }
                out.push(SyntheticSample {
                    sample: LabeledSample::new(channels, class, velocity)?,
                    truth,
                });
            }
        }
    }
    Ok(out)
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<LabeledSample>> {
    Ok(generate_with_truth(cfg)?
        .into_iter()
        .map(|s| s.sample)
        .collect())
}

pub fn generate_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    Dataset::new(cfg.shape(), generate(cfg)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LovoSplit {
    pub held_out: Velocity,
    /// Indices of samples recorded at the other two velocities.
    pub train: Vec<usize>,
    /// Indices of samples recorded at `held_out`.
    pub test: Vec<usize>,
}

pub fn lovo_split(samples: &[LabeledSample], held_out: Velocity) -> Result<LovoSplit> {
    let tags: Vec<Velocity> = samples.iter().map(|s| s.velocity).collect();
    lovo_split_tags(&tags, held_out)
}

/// [`lovo_split`] over bare velocity tags.
pub fn lovo_split_tags(velocities: &[Velocity], held_out: Velocity) -> Result<LovoSplit> {
    for v in Velocity::ALL {
        if !velocities.contains(&v) {
            return Err(Error::Data(format!("no samples recorded at velocity {v}")));
        }
    }
    let (test, train) = (0..velocities.len()).partition(|&i| velocities[i] == held_out);
    Ok(LovoSplit {
        held_out,
        train,
        test,
    })
}

/// Carves a validation set of `fraction` of each class out of `indices`,
/// shuffled by `seed`. Returns `(train, val)`, each in ascending order.
/// Every class keeps at least one training sample.
pub fn stratified_split(
    indices: &[usize],
    labels: impl Fn(usize) -> usize,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        by_class.entry(labels(i)).or_default().push(i);
    }
    let mut rng = SeededRng::derive(seed, 0x76616c);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for members in by_class.values_mut() {
        rng.shuffle(members);
        let n_val = ((members.len() as f64 * fraction).round() as usize).min(members.len() - 1);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// What an external dataset is expected to contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDescriptor {
    pub classes: usize,
    pub velocities: usize,
    pub names: Vec<String>,
}

impl Default for SchemaDescriptor {
    fn default() -> Self {
        Self {
            classes: ACTIVITY_NAMES.len(),
            velocities: 3,
            names: ACTIVITY_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SchemaDescriptor {
    /// Parses `key=value` lines (`classes`, `velocities`, comma-separated
    /// `names`); blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut classes = None;
        let mut velocities = None;
        let mut names = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("schema line {}: expected key=value", n + 1)))?;
            let number = |v: &str| {
                v.trim().parse::<usize>().map_err(|_| {
                    Error::Data(format!("schema line {}: `{v}` is not a count", n + 1))
                })
            };
            match key.trim() {
                "classes" => classes = Some(number(value)?),
                "velocities" => velocities = Some(number(value)?),
                "names" => {
                    names = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                other => {
                    return Err(Error::Data(format!(
                        "schema line {}: unknown key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        let classes = classes.ok_or_else(|| Error::Data("schema lacks `classes`".into()))?;
        let velocities = velocities.unwrap_or(3);
        if !names.is_empty() && names.len() != classes {
            return Err(Error::Data(format!(
                "schema lists {} names for {classes} classes",
                names.len()
            )));
        }
        if classes == 0 || velocities == 0 || velocities > 3 {
            return Err(Error::Data(
                "schema needs classes >= 1 and 1..=3 velocities".into(),
            ));
        }
        Ok(Self {
            classes,
            velocities,
            names,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Reads a CSIB file and checks every label and velocity against `schema`.
pub fn ingest_external(
    path: impl AsRef<Path>,
    schema: &SchemaDescriptor,
) -> Result<Vec<LabeledSample>> {
    let dataset = csib::read_csib(path)?;
    for (index, s) in dataset.samples.iter().enumerate() {
        if s.label >= schema.classes {
            return Err(Error::Validation {
                index,
                reason: format!("label {} outside 0..{}", s.label, schema.classes),
            });
        }
        if s.velocity.code() as usize >= schema.velocities {
            return Err(Error::Validation {
                index,
                reason: format!(
                    "velocity code {} outside 0..{}",
                    s.velocity.code(),
                    schema.velocities
                ),
            });
        }
    }
    Ok(dataset.samples)
}

/// Accuracy in percent of assigning each test vector to the nearest
/// (Euclidean) class mean of the training vectors.
pub fn nearest_centroid_accuracy(
    train: &[(Vec<f64>, usize)],
    test: &[(Vec<f64>, usize)],
) -> Result<f64> {
    let dim = train
        .first()
        .ok_or(Error::EmptyInput("nearest-centroid training set"))?
        .0
        .len();
    if test.is_empty() {
        return Err(Error::EmptyInput("nearest-centroid test set"));
    }
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for (x, y) in train {
        if x.len() != dim {
            return Err(Error::Shape("feature vectors differ in length".into()));
        }
        let (sum, n) = sums.entry(*y).or_insert_with(|| (vec![0.0; dim], 0));
        sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        *n += 1;
    }
    let centroids: Vec<(usize, Vec<f64>)> = sums
        .into_iter()
        .map(|(c, (sum, n))| (c, sum.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    let mut correct = 0;
    for (x, y) in test {
        if x.len() != dim {
            return Err(Error::Shape("feature vectors differ in length".into()));
        }
        let best = centroids
            .iter()
            .map(|(c, m)| {
                (
                    *c,
                    m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
                )
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c);
        if best == Some(*y) {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / test.len() as f64)
}
