//! Dataset plumbing: synthetic frequency-discrimination task generation,
//! a plain-text spike-raster format, channel binning, and deterministic
//! splits.
//!
//! The synthetic task is designed so that *frequency selectivity* is the
//! discriminative feature: every class shares the same mean firing rate
//! and differs only in the sinusoidal modulation frequency of its
//! channels' firing probability. A rate-code readout therefore carries no
//! class information beyond noise; discriminating classes requires
//! sensitivity to the temporal structure.
//!
//! Generation is deterministic and parallel-safe: a documented
//! splitmix-style stream derives one seed per sample from the master
//! seed, so samples can be generated in any order (or on any number of
//! threads) with bit-identical results.

use std::fs;
use std::io::{BufRead, BufReader, Write as IoWrite};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::parallel;
use crate::Result;

/// A binary spike raster: `t_bins` time steps of `channels` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRaster {
    t_bins: usize,
    channels: usize,
    dt: f64,
    /// Row-major `t_bins x channels`, each entry 0 or 1.
    spikes: Vec<u8>,
    label: usize,
}

impl SpikeRaster {
    /// Builds a raster from raw bits, validating shape and binariness.
    pub fn from_bits(
        t_bins: usize,
        channels: usize,
        dt: f64,
        label: usize,
        spikes: Vec<u8>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("raster dt must be positive, got {dt}")));
        }
        if spikes.len() != t_bins * channels {
            return Err(Error::Config(format!(
                "raster expects {} entries ({t_bins} x {channels}), got {}",
                t_bins * channels,
                spikes.len()
            )));
        }
        if let Some(bad) = spikes.iter().find(|&&b| b > 1) {
            return Err(Error::Config(format!("raster entries must be 0 or 1, found {bad}")));
        }
        Ok(Self { t_bins, channels, dt, spikes, label })
    }

    pub fn t_bins(&self) -> usize {
        self.t_bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Raw row-major bits.
    pub fn bits(&self) -> &[u8] {
        &self.spikes
    }

    /// One time step's channel bits.
    pub fn row(&self, k: usize) -> &[u8] {
        &self.spikes[k * self.channels..(k + 1) * self.channels]
    }

    pub fn get(&self, k: usize, n: usize) -> bool {
        self.spikes[k * self.channels + n] == 1
    }

    /// Dense double-precision copy (row-major `t_bins x channels`),
    /// the shape the layer forward pass consumes.
    pub fn dense_f64(&self) -> Vec<f64> {
        self.spikes.iter().map(|&b| b as f64).collect()
    }

    /// Total spike count.
    pub fn count(&self) -> usize {
        self.spikes.iter().map(|&b| b as usize).sum()
    }

    /// Mean firing probability per channel-step.
    pub fn rate(&self) -> f64 {
        self.count() as f64 / self.spikes.len() as f64
    }
}

/// SplitMix64 step: advances `state` by the golden-gamma increment and
/// returns the finalized output. This is the documented stream used to
/// derive per-sample seeds from a master seed.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Configuration of the synthetic frequency-discrimination generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Class modulation frequencies (Hz). Class `c` is `classes_hz[c]`.
    pub classes_hz: Vec<f64>,
    pub channels: usize,
    pub t_bins: usize,
    /// Time step (seconds).
    pub dt: f64,
    /// Baseline firing probability per channel-step.
    pub base_rate: f64,
    /// Modulation depth in [0, 1].
    pub depth: f64,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.classes_hz.is_empty() {
            problems.push("at least one class frequency is required".to_string());
        }
        let nyquist = 1.0 / (2.0 * self.dt);
        for (c, &f) in self.classes_hz.iter().enumerate() {
            if !(f.is_finite() && f >= 0.0) {
                problems.push(format!("class {c} frequency must be nonnegative, got {f}"));
            } else if f >= nyquist {
                problems.push(format!(
                    "class {c} frequency {f} Hz aliases: it must stay below 1/(2 dt) = {nyquist} Hz"
                ));
            }
        }
        if self.channels == 0 {
            problems.push("channels must be at least 1".to_string());
        }
        if self.t_bins == 0 {
            problems.push("t_bins must be at least 1".to_string());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.base_rate.is_finite() && (0.0..=1.0).contains(&self.base_rate)) {
            problems.push(format!("base_rate must lie in [0,1], got {}", self.base_rate));
        }
        if !(self.depth.is_finite() && (0.0..=1.0).contains(&self.depth)) {
            problems.push(format!("depth must lie in [0,1], got {}", self.depth));
        }
        if self.train_per_class == 0 {
            problems.push("train_per_class must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Dataset description persisted as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub classes_hz: Vec<f64>,
    pub channels: usize,
    pub t_bins: usize,
    pub dt: f64,
    pub base_rate: f64,
    pub depth: f64,
    pub seed: u64,
    pub train_per_class: usize,
    pub val_per_class: usize,
    /// Total sample counts per split (class count times per-class count).
    pub n_train: usize,
    pub n_val: usize,
}

impl DatasetManifest {
    pub fn class_count(&self) -> usize {
        self.classes_hz.len()
    }
}

/// An in-memory dataset with its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: Vec<SpikeRaster>,
    pub val: Vec<SpikeRaster>,
}

impl Dataset {
    pub fn class_count(&self) -> usize {
        self.manifest.class_count()
    }
}

/// Generates one sample: channel `n` fires at step `k` with probability
/// `clamp(base_rate * (1 + depth * sin(2 pi f_c k dt + phi_n)), 0, 1)`,
/// drawn independently from the sample's own generator. Draws proceed
/// step-major then channel, so the layout is reproducible by contract.
fn generate_sample(cfg: &GeneratorConfig, phases: &[f64], label: usize, seed: u64) -> SpikeRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = cfg.classes_hz[label];
    let mut spikes = Vec::with_capacity(cfg.t_bins * cfg.channels);
    for k in 0..cfg.t_bins {
        let arg = std::f64::consts::TAU * f * k as f64 * cfg.dt;
        for &phi in phases {
            let p = (cfg.base_rate * (1.0 + cfg.depth * (arg + phi).sin())).clamp(0.0, 1.0);
            let draw: f64 = rng.random();
            spikes.push(u8::from(draw < p));
        }
    }
    SpikeRaster { t_bins: cfg.t_bins, channels: cfg.channels, dt: cfg.dt, spikes, label }
}

/// Seed layout for one dataset: the first splitmix output seeds the
/// channel phases; subsequent outputs seed samples in dataset order
/// (train split first, classes in order, then the validation split).
fn derive_seeds(cfg: &GeneratorConfig) -> (u64, Vec<u64>) {
    let n = cfg.classes_hz.len() * (cfg.train_per_class + cfg.val_per_class);
    let mut state = cfg.seed;
    let phase_seed = splitmix64(&mut state);
    let sample_seeds = (0..n).map(|_| splitmix64(&mut state)).collect();
    (phase_seed, sample_seeds)
}

fn generate_with<F>(cfg: &GeneratorConfig, map: F) -> Result<Dataset>
where
    F: Fn(Vec<(usize, u64)>, &GeneratorConfig, &[f64]) -> Vec<SpikeRaster>,
{
    cfg.validate()?;
    let (phase_seed, seeds) = derive_seeds(cfg);
    let mut phase_rng = ChaCha8Rng::seed_from_u64(phase_seed);
    let phases: Vec<f64> =
        (0..cfg.channels).map(|_| phase_rng.random_range(0.0..std::f64::consts::TAU)).collect();

    let classes = cfg.classes_hz.len();
    let mut specs = Vec::with_capacity(seeds.len());
    let mut i = 0;
    for per_class in [cfg.train_per_class, cfg.val_per_class] {
        for label in 0..classes {
            for _ in 0..per_class {
                specs.push((label, seeds[i]));
                i += 1;
            }
        }
    }

    let mut all = map(specs, cfg, &phases);
    let val = all.split_off(classes * cfg.train_per_class);
    let manifest = DatasetManifest {
        version: 1,
        classes_hz: cfg.classes_hz.clone(),
        channels: cfg.channels,
        t_bins: cfg.t_bins,
        dt: cfg.dt,
        base_rate: cfg.base_rate,
        depth: cfg.depth,
        seed: cfg.seed,
        train_per_class: cfg.train_per_class,
        val_per_class: cfg.val_per_class,
        n_train: all.len(),
        n_val: val.len(),
    };
    Ok(Dataset { manifest, train: all, val })
}

/// Generates the synthetic dataset, parallelizing across samples.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<Dataset> {
    generate_with(cfg, |specs, cfg, phases| {
        parallel::ordered_map(&specs, |&(label, seed)| generate_sample(cfg, phases, label, seed))
    })
}

/// Sequential twin of [`generate_synthetic`] for path comparisons.
pub fn generate_synthetic_seq(cfg: &GeneratorConfig) -> Result<Dataset> {
    generate_with(cfg, |specs, cfg, phases| {
        parallel::ordered_map_seq(&specs, |&(label, seed)| generate_sample(cfg, phases, label, seed))
    })
}

/// Reduction rule for channel binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinReduction {
    /// Group fires if any member fires. Default.
    Or,
    /// Sum of member indicators, clipped to 1. Coincides with [`Or`] on
    /// binary inputs; kept selectable for clarity of intent.
    ///
    /// [`Or`]: BinReduction::Or
    SumClip,
}

/// Bins channels in consecutive groups with OR-reduction: output channel
/// `j` fires at step `k` iff any of channels `j*group..(j+1)*group` fires.
/// A remainder of channels that does not fill a group is dropped with a
/// warning.
pub fn bin_channels(r: &SpikeRaster, group: usize) -> Result<SpikeRaster> {
    bin_channels_with(r, group, BinReduction::Or)
}

/// [`bin_channels`] with an explicit reduction rule.
pub fn bin_channels_with(r: &SpikeRaster, group: usize, reduction: BinReduction) -> Result<SpikeRaster> {
    if group == 0 {
        return Err(Error::Config("bin group size must be at least 1".into()));
    }
    let out_channels = r.channels / group;
    if out_channels == 0 {
        return Err(Error::Config(format!(
            "bin group size {group} exceeds channel count {}",
            r.channels
        )));
    }
    if r.channels % group != 0 {
        log::warn!(
            "bin_channels: {} channels are not divisible by group {group}; dropping the last {}",
            r.channels,
            r.channels % group
        );
    }
    let mut spikes = Vec::with_capacity(r.t_bins * out_channels);
    for k in 0..r.t_bins {
        let row = r.row(k);
        for j in 0..out_channels {
            let members = &row[j * group..(j + 1) * group];
            let bit = match reduction {
                BinReduction::Or => u8::from(members.contains(&1)),
                BinReduction::SumClip => {
                    members.iter().map(|&b| b as u32).sum::<u32>().min(1) as u8
                }
            };
            spikes.push(bit);
        }
    }
    Ok(SpikeRaster {
        t_bins: r.t_bins,
        channels: out_channels,
        dt: r.dt,
        spikes,
        label: r.label,
    })
}

/// Serializes a raster to the plain-text format:
/// a header `FITS-RASTER v1 T=<T> N=<N> dt=<decimal> label=<int>`
/// followed by `T` lines of `N` characters in `{0,1}`. The decimal for
/// `dt` is the shortest string that parses back to the same double, so
/// round trips are exact.
pub fn write_raster_to<W: IoWrite>(w: &mut W, r: &SpikeRaster) -> Result<()> {
    let mut text = String::with_capacity(64 + r.t_bins * (r.channels + 1));
    text.push_str(&format!(
        "FITS-RASTER v1 T={} N={} dt={} label={}\n",
        r.t_bins, r.channels, r.dt, r.label
    ));
    for k in 0..r.t_bins {
        for &b in r.row(k) {
            text.push(if b == 1 { '1' } else { '0' });
        }
        text.push('\n');
    }
    w.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_raster<P: AsRef<Path>>(path: P, r: &SpikeRaster) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_raster_to(&mut f, r)?;
    f.flush()?;
    Ok(())
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> std::result::Result<&'a str, String> {
    match token {
        Some(t) if t.starts_with(key) && t.as_bytes().get(key.len()) == Some(&b'=') => {
            Ok(&t[key.len() + 1..])
        }
        Some(t) => Err(format!("expected {key}=<value>, found {t:?}")),
        None => Err(format!("missing {key}=<value> field")),
    }
}

/// Parses a raster from a reader; errors carry 1-based line numbers.
pub fn read_raster_from<R: BufRead>(reader: R) -> Result<SpikeRaster> {
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(parse_err(1, "empty file, expected FITS-RASTER header".into())),
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("FITS-RASTER") {
        return Err(parse_err(1, format!("not a FITS-RASTER file: {header:?}")));
    }
    match tok.next() {
        Some("v1") => {}
        other => return Err(parse_err(1, format!("unsupported version {other:?}, expected v1"))),
    }
    let t_bins: usize = header_field(tok.next(), "T")
        .and_then(|v| v.parse().map_err(|e| format!("bad T value: {e}")))
        .map_err(|m| parse_err(1, m))?;
    let channels: usize = header_field(tok.next(), "N")
        .and_then(|v| v.parse().map_err(|e| format!("bad N value: {e}")))
        .map_err(|m| parse_err(1, m))?;
    let dt: f64 = header_field(tok.next(), "dt")
        .and_then(|v| v.parse().map_err(|e| format!("bad dt value: {e}")))
        .map_err(|m| parse_err(1, m))?;
    let label: usize = header_field(tok.next(), "label")
        .and_then(|v| v.parse().map_err(|e| format!("bad label value: {e}")))
        .map_err(|m| parse_err(1, m))?;
    if let Some(extra) = tok.next() {
        return Err(parse_err(1, format!("unexpected trailing header field {extra:?}")));
    }
    if t_bins == 0 || channels == 0 {
        return Err(parse_err(1, format!("raster dimensions must be positive, got T={t_bins} N={channels}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(parse_err(1, format!("dt must be positive, got {dt}")));
    }

    let mut spikes = Vec::with_capacity(t_bins * channels);
    for k in 0..t_bins {
        let line_no = k + 2;
        let line = match lines.next() {
            Some(l) => l?,
            None => {
                return Err(parse_err(
                    line_no,
                    format!("file ends early: expected {t_bins} data lines, found {k}"),
                ))
            }
        };
        if line.len() != channels {
            return Err(parse_err(
                line_no,
                format!("expected {channels} characters, found {}", line.len()),
            ));
        }
        for ch in line.bytes() {
            match ch {
                b'0' => spikes.push(0),
                b'1' => spikes.push(1),
                other => {
                    return Err(parse_err(
                        line_no,
                        format!("invalid character {:?}, expected 0 or 1", other as char),
                    ))
                }
            }
        }
    }
    if let Some(extra) = lines.next() {
        let extra = extra?;
        if !extra.trim().is_empty() {
            return Err(parse_err(t_bins + 2, format!("unexpected extra line {extra:?}")));
        }
    }
    Ok(SpikeRaster { t_bins, channels, dt, spikes, label })
}

pub fn read_raster<P: AsRef<Path>>(path: P) -> Result<SpikeRaster> {
    read_raster_from(BufReader::new(fs::File::open(path)?))
}

fn split_dir(dir: &Path, split: &str) -> std::path::PathBuf {
    dir.join(split)
}

fn raster_name(i: usize) -> String {
    format!("sample_{i:05}.raster")
}

/// Writes a dataset under `dir`: `manifest.json`, `labels.csv`, and one
/// raster file per sample in `train/` and `val/`.
pub fn save_dataset<P: AsRef<Path>>(dir: P, ds: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = serde_json::to_string_pretty(&ds.manifest)?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;

    let mut labels = String::from("split,index,file,label\n");
    for (split, samples) in [("train", &ds.train), ("val", &ds.val)] {
        let sub = split_dir(dir, split);
        fs::create_dir_all(&sub)?;
        for (i, r) in samples.iter().enumerate() {
            let name = raster_name(i);
            write_raster(sub.join(&name), r)?;
            labels.push_str(&format!("{split},{i},{split}/{name},{}\n", r.label()));
        }
    }
    fs::write(dir.join("labels.csv"), labels)?;
    Ok(())
}

/// Reads a dataset written by [`save_dataset`], verifying that the raster
/// files agree with the manifest.
pub fn load_dataset<P: AsRef<Path>>(dir: P) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut splits = Vec::new();
    for (split, count) in [("train", manifest.n_train), ("val", manifest.n_val)] {
        let sub = split_dir(dir, split);
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let path = sub.join(raster_name(i));
            let r = read_raster(&path)?;
            if r.t_bins() != manifest.t_bins
                || r.channels() != manifest.channels
                || r.dt() != manifest.dt
            {
                return Err(Error::Config(format!(
                    "raster {} does not match the manifest (T={} N={} dt={})",
                    path.display(),
                    r.t_bins(),
                    r.channels(),
                    r.dt()
                )));
            }
            if r.label() >= manifest.class_count() {
                return Err(Error::Config(format!(
                    "raster {} label {} exceeds class count {}",
                    path.display(),
                    r.label(),
                    manifest.class_count()
                )));
            }
            samples.push(r);
        }
        splits.push(samples);
    }
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(Dataset { manifest, train, val })
}
