//! Synthetic datasets on S++(n) and SO(3)^m, their text format, the
//! train/test split and the nearest-class-mean oracle.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmlr_core::model::Feature;
use rmlr_core::sample;
use rmlr_core::songeo::{euler_angle, hat, so3_exp, so3_log, RotationMatrix};
use rmlr_core::spdgeo::{norm_sq, rielog, riexp_aim, MetricParams};
use rmlr_core::symlin::{funcm, funcm_spd, frob_norm, Mat, MatFn, SpdMatrix, SymmetricMatrix};

use crate::error::{BenchError, Result};

/// Fraction of samples that go to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

const MEAN_ANGLE_MAX: f64 = 2.0;
const TOTAL_ANGLE_MAX: f64 = std::f64::consts::PI - 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Spd,
    So3Product,
}

impl DataKind {
    pub fn name(self) -> &'static str {
        match self {
            DataKind::Spd => "spd",
            DataKind::So3Product => "so3-product",
        }
    }
}

impl FromStr for DataKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spd" => Ok(DataKind::Spd),
            "so3-product" | "so3" => Ok(DataKind::So3Product),
            other => Err(BenchError::Usage(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Labelled samples plus a disjoint, exhaustive train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub kind: DataKind,
    /// Matrix dimension for SPD data, block count for SO(3)^m.
    pub n: usize,
    pub classes: usize,
    pub seed: u64,
    pub samples: Vec<(Feature, usize)>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_gen(n: usize, min_n: usize, classes: usize, per_class: usize, sigma: f64) -> Result<()> {
    if n < min_n || classes < 2 || per_class < 1 || !(sigma > 0.0) || !sigma.is_finite() {
        return Err(BenchError::Usage(format!(
            "invalid generator arguments: n={n} (min {min_n}), C={classes}, per_class={per_class}, sigma={sigma}"
        )));
    }
    Ok(())
}

/// Seeded shuffle, first `TRAIN_FRACTION` of it for training.
pub fn split(count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5117_u64);
    idx.shuffle(&mut rng);
    let cut = ((count as f64) * TRAIN_FRACTION).round() as usize;
    let test = idx.split_off(cut.min(count));
    (idx, test)
}

impl Dataset {
    fn assemble(kind: DataKind, n: usize, classes: usize, seed: u64, samples: Vec<(Feature, usize)>) -> Self {
        let (train, test) = split(samples.len(), seed);
        Self { kind, n, classes, seed, samples, train, test }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Class means `exp(Z_c)`, drawn first from the seeded stream.
pub fn spd_class_means(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Result<Vec<SpdMatrix>> {
    (0..classes)
        .map(|_| Ok(riexp_aim(&SpdMatrix::identity(n), &sample::symmetric(rng, n, 1.0))?))
        .collect()
}

/// `S = M_c^{1/2} exp(σW) M_c^{1/2}` around `M_c = exp(Z_c)`.
pub fn gen_spd_data(n: usize, classes: usize, per_class: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    check_gen(n, 2, classes, per_class, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = spd_class_means(&mut rng, n, classes)?;
    let mut samples = Vec::with_capacity(classes * per_class);
    for (c, m) in means.iter().enumerate() {
        let r = funcm_spd(m, MatFn::Sqrt)?;
        for _ in 0..per_class {
            let e = funcm(&sample::symmetric(&mut rng, n, sigma), MatFn::Exp)?;
            let s = SymmetricMatrix::symmetrize(&(r.as_mat() * e.as_mat() * r.as_mat()));
            samples.push((Feature::Spd(SpdMatrix::from_symmetric(s)?), c));
        }
    }
    Ok(Dataset::assemble(DataKind::Spd, n, classes, seed, samples))
}

fn clipped_axis_angle(rng: &mut ChaCha8Rng, scale: f64, max_angle: f64) -> Mat {
    let w = sample::gaussian(rng, 3, 1) * scale;
    let norm = frob_norm(&w);
    let w = if norm > max_angle { w * (max_angle / norm) } else { w };
    hat(&[w[0], w[1], w[2]])
}

/// Per-block class means `exp(ω_c)` with `|ω_c| ≤ 2`.
pub fn so3_class_means(rng: &mut ChaCha8Rng, blocks: usize, classes: usize) -> Vec<Vec<RotationMatrix>> {
    (0..classes)
        .map(|_| (0..blocks).map(|_| so3_exp(&clipped_axis_angle(rng, 1.0, MEAN_ANGLE_MAX))).collect())
        .collect()
}

/// Samples `R_c exp(σW)` per block; the perturbation angle is clipped so the
/// total angle stays at most `π − 0.1`.
pub fn gen_so3_data(blocks: usize, classes: usize, per_class: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    check_gen(blocks, 1, classes, per_class, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = so3_class_means(&mut rng, blocks, classes);
    let mut samples = Vec::with_capacity(classes * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            let blocks = mean
                .iter()
                .map(|r| {
                    let room = TOTAL_ANGLE_MAX - euler_angle(r)?;
                    let e = so3_exp(&clipped_axis_angle(&mut rng, sigma, room));
                    Ok(r.compose(&e))
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push((Feature::Rotations(blocks), c));
        }
    }
    Ok(Dataset::assemble(DataKind::So3Product, blocks, classes, seed, samples))
}

fn argmin(d: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in d.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Accuracy of assigning every sample to the nearest generating class mean
/// (affine-invariant distance on S++(n), geodesic distance on SO(3)^m).
/// The means are regenerated from the dataset seed.
pub fn nearest_mean_accuracy(ds: &Dataset) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(ds.seed);
    let aim = MetricParams::aim_std();
    let mut correct = 0;
    match ds.kind {
        DataKind::Spd => {
            let means = spd_class_means(&mut rng, ds.n, ds.classes)?;
            for (x, y) in &ds.samples {
                let Feature::Spd(s) = x else { return Err(BenchError::Data("mixed sample kinds".into())) };
                let d = means
                    .iter()
                    .map(|m| Ok(norm_sq(&aim, m, &rielog(&aim, m, s)?)?))
                    .collect::<Result<Vec<f64>>>()?;
                correct += usize::from(argmin(d.into_iter()) == *y);
            }
        }
        DataKind::So3Product => {
            let means = so3_class_means(&mut rng, ds.n, ds.classes);
            for (x, y) in &ds.samples {
                let Feature::Rotations(r) = x else { return Err(BenchError::Data("mixed sample kinds".into())) };
                let d = means
                    .iter()
                    .map(|m| {
                        m.iter().zip(r).try_fold(0.0, |acc, (mb, rb)| {
                            let l = so3_log(&mb.inverse().compose(rb))?;
                            Ok::<f64, BenchError>(acc + frob_norm(l.as_mat()).powi(2))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                correct += usize::from(argmin(d.into_iter()) == *y);
            }
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

fn push_num(out: &mut String, x: f64) {
    // 17 significant digits round-trip every f64
    let _ = write!(out, " {x:.16e}");
}

/// Text form: header `kind n C count seed`, then `label v1 v2 ...` per sample
/// (row-major lower triangle for SPD, 9 row-major entries per SO(3) block).
pub fn to_text(ds: &Dataset) -> String {
    let mut out = format!("{} {} {} {} {}\n", ds.kind.name(), ds.n, ds.classes, ds.len(), ds.seed);
    for (x, y) in &ds.samples {
        out.push_str(&y.to_string());
        match x {
            Feature::Spd(s) => {
                for i in 0..ds.n {
                    for j in 0..=i {
                        push_num(&mut out, s.as_mat()[(i, j)]);
                    }
                }
            }
            Feature::Rotations(rs) => {
                for r in rs {
                    for i in 0..3 {
                        for j in 0..3 {
                            push_num(&mut out, r.as_mat()[(i, j)]);
                        }
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

fn parse_field<T: FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| BenchError::Data(format!("line {line}: missing or malformed {what}")))
}

pub fn from_text(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| BenchError::Data("empty dataset file".into()))?;
    let mut h = header.split_whitespace();
    let kind: DataKind = h.next().ok_or_else(|| BenchError::Data("missing kind".into()))?.parse()?;
    let n: usize = parse_field(h.next(), "n", 1)?;
    let classes: usize = parse_field(h.next(), "C", 1)?;
    let count: usize = parse_field(h.next(), "count", 1)?;
    let seed: u64 = parse_field(h.next(), "seed", 1)?;
    let width = match kind {
        DataKind::Spd => n * (n + 1) / 2,
        DataKind::So3Product => 9 * n,
    };
    let mut samples = Vec::with_capacity(count);
    for (i, line) in lines {
        let ln = i + 1;
        let mut tok = line.split_whitespace();
        let label: usize = parse_field(tok.next(), "label", ln)?;
        if label >= classes {
            return Err(BenchError::Data(format!("line {ln}: label {label} out of range")));
        }
        let v: Vec<f64> = tok.map(|t| parse_field(Some(t), "value", ln)).collect::<Result<_>>()?;
        if v.len() != width {
            return Err(BenchError::Data(format!("line {ln}: expected {width} values, got {}", v.len())));
        }
        let bad = |e: rmlr_core::error::Error| BenchError::Data(format!("line {ln}: {e}"));
        let x = match kind {
            DataKind::Spd => {
                let mut m = Mat::zeros(n, n);
                let mut k = 0;
                for r in 0..n {
                    for c in 0..=r {
                        m[(r, c)] = v[k];
                        m[(c, r)] = v[k];
                        k += 1;
                    }
                }
                Feature::Spd(SpdMatrix::new(m).map_err(bad)?)
            }
            DataKind::So3Product => Feature::Rotations(
                v.chunks(9)
                    .map(|b| RotationMatrix::new(Mat::from_row_slice(3, 3, b)))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(bad)?,
            ),
        };
        samples.push((x, label));
    }
    if samples.len() != count {
        return Err(BenchError::Data(format!("header says {count} samples, found {}", samples.len())));
    }
    Ok(Dataset::assemble(kind, n, classes, seed, samples))
}

pub fn write_dataset(ds: &Dataset, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_text(ds)).map_err(|e| BenchError::Io(path.display().to_string(), e.to_string()))
}

pub fn read_dataset(path: &std::path::Path) -> Result<Dataset> {
    let text =
        std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.display().to_string(), e.to_string()))?;
    from_text(&text)
}
