//! Run and data configuration: flat `key=value` files, CLI overrides and
//! validation against the metric parameter domains.

use std::fmt;
use std::str::FromStr;

use rmlr_core::optim::OptConfig;
use rmlr_core::spdgeo::{Family, MetricParams};

use crate::data::DataKind;
use crate::error::{BenchError, Result};

/// Classifier heads the harness can train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classifier {
    LogEig,
    Spd(Family),
    Lie,
}

impl Classifier {
    pub const ALL: [Classifier; 7] = [
        Classifier::LogEig,
        Classifier::Spd(Family::Lem),
        Classifier::Spd(Family::Aim),
        Classifier::Spd(Family::Em),
        Classifier::Spd(Family::Lcm),
        Classifier::Spd(Family::Bwm),
        Classifier::Lie,
    ];

    pub fn data_kind(self) -> DataKind {
        match self {
            Classifier::Lie => DataKind::So3Product,
            _ => DataKind::Spd,
        }
    }

    /// θ used when none is given: the undeformed member of each family.
    pub fn default_theta(self) -> f64 {
        match self {
            Classifier::Spd(Family::Bwm) => 0.5,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classifier::LogEig => f.write_str("logeig"),
            Classifier::Spd(fam) => f.write_str(&fam.name().to_ascii_lowercase()),
            Classifier::Lie => f.write_str("lie"),
        }
    }
}

impl FromStr for Classifier {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logeig" => Ok(Classifier::LogEig),
            "lie" => Ok(Classifier::Lie),
            other => other
                .parse::<Family>()
                .map(Classifier::Spd)
                .map_err(|_| BenchError::Usage(format!("unknown classifier '{s}'"))),
        }
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub classifier: Classifier,
    /// `None` selects [`Classifier::default_theta`].
    pub theta: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub grad_clip: Option<f64>,
}

/// Synthetic data settings.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    /// SPD matrix dimension.
    pub n: usize,
    pub classes: usize,
    pub per_class: usize,
    pub sigma: f64,
    /// Number of SO(3) blocks for the rotation task.
    pub blocks: usize,
}

/// Everything a `key=value` file can set.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub run: RunConfig,
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            classifier: Classifier::Spd(Family::Aim),
            theta: None,
            alpha: 1.0,
            beta: 0.0,
            epochs: 200,
            batch: 30,
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 42,
            grad_clip: Some(5.0),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { n: 10, classes: 3, per_class: 200, sigma: 0.3, blocks: 2 }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self { run: RunConfig::default(), data: DataConfig::default() }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| BenchError::Usage(format!("bad value '{value}' for key '{key}'")))
}

impl Config {
    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (r, d) = (&mut self.run, &mut self.data);
        match key {
            "classifier" => r.classifier = value.parse()?,
            "theta" => r.theta = Some(parse(key, value)?),
            "alpha" => r.alpha = parse(key, value)?,
            "beta" => r.beta = parse(key, value)?,
            "epochs" => r.epochs = parse(key, value)?,
            "batch" => r.batch = parse(key, value)?,
            "lr" => r.lr = parse(key, value)?,
            "momentum" => r.momentum = parse(key, value)?,
            "weight_decay" => r.weight_decay = parse(key, value)?,
            "seed" => r.seed = parse(key, value)?,
            "grad_clip" => {
                r.grad_clip = if value.eq_ignore_ascii_case("none") { None } else { Some(parse(key, value)?) }
            }
            "n" => d.n = parse(key, value)?,
            "classes" => d.classes = parse(key, value)?,
            "per_class" => d.per_class = parse(key, value)?,
            "sigma" => d.sigma = parse(key, value)?,
            "blocks" => d.blocks = parse(key, value)?,
            other => return Err(BenchError::Usage(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` text on top of `self`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Usage(format!("config line {}: expected key=value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Serializes every field, readable back by [`Config::from_text`].
    pub fn to_text(&self) -> String {
        let (r, d) = (&self.run, &self.data);
        let theta = r.theta.map_or("".to_string(), |t| format!("theta={t}\n"));
        let clip = r.grad_clip.map_or("none".to_string(), |c| c.to_string());
        format!(
            "classifier={}\n{theta}alpha={}\nbeta={}\nepochs={}\nbatch={}\nlr={}\nmomentum={}\nweight_decay={}\nseed={}\ngrad_clip={clip}\nn={}\nclasses={}\nper_class={}\nsigma={}\nblocks={}\n",
            r.classifier, r.alpha, r.beta, r.epochs, r.batch, r.lr, r.momentum, r.weight_decay, r.seed,
            d.n, d.classes, d.per_class, d.sigma, d.blocks
        )
    }
}

impl RunConfig {
    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| self.classifier.default_theta())
    }

    /// Metric of an SPD head on `n × n` inputs, validated for that dimension.
    pub fn metric_params(&self, n: usize) -> Result<Option<MetricParams>> {
        let Classifier::Spd(family) = self.classifier else { return Ok(None) };
        let theta = if family == Family::Lem { 1.0 } else { self.theta() };
        let mp = MetricParams::new(family, theta, self.alpha, self.beta)?;
        mp.validate_dim(n)?;
        Ok(Some(mp))
    }

    pub fn opt_config(&self) -> Result<OptConfig> {
        Ok(OptConfig::new(self.lr, self.momentum, self.weight_decay, self.grad_clip)?)
    }

    /// Full domain check for inputs of dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batch == 0 {
            return Err(BenchError::Usage("batch must be at least 1".into()));
        }
        // lr = 0 is allowed: it freezes the head, which is a useful baseline
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(BenchError::Usage(format!("lr must be finite and nonnegative, got {}", self.lr)));
        }
        self.opt_config()?;
        self.metric_params(n)?;
        Ok(())
    }
}

/// Every combination of the hyperparameter candidate table for inputs of
/// dimension `n`: α = 1, β ∈ {1, 1/n, 1/n², 0, −1/n + ε, −1/n²} where the
/// family has weights, and the per-family θ grids.
pub fn candidate_grid(n: usize) -> Vec<RunConfig> {
    let nf = n as f64;
    let betas = [1.0, 1.0 / nf, 1.0 / (nf * nf), 0.0, -1.0 / nf + 1e-6, -1.0 / (nf * nf)];
    let thetas = |f: Family| -> &'static [f64] {
        match f {
            Family::Lem => &[1.0],
            Family::Aim => &[0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            Family::Em | Family::Lcm => &[0.5, 1.0, 1.5],
            Family::Bwm => &[0.25, 0.5, 0.75],
        }
    };
    let mut out = Vec::new();
    for f in Family::ALL {
        let bs: &[f64] = if f.uses_alpha_beta() { &betas } else { &[0.0] };
        for &theta in thetas(f) {
            for &beta in bs {
                out.push(RunConfig { classifier: Classifier::Spd(f), theta: Some(theta), beta, ..RunConfig::default() });
            }
        }
    }
    out
}
