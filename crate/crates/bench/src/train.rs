//! Mini-batch training and evaluation of any head on a dataset.
//!
//! Per-sample forward and backward passes fan out over rayon; gradients and
//! metrics are reduced in sample order, so a run is bit-reproducible for a
//! given seed regardless of the thread count.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rmlr_core::grad::GradBundle;
use rmlr_core::model::Model;
use rmlr_core::optim::{clip_grads, step_all, ParamSlot};
use rmlr_core::rmlr::softmax_xent;
use sha2::{Digest, Sha256};

use crate::config::{Classifier, RunConfig};
use crate::data::Dataset;
use crate::error::{BenchError, Result};

/// Metrics after one epoch (epoch 0 is the initialized model).
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub classifier: String,
    pub rows: Vec<EpochRow>,
    pub seconds: f64,
    /// SHA-256 of the final parameters in 17-digit text form.
    pub digest: String,
}

impl RunReport {
    pub fn last(&self) -> &EpochRow {
        self.rows.last().expect("a report always has the epoch-0 row")
    }

    /// `epoch,train_loss,train_acc,test_acc,seconds` rows and a summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,test_acc,seconds\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.10},{:.6},{:.6},{:.3}", r.epoch, r.train_loss, r.train_acc, r.test_acc, r.seconds);
        }
        let l = self.last();
        let _ = writeln!(
            out,
            "# summary classifier={} epochs={} train_acc={:.6} test_acc={:.6} seconds={:.3} digest={}",
            self.classifier, l.epoch, l.train_acc, l.test_acc, self.seconds, self.digest
        );
        out
    }
}

/// Fresh head for `cfg` shaped for `ds`.
pub fn init_model(ds: &Dataset, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Model> {
    if cfg.classifier.data_kind() != ds.kind {
        return Err(BenchError::Usage(format!(
            "classifier {} needs {} data, got {}",
            cfg.classifier,
            cfg.classifier.data_kind().name(),
            ds.kind.name()
        )));
    }
    cfg.validate(ds.n)?;
    Ok(match cfg.classifier {
        Classifier::LogEig => Model::init_logeig(ds.n, ds.classes, rng)?,
        Classifier::Spd(_) => {
            let mp = cfg.metric_params(ds.n)?.expect("SPD classifier has a metric");
            Model::init_spd(mp, ds.n, ds.classes, rng)?
        }
        Classifier::Lie => Model::init_lie(ds.n, ds.classes, rng)?,
    })
}

/// Mean cross-entropy and accuracy over `idx`.
pub fn evaluate(model: &Model, ds: &Dataset, idx: &[usize]) -> Result<(f64, f64)> {
    if idx.is_empty() {
        return Ok((0.0, 0.0));
    }
    let per: Vec<(f64, bool)> = idx
        .par_iter()
        .map(|&i| {
            let (x, y) = &ds.samples[i];
            let z = model.logits(x)?;
            let (loss, _) = softmax_xent(&z, *y)?;
            Ok((loss, z.argmax() == *y))
        })
        .collect::<Result<_>>()?;
    let loss = per.iter().map(|p| p.0).sum::<f64>() / idx.len() as f64;
    let acc = per.iter().filter(|p| p.1).count() as f64 / idx.len() as f64;
    Ok((loss, acc))
}

fn batch_gradient(model: &Model, ds: &Dataset, batch: &[usize]) -> Result<GradBundle> {
    let grads: Vec<GradBundle> = batch
        .par_iter()
        .map(|&i| {
            let (x, y) = &ds.samples[i];
            Ok(model.record(x)?.loss_and_grad(*y)?.1)
        })
        .collect::<Result<_>>()?;
    let mut it = grads.into_iter();
    let mut total = it.next().expect("batches are non-empty");
    for g in it {
        total.axpy(1.0, &g)?;
    }
    total.scale_params(1.0 / batch.len() as f64);
    Ok(total)
}

/// SHA-256 over slot names and values printed with 17 significant digits.
pub fn digest(slots: &[ParamSlot]) -> String {
    let mut h = Sha256::new();
    for s in slots {
        h.update(s.name().as_bytes());
        for x in s.value().iter() {
            h.update(format!(" {x:.16e}").as_bytes());
        }
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn row(model: &Model, ds: &Dataset, epoch: usize, start: Instant) -> Result<EpochRow> {
    let (train_loss, train_acc) = evaluate(model, ds, &ds.train)?;
    let (_, test_acc) = evaluate(model, ds, &ds.test)?;
    Ok(EpochRow { epoch, train_loss, train_acc, test_acc, seconds: start.elapsed().as_secs_f64() })
}

/// Trains a fresh head; returns the report and the final model.
pub fn train(ds: &Dataset, cfg: &RunConfig) -> Result<(RunReport, Model)> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let template = init_model(ds, cfg, &mut rng)?;
    let opt = cfg.opt_config()?;
    let mut slots = template.to_slots();
    let mut model = template.clone();
    let mut rows = vec![row(&model, ds, 0, start)?];
    let mut order = ds.train.clone();
    for epoch in 1..=cfg.epochs {
        // the initial model evaluated cleanly, so any numerical failure from
        // here on comes from the parameters and is reported as divergence
        let diverged = |e: BenchError| match e {
            BenchError::Core(source) => BenchError::Divergence { epoch, source },
            other => other,
        };
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let mut g = batch_gradient(&model, ds, batch).map_err(diverged)?;
            if let Some(c) = cfg.grad_clip {
                g = clip_grads(g, c);
            }
            if !g.is_finite() {
                return Err(diverged(rmlr_core::error::Error::Divergence { slot: "gradient".into() }.into()));
            }
            let gs = model.slot_grads(&g)?;
            step_all(&mut slots, &gs, &opt).map_err(|e| diverged(e.into()))?;
            model = template.with_slots(&slots).map_err(|e| diverged(e.into()))?;
        }
        rows.push(row(&model, ds, epoch, start).map_err(diverged)?);
    }
    let report = RunReport {
        classifier: cfg.classifier.to_string(),
        rows,
        seconds: start.elapsed().as_secs_f64(),
        digest: digest(&slots),
    };
    Ok((report, model))
}

/// Parameter file: one slot per line, `name rows cols v...` (column-major,
/// 17 significant digits).
pub fn params_to_text(model: &Model) -> String {
    let mut out = String::new();
    for s in model.to_slots() {
        let v = s.value();
        let _ = write!(out, "{} {} {}", s.name(), v.nrows(), v.ncols());
        for x in v.iter() {
            let _ = write!(out, " {x:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Loads values written by [`params_to_text`] into a head shaped like `template`.
pub fn params_from_text(template: &Model, text: &str) -> Result<Model> {
    let mut slots = template.to_slots();
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != slots.len() {
        return Err(BenchError::Data(format!("expected {} parameter slots, found {}", slots.len(), lines.len())));
    }
    for (slot, line) in slots.iter_mut().zip(lines) {
        let mut tok = line.split_whitespace();
        let name = tok.next().unwrap_or_default();
        let shape: Vec<usize> = tok.by_ref().take(2).filter_map(|t| t.parse().ok()).collect();
        let vals: Vec<f64> = tok.map(|t| t.parse().map_err(|_| BenchError::Data(format!("bad value '{t}'")))).collect::<Result<_>>()?;
        let (r, c) = slot.value().shape();
        if name != slot.name() || shape != [r, c] || vals.len() != r * c {
            return Err(BenchError::Data(format!("slot '{name}' does not match the head (expected {} {r}x{c})", slot.name())));
        }
        *slot = ParamSlot::new(slot.name().to_string(), slot.kind(), rmlr_core::symlin::Mat::from_column_slice(r, c, &vals));
    }
    Ok(template.with_slots(&slots)?)
}
