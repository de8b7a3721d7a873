//! Uniform view of the classifier heads for training: forward records,
//! parameter slots and the gradient order that matches them.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grad::{GradBundle, LieTape, LogEigTape, SpdTape, Tape};
use crate::optim::{ParamSlot, SlotKind};
use crate::rmlr::{lie_mlr_logits, logeig_logits, spd_mlr_logits, LieMlrLayer, Logits, LogEigLayer, SpdMlrLayer};
use crate::songeo::{RotationMatrix, SkewMatrix};
use crate::spdgeo::MetricParams;
use crate::symlin::{Mat, SpdMatrix, SymmetricMatrix};

/// Input of a head.
#[derive(Clone, Debug, PartialEq)]
pub enum Feature {
    Spd(SpdMatrix),
    Rotations(Vec<RotationMatrix>),
}

/// Any classifier head.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Spd(SpdMlrLayer),
    Lie(LieMlrLayer),
    LogEig(LogEigLayer),
}

fn feature_mismatch(model: &str) -> Error {
    Error::Shape { expected: format!("feature for the {model} head"), got: "other feature kind".into() }
}

impl Model {
    pub fn init_spd<R: Rng + ?Sized>(mp: MetricParams, n: usize, classes: usize, rng: &mut R) -> Result<Self> {
        SpdMlrLayer::init(mp, n, classes, rng).map(Model::Spd)
    }

    pub fn init_lie<R: Rng + ?Sized>(blocks: usize, classes: usize, rng: &mut R) -> Result<Self> {
        LieMlrLayer::init(3, blocks, classes, rng).map(Model::Lie)
    }

    pub fn init_logeig<R: Rng + ?Sized>(n: usize, classes: usize, rng: &mut R) -> Result<Self> {
        LogEigLayer::init(n, classes, rng).map(Model::LogEig)
    }

    pub fn classes(&self) -> usize {
        match self {
            Model::Spd(l) => l.classes(),
            Model::Lie(l) => l.classes(),
            Model::LogEig(l) => l.classes(),
        }
    }

    pub fn logits(&self, x: &Feature) -> Result<Logits> {
        match (self, x) {
            (Model::Spd(l), Feature::Spd(s)) => spd_mlr_logits(s, l),
            (Model::LogEig(l), Feature::Spd(s)) => logeig_logits(s, l),
            (Model::Lie(l), Feature::Rotations(r)) => lie_mlr_logits(r, l),
            (Model::Lie(_), _) => Err(feature_mismatch("Lie")),
            (_, _) => Err(feature_mismatch("SPD")),
        }
    }

    pub fn record(&self, x: &Feature) -> Result<Tape> {
        match (self, x) {
            (Model::Spd(l), Feature::Spd(s)) => SpdTape::record(s, l).map(Tape::Spd),
            (Model::LogEig(l), Feature::Spd(s)) => LogEigTape::record(s, l).map(Tape::LogEig),
            (Model::Lie(l), Feature::Rotations(r)) => LieTape::record(r, l).map(Tape::Lie),
            (Model::Lie(_), _) => Err(feature_mismatch("Lie")),
            (_, _) => Err(feature_mismatch("SPD")),
        }
    }

    /// Parameters as optimizer slots, in a fixed order.
    pub fn to_slots(&self) -> Vec<ParamSlot> {
        let mut out = Vec::new();
        match self {
            Model::Spd(l) => {
                for (k, p) in l.points().iter().enumerate() {
                    out.push(ParamSlot::new(format!("P{k}"), SlotKind::SpdAim, p.as_mat().clone()));
                }
                for (k, a) in l.tangents().iter().enumerate() {
                    out.push(ParamSlot::new(format!("A{k}"), SlotKind::Euclidean, a.as_mat().clone()));
                }
            }
            Model::Lie(l) => {
                for (k, pk) in l.points().iter().enumerate() {
                    for (b, p) in pk.iter().enumerate() {
                        out.push(ParamSlot::new(format!("P{k}.{b}"), SlotKind::Rotation, p.as_mat().clone()));
                    }
                }
                for (k, ak) in l.tangents().iter().enumerate() {
                    for (b, a) in ak.iter().enumerate() {
                        out.push(ParamSlot::new(format!("A{k}.{b}"), SlotKind::Euclidean, a.as_mat().clone()));
                    }
                }
            }
            Model::LogEig(l) => {
                out.push(ParamSlot::new("W".into(), SlotKind::Euclidean, l.weight().clone()));
                let b = Mat::from_column_slice(l.bias().len(), 1, l.bias());
                out.push(ParamSlot::new("b".into(), SlotKind::Euclidean, b));
            }
        }
        out
    }

    /// Parameter gradients in the order of [`Model::to_slots`].
    pub fn slot_grads(&self, g: &GradBundle) -> Result<Vec<Mat>> {
        Ok(match (self, g) {
            (Model::Spd(_), GradBundle::Spd(g)) => {
                g.dp.iter().chain(&g.da).map(|m| m.as_mat().clone()).collect()
            }
            (Model::Lie(_), GradBundle::Lie(g)) => {
                g.dp.iter().flatten().chain(g.da.iter().flatten()).map(|m| m.as_mat().clone()).collect()
            }
            (Model::LogEig(_), GradBundle::LogEig(g)) => {
                vec![g.dw.clone(), Mat::from_column_slice(g.db.len(), 1, &g.db)]
            }
            _ => return Err(Error::Shape { expected: "gradients of this head".into(), got: "other head".into() }),
        })
    }

    /// Rebuilds the head from slot values laid out as by [`Model::to_slots`].
    pub fn with_slots(&self, slots: &[ParamSlot]) -> Result<Self> {
        let values: Vec<&Mat> = slots.iter().map(|s| s.value()).collect();
        match self {
            Model::Spd(l) => {
                let c = l.classes();
                if values.len() != 2 * c {
                    return Err(Error::Shape { expected: (2 * c).to_string(), got: values.len().to_string() });
                }
                let p = values[..c].iter().map(|m| SpdMatrix::from_mat_unchecked((*m).clone())).collect();
                let a = values[c..].iter().map(|m| SymmetricMatrix::new((*m).clone())).collect::<Result<_>>()?;
                SpdMlrLayer::new(*l.metric(), p, a).map(Model::Spd)
            }
            Model::Lie(l) => {
                let (c, b) = (l.classes(), l.blocks());
                if values.len() != 2 * c * b {
                    return Err(Error::Shape { expected: (2 * c * b).to_string(), got: values.len().to_string() });
                }
                let p = (0..c)
                    .map(|k| (0..b).map(|j| RotationMatrix::from_mat_unchecked(values[k * b + j].clone())).collect())
                    .collect();
                let a = (0..c)
                    .map(|k| (0..b).map(|j| SkewMatrix::new(values[c * b + k * b + j].clone())).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                LieMlrLayer::new(p, a).map(Model::Lie)
            }
            Model::LogEig(l) => {
                if values.len() != 2 {
                    return Err(Error::Shape { expected: "2".into(), got: values.len().to_string() });
                }
                LogEigLayer::new(l.dim(), values[0].clone(), values[1].iter().cloned().collect()).map(Model::LogEig)
            }
        }
    }
}
