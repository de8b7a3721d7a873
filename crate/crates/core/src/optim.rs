//! Riemannian SGD with momentum on mixed parameter manifolds.
//!
//! SPD points retract with the affine-invariant exponential whatever metric
//! the head uses, since it is the one complete choice; their momentum is
//! carried to the new point by affine-invariant transport. Rotations retract
//! with QR and keep their momentum in the Lie algebra. Everything else takes
//! plain SGD steps.

use crate::error::{Error, Result};
use crate::grad::GradBundle;
use crate::songeo::{so_retract, RotationMatrix, SkewMatrix};
use crate::spdgeo::{ptransport_mat, riexp_aim_mat, MetricParams};
use crate::symlin::{sym, Mat, SpdMatrix, SymmetricMatrix};

/// Manifold a parameter lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    /// SPD point, gradient given as an ambient symmetric matrix.
    SpdAim,
    /// Rotation, gradient given in the Lie algebra (skew).
    Rotation,
    /// Vector-space parameter.
    Euclidean,
}

/// A parameter with its momentum buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSlot {
    name: String,
    kind: SlotKind,
    value: Mat,
    momentum: Mat,
}

impl ParamSlot {
    pub fn new(name: String, kind: SlotKind, value: Mat) -> Self {
        let momentum = Mat::zeros(value.nrows(), value.ncols());
        Self { name, kind, value, momentum }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SlotKind {
        self.kind
    }

    pub fn value(&self) -> &Mat {
        &self.value
    }

    pub fn momentum(&self) -> &Mat {
        &self.momentum
    }
}

/// Step settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptConfig {
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    grad_clip: Option<f64>,
}

impl OptConfig {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64, grad_clip: Option<f64>) -> Result<Self> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::ParameterDomain(format!("learning rate must be finite and nonnegative, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::ParameterDomain(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if !(weight_decay >= 0.0) || !weight_decay.is_finite() {
            return Err(Error::ParameterDomain(format!("weight decay must be nonnegative, got {weight_decay}")));
        }
        if let Some(c) = grad_clip {
            if !(c > 0.0) {
                return Err(Error::ParameterDomain(format!("gradient clip must be positive, got {c}")));
            }
        }
        Ok(Self { lr, momentum, weight_decay, grad_clip })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn grad_clip(&self) -> Option<f64> {
        self.grad_clip
    }

    pub fn with_lr(&self, lr: f64) -> Result<Self> {
        Self::new(lr, self.momentum, self.weight_decay, self.grad_clip)
    }
}

/// Affine-invariant Riemannian gradient `P sym(G) P` of an ambient gradient.
pub fn riem_grad_spd(p: &SpdMatrix, g: &SymmetricMatrix) -> SymmetricMatrix {
    SymmetricMatrix::from_mat_unchecked(riem_grad_mat(p, g))
}

fn riem_grad_mat(p: &Mat, g: &Mat) -> Mat {
    sym(&(p * sym(g) * p))
}

fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// One momentum step on `slot`. A zero update leaves the value bit-identical.
pub fn step(slot: &mut ParamSlot, grad: &Mat, cfg: &OptConfig) -> Result<()> {
    if grad.shape() != slot.value.shape() {
        return Err(Error::Shape {
            expected: format!("{:?}", slot.value.shape()),
            got: format!("{:?}", grad.shape()),
        });
    }
    let diverged = || Error::Divergence { slot: slot.name.clone() };
    let g = match slot.kind {
        SlotKind::SpdAim => riem_grad_mat(&slot.value, grad),
        SlotKind::Rotation => (grad - grad.transpose()) * 0.5,
        SlotKind::Euclidean => grad + &slot.value * cfg.weight_decay,
    };
    if !all_finite(&g) {
        return Err(diverged());
    }
    let m = &slot.momentum * cfg.momentum + g;
    let update = &m * -cfg.lr;
    if update.iter().all(|&x| x == 0.0) {
        slot.momentum = m;
        return Ok(());
    }
    match slot.kind {
        SlotKind::SpdAim => {
            let next = riexp_aim_mat(&slot.value, &update).map_err(|_| diverged())?;
            if !all_finite(&next) || SpdMatrix::new(next.clone()).is_err() {
                return Err(diverged());
            }
            let moved = ptransport_mat(&MetricParams::aim_std(), &slot.value, &next, &m).map_err(|_| diverged())?;
            slot.value = next;
            slot.momentum = moved;
        }
        SlotKind::Rotation => {
            let r = RotationMatrix::from_mat_unchecked(slot.value.clone());
            let next = so_retract(&r, &SkewMatrix::skew_part(&update)).into_inner();
            if !all_finite(&next) || RotationMatrix::new(next.clone()).is_err() {
                return Err(diverged());
            }
            slot.value = next;
            slot.momentum = m;
        }
        SlotKind::Euclidean => {
            let next = &slot.value + update;
            if !all_finite(&next) {
                return Err(diverged());
            }
            slot.value = next;
            slot.momentum = m;
        }
    }
    Ok(())
}

/// Steps every slot with its gradient (same order).
pub fn step_all(slots: &mut [ParamSlot], grads: &[Mat], cfg: &OptConfig) -> Result<()> {
    if slots.len() != grads.len() {
        return Err(Error::Shape { expected: slots.len().to_string(), got: grads.len().to_string() });
    }
    for (slot, g) in slots.iter_mut().zip(grads) {
        step(slot, g, cfg)?;
    }
    Ok(())
}

/// Rescales the parameter gradients so their joint Frobenius norm is at
/// most `max_norm`. The feature gradient is not a parameter and is left as is.
pub fn clip_grads(mut bundle: GradBundle, max_norm: f64) -> GradBundle {
    let norm = bundle.param_norm();
    if norm > max_norm {
        bundle.scale_params(max_norm / norm);
    }
    bundle
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grad::{grad_lie_mlr, grad_spd_mlr, sym_basis};
    use crate::model::{Feature, Model};
    use crate::rmlr::{softmax_xent, LieMlrLayer, SpdMlrLayer};
    use crate::sample;
    use crate::spdgeo::{metric, Family};
    use crate::symlin::frob_inner;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn cfg(lr: f64, mom: f64) -> OptConfig {
        OptConfig::new(lr, mom, 0.0, None).unwrap()
    }

    #[test]
    fn riemannian_gradient_duality() {
        let p = SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let g = riem_grad_spd(&p, &SymmetricMatrix::from_diagonal(&[1.0, 0.0]));
        assert_eq!(g.as_mat(), SymmetricMatrix::from_diagonal(&[4.0, 0.0]).as_mat());
        let g0 = sample::symmetric(&mut rng(1), 3, 1.0);
        assert_eq!(riem_grad_spd(&SpdMatrix::identity(3), &g0), g0);

        let mut r = rng(2);
        let p = sample::spd(&mut r, 4, 20.0);
        let g = sample::symmetric(&mut r, 4, 1.0);
        let rg = riem_grad_spd(&p, &g);
        for e in sym_basis(4) {
            let v = SymmetricMatrix::from_mat_unchecked(e);
            let lhs = metric(&MetricParams::aim_std(), &p, &rg, &v).unwrap();
            assert!((lhs - frob_inner(&g, &v)).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn config_domain() {
        assert!(OptConfig::new(-1.0, 0.0, 0.0, None).is_err());
        assert!(OptConfig::new(0.1, 1.0, 0.0, None).is_err());
        assert!(OptConfig::new(0.1, 0.5, -1.0, None).is_err());
        assert!(OptConfig::new(0.1, 0.5, 0.0, Some(0.0)).is_err());
        assert!(OptConfig::new(0.0, 0.0, 0.0, Some(5.0)).is_ok());
    }

    #[test]
    fn step_examples() {
        let mut r = rng(3);
        let p = sample::spd(&mut r, 3, 10.0).into_inner();
        for kind in [SlotKind::SpdAim, SlotKind::Euclidean] {
            let mut slot = ParamSlot::new("x".into(), kind, p.clone());
            step(&mut slot, &Mat::zeros(3, 3), &cfg(0.1, 0.9)).unwrap();
            assert_eq!(slot.value(), &p);
        }
        let rot = sample::rotation(&mut r, 3).into_inner();
        let mut slot = ParamSlot::new("r".into(), SlotKind::Rotation, rot.clone());
        step(&mut slot, &Mat::zeros(3, 3), &cfg(0.1, 0.9)).unwrap();
        assert_eq!(slot.value(), &rot);

        let g = sample::gaussian(&mut r, 2, 3);
        let x = sample::gaussian(&mut r, 2, 3);
        let mut slot = ParamSlot::new("w".into(), SlotKind::Euclidean, x.clone());
        step(&mut slot, &g, &cfg(0.1, 0.0)).unwrap();
        assert!(crate::symlin::frob_norm(&(slot.value() - (&x - &g * 0.1))) <= 1e-15);
        assert!(step(&mut slot, &Mat::zeros(3, 3), &cfg(0.1, 0.0)).is_err());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut r = rng(4);
        let p = sample::spd(&mut r, 3, 10.0).into_inner();
        let rot = sample::rotation(&mut r, 3).into_inner();
        let mut slots = vec![
            ParamSlot::new("p".into(), SlotKind::SpdAim, p.clone()),
            ParamSlot::new("r".into(), SlotKind::Rotation, rot.clone()),
            ParamSlot::new("a".into(), SlotKind::Euclidean, p.clone()),
        ];
        let grads = vec![sample::gaussian(&mut r, 3, 3), sample::gaussian(&mut r, 3, 3), sample::gaussian(&mut r, 3, 3)];
        step_all(&mut slots, &grads, &cfg(0.0, 0.9)).unwrap();
        assert_eq!(slots[0].value(), &p);
        assert_eq!(slots[1].value(), &rot);
        assert_eq!(slots[2].value(), &p);
    }

    #[test]
    fn manifold_values_survive_many_steps() {
        let mut r = rng(5);
        let mut spd = ParamSlot::new("p".into(), SlotKind::SpdAim, sample::spd(&mut r, 4, 10.0).into_inner());
        let mut rot = ParamSlot::new("r".into(), SlotKind::Rotation, sample::rotation(&mut r, 3).into_inner());
        let c = cfg(0.1, 0.5);
        for _ in 0..1000 {
            // random direction of unit affine-invariant length at the current point
            let e = sample::symmetric(&mut r, 4, 1.0).into_inner();
            let e = &e / crate::symlin::frob_norm(&e);
            let isq = crate::symlin::eig_mat(spd.value()).unwrap().apply(crate::symlin::MatFn::Pow(-0.5));
            let g = &isq * e * &isq;
            step(&mut spd, &g, &c).unwrap();
            assert!(SpdMatrix::new(spd.value().clone()).is_ok());
            let h = sample::skew(&mut r, 3, 1.0).into_inner();
            step(&mut rot, &h, &c).unwrap();
            assert!(RotationMatrix::new(rot.value().clone()).is_ok());
        }
    }

    #[test]
    fn divergence_names_the_slot() {
        let mut slot = ParamSlot::new("A3".into(), SlotKind::Euclidean, Mat::zeros(2, 2));
        let g = Mat::from_element(2, 2, f64::NAN);
        match step(&mut slot, &g, &cfg(0.1, 0.0)) {
            Err(Error::Divergence { slot }) => assert_eq!(slot, "A3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clipping() {
        let mut r = rng(6);
        let layer = SpdMlrLayer::init(MetricParams::aim_std(), 3, 3, &mut r).unwrap();
        let s = sample::spd(&mut r, 3, 20.0);
        let (_, g) = grad_spd_mlr(&s, &layer, 0).unwrap();
        let b = GradBundle::Spd(g);
        let n = b.param_norm();
        assert_eq!(clip_grads(b.clone(), 2.0 * n), b);
        let half = clip_grads(b.clone(), 0.5 * n);
        assert_relative_eq!(half.param_norm(), 0.5 * n, max_relative = 1e-14);
        if let (GradBundle::Spd(h), GradBundle::Spd(o)) = (&half, &b) {
            assert_eq!(h.ds, o.ds);
            assert!(crate::symlin::frob_norm(&(&*h.dp[0] - &*o.dp[0] * 0.5)) <= 1e-15);
        }

        let lie = LieMlrLayer::init(3, 2, 2, &mut r).unwrap();
        let s: Vec<_> = (0..2).map(|_| sample::rotation3_bounded(&mut r, 1.0)).collect();
        let (_, g) = grad_lie_mlr(&s, &lie, 1).unwrap();
        let manual: f64 =
            g.dp.iter().flatten().chain(g.da.iter().flatten()).map(|m| frob_inner(m, m)).sum::<f64>().sqrt();
        let b = GradBundle::Lie(g);
        assert_relative_eq!(b.param_norm(), manual, max_relative = 1e-15);
        let clipped = clip_grads(b, 0.25 * manual);
        assert_relative_eq!(clipped.param_norm(), 0.25 * manual, max_relative = 1e-14);
    }

    fn batch_loss(model: &Model, batch: &[(Feature, usize)]) -> f64 {
        batch.iter().map(|(x, y)| softmax_xent(&model.logits(x).unwrap(), *y).unwrap().0).sum::<f64>()
            / batch.len() as f64
    }

    fn one_step(model: &Model, batch: &[(Feature, usize)], lr: f64) -> Model {
        let mut total: Option<GradBundle> = None;
        for (x, y) in batch {
            let (_, g) = model.record(x).unwrap().loss_and_grad(*y).unwrap();
            match &mut total {
                None => total = Some(g),
                Some(t) => t.axpy(1.0, &g).unwrap(),
            }
        }
        let mut total = total.unwrap();
        total.scale_params(1.0 / batch.len() as f64);
        let mut slots = model.to_slots();
        step_all(&mut slots, &model.slot_grads(&total).unwrap(), &cfg(lr, 0.0)).unwrap();
        model.with_slots(&slots).unwrap()
    }

    #[test]
    fn small_steps_descend() {
        let mut r = rng(7);
        for inst in 0..10 {
            let mut models = vec![Model::init_logeig(3, 3, &mut r).unwrap()];
            for f in Family::ALL {
                let theta = if f == Family::Lem { 1.0 } else { 0.5 };
                let mp = MetricParams::new(f, theta, 1.0, 0.0).unwrap();
                models.push(Model::init_spd(mp, 3, 3, &mut r).unwrap());
            }
            let spd_batch: Vec<_> = (0..6).map(|i| (Feature::Spd(sample::spd(&mut r, 3, 10.0)), i % 3)).collect();
            let lie = Model::init_lie(2, 3, &mut r).unwrap();
            let lie_batch: Vec<_> = (0..6)
                .map(|i| (Feature::Rotations((0..2).map(|_| sample::rotation3_bounded(&mut r, 1.5)).collect()), i % 3))
                .collect();
            let mut cases: Vec<(Model, &[(Feature, usize)])> =
                models.into_iter().map(|m| (m, spd_batch.as_slice())).collect();
            cases.push((lie, lie_batch.as_slice()));
            for (model, batch) in cases {
                // one step of plain gradient descent with a halving schedule
                let before = batch_loss(&model, batch);
                let mut lr = 0.1;
                let mut ok = false;
                for _ in 0..30 {
                    let after = batch_loss(&one_step(&model, batch, lr), batch);
                    if after <= before {
                        ok = true;
                        break;
                    }
                    lr *= 0.5;
                }
                assert!(ok, "instance {inst}: no descent");
            }
        }
    }

    #[test]
    fn momentum_is_transported() {
        let mut r = rng(8);
        let mut slot = ParamSlot::new("p".into(), SlotKind::SpdAim, sample::spd(&mut r, 3, 5.0).into_inner());
        let g = sample::symmetric(&mut r, 3, 1.0).into_inner();
        let before = slot.value().clone();
        step(&mut slot, &g, &cfg(0.05, 0.9)).unwrap();
        // the transported buffer keeps its affine-invariant length
        let aim = MetricParams::aim_std();
        let m0 = SymmetricMatrix::from_mat_unchecked(riem_grad_mat(&before, &g));
        let n0 = metric(&aim, &SpdMatrix::from_mat_unchecked(before), &m0, &m0).unwrap();
        let m1 = SymmetricMatrix::from_mat_unchecked(slot.momentum().clone());
        let n1 = metric(&aim, &SpdMatrix::from_mat_unchecked(slot.value().clone()), &m1, &m1).unwrap();
        assert_relative_eq!(n0, n1, max_relative = 1e-9);
    }
}
