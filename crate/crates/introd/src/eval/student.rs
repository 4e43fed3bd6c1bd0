use crate::data::{BiasConfig, Dataset, Sample};
use crate::error::{Error, Result};
use crate::introspect::{make_target, IntrodConfig};
use crate::num::{
    cross_entropy, sgd_step, softmax, LogitVector, MomentumBuffer, ProbVector, RngState, SgdConfig,
};
use crate::teacher::{CausalTeacher, MainBranch};

/// The student is just the baseline branch: the teacher's main-branch
/// architecture with a fresh initialization and no shortcut ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Student {
    pub net: MainBranch,
}

impl Student {
    pub fn new(bias: &BiasConfig, hidden: usize, rng: &mut RngState) -> Self {
        Student {
            net: MainBranch::new(bias, hidden, rng),
        }
    }

    pub fn predict(&self, sample: &Sample) -> Result<ProbVector> {
        softmax(&self.net.logits(sample))
    }
}

/// Mean distillation loss of the student on `batch` against per-sample
/// targets, with analytic gradients for every network parameter.
pub fn student_loss(
    student: &Student,
    batch: &[&Sample],
    targets: &[&ProbVector],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if batch.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            left: batch.len(),
            right: targets.len(),
        });
    }
    let mut grads = vec![0.0; student.net.n_params()];
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (sample, target) in batch.iter().zip(targets) {
        let cache = student.net.forward_cached(sample);
        let z = cache.logits();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch: 0 });
        }
        let p_s = softmax(&LogitVector(z.to_vec()))?;
        loss += inv_b * crate::num::kl_divergence(target, &p_s)?;
        let g_z: Vec<f64> = p_s
            .values()
            .iter()
            .zip(target.values())
            .map(|(&s, &t)| inv_b * (s - t))
            .collect();
        student.net.backward(&cache, &g_z, &mut grads);
    }
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged { epoch: 0 });
    }
    Ok((loss, grads))
}

/// Distills the frozen teacher's blended knowledge into the student.
/// Targets are recomputed from the teacher once per sample per epoch; the
/// teacher itself is never touched.
pub fn distill_student(
    student: &mut Student,
    teacher: &CausalTeacher,
    train: &Dataset,
    introd: &IntrodConfig,
    cfg: &SgdConfig,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if student.net.out_dim() != teacher.main.out_dim() {
        return Err(Error::DimensionMismatch {
            left: student.net.out_dim(),
            right: teacher.main.out_dim(),
        });
    }
    let mut params = student.net.params();
    let mut momentum = MomentumBuffer::zeros(params.len());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut targets = Vec::with_capacity(train.len());
        for sample in &train.samples {
            targets.push(make_target(sample, &teacher.outputs(sample)?, introd)?);
        }
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train.samples[i]).collect();
            let batch_targets: Vec<&ProbVector> = chunk.iter().map(|&i| &targets[i]).collect();
            let (loss, grads) =
                student_loss(student, &batch, &batch_targets).map_err(|e| at_epoch(e, epoch))?;
            epoch_loss += loss * batch.len() as f64;
            sgd_step(&mut params, &grads, &mut momentum, cfg).map_err(|e| at_epoch(e, epoch))?;
            student.net.load_params(&params);
        }
        epoch_loss /= train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curve.push(epoch_loss);
    }
    Ok(curve)
}

/// Conventional cross-entropy training of the bare student network; the
/// non-debiased reference point.
pub fn train_baseline(
    student: &mut Student,
    train: &Dataset,
    cfg: &SgdConfig,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let mut params = student.net.params();
    let mut momentum = MomentumBuffer::zeros(params.len());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; params.len()];
            let inv_b = 1.0 / chunk.len() as f64;
            let mut loss = 0.0;
            for &i in chunk {
                let sample = &train.samples[i];
                let cache = student.net.forward_cached(sample);
                if cache.logits().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged { epoch });
                }
                let p = softmax(&LogitVector(cache.logits().to_vec()))?;
                loss += inv_b * cross_entropy(&sample.gt_dist, &p)?;
                let g_z: Vec<f64> = p
                    .values()
                    .iter()
                    .zip(sample.gt_dist.values())
                    .map(|(&s, &t)| inv_b * (s - t))
                    .collect();
                student.net.backward(&cache, &g_z, &mut grads);
            }
            epoch_loss += loss * chunk.len() as f64;
            sgd_step(&mut params, &grads, &mut momentum, cfg).map_err(|e| at_epoch(e, epoch))?;
            student.net.load_params(&params);
        }
        epoch_loss /= train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curve.push(epoch_loss);
    }
    Ok(curve)
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Diverged { .. } => Error::Diverged { epoch },
        other => other,
    }
}
