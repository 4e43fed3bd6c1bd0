//! Two-branch causal QA model.
//!
//! The main branch reasons over question and context; the shortcut branch
//! sees only the bias source (question type, or the slot prior). Fusing them
//! gives the factual ID prediction; counterfactual inference on the fused
//! model gives the OOD prediction.

mod io;
mod train;

pub use io::{
    load_student, load_teacher, save_student, save_teacher, student_checksum, teacher_checksum,
    CHECKPOINT_FORMAT_VERSION,
};
pub use train::{
    counterfactual_alignment_grad, counterfactual_targets, teacher_loss, teacher_loss_with_targets,
    train_teacher,
};

use serde::{Deserialize, Serialize};

use crate::data::{BiasConfig, Dataset, Preset, Sample};
use crate::error::{Error, Result};
use crate::num::{softmax, LogitVector, ProbVector, RngState};

/// How the two branches are combined into the factual logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    /// Log-space ensembling: `z_main + z_short`.
    Sum,
    /// Sigmoid masking: `z_main * sigmoid(z_short)` elementwise.
    Gate,
}

/// Which counterfactual readout produces the OOD prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Debias {
    Nie,
    Tie,
}

impl std::str::FromStr for Fusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Fusion::Sum),
            "gate" => Ok(Fusion::Gate),
            other => Err(Error::InvalidConfig(format!("unknown fusion `{other}`"))),
        }
    }
}

impl std::str::FromStr for Debias {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nie" => Ok(Debias::Nie),
            "tie" => Ok(Debias::Tie),
            other => Err(Error::InvalidConfig(format!("unknown debias `{other}`"))),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain 2-layer rectifier MLP, He-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    /// Row-major `hidden x input_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `out_dim x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub(crate) struct MlpCache {
    pub a1: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: usize, out_dim: usize, rng: &mut RngState) -> Self {
        let s1 = (2.0 / input_dim as f64).sqrt();
        let s2 = (2.0 / hidden as f64).sqrt();
        Mlp {
            input_dim,
            hidden,
            out_dim,
            w1: (0..hidden * input_dim)
                .map(|_| s1 * rng.next_normal())
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..out_dim * hidden)
                .map(|_| s2 * rng.next_normal())
                .collect(),
            b2: vec![0.0; out_dim],
        }
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> MlpCache {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut a1 = vec![0.0; self.hidden];
        for j in 0..self.hidden {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            let mut acc = self.b1[j];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            a1[j] = acc;
        }
        let h: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();
        let mut z = vec![0.0; self.out_dim];
        for k in 0..self.out_dim {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            let mut acc = self.b2[k];
            for (w, hj) in row.iter().zip(&h) {
                acc += w * hj;
            }
            z[k] = acc;
        }
        MlpCache { a1, h, z }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).z
    }

    pub fn n_params(&self) -> usize {
        self.hidden * self.input_dim + self.hidden + self.out_dim * self.hidden + self.out_dim
    }

    pub(crate) fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
    }

    pub(crate) fn load_params(&mut self, src: &[f64]) {
        debug_assert_eq!(src.len(), self.n_params());
        let (w1, rest) = src.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    /// Backprop for `g = dL/dz`; accumulates parameter gradients into `grad`
    /// (same flat layout as `append_params`).
    pub(crate) fn backward(&self, x: &[f64], cache: &MlpCache, g_z: &[f64], grad: &mut [f64]) {
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        let mut g_h = vec![0.0; self.hidden];
        for k in 0..self.out_dim {
            let g = g_z[k];
            if g == 0.0 {
                continue;
            }
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            let grow = &mut gw2[k * self.hidden..(k + 1) * self.hidden];
            for j in 0..self.hidden {
                grow[j] += g * cache.h[j];
                g_h[j] += g * row[j];
            }
            gb2[k] += g;
        }
        for j in 0..self.hidden {
            if cache.a1[j] <= 0.0 || g_h[j] == 0.0 {
                continue;
            }
            let g = g_h[j];
            let grow = &mut gw1[j * self.input_dim..(j + 1) * self.input_dim];
            for (gi, xi) in grow.iter_mut().zip(x) {
                *gi += g * xi;
            }
            gb1[j] += g;
        }
    }
}

/// Shared per-slot scorer for the position preset.
///
/// Every slot is scored by the same 2-layer rectifier MLP over
/// `[question, slot token, one-hot(slot index)]`, mirroring how extractive
/// readers score each position with one head. The slot-index input is what
/// lets the model pick up a position shortcut at all.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotScorer {
    pub vocab: usize,
    pub slots: usize,
    pub hidden: usize,
    /// Row-major `hidden x (2*vocab + slots)`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden` weights of the scalar scoring head.
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub(crate) struct SlotScorerCache {
    pub inputs: Vec<Vec<f64>>,
    pub a1: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

impl SlotScorer {
    pub fn new(vocab: usize, slots: usize, hidden: usize, rng: &mut RngState) -> Self {
        let input_dim = 2 * vocab + slots;
        let s1 = (2.0 / input_dim as f64).sqrt();
        let s2 = (2.0 / hidden as f64).sqrt();
        SlotScorer {
            vocab,
            slots,
            hidden,
            w1: (0..hidden * input_dim)
                .map(|_| s1 * rng.next_normal())
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| s2 * rng.next_normal()).collect(),
            b2: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.vocab + self.slots
    }

    fn slot_input(&self, question: &[f64], context: &[f64], slot: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.input_dim());
        x.extend_from_slice(question);
        x.extend_from_slice(&context[slot * self.vocab..(slot + 1) * self.vocab]);
        for j in 0..self.slots {
            x.push(if j == slot { 1.0 } else { 0.0 });
        }
        x
    }

    pub(crate) fn forward_cached(&self, question: &[f64], context: &[f64]) -> SlotScorerCache {
        let mut cache = SlotScorerCache {
            inputs: Vec::with_capacity(self.slots),
            a1: Vec::with_capacity(self.slots),
            h: Vec::with_capacity(self.slots),
            z: vec![0.0; self.slots],
        };
        for slot in 0..self.slots {
            let x = self.slot_input(question, context, slot);
            let mut a1 = vec![0.0; self.hidden];
            for j in 0..self.hidden {
                let row = &self.w1[j * x.len()..(j + 1) * x.len()];
                let mut acc = self.b1[j];
                for (w, xi) in row.iter().zip(&x) {
                    acc += w * xi;
                }
                a1[j] = acc;
            }
            let h: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();
            let mut z = self.b2;
            for (w, hj) in self.w2.iter().zip(&h) {
                z += w * hj;
            }
            cache.z[slot] = z;
            cache.inputs.push(x);
            cache.a1.push(a1);
            cache.h.push(h);
        }
        cache
    }

    pub fn forward(&self, question: &[f64], context: &[f64]) -> Vec<f64> {
        self.forward_cached(question, context).z
    }

    pub fn n_params(&self) -> usize {
        self.hidden * self.input_dim() + self.hidden + self.hidden + 1
    }

    pub(crate) fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
    }

    pub(crate) fn load_params(&mut self, src: &[f64]) {
        debug_assert_eq!(src.len(), self.n_params());
        let (w1, rest) = src.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = b2[0];
    }

    pub(crate) fn backward(&self, cache: &SlotScorerCache, g_z: &[f64], grad: &mut [f64]) {
        let input_dim = self.input_dim();
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        for slot in 0..self.slots {
            let g = g_z[slot];
            if g == 0.0 {
                continue;
            }
            let h = &cache.h[slot];
            let a1 = &cache.a1[slot];
            let x = &cache.inputs[slot];
            gb2[0] += g;
            for j in 0..self.hidden {
                gw2[j] += g * h[j];
                if a1[j] <= 0.0 {
                    continue;
                }
                let gh = g * self.w2[j];
                let grow = &mut gw1[j * input_dim..(j + 1) * input_dim];
                for (gi, xi) in grow.iter_mut().zip(x) {
                    *gi += gh * xi;
                }
                gb1[j] += gh;
            }
        }
    }
}

/// The comprehensive-reasoning branch over question and context.
#[derive(Debug, Clone, PartialEq)]
pub enum MainBranch {
    /// One MLP over the concatenated `[question, context]` features
    /// (answer-prior preset).
    Dense(Mlp),
    /// Weight-shared per-slot scorer (position preset).
    Slot(SlotScorer),
}

pub(crate) enum MainCache {
    Dense(Vec<f64>, MlpCache),
    Slot(SlotScorerCache),
}

impl MainCache {
    pub fn logits(&self) -> &[f64] {
        match self {
            MainCache::Dense(_, c) => &c.z,
            MainCache::Slot(c) => &c.z,
        }
    }
}

impl MainBranch {
    pub fn new(bias: &BiasConfig, hidden: usize, rng: &mut RngState) -> Self {
        match bias.preset {
            Preset::AnswerPrior => MainBranch::Dense(Mlp::new(
                bias.question_dim() + bias.context_dim(),
                hidden,
                bias.n_answers,
                rng,
            )),
            Preset::Position => {
                MainBranch::Slot(SlotScorer::new(bias.n_types, bias.n_answers, hidden, rng))
            }
        }
    }

    pub(crate) fn forward_cached(&self, sample: &Sample) -> MainCache {
        match self {
            MainBranch::Dense(mlp) => {
                let mut x = Vec::with_capacity(mlp.input_dim);
                x.extend_from_slice(&sample.question_vec);
                x.extend_from_slice(&sample.context_vec);
                let cache = mlp.forward_cached(&x);
                MainCache::Dense(x, cache)
            }
            MainBranch::Slot(scorer) => {
                MainCache::Slot(scorer.forward_cached(&sample.question_vec, &sample.context_vec))
            }
        }
    }

    pub fn logits(&self, sample: &Sample) -> LogitVector {
        LogitVector(self.forward_cached(sample).logits().to_vec())
    }

    pub fn out_dim(&self) -> usize {
        match self {
            MainBranch::Dense(mlp) => mlp.out_dim,
            MainBranch::Slot(s) => s.slots,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            MainBranch::Dense(mlp) => mlp.hidden,
            MainBranch::Slot(s) => s.hidden,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            MainBranch::Dense(mlp) => mlp.n_params(),
            MainBranch::Slot(s) => s.n_params(),
        }
    }

    pub(crate) fn append_params(&self, out: &mut Vec<f64>) {
        match self {
            MainBranch::Dense(mlp) => mlp.append_params(out),
            MainBranch::Slot(s) => s.append_params(out),
        }
    }

    pub(crate) fn load_params(&mut self, src: &[f64]) {
        match self {
            MainBranch::Dense(mlp) => mlp.load_params(src),
            MainBranch::Slot(s) => s.load_params(src),
        }
    }

    pub(crate) fn backward(&self, cache: &MainCache, g_z: &[f64], grad: &mut [f64]) {
        match (self, cache) {
            (MainBranch::Dense(mlp), MainCache::Dense(x, c)) => mlp.backward(x, c, g_z, grad),
            (MainBranch::Slot(s), MainCache::Slot(c)) => s.backward(c, g_z, grad),
            _ => unreachable!("cache kind mismatch"),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.append_params(&mut out);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                left: flat.len(),
                right: self.n_params(),
            });
        }
        self.load_params(flat);
        Ok(())
    }
}

/// The single-source shortcut branch: sees only the bias variable.
#[derive(Debug, Clone, PartialEq)]
pub enum ShortcutBranch {
    /// Per-question-type answer logits (answer-prior preset).
    TypeEmbedding {
        n_types: usize,
        n_answers: usize,
        /// Row-major `n_types x n_answers`.
        logits: Vec<f64>,
    },
    /// One sample-independent logit vector over slots (position preset),
    /// initialized from the smoothed log training frequency of answer slots.
    SlotPrior { logits: Vec<f64> },
}

impl ShortcutBranch {
    pub fn type_embedding(n_types: usize, n_answers: usize) -> Self {
        ShortcutBranch::TypeEmbedding {
            n_types,
            n_answers,
            logits: vec![0.0; n_types * n_answers],
        }
    }

    /// Smoothed log-frequency prior over answer slots. `smoothing` is the
    /// Laplace pseudo-count expressed as a fraction of `n/slots`; 1.0 keeps
    /// the prior informative without saturating the fused softmax.
    pub fn slot_prior_from(train: &Dataset, smoothing: f64) -> Self {
        let slots = train.bias_config.n_answers;
        let mut counts = vec![0.0f64; slots];
        for s in &train.samples {
            counts[s.gt_answers[0]] += 1.0;
        }
        let n: f64 = counts.iter().sum();
        let alpha = smoothing * n / slots as f64;
        let logits = counts
            .iter()
            .map(|&c| ((c + alpha) / (n + alpha * slots as f64)).ln())
            .collect();
        ShortcutBranch::SlotPrior { logits }
    }

    pub fn logits(&self, sample: &Sample) -> Vec<f64> {
        match self {
            ShortcutBranch::TypeEmbedding {
                n_answers, logits, ..
            } => logits[sample.question_type * n_answers..(sample.question_type + 1) * n_answers]
                .to_vec(),
            ShortcutBranch::SlotPrior { logits } => logits.clone(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            ShortcutBranch::TypeEmbedding { logits, .. } => logits.len(),
            ShortcutBranch::SlotPrior { logits } => logits.len(),
        }
    }

    pub(crate) fn append_params(&self, out: &mut Vec<f64>) {
        match self {
            ShortcutBranch::TypeEmbedding { logits, .. } => out.extend_from_slice(logits),
            ShortcutBranch::SlotPrior { logits } => out.extend_from_slice(logits),
        }
    }

    pub(crate) fn load_params(&mut self, src: &[f64]) {
        match self {
            ShortcutBranch::TypeEmbedding { logits, .. } => logits.copy_from_slice(src),
            ShortcutBranch::SlotPrior { logits } => logits.copy_from_slice(src),
        }
    }

    /// Accumulates `dL/dz_short` into the flat gradient slice.
    pub(crate) fn backward(&self, sample: &Sample, g_z: &[f64], grad: &mut [f64]) {
        match self {
            ShortcutBranch::TypeEmbedding { n_answers, .. } => {
                let base = sample.question_type * n_answers;
                for (k, &g) in g_z.iter().enumerate() {
                    grad[base + k] += g;
                }
            }
            ShortcutBranch::SlotPrior { .. } => {
                for (gslot, &g) in grad.iter_mut().zip(g_z) {
                    *gslot += g;
                }
            }
        }
    }
}

/// Construction-time options for the teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub fusion: Fusion,
    pub debias: Debias,
    /// Hidden width of the main branch.
    pub hidden: usize,
    /// Weight of the shortcut-branch auxiliary cross-entropy.
    pub lambda_short: f64,
    /// Smoothing for the position-preset slot prior (see
    /// [`ShortcutBranch::slot_prior_from`]).
    pub prior_smoothing: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            fusion: Fusion::Sum,
            debias: Debias::Nie,
            hidden: 64,
            lambda_short: 1.0,
            prior_smoothing: 1.0,
        }
    }
}

/// Factual ID and counterfactual OOD predictions for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutputs {
    pub p_id: ProbVector,
    pub p_ood: ProbVector,
}

/// The fused two-branch model with both readouts.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalTeacher {
    pub main: MainBranch,
    pub shortcut: ShortcutBranch,
    pub fusion: Fusion,
    pub debias: Debias,
    /// Counterfactual constant: the logit every class takes when the main
    /// branch input is imagined away. Only meaningful under TIE.
    pub cf_value: f64,
    /// Weight of the shortcut-branch auxiliary loss during training.
    pub lambda_short: f64,
}

impl CausalTeacher {
    /// Builds an untrained teacher. `train` is needed by the position preset
    /// to seed the slot prior from answer-slot frequencies.
    pub fn new(
        cfg: &TeacherConfig,
        bias: &BiasConfig,
        train: &Dataset,
        rng: &mut RngState,
    ) -> Result<Self> {
        bias.validate()?;
        if cfg.hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        let main = MainBranch::new(bias, cfg.hidden, rng);
        let shortcut = match bias.preset {
            Preset::AnswerPrior => ShortcutBranch::type_embedding(bias.n_types, bias.n_answers),
            Preset::Position => ShortcutBranch::slot_prior_from(train, cfg.prior_smoothing),
        };
        Ok(CausalTeacher {
            main,
            shortcut,
            fusion: cfg.fusion,
            debias: cfg.debias,
            cf_value: 0.0,
            lambda_short: cfg.lambda_short,
        })
    }

    pub fn n_params(&self) -> usize {
        self.main.n_params() + self.shortcut.n_params() + 1
    }

    /// Flat parameter vector: main, shortcut, counterfactual constant.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.main.append_params(&mut out);
        self.shortcut.append_params(&mut out);
        out.push(self.cf_value);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                left: flat.len(),
                right: self.n_params(),
            });
        }
        let (main, rest) = flat.split_at(self.main.n_params());
        let (short, c) = rest.split_at(self.shortcut.n_params());
        self.main.load_params(main);
        self.shortcut.load_params(short);
        self.cf_value = c[0];
        Ok(())
    }

    /// Factual prediction: `softmax(fuse(z_main, z_short))`.
    pub fn predict_id(&self, sample: &Sample) -> Result<ProbVector> {
        let z_main = self.main.forward_cached(sample);
        let z_short = self.shortcut.logits(sample);
        let fused = fuse_slices(z_main.logits(), &z_short, self.fusion)?;
        softmax(&LogitVector(fused))
    }

    /// Counterfactual prediction: NIE drops the shortcut entirely; TIE
    /// subtracts the fused logits with the main branch at its counterfactual
    /// constant.
    pub fn predict_ood(&self, sample: &Sample) -> Result<ProbVector> {
        let z_main = self.main.forward_cached(sample);
        let z_short = self.shortcut.logits(sample);
        self.ood_from_logits(z_main.logits(), &z_short)
    }

    pub(crate) fn ood_from_logits(&self, z_main: &[f64], z_short: &[f64]) -> Result<ProbVector> {
        match self.debias {
            Debias::Nie => softmax(&LogitVector(z_main.to_vec())),
            Debias::Tie => {
                let factual = fuse_slices(z_main, z_short, self.fusion)?;
                let cf = vec![self.cf_value; z_main.len()];
                let counterfactual = fuse_slices(&cf, z_short, self.fusion)?;
                let diff: Vec<f64> = factual
                    .iter()
                    .zip(&counterfactual)
                    .map(|(f, c)| f - c)
                    .collect();
                softmax(&LogitVector(diff))
            }
        }
    }

    /// Both readouts in one pass.
    pub fn outputs(&self, sample: &Sample) -> Result<TeacherOutputs> {
        let z_main = self.main.forward_cached(sample);
        let z_short = self.shortcut.logits(sample);
        let fused = fuse_slices(z_main.logits(), &z_short, self.fusion)?;
        Ok(TeacherOutputs {
            p_id: softmax(&LogitVector(fused))?,
            p_ood: self.ood_from_logits(z_main.logits(), &z_short)?,
        })
    }
}

/// Combines branch logits per the fusion rule.
pub fn fuse(z_main: &LogitVector, z_short: &LogitVector, fusion: Fusion) -> Result<LogitVector> {
    Ok(LogitVector(fuse_slices(&z_main.0, &z_short.0, fusion)?))
}

pub(crate) fn fuse_slices(z_main: &[f64], z_short: &[f64], fusion: Fusion) -> Result<Vec<f64>> {
    if z_main.len() != z_short.len() {
        return Err(Error::DimensionMismatch {
            left: z_main.len(),
            right: z_short.len(),
        });
    }
    Ok(match fusion {
        Fusion::Sum => z_main.iter().zip(z_short).map(|(m, s)| m + s).collect(),
        Fusion::Gate => z_main
            .iter()
            .zip(z_short)
            .map(|(m, s)| m * sigmoid(*s))
            .collect(),
    })
}
