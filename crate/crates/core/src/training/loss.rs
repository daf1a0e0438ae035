use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RampSchedule;
use crate::autodiff::{Grads, Tape};
use crate::corpus::{GlossSequence, Sentence};
use crate::error::Result;
use crate::model::{Seq2SeqModel, Transformer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub cr: f64,
    pub total: f64,
    pub w_effective: f64,
}

/// Seeds of the two dropout passes. Fixing them freezes the masks, which
/// makes the loss a deterministic function of the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassSeeds(pub u64, pub u64);

/// Training loss of one example, optionally accumulating
/// `grad_scale · ∂total/∂θ` into `grads`.
///
/// With `consistency` on, the example runs through two dropout passes: `ce`
/// is the mean of their label-smoothed NLLs (summed over target tokens) and
/// `cr` the symmetric KL between their per-position distributions. With it
/// off, a single pass gives `ce` and `cr` is 0.
pub fn example_loss(
    net: &Transformer,
    src: &[usize],
    tgt: &[usize],
    w: f64,
    consistency: bool,
    seeds: PassSeeds,
    grads: Option<(&mut Grads, f64)>,
) -> LossBreakdown {
    let eps = net.config().label_smoothing;
    let mut tape = Tape::new(net.params());
    let mut rng_a = ChaCha8Rng::seed_from_u64(seeds.0);
    let (logits_a, targets) = net.teacher_forced(&mut tape, src, tgt, &mut Some(&mut rng_a));
    let nll_a = tape.smoothed_nll(logits_a, &targets, eps);
    let (root, ce, cr, w) = if consistency {
        let mut rng_b = ChaCha8Rng::seed_from_u64(seeds.1);
        let (logits_b, _) = net.teacher_forced(&mut tape, src, tgt, &mut Some(&mut rng_b));
        let nll_b = tape.smoothed_nll(logits_b, &targets, eps);
        let kl = tape.symmetric_kl(logits_a, logits_b);
        let root = tape.weighted_sum(&[(nll_a, 0.5), (nll_b, 0.5), (kl, w)]);
        let ce = 0.5 * (tape.scalar(nll_a) + tape.scalar(nll_b));
        (root, ce, tape.scalar(kl), w)
    } else {
        (nll_a, tape.scalar(nll_a), 0.0, 0.0)
    };
    if let Some((grads, scale)) = grads {
        tape.backward(root, scale, grads);
    }
    LossBreakdown { ce, cr, total: ce + w * cr, w_effective: w }
}

/// Label-smoothed cross-entropy `−log p(y|x)` with dropout disabled.
pub fn cross_entropy_loss(model: &Seq2SeqModel, x: &Sentence, y: &GlossSequence) -> Result<f64> {
    let (src, tgt) = model.encode_pair(x, y)?;
    let mut tape = Tape::new(model.net.params());
    let (logits, targets) = model.net.teacher_forced(&mut tape, &src, &tgt, &mut None);
    let nll = tape.smoothed_nll(logits, &targets, model.config().label_smoothing);
    Ok(tape.scalar(nll))
}

/// Symmetric KL between two dropout passes, averaged over target positions.
pub fn consistency_loss(model: &Seq2SeqModel, x: &Sentence, y: &GlossSequence, seeds: PassSeeds) -> Result<f64> {
    let (src, tgt) = model.encode_pair(x, y)?;
    Ok(example_loss(&model.net, &src, &tgt, 1.0, true, seeds, None).cr)
}

/// `ce + weight(step) · cr` for one example.
pub fn combined_loss(
    model: &Seq2SeqModel,
    x: &Sentence,
    y: &GlossSequence,
    step: usize,
    ramp: &RampSchedule,
    seeds: PassSeeds,
) -> Result<LossBreakdown> {
    let (src, tgt) = model.encode_pair(x, y)?;
    Ok(example_loss(&model.net, &src, &tgt, ramp.weight(step), true, seeds, None))
}
