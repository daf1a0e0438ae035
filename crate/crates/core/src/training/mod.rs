//! Losses and the two training stages.

mod adam;
mod augment;
mod loss;
mod ramp;
mod stage;

pub use adam::Adam;
pub use augment::{augment, augment_sentence, tag_prefix_len, AugmentConfig};
pub use loss::{combined_loss, consistency_loss, cross_entropy_loss, example_loss, LossBreakdown, PassSeeds};
pub use ramp::{RampConfig, RampSchedule, DEFAULT_TARGET_WEIGHT};
pub use stage::{
    dev_bleu4, encode_gold, encode_synthetic, steps_per_epoch, train_epoch, train_stage_one, train_stage_two,
    EarlyStopper, Example, Session, Stage, StageConfig, StageTwoOutcome, StepRecord, Verdict,
};
