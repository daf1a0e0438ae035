use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TARGET_WEIGHT: f64 = 20.0;

/// Consistency weight rising linearly from 0 to `target_w` over
/// `ramp_steps` optimizer steps, then held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub target_w: f64,
    pub ramp_steps: usize,
}

impl RampSchedule {
    pub fn new(target_w: f64, ramp_steps: usize) -> Result<Self> {
        if !(target_w >= 0.0 && target_w.is_finite()) {
            return Err(Error::Config(format!("ramp target weight {target_w} must be finite and ≥ 0")));
        }
        if ramp_steps == 0 {
            return Err(Error::Config("ramp_steps must be positive".into()));
        }
        Ok(RampSchedule { target_w, ramp_steps })
    }

    pub fn weight(&self, step: usize) -> f64 {
        if step >= self.ramp_steps {
            self.target_w
        } else {
            self.target_w * step as f64 / self.ramp_steps as f64
        }
    }
}

/// Ramp settings as configured; without `ramp_steps` the ramp spans all
/// pre-training steps of the first iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RampConfig {
    pub target_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_steps: Option<usize>,
}

impl Default for RampConfig {
    fn default() -> Self {
        RampConfig { target_w: DEFAULT_TARGET_WEIGHT, ramp_steps: None }
    }
}

impl RampConfig {
    pub fn schedule(&self, default_steps: usize) -> Result<RampSchedule> {
        RampSchedule::new(self.target_w, self.ramp_steps.unwrap_or(default_steps.max(1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let r = RampSchedule::new(20.0, 1000).unwrap();
        assert_eq!(r.weight(0), 0.0);
        assert_eq!(r.weight(500), 10.0);
        assert_eq!(r.weight(1000), 20.0);
        assert_eq!(r.weight(5000), 20.0);
        assert!(RampSchedule::new(20.0, 0).is_err());
        assert!(RampSchedule::new(-1.0, 5).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_clamped(w in 0.0f64..100.0, ramp in 1usize..500, a in 0usize..1000, b in 0usize..1000) {
            let r = RampSchedule::new(w, ramp).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(r.weight(lo) <= r.weight(hi));
            prop_assert!(r.weight(hi) <= w);
        }
    }
}
