//! Simulated fingertip contact signal and the contact-confirmation rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TactileSample {
    pub finger_id: usize,
    /// Normalized contact signal, never negative.
    pub c: f64,
    pub t: f64,
}

/// Linear ramp `max(0, 1 - d / contact_tolerance)` in the fingertip-to-surface
/// gap `d`. Penetration (`d < 0`) reads as full contact.
pub fn tactile_signal(d: f64, contact_tolerance: f64) -> f64 {
    (1.0 - d.max(0.0) / contact_tolerance).clamp(0.0, 1.0)
}

/// Per finger, true iff some sample reaches `c_thresh`.
pub fn verify_contact(samples: &[TactileSample], c_thresh: f64, fingers: usize) -> Result<Vec<bool>> {
    if !(c_thresh > 0.0) {
        return Err(Error::InvalidArgument("c_thresh must be positive".into()));
    }
    let mut confirmed = vec![false; fingers];
    for s in samples {
        if s.finger_id >= fingers {
            return Err(Error::IndexOutOfRange { index: s.finger_id, len: fingers });
        }
        if s.c >= c_thresh {
            confirmed[s.finger_id] = true;
        }
    }
    Ok(confirmed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rule() {
        let s = [TactileSample { finger_id: 0, c: 0.8, t: 0.0 }, TactileSample { finger_id: 2, c: 0.49, t: 0.1 }];
        assert_eq!(verify_contact(&s, 0.5, 3).unwrap(), vec![true, false, false]);
        assert!(verify_contact(&s, 0.0, 3).is_err());
    }

    #[test]
    fn signal_ramp() {
        assert_eq!(tactile_signal(0.0, 0.005), 1.0);
        assert_eq!(tactile_signal(-0.001, 0.005), 1.0);
        assert!((tactile_signal(0.0025, 0.005) - 0.5).abs() < 1e-15);
        assert_eq!(tactile_signal(0.01, 0.005), 0.0);
        let on_surface = TactileSample { finger_id: 0, c: tactile_signal(0.0, 0.005), t: 0.0 };
        assert_eq!(verify_contact(&[on_surface], 1.0, 1).unwrap(), vec![true]);
    }
}
