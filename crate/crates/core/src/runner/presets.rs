//! The seven reference experiments.
//!
//! | name | cost | leader-follower kernel |
//! |------|------|------------------------|
//! | E0 | none (uncontrolled) | bounded confidence |
//! | E1 | centring, both species, `w_d = -0.5` | bounded confidence |
//! | E2 | centring, followers only | bounded confidence |
//! | E3 | centring, both species | Sznajd `b = -1` |
//! | E4 | centring, followers only | Sznajd `b = -1` |
//! | E5 | final-time tracking of `g_I`, both species | bounded confidence |
//! | E6 | final-time tracking of `g_I`, followers only | bounded confidence |

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, Source};

pub const PRESETS: [&str; 7] = ["E0", "E1", "E2", "E3", "E4", "E5", "E6"];

/// Step sizes: the tracking costs have gradients two orders of magnitude
/// larger than the centring costs.
const NU_CENTRING: &str = "0.1";
const NU_TRACKING: &str = "0.002";

pub fn preset_config(name: &str) -> Result<ExperimentConfig> {
    let settings: &[(&str, &str)] = match name {
        "E0" => &[("cost.kind", "none")],
        "E1" => &[("cost.kind", "centring_both"), ("sweep.nu", NU_CENTRING)],
        "E2" => &[("cost.kind", "centring_follower"), ("sweep.nu", NU_CENTRING)],
        "E3" => &[
            ("cost.kind", "centring_both"),
            ("model.kernel_LF", "sznajd(-1)"),
            ("sweep.nu", NU_CENTRING),
        ],
        "E4" => &[
            ("cost.kind", "centring_follower"),
            ("model.kernel_LF", "sznajd(-1)"),
            ("sweep.nu", NU_CENTRING),
        ],
        "E5" => &[("cost.kind", "final_time_both"), ("sweep.nu", NU_TRACKING)],
        "E6" => &[("cost.kind", "final_time_follower"), ("sweep.nu", NU_TRACKING)],
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    let mut cfg = ExperimentConfig::default();
    cfg.preset = Some(name.to_string());
    for (key, value) in settings {
        cfg.set(key, value, Source::Preset(name.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}
