//! Configurations of the published experiments, compiled into the binary.

use crate::config::{parse_config, ConfigError, ExperimentConfig};

pub const PRESETS: &[(&str, &str)] = &[
    ("example1_h_beta1", include_str!("../presets/example1_h_beta1.cfg")),
    ("example1_h_beta2", include_str!("../presets/example1_h_beta2.cfg")),
    ("example1_h_beta3", include_str!("../presets/example1_h_beta3.cfg")),
    ("example1_p", include_str!("../presets/example1_p.cfg")),
    ("example1_hp_sigma02", include_str!("../presets/example1_hp_sigma02.cfg")),
    ("example1_hp_sigma05", include_str!("../presets/example1_hp_sigma05.cfg")),
    ("example3_gamma1_beta1", include_str!("../presets/example3_gamma1_beta1.cfg")),
    ("example3_gamma1_beta2", include_str!("../presets/example3_gamma1_beta2.cfg")),
    ("example3_gamma1_beta3", include_str!("../presets/example3_gamma1_beta3.cfg")),
    ("example4_gamma2", include_str!("../presets/example4_gamma2.cfg")),
    ("example5_cp2", include_str!("../presets/example5_cp2.cfg")),
    ("example5_cp3", include_str!("../presets/example5_cp3.cfg")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn load_preset(name: &str) -> Option<Result<ExperimentConfig, ConfigError>> {
    preset_text(name).map(parse_config)
}
