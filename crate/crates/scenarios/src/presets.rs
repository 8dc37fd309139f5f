//! Scenario presets shipped with the crate.

use crate::config::{parse_config, ConfigError, ScenarioConfig};

const PRESETS: &[(&str, &str)] = &[
    ("illustrative-0idle", include_str!("../presets/illustrative-0idle.toml")),
    ("illustrative-30idle", include_str!("../presets/illustrative-30idle.toml")),
    ("illustrative-50idle", include_str!("../presets/illustrative-50idle.toml")),
    ("benefit-eta0", include_str!("../presets/benefit-eta0.toml")),
    ("benefit-eta1", include_str!("../presets/benefit-eta1.toml")),
    ("spectrum", include_str!("../presets/spectrum.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Raw TOML text of a preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parsed preset; `None` for an unknown name.
pub fn preset(name: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    preset_source(name).map(|s| parse_config(s, name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            let cfg = preset(name).unwrap().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn illustrative_parameters() {
        for (name, prob) in [("illustrative-0idle", 1.0), ("illustrative-30idle", 0.7), ("illustrative-50idle", 0.5)] {
            let cfg = preset(name).unwrap().unwrap();
            assert_eq!(cfg.run.etas, vec![1.0]);
            assert_eq!(cfg.run.runs, 100);
            let Scenario::Regression(s) = cfg.scenario else { panic!() };
            assert_eq!((s.network.nodes, s.network.dim, s.network.clusters.len()), (10, 2, 4));
            assert!(s.activation.steps.iter().all(|&m| m == 0.03));
            assert!(s.activation.step_probs.iter().all(|&q| q == prob));
            assert!(s.activation.link_probs.iter().all(|&p| p == prob));
            assert_eq!(s.activation.reg_prob, prob);
        }
    }

    #[test]
    fn benefit_parameters() {
        let cfg = preset("benefit-eta1").unwrap().unwrap();
        let Scenario::Regression(s) = cfg.scenario else { panic!() };
        assert_eq!((s.network.nodes, s.network.dim), (21, 9));
        assert_eq!(s.activation.link_probs, vec![0.8, 0.6, 0.4]);
        assert_eq!(s.activation.reg_prob, 0.75);
        let mean_steps: Vec<f64> = s.activation.steps.iter().zip(&s.activation.step_probs).map(|(m, q)| m * q).collect();
        assert!(mean_steps.iter().all(|m| (m - 0.8 / 30.0).abs() < 1e-15));
    }

    #[test]
    fn spectrum_parameters() {
        let cfg = preset("spectrum").unwrap().unwrap();
        assert_eq!(cfg.run.etas, vec![0.0, 0.015]);
        let Scenario::Spectrum(s) = cfg.scenario else { panic!() };
        assert_eq!((s.primaries(), s.users(), s.antennas), (3, 10, 4));
        assert_eq!((s.basis, s.frequencies, s.basis_var), (21, 80, 0.001));
        assert_eq!((s.noise_std, s.link_decay, s.step_prob, s.link_prob), (0.01, 0.15, 0.4, 0.4));
        let nonzero: Vec<Vec<usize>> = s
            .alpha
            .iter()
            .map(|a| a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect())
            .collect();
        assert_eq!(nonzero, vec![vec![2, 3, 4], vec![9, 10], vec![15, 16, 17]]);
    }
}
