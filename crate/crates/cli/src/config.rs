//! Flat key-value scenario configuration.
//!
//! The on-disk format is one `key = value` pair per line with `#` comments.
//! Keys carry their unit or role in the name. Unknown keys are rejected so
//! sweep scripts fail loudly on typos, and `parse(serialize(c)) == c`.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Manifold dimension.
    pub dimension_n: usize,
    /// Strong-block dimension.
    pub block_dim_r: usize,
    /// Axis period of the closed geodesic chart.
    pub period_time: f64,
    /// Transverse chart validity radius.
    pub chart_radius: f64,
    /// Tube scale of the deformation.
    pub epsilon_tube: f64,
    /// Ramp width of the bump profiles.
    pub tau_ramp: f64,
    /// Slack factor in the profile sup bound.
    pub delta_slack: f64,
    /// Overall multiplier on the deformation.
    pub amplitude_scale: f64,
    /// Cone openings to certify.
    pub cone_openings: Vec<f64>,
    /// Transversality threshold on velocity components.
    pub theta_transversal: f64,
    /// Integrator tolerance.
    pub tol_integration: f64,
    /// Orbit horizon.
    pub t_end_time: f64,
    /// Invariance window length.
    pub t_window_time: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            dimension_n: 4,
            block_dim_r: 1,
            period_time: std::f64::consts::TAU,
            chart_radius: 3.0,
            epsilon_tube: 0.02,
            tau_ramp: 0.01,
            delta_slack: 0.1,
            amplitude_scale: 1.0,
            cone_openings: vec![1.1, 1.3, 1.5, 1.7, 1.9],
            theta_transversal: 0.5,
            tol_integration: 1e-9,
            t_end_time: 10.0,
            t_window_time: 2.0,
            seed: 42,
        }
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{line}`", lineno + 1);
            };
            let key = key.trim();
            let value = value.trim();
            let ctx = |what: &str| format!("line {}: invalid {what} `{value}`", lineno + 1);
            match key {
                "dimension_n" => cfg.dimension_n = value.parse().with_context(|| ctx("integer"))?,
                "block_dim_r" => cfg.block_dim_r = value.parse().with_context(|| ctx("integer"))?,
                "period_time" => cfg.period_time = value.parse().with_context(|| ctx("number"))?,
                "chart_radius" => cfg.chart_radius = value.parse().with_context(|| ctx("number"))?,
                "epsilon_tube" => cfg.epsilon_tube = value.parse().with_context(|| ctx("number"))?,
                "tau_ramp" => cfg.tau_ramp = value.parse().with_context(|| ctx("number"))?,
                "delta_slack" => cfg.delta_slack = value.parse().with_context(|| ctx("number"))?,
                "amplitude_scale" => {
                    cfg.amplitude_scale = value.parse().with_context(|| ctx("number"))?
                }
                "cone_openings" => {
                    cfg.cone_openings = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .with_context(|| ctx("number list"))?;
                }
                "theta_transversal" => {
                    cfg.theta_transversal = value.parse().with_context(|| ctx("number"))?
                }
                "tol_integration" => {
                    cfg.tol_integration = value.parse().with_context(|| ctx("number"))?
                }
                "t_end_time" => cfg.t_end_time = value.parse().with_context(|| ctx("number"))?,
                "t_window_time" => {
                    cfg.t_window_time = value.parse().with_context(|| ctx("number"))?
                }
                "seed" => cfg.seed = value.parse().with_context(|| ctx("integer"))?,
                other => bail!("line {}: unknown key `{other}`", lineno + 1),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension_n < 2 {
            bail!("dimension_n must be at least 2");
        }
        if self.block_dim_r == 0 || self.block_dim_r >= self.dimension_n {
            bail!("block_dim_r must satisfy 1 <= r <= n - 1");
        }
        if self.period_time <= 0.0 || self.chart_radius <= 0.0 {
            bail!("period_time and chart_radius must be positive");
        }
        if !(0.0 < self.epsilon_tube && self.epsilon_tube < self.chart_radius) {
            bail!("epsilon_tube must lie in (0, chart_radius)");
        }
        if !(0.0..0.5).contains(&self.tau_ramp) {
            bail!("tau_ramp must lie in [0, 1/2)");
        }
        if self.delta_slack < 0.0 {
            bail!("delta_slack must be nonnegative");
        }
        if self.cone_openings.is_empty()
            || self.cone_openings.iter().any(|c| !(1.0 < *c && *c < 2.0))
        {
            bail!("cone_openings must be a nonempty list inside (1, 2)");
        }
        if !(0.0 < self.theta_transversal && self.theta_transversal < 1.0) {
            bail!("theta_transversal must lie in (0, 1)");
        }
        if self.tol_integration <= 0.0 || self.t_end_time <= 0.0 || self.t_window_time <= 0.0 {
            bail!("tolerances and time spans must be positive");
        }
        Ok(())
    }

    /// Canonical text form; floats use the shortest round-tripping
    /// representation.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dimension_n = {}", self.dimension_n);
        let _ = writeln!(out, "block_dim_r = {}", self.block_dim_r);
        let _ = writeln!(out, "period_time = {}", self.period_time);
        let _ = writeln!(out, "chart_radius = {}", self.chart_radius);
        let _ = writeln!(out, "epsilon_tube = {}", self.epsilon_tube);
        let _ = writeln!(out, "tau_ramp = {}", self.tau_ramp);
        let _ = writeln!(out, "delta_slack = {}", self.delta_slack);
        let _ = writeln!(out, "amplitude_scale = {}", self.amplitude_scale);
        let openings: Vec<String> = self.cone_openings.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "cone_openings = {}", openings.join(","));
        let _ = writeln!(out, "theta_transversal = {}", self.theta_transversal);
        let _ = writeln!(out, "tol_integration = {}", self.tol_integration);
        let _ = writeln!(out, "t_end_time = {}", self.t_end_time);
        let _ = writeln!(out, "t_window_time = {}", self.t_window_time);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }

    /// Sorted `(key, value)` echo for reports.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.serialize()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = ScenarioConfig::default();
        cfg.epsilon_tube = 0.017;
        cfg.cone_openings = vec![1.15, 1.85];
        cfg.seed = 987654321;
        let text = cfg.serialize();
        let back = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(back.serialize(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::parse("epsilon_tube = 0.02\nbogus_key = 1\n");
        assert!(err.is_err());
        assert!(format!("{:#}", err.unwrap_err()).contains("unknown key"));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = ScenarioConfig::parse("# comment\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(ScenarioConfig::parse("tau_ramp = 0.5").is_err());
        assert!(ScenarioConfig::parse("cone_openings = 2.5").is_err());
        assert!(ScenarioConfig::parse("block_dim_r = 4").is_err());
        assert!(ScenarioConfig::parse("epsilon_tube = -1").is_err());
    }
}
