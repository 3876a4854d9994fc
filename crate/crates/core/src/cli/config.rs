//! `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Keys are case-sensitive and
//! unknown keys are rejected, so a misspelled parameter never falls back to
//! its default.

use std::path::Path;

use crate::economy::EconomyParams;
use crate::error::{PceError, Result};
use crate::special_math::DEFAULT_ORDER;

/// Every accepted key, in the order [`Config::render`] writes them.
pub const KEYS: [&str; 19] = [
    "mu_X",
    "sigma_X",
    "T",
    "Pi",
    "omega_I",
    "omega_N",
    "omega_U",
    "gamma_I",
    "gamma_N",
    "eta_U",
    "C_I",
    "C_N",
    "tau_N",
    "mu_N",
    "pi0_U",
    "x0",
    "quad_order",
    "h_quantiles",
    "mc_seed",
];

#[derive(Debug, Clone)]
pub struct Config {
    pub params: EconomyParams,
    pub quad_order: usize,
    pub h_quantiles: Vec<f64>,
    pub mc_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            params: EconomyParams::baseline(),
            quad_order: DEFAULT_ORDER,
            h_quantiles: vec![0.1, 0.5, 0.9],
            mc_seed: 20_240_611,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| PceError::Config(format!("{key}: cannot parse {value:?} as a number")))
}

impl Config {
    /// Reads a file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every assignment in `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| PceError::Config(format!("line {}: {}", n + 1, strip(e))))?;
        }
        Ok(())
    }

    /// Applies one `key = value` (or `key=value`) assignment.
    pub fn apply_assignment(&mut self, line: &str) -> Result<()> {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| PceError::Config(format!("expected key = value, got {line:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        let slot = match key {
            "mu_X" => &mut p.mu_x,
            "sigma_X" => &mut p.sigma_x,
            "T" => &mut p.horizon,
            "Pi" => &mut p.supply,
            "omega_I" => &mut p.omega_i,
            "omega_N" => &mut p.omega_n,
            "omega_U" => &mut p.omega_u,
            "gamma_I" => &mut p.gamma_i,
            "gamma_N" => &mut p.gamma_n,
            "eta_U" => &mut p.eta_u,
            "C_I" => &mut p.c_i,
            "C_N" => &mut p.c_n,
            "tau_N" => &mut p.tau_n,
            "mu_N" => &mut p.mu_n,
            "pi0_U" => &mut p.pi0_u,
            "x0" => &mut p.x0,
            "quad_order" => {
                self.quad_order = value.parse().map_err(|_| {
                    PceError::Config(format!("quad_order: {value:?} is not a positive integer"))
                })?;
                return Ok(());
            }
            "mc_seed" => {
                self.mc_seed = value
                    .parse()
                    .map_err(|_| PceError::Config(format!("mc_seed: {value:?} is not a u64")))?;
                return Ok(());
            }
            "h_quantiles" => {
                self.h_quantiles = value
                    .split(',')
                    .map(|v| parse_f64(key, v.trim()))
                    .collect::<Result<_>>()?;
                return Ok(());
            }
            _ => return Err(PceError::Config(format!("unknown key {key:?}"))),
        };
        *slot = parse_f64(key, value)?;
        Ok(())
    }

    /// Checks the economy and the run settings.
    pub fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| PceError::Config(strip(e)))?;
        if self.quad_order < 2 {
            return Err(PceError::Config(format!(
                "quad_order = {} must be at least 2",
                self.quad_order
            )));
        }
        if self.h_quantiles.is_empty() {
            return Err(PceError::Config("h_quantiles is empty".into()));
        }
        if let Some(q) = self.h_quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(PceError::Config(format!("h quantile {q} outside (0, 1)")));
        }
        Ok(())
    }

    /// The configuration as parseable text.
    pub fn render(&self) -> String {
        let p = &self.params;
        let values = [
            p.mu_x, p.sigma_x, p.horizon, p.supply, p.omega_i, p.omega_n, p.omega_u, p.gamma_i,
            p.gamma_n, p.eta_u, p.c_i, p.c_n, p.tau_n, p.mu_n, p.pi0_u, p.x0,
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        let qs: Vec<String> = self.h_quantiles.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("quad_order = {}\n", self.quad_order));
        out.push_str(&format!("h_quantiles = {}\n", qs.join(", ")));
        out.push_str(&format!("mc_seed = {}\n", self.mc_seed));
        out
    }
}

/// Message of a config error without its prefix, for nesting.
fn strip(e: PceError) -> String {
    match e {
        PceError::Config(m) | PceError::InvalidParameter(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut cfg = Config::default();
        cfg.set("eta_U", "2.5").unwrap();
        cfg.set("h_quantiles", "0.2, 0.8").unwrap();
        let mut back = Config::default();
        back.apply_text(&cfg.render()).unwrap();
        assert_eq!(back.params.eta_u, 2.5);
        assert_eq!(back.h_quantiles, vec![0.2, 0.8]);
        assert_eq!(back.render(), cfg.render());
    }

    #[test]
    fn comments_and_spacing() {
        let mut cfg = Config::default();
        cfg.apply_text("# header\n\n  C_N=0.5   # noisier\nmc_seed = 9\n")
            .unwrap();
        assert_eq!(cfg.params.c_n, 0.5);
        assert_eq!(cfg.mc_seed, 9);
    }

    #[test]
    fn unknown_and_malformed_lines() {
        let mut cfg = Config::default();
        let err = cfg.apply_text("eta_u = 2\n").unwrap_err();
        assert!(matches!(&err, PceError::Config(m) if m.contains("line 1") && m.contains("eta_u")));
        assert!(cfg.apply_text("sigma_X 0.3").is_err());
        assert!(cfg.apply_text("sigma_X = abc").is_err());
        assert!(cfg.apply_text("quad_order = -4").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = Config::default();
        assert!(cfg.validate().is_ok());
        cfg.set("omega_U", "0.5").unwrap();
        assert!(matches!(cfg.validate(), Err(PceError::Config(_))));
        let cfg = Config {
            h_quantiles: vec![0.5, 1.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
