//! Flat key-value experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::{Pair, Surface};
use crate::assembly::{FormParameters, FormVariant, Stabilization};
use crate::par::ExecMode;
use crate::{Error, Result};

/// Highest level accepted; level 7 already needs several gigabytes.
pub const MAX_LEVEL: u32 = 7;

/// Every key is optional in the file. Missing keys take the standard
/// parameter choices: `τ = h⁻²`, `ρ_p = h`, `ρ_u = h⁻¹` for P2–P1 and
/// `ρ_u = h` for P1–P1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub surface: Surface,
    pub levels: Vec<u32>,
    pub pair: Pair,
    /// Defaults to `consistent` for P2–P1 and `inconsistent` for P1–P1.
    pub form: Option<FormVariant>,
    /// Defaults depend on the experiment family.
    pub stabilizations: Option<Vec<Stabilization>>,
    /// Stabilization added to `M0` in `M★` when `C★ = 0`; the default pairs
    /// `S_0` with the plain surface mass `M0`.
    pub unstabilized_mass: Stabilization,
    pub c_tau: f64,
    pub c_u: f64,
    /// `ρ_u = c_u h^e`; defaults to −1 for P2–P1 and 1 for P1–P1.
    pub rho_u_exponent: Option<i32>,
    pub c_p: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub maxit: usize,
    /// Sub-refinement `m` of the integration surface; 0 selects `⌈1/h⌉`.
    pub subdivision: usize,
    pub shift_direction: [f64; 3],
    pub shift_alpha: f64,
    pub shift_alphas: Vec<f64>,
    pub shift_level: u32,
    pub dense_cap: usize,
    /// Cross-check the sparse eigenvalues with the dense solver when the
    /// pressure dimension is below `dense_cap`.
    pub dense_check: bool,
    pub eigen_count: usize,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            surface: Surface::Sphere,
            levels: vec![2, 3, 4],
            pair: Pair::P2P1,
            form: None,
            stabilizations: None,
            unstabilized_mass: Stabilization::None,
            c_tau: 1.0,
            c_u: 1.0,
            rho_u_exponent: None,
            c_p: 1.0,
            epsilon: 1e-6,
            tol: 1e-8,
            maxit: 1000,
            subdivision: 0,
            shift_direction: [1.0, 1.0, 1.0],
            shift_alpha: 0.0,
            shift_alphas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            shift_level: 4,
            dense_cap: 3000,
            dense_check: true,
            eigen_count: 3,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.normalized()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Validates and normalizes the shift direction.
    pub fn normalized(mut self) -> Result<Self> {
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("levels must be strictly ascending".into()));
        }
        if self
            .levels
            .iter()
            .chain([&self.shift_level])
            .any(|&l| l > MAX_LEVEL)
        {
            return Err(Error::Config(format!(
                "levels above {MAX_LEVEL} are not supported"
            )));
        }
        let d = self.shift_direction;
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::Config(
                "shift_direction must be a nonzero finite vector".into(),
            ));
        }
        self.shift_direction = d.map(|c| c / len);
        let positive = [
            ("c_tau", self.c_tau),
            ("c_u", self.c_u),
            ("c_p", self.c_p),
            ("tol", self.tol),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{k} must be positive, got {v}")));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1e-3], got {}",
                self.epsilon
            )));
        }
        if self.maxit == 0 || self.eigen_count < 2 {
            return Err(Error::Config(
                "maxit must be positive and eigen_count at least 2".into(),
            ));
        }
        if self.shift_alphas.is_empty()
            || self
                .shift_alphas
                .iter()
                .chain([&self.shift_alpha])
                .any(|a| !a.is_finite())
        {
            return Err(Error::Config(
                "shift amounts must be finite and shift_alphas nonempty".into(),
            ));
        }
        if let Some(s) = &self.stabilizations {
            if s.is_empty() {
                return Err(Error::Config("stabilizations must not be empty".into()));
            }
        }
        Ok(self)
    }

    /// Fills every pair-dependent default so the echo reproduces the run.
    pub fn resolved(mut self, default_stabilizations: &[Stabilization]) -> Self {
        self.form = Some(self.form_variant());
        self.rho_u_exponent = Some(self.rho_u_power());
        if self.stabilizations.is_none() {
            self.stabilizations = Some(default_stabilizations.to_vec());
        }
        self
    }

    pub fn form_variant(&self) -> FormVariant {
        self.form.unwrap_or(match self.pair {
            Pair::P2P1 => FormVariant::Consistent,
            Pair::P1P1 => FormVariant::Inconsistent,
        })
    }

    pub fn rho_u_power(&self) -> i32 {
        self.rho_u_exponent.unwrap_or(match self.pair {
            Pair::P2P1 => -1,
            Pair::P1P1 => 1,
        })
    }

    pub fn stabilization_list(&self, default: &[Stabilization]) -> Vec<Stabilization> {
        self.stabilizations
            .clone()
            .unwrap_or_else(|| default.to_vec())
    }

    /// `M★` partner of a pressure stabilization.
    pub fn mass_for(&self, stab: Stabilization) -> Stabilization {
        match stab {
            Stabilization::None => self.unstabilized_mass,
            s => s,
        }
    }

    pub fn parameters(&self, h: f64) -> FormParameters {
        FormParameters::scaled(
            h,
            self.c_tau,
            self.c_u,
            self.rho_u_power(),
            self.c_p,
            self.form_variant(),
        )
    }

    pub fn subdivision_override(&self) -> Option<usize> {
        (self.subdivision > 0).then_some(self.subdivision)
    }

    pub fn exec_mode(&self) -> ExecMode {
        if self.parallel {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_captions() {
        let c = ExperimentConfig::from_toml("").unwrap();
        let p = c.parameters(0.5);
        assert_eq!(p.tau, 4.0);
        assert_eq!(p.rho_u, 2.0);
        assert_eq!(p.rho_p, 0.5);
        let c = ExperimentConfig::from_toml("pair = \"P1P1\"").unwrap();
        assert_eq!(c.parameters(0.5).rho_u, 0.5);
        assert_eq!(c.form_variant(), FormVariant::Inconsistent);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "levels = [3, 2]",
            "levels = []",
            "epsilon = 0.1",
            "colour = 1",
            "shift_direction = [0, 0, 0]",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::from_toml(
            "shift_direction = [2, 0, 0]\nstabilizations = [\"none\", \"full\"]",
        )
        .unwrap()
        .resolved(&[Stabilization::Normal]);
        assert_eq!(c.shift_direction, [1.0, 0.0, 0.0]);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
