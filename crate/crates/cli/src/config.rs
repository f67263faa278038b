//! TOML run configuration. Unknown keys and conflicting pairs are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use fcqkd_core::modulator::{bias_phase_from_voltage, index_from_voltage, make_modulator};
use fcqkd_core::montecarlo::SessionConfig;
use fcqkd_core::protocol::Protocol;
use fcqkd_core::{LinkSpec, ModulatorKind, ModulatorSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Half-wave voltages of the reference devices, in volts.
pub const DEFAULT_V_PI_AM: f64 = 4.7;
pub const DEFAULT_V_PI_PM: f64 = 7.4;
pub const DEFAULT_V_PI_UM: f64 = 5.5;

pub const DEFAULT_RF_GHZ: f64 = 15.0;

pub fn default_v_pi(kind: ModulatorKind) -> f64 {
    match kind {
        ModulatorKind::Am => DEFAULT_V_PI_AM,
        ModulatorKind::Pm => DEFAULT_V_PI_PM,
        ModulatorKind::Um => DEFAULT_V_PI_UM,
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub source: SourceSection,
    pub alice: ModulatorSection,
    pub bob: ModulatorSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub montecarlo: Option<MonteCarloSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Laser metadata. Carried through to reports, never used in the physics.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "default_power")]
    pub power_dbm: f64,
}

fn default_wavelength() -> f64 {
    1550.0
}

fn default_power() -> f64 {
    5.0
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            wavelength_nm: default_wavelength(),
            power_dbm: default_power(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorSection {
    pub kind: ModulatorKind,
    pub v_pi_volts: Option<f64>,
    pub m: Option<f64>,
    pub v_rf_volts: Option<f64>,
    pub psi: Option<f64>,
    pub v_dc_volts: Option<f64>,
    #[serde(default)]
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "default_rf")]
    pub rf_ghz: f64,
    #[serde(default)]
    pub link_phase_rad: f64,
    #[serde(default = "default_loss")]
    pub loss: f64,
}

fn default_rf() -> f64 {
    DEFAULT_RF_GHZ
}

fn default_loss() -> f64 {
    1.0
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            rf_ghz: default_rf(),
            link_phase_rad: 0.0,
            loss: default_loss(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Effective phase ΔΦ; Bob's RF phase is solved for each point.
    DeltaPhi,
    /// Bob's RF phase Φ_B directly.
    PhiB,
}

/// `steps` points `start + i·(stop − start)/steps`, stop excluded.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_variable")]
    pub variable: SweepVariable,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "default_stop")]
    pub stop: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_variable() -> SweepVariable {
    SweepVariable::DeltaPhi
}

fn default_stop() -> f64 {
    2.0 * PI
}

fn default_steps() -> usize {
    64
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: default_variable(),
            start: 0.0,
            stop: default_stop(),
            steps: default_steps(),
        }
    }
}

impl SweepSection {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        if self.steps == 0 {
            return Err(CliError::config("sweep.steps must be > 0"));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::config(
                "sweep.start and sweep.stop must be finite",
            ));
        }
        let step = (self.stop - self.start) / self.steps as f64;
        Ok((0..self.steps)
            .map(|i| self.start + i as f64 * step)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub protocol: Protocol,
    pub mu: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub p_dark: f64,
    pub n_pulses: u64,
    #[serde(default)]
    pub seed: u64,
    /// Link phase Bob fails to compensate.
    #[serde(default)]
    pub link_phase_error: f64,
}

fn default_eta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::config(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
}

impl ModulatorSection {
    pub fn v_pi(&self) -> f64 {
        self.v_pi_volts.unwrap_or_else(|| default_v_pi(self.kind))
    }

    pub fn index(&self, who: &str) -> CliResult<f64> {
        match (self.m, self.v_rf_volts) {
            (Some(m), None) => Ok(m),
            (None, Some(v)) => index_from_voltage(v, self.v_pi()).map_err(CliError::from_config),
            (Some(_), Some(_)) => Err(CliError::config(format!(
                "{who}: set only one of `m` and `v_rf_volts`"
            ))),
            (None, None) => Err(CliError::config(format!(
                "{who}: one of `m` or `v_rf_volts` is required"
            ))),
        }
    }

    pub fn bias(&self, who: &str) -> CliResult<f64> {
        match (self.psi, self.v_dc_volts) {
            (Some(p), None) => Ok(p),
            (None, Some(v)) => {
                bias_phase_from_voltage(v, self.v_pi()).map_err(CliError::from_config)
            }
            (Some(_), Some(_)) => Err(CliError::config(format!(
                "{who}: set only one of `psi` and `v_dc_volts`"
            ))),
            (None, None) => Err(CliError::config(format!(
                "{who}: one of `psi` or `v_dc_volts` is required"
            ))),
        }
    }

    pub fn spec(&self, who: &str) -> CliResult<ModulatorSpec> {
        if !self.phi.is_finite() {
            return Err(CliError::config(format!("{who}: phi must be finite")));
        }
        make_modulator(self.kind, self.index(who)?, self.bias(who)?, self.phi)
            .map_err(CliError::from_config)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Resolves every section once so that bad values fail at load time.
    fn check(&self) -> CliResult<()> {
        if !self.source.wavelength_nm.is_finite() || self.source.wavelength_nm <= 0.0 {
            return Err(CliError::config("source.wavelength_nm must be > 0"));
        }
        if !self.source.power_dbm.is_finite() {
            return Err(CliError::config("source.power_dbm must be finite"));
        }
        self.alice_spec()?;
        self.bob_spec()?;
        self.link_spec()?;
        self.sweep.points()?;
        Ok(())
    }

    pub fn alice_spec(&self) -> CliResult<ModulatorSpec> {
        self.alice.spec("alice")
    }

    pub fn bob_spec(&self) -> CliResult<ModulatorSpec> {
        self.bob.spec("bob")
    }

    pub fn link_spec(&self) -> CliResult<LinkSpec> {
        LinkSpec::from_ghz(self.link.rf_ghz, self.link.link_phase_rad, self.link.loss)
            .map_err(CliError::from_config)
    }

    pub fn session(&self, seed: Option<u64>) -> CliResult<SessionConfig> {
        let mc = self
            .montecarlo
            .as_ref()
            .ok_or_else(|| CliError::config("missing [montecarlo] section"))?;
        Ok(SessionConfig {
            protocol: mc.protocol,
            alice_spec: self.alice_spec()?,
            bob_spec: self.bob_spec()?,
            link: self.link_spec()?,
            link_phase_error: mc.link_phase_error,
            mu: mc.mu,
            eta: mc.eta,
            p_dark: mc.p_dark,
            n_pulses: mc.n_pulses,
            seed: seed.unwrap_or(mc.seed),
        })
    }
}
