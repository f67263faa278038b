//! Generalized two-arm electro-optic modulator.
//!
//! Every device is described as a Mach-Zehnder interferometer whose arms carry
//! couplings `eps1`/`eps2`, modulation indices `m1`/`m2`, a bias phase `±psi`
//! and a shared RF phase `phi`. The optical field after the device is
//!
//! ```text
//! E(t) = e^{-jω₀t} [ eps1·e^{+jψ}·e^{+j·m1·cos(Ωt+Φ)} + eps2·e^{-jψ}·e^{-j·m2·cos(Ωt+Φ)} ]
//! ```
//!
//! PM, AM and UM are particular coefficient choices of this one expression.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex field amplitude in units where the source amplitude is 1.
pub type ComplexAmplitude = Complex64;

/// Modulation index above which the three-band expansion is no longer trusted.
pub const LOW_MODULATION_LIMIT: f64 = 0.2;

/// Arm couplings for the single-arm phase modulator.
pub const PM_COUPLING: f64 = 1.0;
/// Arm couplings for the two-arm devices (3 dB split and recombine).
pub const MZ_COUPLING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulatorKind {
    /// Phase modulator: one arm, phase only.
    #[serde(rename = "PM")]
    Pm,
    /// Chirp-free amplitude modulator: both arms driven push-pull.
    #[serde(rename = "AM")]
    Am,
    /// Unbalanced modulator: MZI with only one arm driven.
    #[serde(rename = "UM")]
    Um,
}

impl ModulatorKind {
    pub const ALL: [ModulatorKind; 3] = [ModulatorKind::Um, ModulatorKind::Am, ModulatorKind::Pm];

    pub fn label(self) -> &'static str {
        match self {
            ModulatorKind::Pm => "PM",
            ModulatorKind::Am => "AM",
            ModulatorKind::Um => "UM",
        }
    }
}

impl fmt::Display for ModulatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModulatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PM" => Ok(ModulatorKind::Pm),
            "AM" => Ok(ModulatorKind::Am),
            "UM" => Ok(ModulatorKind::Um),
            other => Err(Error::invalid(
                "kind",
                format!("unknown modulator kind {other:?}"),
            )),
        }
    }
}

/// Coefficients of one modulator. Construct through [`make_modulator`] or
/// [`ModulatorSpec::new`]; both enforce the per-kind coefficient pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulatorSpec {
    kind: ModulatorKind,
    eps1: f64,
    eps2: f64,
    m1: f64,
    m2: f64,
    psi: f64,
    phi: f64,
}

impl ModulatorSpec {
    /// Builds a spec from raw coefficients, rejecting combinations that do not
    /// match `kind`.
    pub fn new(
        kind: ModulatorKind,
        eps1: f64,
        eps2: f64,
        m1: f64,
        m2: f64,
        psi: f64,
        phi: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("eps1", eps1),
            ("eps2", eps2),
            ("m1", m1),
            ("m2", m2),
            ("psi", psi),
            ("phi", phi),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("{v} is not finite")));
            }
        }
        if eps1 < 0.0 || eps2 < 0.0 {
            return Err(Error::invalid("eps", "couplings must be non-negative"));
        }
        if m1 < 0.0 || m2 < 0.0 {
            return Err(Error::invalid("m", "modulation index must be non-negative"));
        }
        let ok = match kind {
            ModulatorKind::Pm => eps2 == 0.0 && m2 == 0.0,
            ModulatorKind::Am => eps1 == eps2 && m1 == m2,
            ModulatorKind::Um => eps1 == eps2 && m2 == 0.0,
        };
        if !ok {
            return Err(Error::invalid(
                "kind",
                format!("coefficients do not describe a {kind} (eps1={eps1}, eps2={eps2}, m1={m1}, m2={m2})"),
            ));
        }
        Ok(Self {
            kind,
            eps1,
            eps2,
            m1,
            m2,
            psi,
            phi,
        })
    }

    pub fn kind(&self) -> ModulatorKind {
        self.kind
    }
    pub fn eps1(&self) -> f64 {
        self.eps1
    }
    pub fn eps2(&self) -> f64 {
        self.eps2
    }
    pub fn m1(&self) -> f64 {
        self.m1
    }
    pub fn m2(&self) -> f64 {
        self.m2
    }
    pub fn psi(&self) -> f64 {
        self.psi
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The device's modulation index (`m1`; for AM `m1 = m2`).
    pub fn index(&self) -> f64 {
        self.m1
    }

    pub fn max_index(&self) -> f64 {
        self.m1.max(self.m2)
    }

    /// True when the drive is outside the low-modulation regime.
    pub fn low_modulation_warning(&self) -> bool {
        self.max_index() > LOW_MODULATION_LIMIT
    }

    /// Same device with the RF phase replaced.
    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    /// Same device with the bias phase replaced.
    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi = psi;
        self
    }

    /// Same device with the modulation index replaced on every driven arm.
    pub fn with_index(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::invalid("m", format!("{m} must be finite and >= 0")));
        }
        self.m1 = m;
        if self.kind == ModulatorKind::Am {
            self.m2 = m;
        }
        Ok(self)
    }

    /// Both couplings multiplied by `c > 0`.
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(
                "scale",
                format!("{c} must be finite and > 0"),
            ));
        }
        self.eps1 *= c;
        self.eps2 *= c;
        Ok(self)
    }

    /// `eps1·e^{jψ} + eps2·e^{−jψ}`: the field transmitted at the carrier.
    pub fn carrier_factor(&self) -> ComplexAmplitude {
        Complex64::from_polar(self.eps1, self.psi) + Complex64::from_polar(self.eps2, -self.psi)
    }

    /// `eps1·m1·e^{jψ} − eps2·m2·e^{−jψ}`: the sideband drive, without the
    /// common `j/2` and the RF phase.
    pub fn sideband_factor(&self) -> ComplexAmplitude {
        Complex64::from_polar(self.eps1 * self.m1, self.psi)
            - Complex64::from_polar(self.eps2 * self.m2, -self.psi)
    }

    /// Small-signal carrier and first-order sideband amplitudes.
    ///
    /// The `e^{jΩt}` term of the expansion lands at `ω₀ − Ω`, so the lower
    /// sideband carries `e^{+jΦ}` and the upper one `e^{−jΦ}`.
    pub fn band_amplitudes(&self) -> ThreeBandField {
        let side = Complex64::new(0.0, 0.5) * self.sideband_factor();
        ThreeBandField {
            carrier: self.carrier_factor(),
            lower: side * Complex64::from_polar(1.0, self.phi),
            upper: side * Complex64::from_polar(1.0, -self.phi),
        }
    }
}

/// Canonical modulator of `kind` with couplings normalized so that an
/// unmodulated PM (and an AM biased at ψ = 0) transmits unit carrier.
///
/// For a PM, `psi` is kept but only contributes a global phase.
pub fn make_modulator(kind: ModulatorKind, m: f64, psi: f64, phi: f64) -> Result<ModulatorSpec> {
    if !(m >= 0.0) {
        return Err(Error::invalid("m", format!("{m} must be >= 0")));
    }
    match kind {
        ModulatorKind::Pm => ModulatorSpec::new(kind, PM_COUPLING, 0.0, m, 0.0, psi, phi),
        ModulatorKind::Am => ModulatorSpec::new(kind, MZ_COUPLING, MZ_COUPLING, m, m, psi, phi),
        ModulatorKind::Um => ModulatorSpec::new(kind, MZ_COUPLING, MZ_COUPLING, m, 0.0, psi, phi),
    }
}

/// Modulation index produced by an RF amplitude `v_rf` on a device with
/// half-wave voltage `v_pi`: `π·v_rf / v_pi`.
pub fn index_from_voltage(v_rf: f64, v_pi: f64) -> Result<f64> {
    if !(v_pi > 0.0) || !v_pi.is_finite() {
        return Err(Error::invalid("v_pi", format!("{v_pi} must be > 0")));
    }
    if !(v_rf >= 0.0) || !v_rf.is_finite() {
        return Err(Error::invalid("v_rf", format!("{v_rf} must be >= 0")));
    }
    Ok(PI * v_rf / v_pi)
}

/// Bias phase ψ for a DC voltage: the arm-to-arm difference `2ψ` equals
/// `π·v_dc / v_pi`.
pub fn bias_phase_from_voltage(v_dc: f64, v_pi: f64) -> Result<f64> {
    if !(v_pi > 0.0) || !v_pi.is_finite() {
        return Err(Error::invalid("v_pi", format!("{v_pi} must be > 0")));
    }
    if !v_dc.is_finite() {
        return Err(Error::invalid("v_dc", format!("{v_dc} is not finite")));
    }
    Ok(PI * v_dc / (2.0 * v_pi))
}

/// Amplitudes at `ω₀`, `ω₀ − Ω` and `ω₀ + Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeBandField {
    pub carrier: ComplexAmplitude,
    pub lower: ComplexAmplitude,
    pub upper: ComplexAmplitude,
}

impl ThreeBandField {
    pub fn new(
        carrier: ComplexAmplitude,
        lower: ComplexAmplitude,
        upper: ComplexAmplitude,
    ) -> Self {
        Self {
            carrier,
            lower,
            upper,
        }
    }

    /// An unmodulated unit carrier: the identity element of a cascade.
    pub fn unit_carrier() -> Self {
        Self::new(
            Complex64::new(1.0, 0.0),
            Complex64::default(),
            Complex64::default(),
        )
    }

    pub fn total_power(&self) -> f64 {
        self.carrier.norm_sqr() + self.lower.norm_sqr() + self.upper.norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.carrier.is_finite() && self.lower.is_finite() && self.upper.is_finite()
    }
}
