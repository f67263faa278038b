//! Faint-pulse key exchange over a tandem-modulator link.
//!
//! Per pulse, Alice picks her RF phase from the protocol alphabet, Bob picks
//! his, and each sideband counter clicks with probability
//! `1 − exp(−η·μ·P)` (P the normalized counter power), OR-ed with an
//! independent dark count. Bob's physical phase includes the offset that
//! cancels the nominal `Ωβ₁L − Θ`; any extra link phase (`link_phase_error`)
//! is left uncompensated.
//!
//! Alphabets, in terms of `ΔΦ = Φ_B,nominal − Φ_A`:
//!
//! * BB84: Alice sends `{0, π}` (basis 0) or `{π/2, 3π/2}` (basis 1) for
//!   bits 0/1; Bob measures with `0` or `π/2`. An upper-only click reads 0,
//!   a lower-only click reads 1; no-click and double-click pulses are
//!   discarded; bits survive sifting when the bases match.
//! * B92: Alice sends `0` (bit 0) or `π/2` (bit 1); Bob applies `π` or
//!   `3π/2`. Any click is conclusive: with `π` it reads 1, with `3π/2` it
//!   reads 0.
//!
//! The generator is `ChaCha8Rng::seed_from_u64(seed)` with draws taken in a
//! fixed order per pulse, so a given seed always reproduces the same stats.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modulator::ModulatorSpec;
use crate::protocol::{bob_phase_offset, check_protocol, Protocol};
use crate::tandem::{analyze, LinkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionConfig {
    pub protocol: Protocol,
    /// RF phases of the templates are ignored; they are set per pulse.
    pub alice_spec: ModulatorSpec,
    pub bob_spec: ModulatorSpec,
    pub link: LinkSpec,
    /// Extra link phase Bob does not compensate.
    pub link_phase_error: f64,
    /// Mean photon number delivered to the sideband filters when `P = 1`.
    pub mu: f64,
    pub eta: f64,
    pub p_dark: f64,
    pub n_pulses: u64,
    pub seed: u64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu", format!("{} must be >= 0", self.mu)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(
                "eta",
                format!("{} must lie in [0, 1]", self.eta),
            ));
        }
        if !(0.0..1.0).contains(&self.p_dark) {
            return Err(Error::invalid(
                "p_dark",
                format!("{} must lie in [0, 1)", self.p_dark),
            ));
        }
        if self.n_pulses == 0 {
            return Err(Error::invalid("n_pulses", "must be > 0"));
        }
        if !self.link_phase_error.is_finite() {
            return Err(Error::invalid("link_phase_error", "must be finite"));
        }
        check_protocol(self.protocol, &self.alice_spec, &self.bob_spec).require()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct ClickCounts {
    pub upper: u64,
    pub lower: u64,
    pub double: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStats {
    pub protocol: Protocol,
    pub sent: u64,
    /// Pulses with a usable detection outcome (single click for BB84, any
    /// click for B92).
    pub conclusive: u64,
    pub sifted_bits: u64,
    pub errors: u64,
    /// `errors / sifted_bits`; `None` when nothing was sifted.
    pub qber: Option<f64>,
    /// BB84 conclusive pulses discarded for basis mismatch.
    pub basis_mismatch: u64,
    pub clicks: ClickCounts,
}

struct Detector {
    eta_mu: f64,
    p_dark: f64,
}

impl Detector {
    fn click(&self, rng: &mut ChaCha8Rng, power: f64) -> bool {
        let p_signal = 1.0 - (-self.eta_mu * power.max(0.0)).exp();
        let signal = rng.gen::<f64>() < p_signal;
        let dark = rng.gen::<f64>() < self.p_dark;
        signal || dark
    }
}

/// Runs one session. Deterministic for a given config (seed included).
pub fn run_session(cfg: &SessionConfig) -> Result<SessionStats> {
    cfg.validate()?;
    // κ factors do not depend on the RF phases, so one analysis covers the run.
    let tandem = analyze(&cfg.alice_spec, &cfg.bob_spec)?;
    let theta = tandem.theta_or_zero();
    let offset = bob_phase_offset(cfg.link.link_phase(), theta);
    let actual_link = cfg.link.link_phase() + cfg.link_phase_error;
    let det = Detector {
        eta_mu: cfg.eta * cfg.mu,
        p_dark: cfg.p_dark,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = SessionStats {
        protocol: cfg.protocol,
        sent: cfg.n_pulses,
        conclusive: 0,
        sifted_bits: 0,
        errors: 0,
        qber: None,
        basis_mismatch: 0,
        clicks: ClickCounts::default(),
    };

    for _ in 0..cfg.n_pulses {
        let bit = rng.gen::<bool>();
        let alice_choice = rng.gen::<bool>();
        let bob_choice = rng.gen::<bool>();

        let (phi_a, phi_b_nominal) = match cfg.protocol {
            Protocol::BB84 => {
                let basis_phase = if alice_choice { FRAC_PI_2 } else { 0.0 };
                let bit_phase = if bit { PI } else { 0.0 };
                let bob = if bob_choice { FRAC_PI_2 } else { 0.0 };
                (basis_phase + bit_phase, bob)
            }
            Protocol::B92 => {
                let a = if bit { FRAC_PI_2 } else { 0.0 };
                let b = if bob_choice { 1.5 * PI } else { PI };
                (a, b)
            }
        };
        let x = phi_b_nominal + offset - phi_a + actual_link;
        let p = tandem.powers_at(x);
        let up = det.click(&mut rng, p.upper);
        let low = det.click(&mut rng, p.lower);
        match (up, low) {
            (true, true) => stats.clicks.double += 1,
            (true, false) => stats.clicks.upper += 1,
            (false, true) => stats.clicks.lower += 1,
            (false, false) => {}
        }

        match cfg.protocol {
            Protocol::BB84 => {
                if up == low {
                    continue;
                }
                stats.conclusive += 1;
                if alice_choice != bob_choice {
                    stats.basis_mismatch += 1;
                    continue;
                }
                stats.sifted_bits += 1;
                let bob_bit = low;
                if bob_bit != bit {
                    stats.errors += 1;
                }
            }
            Protocol::B92 => {
                if !(up || low) {
                    continue;
                }
                stats.conclusive += 1;
                stats.sifted_bits += 1;
                // Bob at π reads 1, at 3π/2 reads 0
                let bob_bit = !bob_choice;
                if bob_bit != bit {
                    stats.errors += 1;
                }
            }
        }
    }

    if stats.sifted_bits > 0 {
        stats.qber = Some(stats.errors as f64 / stats.sifted_bits as f64);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetPoint {
    pub offset: f64,
    pub stats: SessionStats,
}

/// One session per uncompensated link-phase offset, all with the same seed.
pub fn qber_vs_offset(cfg: &SessionConfig, offsets: &[f64]) -> Result<Vec<OffsetPoint>> {
    offsets
        .iter()
        .map(|&offset| {
            let mut c = *cfg;
            c.link_phase_error = cfg.link_phase_error + offset;
            run_session(&c).map(|stats| OffsetPoint { offset, stats })
        })
        .collect()
}
