//! Exact harmonic expansion of the modulators, used to check the
//! three-band (small-signal) model.
//!
//! Each arm `e^{±jψ}·e^{±j·m·cos(Ωt+Φ)}` is expanded with the Jacobi-Anger
//! identity `e^{jz·cos θ} = Σ_k j^k J_k(z) e^{jkθ}`. Harmonic `k` of a
//! [`HarmonicSpectrum`] is the amplitude at optical frequency `ω₀ + kΩ`, i.e.
//! the coefficient of `e^{−jkΩt}` under the `e^{−jω₀t}` carrier convention.

use num_complex::Complex64;
use serde::Serialize;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::modulator::{make_modulator, ComplexAmplitude, ModulatorKind, ModulatorSpec};
use crate::protocol::TABLE_ORDER;
use crate::tandem::{analyze, sideband_powers, LinkSpec};

/// Largest Bessel argument the power series is used for.
pub const BESSEL_MAX_ARG: f64 = 1.5;

/// Energy allowed outside the retained harmonics.
pub const TAIL_ENERGY_TOL: f64 = 1e-12;

/// Counter powers below this are compared in absolute rather than relative
/// terms.
pub const ZERO_POWER_FLOOR: f64 = 1e-3;

/// `J_k(x)` by its ascending series, for `|x| ≤ 1.5`.
pub fn bessel_j(k: i32, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > BESSEL_MAX_ARG {
        return Err(Error::BesselDomain(x));
    }
    let n = k.unsigned_abs();
    let sign = if k < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }

    let half = x / 2.0;
    // (x/2)^n / n!
    let mut term = 1.0;
    for i in 1..=n {
        term *= half / i as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut s = 0u32;
    loop {
        s += 1;
        term *= -q / (s as f64 * (s + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || term == 0.0 {
            break;
        }
    }
    Ok(sign * sum)
}

/// Amplitudes at `ω₀ + kΩ` for `k ∈ [−order, order]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicSpectrum {
    order: usize,
    amps: Vec<ComplexAmplitude>,
}

impl HarmonicSpectrum {
    fn zeros(order: usize) -> Self {
        Self {
            order,
            amps: vec![Complex64::default(); 2 * order + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Amplitude at `ω₀ + kΩ`; zero outside the retained range.
    pub fn amp(&self, k: i64) -> ComplexAmplitude {
        if k.unsigned_abs() as usize > self.order {
            return Complex64::default();
        }
        self.amps[(k + self.order as i64) as usize]
    }

    fn amp_mut(&mut self, k: i64) -> &mut ComplexAmplitude {
        let i = (k + self.order as i64) as usize;
        &mut self.amps[i]
    }

    /// `(k, amplitude)` pairs from `−order` to `order`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, ComplexAmplitude)> + '_ {
        let n = self.order as i64;
        self.amps
            .iter()
            .enumerate()
            .map(move |(i, a)| (i as i64 - n, *a))
    }

    pub fn total_power(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiplies harmonic `k` by `√loss·e^{+jkΩβ₁L}`: the exact counterpart
    /// of the three-band propagation.
    pub fn propagated(&self, link: &LinkSpec) -> Self {
        let t = link.loss().sqrt();
        let mut out = self.clone();
        for (k, a) in self.iter() {
            *out.amp_mut(k) = a * Complex64::from_polar(t, k as f64 * link.link_phase());
        }
        out
    }
}

/// Smallest order the oracle accepts for a modulation depth `m`.
pub fn minimum_order(m: f64) -> usize {
    (3.0 * m + 5.0).ceil() as usize
}

/// Default truncation order for a modulation depth `m`.
pub fn default_order(m: f64) -> usize {
    (3.0 * m).ceil() as usize + 8
}

/// Exact spectrum of a single modulator (no small-signal truncation).
pub fn exact_modulator_spectrum(spec: &ModulatorSpec, order: usize) -> Result<HarmonicSpectrum> {
    let m_max = spec.max_index();
    if (order as f64) < 3.0 * m_max + 5.0 {
        return Err(Error::TruncationRisk(format!(
            "order {order} below 3·m + 5 = {:.3}",
            3.0 * m_max + 5.0
        )));
    }
    let mut out = HarmonicSpectrum::zeros(order);
    let arm1 = Complex64::from_polar(spec.eps1(), spec.psi());
    let arm2 = Complex64::from_polar(spec.eps2(), -spec.psi());
    let n = order as i64;
    for k in -n..=n {
        // coefficient of e^{−jkΩt} is j^{−k} J_{−k}(z) e^{−jkΦ}
        let jk = Complex64::i().powi(-(k as i32));
        let rf = Complex64::from_polar(1.0, -(k as f64) * spec.phi());
        let mut a = Complex64::default();
        if spec.eps1() != 0.0 {
            a += arm1 * bessel_j(-(k as i32), spec.m1())?;
        }
        if spec.eps2() != 0.0 {
            a += arm2 * bessel_j(-(k as i32), -spec.m2())?;
        }
        *out.amp_mut(k) = a * jk * rf;
    }
    Ok(out)
}

/// Exact field after Bob's modulator: Alice's propagated spectrum convolved
/// with Bob's, truncated back to `order` after checking the discarded energy.
pub fn exact_tandem_spectrum(
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
    link: &LinkSpec,
    order: usize,
) -> Result<HarmonicSpectrum> {
    let a = exact_modulator_spectrum(alice, order)?.propagated(link);
    let b = exact_modulator_spectrum(bob, order)?;
    let n = order as i64;
    let mut full = HarmonicSpectrum::zeros(2 * order);
    for (ka, xa) in a.iter() {
        if xa == Complex64::default() {
            continue;
        }
        for (kb, xb) in b.iter() {
            *full.amp_mut(ka + kb) += xa * xb;
        }
    }
    let tail: f64 = full
        .iter()
        .filter(|(k, _)| k.abs() > n)
        .map(|(_, x)| x.norm_sqr())
        .sum();
    if tail >= TAIL_ENERGY_TOL {
        return Err(Error::TruncationRisk(format!(
            "{tail:.3e} of the tandem power lies beyond harmonic {order}"
        )));
    }
    let mut out = HarmonicSpectrum::zeros(order);
    for k in -n..=n {
        *out.amp_mut(k) = full.amp(k);
    }
    Ok(out)
}

/// Relative error when the small-signal power is usable as a reference,
/// absolute error otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PowerError {
    Relative(f64),
    Absolute(f64),
}

impl PowerError {
    pub fn value(self) -> f64 {
        match self {
            PowerError::Relative(v) | PowerError::Absolute(v) => v,
        }
    }

    pub fn relative(self) -> Option<f64> {
        match self {
            PowerError::Relative(v) => Some(v),
            PowerError::Absolute(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallSignalError {
    pub upper: PowerError,
    pub lower: PowerError,
    /// Normalized powers from the exact spectrum.
    pub exact_upper: f64,
    pub exact_lower: f64,
    /// Normalized powers from the closed form.
    pub approx_upper: f64,
    pub approx_lower: f64,
}

/// Compares first-harmonic powers of the exact tandem spectrum against the
/// closed-form sideband powers, both normalized by `2(|κ₀|²+|κ₁|²)/4·loss`.
pub fn small_signal_error(
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
    link: &LinkSpec,
) -> Result<SmallSignalError> {
    let r = analyze(alice, bob)?;
    let approx = sideband_powers(alice, bob, link)?;
    let order = default_order(alice.max_index().max(bob.max_index()));
    let exact = exact_tandem_spectrum(alice, bob, link, order)?;
    let scale = 2.0 * r.norm * 0.25 * link.loss();
    let exact_upper = exact.amp(1).norm_sqr() / scale;
    let exact_lower = exact.amp(-1).norm_sqr() / scale;
    let compare = |e: f64, a: f64| {
        if a >= ZERO_POWER_FLOOR {
            PowerError::Relative((e - a).abs() / a)
        } else {
            PowerError::Absolute((e - a).abs())
        }
    };
    Ok(SmallSignalError {
        upper: compare(exact_upper, approx.upper),
        lower: compare(exact_lower, approx.lower),
        exact_upper,
        exact_lower,
        approx_upper: approx.upper,
        approx_lower: approx.lower,
    })
}

/// Largest index the verification lattice accepts.
pub const MAX_VERIFY_INDEX: f64 = 0.2;

/// Bias points of the verification lattice. Generic values, away from the
/// null and quadrature biases of every modulator kind.
pub const LATTICE_BIASES: [f64; 2] = [PI / 5.0, 2.0 * PI / 7.0];

/// Bob's RF phase runs over `k·2π/LATTICE_PHASES`.
pub const LATTICE_PHASES: usize = 8;

/// Worst small-signal error of one kind pair over the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairError {
    pub alice_kind: ModulatorKind,
    pub bob_kind: ModulatorKind,
    pub m: f64,
    pub worst_relative: f64,
    pub worst_absolute: f64,
    pub points: usize,
}

/// Runs [`small_signal_error`] for every kind pair over the lattice with
/// `m_A = m_B = m`. Degenerate points (no sideband at all) are skipped.
pub fn lattice_errors(m: f64, link: &LinkSpec) -> Result<Vec<PairError>> {
    if !(m > 0.0 && m <= MAX_VERIFY_INDEX) {
        return Err(Error::invalid(
            "m",
            format!("{m} outside (0, {MAX_VERIFY_INDEX}]"),
        ));
    }
    let mut out = Vec::with_capacity(TABLE_ORDER.len());
    for (ka, kb) in TABLE_ORDER {
        let mut e = PairError {
            alice_kind: ka,
            bob_kind: kb,
            m,
            worst_relative: 0.0,
            worst_absolute: 0.0,
            points: 0,
        };
        for &psi_a in &LATTICE_BIASES {
            for &psi_b in &LATTICE_BIASES {
                for i in 0..LATTICE_PHASES {
                    let phi_b = i as f64 * 2.0 * PI / LATTICE_PHASES as f64;
                    let a = make_modulator(ka, m, psi_a, 0.0)?;
                    let b = make_modulator(kb, m, psi_b, phi_b)?;
                    let r = match small_signal_error(&a, &b, link) {
                        Ok(r) => r,
                        Err(Error::Degenerate) => continue,
                        Err(err) => return Err(err),
                    };
                    e.points += 1;
                    for pe in [r.upper, r.lower] {
                        match pe {
                            PowerError::Relative(v) => e.worst_relative = e.worst_relative.max(v),
                            PowerError::Absolute(v) => e.worst_absolute = e.worst_absolute.max(v),
                        }
                    }
                }
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Frozen from the first lattice run (back-to-back link): worst relative
/// error divided by m², observed at m = 0.01 and rounded up. The error falls
/// slightly below `C·m²` as m grows, so `C·m²` bounds the whole regime.
pub const SMALL_SIGNAL_COEFFICIENTS: [(ModulatorKind, ModulatorKind, f64); 9] = {
    use ModulatorKind::*;
    [
        (Um, Um, 0.6382),
        (Am, Am, 1.0000),
        (Pm, Pm, 1.0000),
        (Pm, Am, 1.3048),
        (Am, Pm, 1.3048),
        (Um, Pm, 0.8987),
        (Pm, Um, 0.8987),
        (Um, Am, 1.5528),
        (Am, Um, 1.5528),
    ]
};

/// Slack on top of the frozen coefficients.
pub const REGRESSION_MARGIN: f64 = 1.02;

/// Regression bound on the lattice error of a kind pair at index `m`.
pub fn regression_bound(alice: ModulatorKind, bob: ModulatorKind, m: f64) -> f64 {
    let c = SMALL_SIGNAL_COEFFICIENTS
        .iter()
        .find(|(a, b, _)| *a == alice && *b == bob)
        .map(|t| t.2)
        .expect("every kind pair has a coefficient");
    REGRESSION_MARGIN * c * m * m
}
