//! Alice → link → Bob cascade and the sideband interference it produces.
//!
//! Sign conventions (all derived from the `e^{-jω₀t}` carrier convention):
//!
//! * `theta = arg(κ₁) − arg(κ₀)`, wrapped to `(−π, π]`.
//! * Writing `x = Φ_B − Φ_A + Ωβ₁L`, the normalized counter powers are
//!   `p_upper = ½[1 + V·cos(x − Θ)]` and `p_lower = ½[1 + V·cos(x + Θ)]`.
//!   This assignment is what the direct three-band cascade produces and is
//!   locked by `closed_form_matches_direct_cascade` below.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::angle::wrap_pi;
use crate::error::{Error, Result};
use crate::modulator::{ComplexAmplitude, ModulatorSpec, ThreeBandField};

/// κ magnitudes below this are treated as vanished (amplitudes are
/// normalized to a unit source).
pub const KAPPA_ZERO: f64 = 1e-14;

/// Dispersion-compensated fiber link between Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkSpec {
    rf_frequency: f64,
    link_phase: f64,
    loss: f64,
}

impl LinkSpec {
    /// `rf_frequency` in rad/s, `link_phase = Ωβ₁L` in radians, `loss` as a
    /// power transmittance in `(0, 1]`.
    pub fn new(rf_frequency: f64, link_phase: f64, loss: f64) -> Result<Self> {
        if !(rf_frequency > 0.0) || !rf_frequency.is_finite() {
            return Err(Error::invalid(
                "rf_frequency",
                format!("{rf_frequency} must be > 0"),
            ));
        }
        if !link_phase.is_finite() {
            return Err(Error::invalid("link_phase", "must be finite"));
        }
        if !(loss > 0.0 && loss <= 1.0) {
            return Err(Error::invalid("loss", format!("{loss} must lie in (0, 1]")));
        }
        Ok(Self {
            rf_frequency,
            link_phase,
            loss,
        })
    }

    pub fn from_ghz(rf_ghz: f64, link_phase: f64, loss: f64) -> Result<Self> {
        Self::new(TAU * rf_ghz * 1e9, link_phase, loss)
    }

    /// Lossless zero-phase link at `rf_ghz`.
    pub fn back_to_back(rf_ghz: f64) -> Result<Self> {
        Self::from_ghz(rf_ghz, 0.0, 1.0)
    }

    pub fn rf_frequency(&self) -> f64 {
        self.rf_frequency
    }
    pub fn rf_ghz(&self) -> f64 {
        self.rf_frequency / TAU / 1e9
    }
    pub fn link_phase(&self) -> f64 {
        self.link_phase
    }
    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn with_link_phase(mut self, link_phase: f64) -> Self {
        self.link_phase = link_phase;
        self
    }
}

/// Propagates a three-band field over the link. The common carrier phase is
/// dropped; the lower band picks up `e^{−jΩβ₁L}`, the upper `e^{+jΩβ₁L}`.
pub fn propagate(field: &ThreeBandField, link: &LinkSpec) -> ThreeBandField {
    let t = link.loss.sqrt();
    ThreeBandField {
        carrier: field.carrier * t,
        lower: field.lower * Complex64::from_polar(t, -link.link_phase),
        upper: field.upper * Complex64::from_polar(t, link.link_phase),
    }
}

/// Bob's modulator acting on the propagated field, keeping first-order terms.
pub fn cascade(alice_prop: &ThreeBandField, bob: &ThreeBandField) -> ThreeBandField {
    ThreeBandField {
        carrier: alice_prop.carrier * bob.carrier,
        lower: bob.carrier * alice_prop.lower + alice_prop.carrier * bob.lower,
        upper: bob.carrier * alice_prop.upper + alice_prop.carrier * bob.upper,
    }
}

/// `(κ₀, κ₁)`: the sideband contributions created by Alice (and carried
/// through Bob's carrier) and by Bob (on Alice's carrier).
///
/// The common `j/2` of the sideband amplitudes is left out of both.
pub fn kappa_factors(
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
) -> (ComplexAmplitude, ComplexAmplitude) {
    let k0 = bob.carrier_factor() * alice.sideband_factor();
    let k1 = alice.carrier_factor() * bob.sideband_factor();
    (k0, k1)
}

/// Fringe visibility `2|κ₀||κ₁| / (|κ₀|² + |κ₁|²)`.
pub fn visibility(k0: ComplexAmplitude, k1: ComplexAmplitude) -> Result<f64> {
    let (a, b) = (k0.norm(), k1.norm());
    if a <= KAPPA_ZERO && b <= KAPPA_ZERO {
        return Err(Error::Degenerate);
    }
    Ok((2.0 * a * b / (a * a + b * b)).clamp(0.0, 1.0))
}

/// `arg(κ₁) − arg(κ₀)` wrapped to `(−π, π]`.
pub fn theta(k0: ComplexAmplitude, k1: ComplexAmplitude) -> Result<f64> {
    if k0.norm() <= KAPPA_ZERO || k1.norm() <= KAPPA_ZERO {
        return Err(Error::ThetaUndefined);
    }
    Ok(wrap_pi((k1 * k0.conj()).arg()))
}

/// κ factors and the fringe parameters derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TandemResult {
    pub kappa0: ComplexAmplitude,
    pub kappa1: ComplexAmplitude,
    pub visibility: f64,
    /// `None` when one κ vanishes.
    pub theta: Option<f64>,
    /// `|κ₀|² + |κ₁|²`.
    pub norm: f64,
}

impl TandemResult {
    pub fn from_kappas(kappa0: ComplexAmplitude, kappa1: ComplexAmplitude) -> Result<Self> {
        let visibility = visibility(kappa0, kappa1)?;
        Ok(Self {
            kappa0,
            kappa1,
            visibility,
            theta: theta(kappa0, kappa1).ok(),
            norm: kappa0.norm_sqr() + kappa1.norm_sqr(),
        })
    }

    /// Θ, or 0 when undefined (V = 0 there, so the value never matters).
    pub fn theta_or_zero(&self) -> f64 {
        self.theta.unwrap_or(0.0)
    }

    /// Closed-form counter powers for an electrical phase difference
    /// `x = Φ_B − Φ_A + Ωβ₁L`.
    pub fn powers_at(&self, x: f64) -> SidebandPowers {
        let t = self.theta_or_zero();
        SidebandPowers {
            upper: 0.5 * (1.0 + self.visibility * (x - t).cos()),
            lower: 0.5 * (1.0 + self.visibility * (x + t).cos()),
        }
    }
}

pub fn analyze(alice: &ModulatorSpec, bob: &ModulatorSpec) -> Result<TandemResult> {
    let (k0, k1) = kappa_factors(alice, bob);
    TandemResult::from_kappas(k0, k1)
}

/// Normalized powers seen by the upper (`ω₀+Ω`) and lower (`ω₀−Ω`) counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidebandPowers {
    pub upper: f64,
    pub lower: f64,
}

/// Closed-form normalized sideband powers.
pub fn sideband_powers(
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
    link: &LinkSpec,
) -> Result<SidebandPowers> {
    let r = analyze(alice, bob)?;
    Ok(r.powers_at(bob.phi() - alice.phi() + link.link_phase()))
}

/// Sideband powers from the explicit three-band cascade, normalized by
/// `2(|κ₀|² + |κ₁|²)·|j/2|²·loss` so that they are directly comparable to
/// [`sideband_powers`].
pub fn sideband_powers_direct(
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
    link: &LinkSpec,
) -> Result<SidebandPowers> {
    let r = analyze(alice, bob)?;
    let out = cascade(
        &propagate(&alice.band_amplitudes(), link),
        &bob.band_amplitudes(),
    );
    let scale = 2.0 * r.norm * 0.25 * link.loss();
    Ok(SidebandPowers {
        upper: out.upper.norm_sqr() / scale,
        lower: out.lower.norm_sqr() / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulator::{make_modulator, ModulatorKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-15
    }

    fn link(phase: f64, loss: f64) -> LinkSpec {
        LinkSpec::from_ghz(15.0, phase, loss).unwrap()
    }

    #[test]
    fn link_validation() {
        assert!(LinkSpec::new(0.0, 0.0, 1.0).is_err());
        assert!(LinkSpec::new(1.0, 0.0, 0.0).is_err());
        assert!(LinkSpec::new(1.0, 0.0, 1.1).is_err());
        assert!(LinkSpec::new(1.0, f64::NAN, 1.0).is_err());
        assert_abs_diff_eq!(link(0.0, 1.0).rf_ghz(), 15.0, epsilon = 1e-12);
    }

    #[test]
    fn propagate_zero_length_is_identity() {
        let f = ThreeBandField::new(c(0.3, 0.1), c(0.0, 0.2), c(-0.1, 0.05));
        assert_eq!(propagate(&f, &link(0.0, 1.0)), f);
    }

    #[test]
    fn propagate_half_turn_flips_sidebands() {
        let s = c(0.02, 0.07);
        let f = ThreeBandField::new(c(1.0, 0.0), s, s);
        let p = propagate(&f, &link(PI, 1.0));
        assert!(close(p.carrier, c(1.0, 0.0)));
        assert!(close(p.lower, -s));
        assert!(close(p.upper, -s));
    }

    #[test]
    fn propagate_quarter_turn_with_loss() {
        let f = ThreeBandField::new(c(1.0, 0.0), c(0.0, 0.1), c(0.0, 0.1));
        let p = propagate(&f, &link(FRAC_PI_2, 0.25));
        assert!(close(p.carrier, c(0.5, 0.0)));
        // 0.5·j0.1·e^{−jπ/2} = 0.05, 0.5·j0.1·e^{+jπ/2} = −0.05
        assert!(close(p.lower, c(0.05, 0.0)));
        assert!(close(p.upper, c(-0.05, 0.0)));
    }

    #[test]
    fn cascade_with_identity_modulators() {
        let a = ThreeBandField::new(c(0.7, 0.1), c(0.0, 0.04), c(0.01, 0.03));
        let id = ThreeBandField::unit_carrier();
        assert_eq!(cascade(&a, &id), a);
        assert_eq!(cascade(&id, &a), a);
    }

    #[test]
    fn pm_pm_sidebands_cancel_at_opposite_phase() {
        let a = make_modulator(ModulatorKind::Pm, 0.1, 0.0, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Pm, 0.1, 0.0, PI).unwrap();
        let out = cascade(
            &propagate(&a.band_amplitudes(), &link(0.0, 1.0)),
            &b.band_amplitudes(),
        );
        assert_abs_diff_eq!(out.upper.norm(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(out.lower.norm(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(out.carrier.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn um_pm_kappas_match_closed_expressions() {
        // κ₀ = ½·m_A·e^{j(ψA+ψB)}, κ₁ = m_B·cos(ψA)·e^{jψB}
        let (ma, mb, pa, pb) = (0.12, 0.07, 0.4, 1.1);
        let a = make_modulator(ModulatorKind::Um, ma, pa, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Pm, mb, pb, 0.0).unwrap();
        let (k0, k1) = kappa_factors(&a, &b);
        let e0 = 0.5 * ma * Complex64::from_polar(1.0, pa + pb);
        let e1 = mb * pa.cos() * Complex64::from_polar(1.0, pb);
        // with ε_PM = 1 and ε_UM = ½ the expressions hold without extra scale
        assert!(close(k0, e0));
        assert!(close(k1, e1));
        assert_abs_diff_eq!(theta(k0, k1).unwrap(), -pa, epsilon = 1e-14);
    }

    #[test]
    fn um_am_kappas_match_closed_expressions() {
        // κ₀ = ½·m_A·cos(ψB)·e^{jψA}, κ₁ = m_B·cos(ψA)·sin(ψB)·e^{jπ/2}
        let (ma, mb, pa, pb) = (0.1, 0.05, 0.3, 0.6);
        let a = make_modulator(ModulatorKind::Um, ma, pa, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Am, mb, pb, 0.0).unwrap();
        let (k0, k1) = kappa_factors(&a, &b);
        let e0 = 0.5 * ma * pb.cos() * Complex64::from_polar(1.0, pa);
        let e1 = mb * pa.cos() * pb.sin() * c(0.0, 1.0);
        assert!(close(k0, e0));
        assert!(close(k1, e1));
        assert_abs_diff_eq!(theta(k0, k1).unwrap(), FRAC_PI_2 - pa, epsilon = 1e-14);
    }

    #[test]
    fn pm_pm_kappa_ratio_and_theta() {
        for (pa, pb) in [(0.0, 0.0), (0.7, -1.2), (2.0, 3.0)] {
            let a = make_modulator(ModulatorKind::Pm, 0.08, pa, 1.0).unwrap();
            let b = make_modulator(ModulatorKind::Pm, 0.02, pb, -0.4).unwrap();
            let (k0, k1) = kappa_factors(&a, &b);
            assert_abs_diff_eq!(k0.norm() / k1.norm(), 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(theta(k0, k1).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn visibility_examples() {
        assert_abs_diff_eq!(
            visibility(c(0.3, 0.4), c(0.5, 0.0)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(visibility(c(1.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            visibility(c(1.0, 0.0), c(0.0, 0.5)).unwrap(),
            0.8,
            epsilon = 1e-15
        );
        assert_eq!(visibility(c(0.0, 0.0), c(0.0, 0.0)), Err(Error::Degenerate));
    }

    #[test]
    fn um_pm_at_quadrature_bias_has_zero_visibility() {
        let a = make_modulator(ModulatorKind::Um, 0.1, FRAC_PI_2, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Pm, 0.05, 0.0, 0.0).unwrap();
        let r = analyze(&a, &b).unwrap();
        assert_abs_diff_eq!(r.visibility, 0.0, epsilon = 1e-14);
        assert_eq!(r.theta, None);
        assert_eq!(theta(r.kappa0, r.kappa1), Err(Error::ThetaUndefined));
    }

    #[test]
    fn theta_table_entries() {
        let pm = |m, psi| make_modulator(ModulatorKind::Pm, m, psi, 0.0).unwrap();
        let am = |m, psi| make_modulator(ModulatorKind::Am, m, psi, 0.0).unwrap();
        let um = |m, psi| make_modulator(ModulatorKind::Um, m, psi, 0.0).unwrap();
        let th = |a: &ModulatorSpec, b: &ModulatorSpec| analyze(a, b).unwrap().theta.unwrap();

        for pb in [0.1, 0.5, 1.2] {
            assert_abs_diff_eq!(th(&pm(0.1, 0.0), &am(0.1, pb)), FRAC_PI_2, epsilon = 1e-14);
        }
        for pa in [0.1, 0.5, 1.2] {
            assert_abs_diff_eq!(th(&um(0.1, pa), &pm(0.1, 0.0)), -pa, epsilon = 1e-14);
            assert_abs_diff_eq!(
                th(&um(0.1, pa), &am(0.1, FRAC_PI_4)),
                FRAC_PI_2 - pa,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn closed_form_examples() {
        let l0 = link(0.0, 1.0);
        // UM-PM B92 extinction
        let a = make_modulator(ModulatorKind::Um, 0.1, 0.0, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Pm, 0.05, 0.0, PI).unwrap();
        let p = sideband_powers(&a, &b, &l0).unwrap();
        assert_abs_diff_eq!(p.upper, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.lower, 0.0, epsilon = 1e-15);
        let b = b.with_phi(0.0);
        let p = sideband_powers(&a, &b, &l0).unwrap();
        assert_abs_diff_eq!(p.upper, 1.0, epsilon = 1e-15);

        // UM-AM BB84 at ΔΦ = π/2: Θ = π/2, so x = ΔΦ + Θ = π.
        let a = make_modulator(ModulatorKind::Um, 0.1, 0.0, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Am, 0.05, FRAC_PI_4, PI).unwrap();
        let r = analyze(&a, &b).unwrap();
        assert_abs_diff_eq!(r.visibility, 1.0, epsilon = 1e-14);
        let p = sideband_powers(&a, &b, &l0).unwrap();
        assert_abs_diff_eq!(p.upper, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p.lower, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_configuration_is_an_error() {
        let a = make_modulator(ModulatorKind::Pm, 0.0, 0.0, 0.0).unwrap();
        let b = make_modulator(ModulatorKind::Pm, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(
            sideband_powers(&a, &b, &link(0.0, 1.0)),
            Err(Error::Degenerate)
        );
        assert_eq!(
            sideband_powers_direct(&a, &b, &link(0.0, 1.0)),
            Err(Error::Degenerate)
        );
    }

    /// Locks the ±Θ assignment: flipping it breaks agreement for any
    /// configuration with Θ ∉ {0, π}.
    #[test]
    fn closed_form_sign_assignment_regression() {
        let a = make_modulator(ModulatorKind::Pm, 0.1, 0.0, 0.3).unwrap();
        let b = make_modulator(ModulatorKind::Am, 0.1, 0.4, 1.1).unwrap();
        let l = link(0.25, 1.0);
        let direct = sideband_powers_direct(&a, &b, &l).unwrap();
        let r = analyze(&a, &b).unwrap();
        let x = 1.1 - 0.3 + 0.25;
        let t = r.theta.unwrap();
        assert_abs_diff_eq!(
            direct.upper,
            0.5 * (1.0 + r.visibility * (x - t).cos()),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            direct.lower,
            0.5 * (1.0 + r.visibility * (x + t).cos()),
            epsilon = 1e-13
        );
        assert!((direct.upper - 0.5 * (1.0 + r.visibility * (x + t).cos())).abs() > 1e-3);
    }

    fn kind_strategy() -> impl Strategy<Value = ModulatorKind> {
        prop_oneof![
            Just(ModulatorKind::Pm),
            Just(ModulatorKind::Am),
            Just(ModulatorKind::Um)
        ]
    }

    prop_compose! {
        fn spec_strategy()(kind in kind_strategy(), m in 0.001..0.2f64, psi in -PI..PI, phi in -PI..PI) -> ModulatorSpec {
            make_modulator(kind, m, psi, phi).unwrap()
        }
    }

    fn non_degenerate(a: &ModulatorSpec, b: &ModulatorSpec) -> bool {
        let (k0, k1) = kappa_factors(a, b);
        k0.norm() > 1e-6 || k1.norm() > 1e-6
    }

    proptest! {
        #[test]
        fn closed_form_matches_direct_cascade(a in spec_strategy(), b in spec_strategy(), lp in -10.0..10.0f64, loss in 0.01..1.0f64) {
            prop_assume!(non_degenerate(&a, &b));
            let l = link(lp, loss);
            let closed = sideband_powers(&a, &b, &l).unwrap();
            let direct = sideband_powers_direct(&a, &b, &l).unwrap();
            prop_assert!((closed.upper - direct.upper).abs() <= 1e-12);
            prop_assert!((closed.lower - direct.lower).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&closed.upper) && (0.0..=1.0).contains(&closed.lower));
        }

        #[test]
        fn sum_of_counter_powers(a in spec_strategy(), b in spec_strategy(), lp in -10.0..10.0f64) {
            prop_assume!(non_degenerate(&a, &b));
            let r = analyze(&a, &b).unwrap();
            let p = sideband_powers(&a, &b, &link(lp, 1.0)).unwrap();
            let x = b.phi() - a.phi() + lp;
            let expected = 1.0 + r.visibility * r.theta_or_zero().cos() * x.cos();
            prop_assert!((p.upper + p.lower - expected).abs() < 1e-12);
        }

        #[test]
        fn powers_invariant_under_coupling_scale(a in spec_strategy(), b in spec_strategy(), ka in 0.05..20.0f64, kb in 0.05..20.0f64) {
            prop_assume!(non_degenerate(&a, &b));
            let l = link(0.3, 1.0);
            let p = sideband_powers_direct(&a, &b, &l).unwrap();
            let q = sideband_powers_direct(&a.scaled(ka).unwrap(), &b.scaled(kb).unwrap(), &l).unwrap();
            prop_assert!((p.upper - q.upper).abs() < 1e-12);
            prop_assert!((p.lower - q.lower).abs() < 1e-12);
        }

        #[test]
        fn lossless_propagation_conserves_power(a in spec_strategy(), lp in -10.0..10.0f64) {
            let f = a.band_amplitudes();
            let p = propagate(&f, &link(lp, 1.0));
            prop_assert!((f.total_power() - p.total_power()).abs() < 1e-15);
        }

        #[test]
        fn stored_visibility_is_rederivable(a in spec_strategy(), b in spec_strategy()) {
            prop_assume!(non_degenerate(&a, &b));
            let r = analyze(&a, &b).unwrap();
            let (x, y) = (r.kappa0.norm(), r.kappa1.norm());
            prop_assert!((r.visibility - 2.0 * x * y / (x * x + y * y)).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&r.visibility));
            if let Some(t) = r.theta {
                prop_assert!(t > -PI && t <= PI);
            }
        }
    }
}
