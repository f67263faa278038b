//! Which QKD protocol a tandem configuration supports.
//!
//! B92 needs `V = 1` together with `Θ ≡ 0 (mod π)`; BB84 needs `V = 1`
//! together with `Θ ≡ π/2 (mod π)`. `V = 1` is always reachable by choosing
//! `m_A/m_B` unless one of the κ factors vanishes at the chosen biases, so the
//! checks below work on unit-index κ shapes and report the ratio that balances
//! them.
//!
//! The effective phase difference used throughout is
//! `ΔΦ = Φ_B − Φ_A + Ωβ₁L − Θ`, which makes the upper counter follow
//! `cos²(ΔΦ/2)` in every feasible configuration; the lower counter follows
//! `cos²(ΔΦ/2)` for B92 and `sin²(ΔΦ/2)` for BB84.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::{congruent, wrap_tau};
use crate::error::{Error, Result};
use crate::modulator::{make_modulator, ModulatorKind, ModulatorSpec};
use crate::tandem::{kappa_factors, theta};

/// Tolerance on the modular Θ conditions, radians.
pub const THETA_TOL: f64 = 1e-9;

/// Unit-index κ magnitudes at or below this count as vanished.
const UNIT_KAPPA_ZERO: f64 = 1e-12;

/// Step used to approach a bias where a κ factor vanishes.
const LIMIT_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    B92,
    BB84,
}

impl Protocol {
    /// Θ target modulo π.
    pub fn theta_target(self) -> f64 {
        match self {
            Protocol::B92 => 0.0,
            Protocol::BB84 => FRAC_PI_2,
        }
    }

    pub fn theta_ok(self, theta: f64) -> bool {
        congruent(theta, self.theta_target(), PI, THETA_TOL)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::B92 => "B92",
            Protocol::BB84 => "BB84",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "B92" => Ok(Protocol::B92),
            "BB84" => Ok(Protocol::BB84),
            other => Err(Error::invalid(
                "protocol",
                format!("unknown protocol {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    ThetaMismatch,
    ZeroVisibility,
    None,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::ThetaMismatch => "theta-mismatch",
            FailureReason::ZeroVisibility => "zero-visibility",
            FailureReason::None => "none",
        })
    }
}

/// Canonical bias families, `n` ranging over the integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasConstraint {
    /// Any bias at which both κ factors are non-zero.
    Unconstrained,
    /// `ψ_A = nπ`
    PsiAMultipleOfPi,
    /// `ψ_B = nπ`
    PsiBMultipleOfPi,
    /// `ψ_B = ψ_A + nπ`
    PsiBEqPsiAPlusMultipleOfPi,
    /// `ψ_B = ψ_A + (2n+1)π/2`
    PsiBEqPsiAPlusOddHalfPi,
    /// `ψ_A = (2n+1)π/2`
    PsiAOddHalfPi,
    /// `ψ_B = (2n+1)π/2`
    PsiBOddHalfPi,
}

impl BiasConstraint {
    const FEASIBLE_FAMILIES: [BiasConstraint; 5] = [
        BiasConstraint::Unconstrained,
        BiasConstraint::PsiAMultipleOfPi,
        BiasConstraint::PsiBMultipleOfPi,
        BiasConstraint::PsiBEqPsiAPlusMultipleOfPi,
        BiasConstraint::PsiBEqPsiAPlusOddHalfPi,
    ];

    const VANISHING_FAMILIES: [BiasConstraint; 4] = [
        BiasConstraint::PsiAOddHalfPi,
        BiasConstraint::PsiBOddHalfPi,
        BiasConstraint::PsiAMultipleOfPi,
        BiasConstraint::PsiBMultipleOfPi,
    ];

    pub fn holds(self, psi_a: f64, psi_b: f64) -> bool {
        let tol = THETA_TOL;
        match self {
            BiasConstraint::Unconstrained => true,
            BiasConstraint::PsiAMultipleOfPi => congruent(psi_a, 0.0, PI, tol),
            BiasConstraint::PsiBMultipleOfPi => congruent(psi_b, 0.0, PI, tol),
            BiasConstraint::PsiBEqPsiAPlusMultipleOfPi => congruent(psi_b - psi_a, 0.0, PI, tol),
            BiasConstraint::PsiBEqPsiAPlusOddHalfPi => congruent(psi_b - psi_a, FRAC_PI_2, PI, tol),
            BiasConstraint::PsiAOddHalfPi => congruent(psi_a, FRAC_PI_2, PI, tol),
            BiasConstraint::PsiBOddHalfPi => congruent(psi_b, FRAC_PI_2, PI, tol),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BiasConstraint::Unconstrained => "any",
            BiasConstraint::PsiAMultipleOfPi => "ψ_A = nπ",
            BiasConstraint::PsiBMultipleOfPi => "ψ_B = nπ",
            BiasConstraint::PsiBEqPsiAPlusMultipleOfPi => "ψ_B = ψ_A + nπ",
            BiasConstraint::PsiBEqPsiAPlusOddHalfPi => "ψ_B = ψ_A + (2n+1)π/2",
            BiasConstraint::PsiAOddHalfPi => "ψ_A = (2n+1)π/2",
            BiasConstraint::PsiBOddHalfPi => "ψ_B = (2n+1)π/2",
        }
    }
}

impl fmt::Display for BiasConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Verdict for one protocol, either at fixed biases or over a kind pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolFeasibility {
    pub protocol: Protocol,
    pub feasible: bool,
    /// Bias family on which the protocol works. Only set for kind-pair
    /// classification.
    pub bias_constraint: Option<BiasConstraint>,
    /// `m_A/m_B` giving `V = 1` at `representative_bias` (or at the
    /// evaluated biases for point checks).
    pub index_ratio: Option<f64>,
    pub failure_reason: FailureReason,
    /// For zero-visibility failures: where the Θ condition would hold but a
    /// κ factor vanishes.
    pub zero_visibility_at: Option<BiasConstraint>,
    pub representative_bias: Option<(f64, f64)>,
}

impl ProtocolFeasibility {
    fn infeasible(protocol: Protocol, reason: FailureReason) -> Self {
        Self {
            protocol,
            feasible: false,
            bias_constraint: None,
            index_ratio: None,
            failure_reason: reason,
            zero_visibility_at: None,
            representative_bias: None,
        }
    }

    /// Converts an infeasible verdict into an error.
    pub fn require(&self) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(Error::Infeasible {
                protocol: self.protocol,
                reason: self.failure_reason,
            })
        }
    }
}

/// Effective phase difference `Φ_B − Φ_A + Ωβ₁L − Θ`, wrapped to `[0, 2π)`.
pub fn delta_phi(phi_a: f64, phi_b: f64, link_phase: f64, theta: f64) -> f64 {
    wrap_tau(phi_b - phi_a + link_phase - theta)
}

/// Phase Bob adds to his nominal setting so that `ΔΦ = Φ_B,nominal − Φ_A`.
pub fn bob_phase_offset(link_phase: f64, theta: f64) -> f64 {
    wrap_tau(theta - link_phase)
}

/// Unit-index κ pair for the given kinds and biases.
fn unit_kappas(
    alice: ModulatorKind,
    psi_a: f64,
    bob: ModulatorKind,
    psi_b: f64,
) -> (Complex64, Complex64) {
    let a = make_modulator(alice, 1.0, psi_a, 0.0).expect("unit index is valid");
    let b = make_modulator(bob, 1.0, psi_b, 0.0).expect("unit index is valid");
    kappa_factors(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Point {
    Regular { theta: f64, ratio: f64 },
    Vanishing,
}

fn evaluate(alice: ModulatorKind, psi_a: f64, bob: ModulatorKind, psi_b: f64) -> Point {
    let (k0, k1) = unit_kappas(alice, psi_a, bob, psi_b);
    if k0.norm() <= UNIT_KAPPA_ZERO || k1.norm() <= UNIT_KAPPA_ZERO {
        return Point::Vanishing;
    }
    Point::Regular {
        theta: theta(k0, k1).expect("both kappas non-zero"),
        ratio: k1.norm() / k0.norm(),
    }
}

/// Θ modulo π approached from both sides of a bias where a κ vanishes.
///
/// Θ can jump by π across such a bias, but Θ mod π is continuous through it,
/// so the symmetric average of `e^{2jΘ}` gives the limit.
fn limit_theta_mod_pi(
    alice: ModulatorKind,
    psi_a: f64,
    bob: ModulatorKind,
    psi_b: f64,
) -> Option<f64> {
    let h = LIMIT_STEP;
    let probes = [
        ((psi_a + h, psi_b), (psi_a - h, psi_b)),
        ((psi_a, psi_b + h), (psi_a, psi_b - h)),
    ];
    for ((a1, b1), (a2, b2)) in probes {
        if let (Point::Regular { theta: t1, .. }, Point::Regular { theta: t2, .. }) =
            (evaluate(alice, a1, bob, b1), evaluate(alice, a2, bob, b2))
        {
            let z = Complex64::from_polar(1.0, 2.0 * t1) + Complex64::from_polar(1.0, 2.0 * t2);
            if z.norm() > 1e-6 {
                return Some(z.arg() / 2.0);
            }
        }
    }
    None
}

fn check_point(
    protocol: Protocol,
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
) -> ProtocolFeasibility {
    match evaluate(alice.kind(), alice.psi(), bob.kind(), bob.psi()) {
        Point::Vanishing => {
            ProtocolFeasibility::infeasible(protocol, FailureReason::ZeroVisibility)
        }
        Point::Regular { theta, ratio } => {
            if protocol.theta_ok(theta) {
                ProtocolFeasibility {
                    protocol,
                    feasible: true,
                    bias_constraint: None,
                    index_ratio: Some(ratio),
                    failure_reason: FailureReason::None,
                    zero_visibility_at: None,
                    representative_bias: Some((alice.psi(), bob.psi())),
                }
            } else {
                ProtocolFeasibility::infeasible(protocol, FailureReason::ThetaMismatch)
            }
        }
    }
}

/// B92 feasibility at the biases of `alice` and `bob`.
pub fn check_b92(alice: &ModulatorSpec, bob: &ModulatorSpec) -> ProtocolFeasibility {
    check_point(Protocol::B92, alice, bob)
}

/// BB84 feasibility at the biases of `alice` and `bob`.
pub fn check_bb84(alice: &ModulatorSpec, bob: &ModulatorSpec) -> ProtocolFeasibility {
    check_point(Protocol::BB84, alice, bob)
}

pub fn check_protocol(
    protocol: Protocol,
    alice: &ModulatorSpec,
    bob: &ModulatorSpec,
) -> ProtocolFeasibility {
    check_point(protocol, alice, bob)
}

/// Θ and the `V = 1` ratio at one grid bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasSample {
    pub psi_a: f64,
    pub psi_b: f64,
    pub theta: Option<f64>,
    pub ratio: Option<f64>,
}

/// One row of the nine-configuration table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub alice_kind: ModulatorKind,
    pub bob_kind: ModulatorKind,
    pub samples: Vec<BiasSample>,
    pub b92: ProtocolFeasibility,
    pub bb84: ProtocolFeasibility,
}

impl Table2Row {
    pub fn feasibility(&self, protocol: Protocol) -> &ProtocolFeasibility {
        match protocol {
            Protocol::B92 => &self.b92,
            Protocol::BB84 => &self.bb84,
        }
    }
}

/// Row order of the published configuration table.
pub const TABLE_ORDER: [(ModulatorKind, ModulatorKind); 9] = {
    use ModulatorKind::*;
    [
        (Um, Um),
        (Am, Am),
        (Pm, Pm),
        (Pm, Am),
        (Am, Pm),
        (Um, Pm),
        (Pm, Um),
        (Um, Am),
        (Am, Um),
    ]
};

/// `n` biases `(i + ½)·π/n`, i.e. a grid over `(0, π)` that never lands on a
/// multiple of π/2 for even `n`.
pub fn default_psi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) * PI / n as f64).collect()
}

/// Multiples of π/2 in `[−2π, 2π]`, zero first.
fn special_biases() -> Vec<f64> {
    let mut out = vec![0.0];
    for k in 1..=4 {
        out.push(k as f64 * FRAC_PI_2);
        out.push(-(k as f64) * FRAC_PI_2);
    }
    out
}

struct Evaluated {
    psi_a: f64,
    psi_b: f64,
    point: Point,
}

fn search_set(alice: ModulatorKind, bob: ModulatorKind, grid: &[f64]) -> Vec<Evaluated> {
    let specials = special_biases();
    let a_values: Vec<f64> = specials.iter().chain(grid).copied().collect();
    let mut out = Vec::new();
    for &psi_a in &a_values {
        let shifted = (-4..=4).map(|k| psi_a + k as f64 * FRAC_PI_2);
        for psi_b in specials.iter().chain(grid).copied().chain(shifted) {
            out.push(Evaluated {
                psi_a,
                psi_b,
                point: evaluate(alice, psi_a, bob, psi_b),
            });
        }
    }
    out
}

/// Picks the family that is both necessary (every member of `hits` lies in
/// it) and sufficient (every candidate in it is a hit).
fn fitting_family<'a>(
    families: &[BiasConstraint],
    candidates: impl Iterator<Item = (&'a Evaluated, bool)> + Clone,
) -> Option<BiasConstraint> {
    families.iter().copied().find(|fam| {
        let mut any = false;
        for (e, hit) in candidates.clone() {
            let inside = fam.holds(e.psi_a, e.psi_b);
            if hit && !inside {
                return false;
            }
            if inside && !hit {
                return false;
            }
            any |= hit;
        }
        any
    })
}

fn classify_protocol(
    protocol: Protocol,
    alice: ModulatorKind,
    bob: ModulatorKind,
    set: &[Evaluated],
) -> ProtocolFeasibility {
    let regular = set.iter().filter_map(|e| match e.point {
        Point::Regular { theta, ratio } => Some((e, theta, ratio)),
        Point::Vanishing => None,
    });

    if let Some((rep, _, ratio)) = regular.clone().find(|(_, t, _)| protocol.theta_ok(*t)) {
        let candidates = regular.map(|(e, t, _)| (e, protocol.theta_ok(t)));
        return ProtocolFeasibility {
            protocol,
            feasible: true,
            bias_constraint: fitting_family(&BiasConstraint::FEASIBLE_FAMILIES, candidates),
            index_ratio: Some(ratio),
            failure_reason: FailureReason::None,
            zero_visibility_at: None,
            representative_bias: Some((rep.psi_a, rep.psi_b)),
        };
    }

    // No regular bias satisfies the Θ condition. Decide whether it is met at
    // a bias where the visibility collapses instead.
    let limits: Vec<(&Evaluated, bool)> = set
        .iter()
        .filter(|e| e.point == Point::Vanishing)
        .filter_map(|e| {
            limit_theta_mod_pi(alice, e.psi_a, bob, e.psi_b).map(|t| (e, protocol.theta_ok(t)))
        })
        .collect();

    if limits.iter().any(|(_, hit)| *hit) {
        let mut out = ProtocolFeasibility::infeasible(protocol, FailureReason::ZeroVisibility);
        out.zero_visibility_at =
            fitting_family(&BiasConstraint::VANISHING_FAMILIES, limits.iter().copied());
        out
    } else {
        ProtocolFeasibility::infeasible(protocol, FailureReason::ThetaMismatch)
    }
}

/// Classifies one kind pair over `psi_grid × psi_grid` (plus the multiples
/// of π/2 and the quarter-turn offsets needed to reach the canonical bias
/// families).
pub fn classify_pair(
    alice: ModulatorKind,
    bob: ModulatorKind,
    psi_grid: &[f64],
) -> Result<Table2Row> {
    if psi_grid.is_empty() {
        return Err(Error::invalid("psi_grid", "must not be empty"));
    }
    if psi_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("psi_grid", "entries must be finite"));
    }

    let mut samples = Vec::with_capacity(psi_grid.len() * psi_grid.len());
    for &psi_a in psi_grid {
        for &psi_b in psi_grid {
            let (theta, ratio) = match evaluate(alice, psi_a, bob, psi_b) {
                Point::Regular { theta, ratio } => (Some(theta), Some(ratio)),
                Point::Vanishing => (None, None),
            };
            samples.push(BiasSample {
                psi_a,
                psi_b,
                theta,
                ratio,
            });
        }
    }

    let set = search_set(alice, bob, psi_grid);
    Ok(Table2Row {
        alice_kind: alice,
        bob_kind: bob,
        samples,
        b92: classify_protocol(Protocol::B92, alice, bob, &set),
        bb84: classify_protocol(Protocol::BB84, alice, bob, &set),
    })
}

/// All nine rows in table order.
pub fn classify_all(psi_grid: &[f64]) -> Result<Vec<Table2Row>> {
    TABLE_ORDER
        .iter()
        .map(|&(a, b)| classify_pair(a, b, psi_grid))
        .collect()
}

/// One Alice/Bob electrical phase setting and the ΔΦ it produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSetting {
    pub phi_a: f64,
    pub phi_b: f64,
    pub delta_phi: f64,
}

const CANONICAL_PHASES: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

/// Every pairing of Alice's and Bob's canonical phases `{0, π/2, π, 3π/2}`,
/// with Bob's physical phase carrying the offset that cancels `Ωβ₁L − Θ`.
pub fn phase_alphabet(
    protocol: Protocol,
    link_phase: f64,
    theta: f64,
) -> Result<Vec<PhaseSetting>> {
    if !protocol.theta_ok(theta) {
        return Err(Error::Infeasible {
            protocol,
            reason: FailureReason::ThetaMismatch,
        });
    }
    let offset = bob_phase_offset(link_phase, theta);
    let mut out = Vec::with_capacity(16);
    for &phi_a in &CANONICAL_PHASES {
        for &nominal in &CANONICAL_PHASES {
            let phi_b = wrap_tau(nominal + offset);
            out.push(PhaseSetting {
                phi_a,
                phi_b,
                delta_phi: delta_phi(phi_a, phi_b, link_phase, theta),
            });
        }
    }
    Ok(out)
}
