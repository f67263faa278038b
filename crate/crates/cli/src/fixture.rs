//! Printed nine-configuration table, checked against the classifier.
//!
//! Θ is printed as a single expression, but the computed phase picks up an
//! extra π wherever a cosine or tangent factor inside κ₀ or κ₁ turns
//! negative. Each row therefore carries the printed expression plus the sign
//! rule for that branch. Ratios are printed as bare expressions in some rows
//! and as absolute values in others; a ratio of magnitudes is compared
//! against the absolute value of the printed expression.

use std::f64::consts::{FRAC_PI_2, PI};

use fcqkd_core::angle::modular_distance;
use fcqkd_core::protocol::{BiasConstraint, FailureReason, Protocol, Table2Row, TABLE_ORDER};
use fcqkd_core::ModulatorKind;
use serde::Serialize;

/// Θ and ratio agreement, absolute radians and relative respectively.
pub const FIXTURE_TOL: f64 = 1e-9;

type BiasFn = fn(f64, f64) -> f64;
type BranchFn = fn(f64, f64) -> bool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PrintedVerdict {
    /// "OK", optionally with the bias condition.
    Ok { constraint: BiasConstraint },
    /// "NO"
    No,
    /// "NO V = 0 if ..."
    NoZeroVisibility { at: BiasConstraint },
}

#[derive(Debug, Clone, Copy)]
pub struct FixtureRow {
    pub alice: ModulatorKind,
    pub bob: ModulatorKind,
    pub theta_text: &'static str,
    pub theta: BiasFn,
    /// True where the computed Θ sits π away from the printed expression.
    pub theta_branch: BranchFn,
    pub ratio_text: &'static str,
    pub ratio: BiasFn,
    pub b92: PrintedVerdict,
    pub bb84: PrintedVerdict,
}

impl FixtureRow {
    pub fn expected_theta(&self, psi_a: f64, psi_b: f64) -> f64 {
        let shift = if (self.theta_branch)(psi_a, psi_b) {
            PI
        } else {
            0.0
        };
        (self.theta)(psi_a, psi_b) + shift
    }

    pub fn expected_ratio(&self, psi_a: f64, psi_b: f64) -> f64 {
        (self.ratio)(psi_a, psi_b).abs()
    }

    pub fn verdict(&self, protocol: Protocol) -> PrintedVerdict {
        match protocol {
            Protocol::B92 => self.b92,
            Protocol::BB84 => self.bb84,
        }
    }
}

pub fn published_table() -> Vec<FixtureRow> {
    use BiasConstraint::*;
    use ModulatorKind::*;
    use PrintedVerdict::*;
    vec![
        FixtureRow {
            alice: Um,
            bob: Um,
            theta_text: "ψ_B − ψ_A",
            theta: |a, b| b - a,
            theta_branch: |a, b| a.cos() * b.cos() < 0.0,
            ratio_text: "|cos ψ_A / cos ψ_B|",
            ratio: |a, b| (a.cos() / b.cos()).abs(),
            b92: Ok {
                constraint: PsiBEqPsiAPlusMultipleOfPi,
            },
            bb84: Ok {
                constraint: PsiBEqPsiAPlusOddHalfPi,
            },
        },
        FixtureRow {
            alice: Am,
            bob: Am,
            theta_text: "0",
            theta: |_, _| 0.0,
            theta_branch: |a, b| a.tan() * b.tan() < 0.0,
            ratio_text: "|tan ψ_B / tan ψ_A|",
            ratio: |a, b| (b.tan() / a.tan()).abs(),
            b92: Ok {
                constraint: Unconstrained,
            },
            bb84: No,
        },
        FixtureRow {
            alice: Pm,
            bob: Pm,
            theta_text: "0",
            theta: |_, _| 0.0,
            theta_branch: |_, _| false,
            ratio_text: "1",
            ratio: |_, _| 1.0,
            b92: Ok {
                constraint: Unconstrained,
            },
            bb84: No,
        },
        FixtureRow {
            alice: Pm,
            bob: Am,
            theta_text: "π/2",
            theta: |_, _| FRAC_PI_2,
            theta_branch: |_, b| b.tan() < 0.0,
            ratio_text: "tan ψ_B",
            ratio: |_, b| b.tan(),
            b92: No,
            bb84: Ok {
                constraint: Unconstrained,
            },
        },
        FixtureRow {
            alice: Am,
            bob: Pm,
            theta_text: "−π/2",
            theta: |_, _| -FRAC_PI_2,
            theta_branch: |a, _| a.tan() < 0.0,
            ratio_text: "1 / |tan ψ_A|",
            ratio: |a, _| 1.0 / a.tan().abs(),
            b92: No,
            bb84: Ok {
                constraint: Unconstrained,
            },
        },
        FixtureRow {
            alice: Um,
            bob: Pm,
            theta_text: "−ψ_A",
            theta: |a, _| -a,
            theta_branch: |a, _| a.cos() < 0.0,
            ratio_text: "2 cos ψ_A",
            ratio: |a, _| 2.0 * a.cos(),
            b92: Ok {
                constraint: PsiAMultipleOfPi,
            },
            bb84: NoZeroVisibility { at: PsiAOddHalfPi },
        },
        FixtureRow {
            alice: Pm,
            bob: Um,
            theta_text: "ψ_B",
            theta: |_, b| b,
            theta_branch: |_, b| b.cos() < 0.0,
            ratio_text: "1 / (2 cos ψ_B)",
            ratio: |_, b| 1.0 / (2.0 * b.cos()),
            b92: Ok {
                constraint: PsiBMultipleOfPi,
            },
            bb84: NoZeroVisibility { at: PsiBOddHalfPi },
        },
        FixtureRow {
            alice: Um,
            bob: Am,
            theta_text: "π/2 − ψ_A",
            theta: |a, _| FRAC_PI_2 - a,
            theta_branch: |a, b| a.cos() * b.tan() < 0.0,
            ratio_text: "2 cos ψ_A tan ψ_B",
            ratio: |a, b| 2.0 * a.cos() * b.tan(),
            b92: NoZeroVisibility { at: PsiAOddHalfPi },
            bb84: Ok {
                constraint: PsiAMultipleOfPi,
            },
        },
        FixtureRow {
            alice: Am,
            bob: Um,
            theta_text: "−π/2 + ψ_B",
            theta: |_, b| -FRAC_PI_2 + b,
            theta_branch: |a, b| b.cos() * a.tan() < 0.0,
            ratio_text: "2 |cos ψ_B / tan ψ_A|",
            ratio: |a, b| 2.0 * (b.cos() / a.tan()).abs(),
            b92: NoZeroVisibility { at: PsiBOddHalfPi },
            bb84: Ok {
                constraint: PsiBMultipleOfPi,
            },
        },
    ]
}

/// Verdict the classifier produced, in printed-table terms.
pub fn computed_verdict(row: &Table2Row, protocol: Protocol) -> Option<PrintedVerdict> {
    let f = row.feasibility(protocol);
    if f.feasible {
        return f
            .bias_constraint
            .map(|c| PrintedVerdict::Ok { constraint: c });
    }
    match f.failure_reason {
        FailureReason::ThetaMismatch => Some(PrintedVerdict::No),
        FailureReason::ZeroVisibility => f
            .zero_visibility_at
            .map(|at| PrintedVerdict::NoZeroVisibility { at }),
        FailureReason::None => None,
    }
}

/// One cell that disagrees with the printed table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub row: String,
    pub cell: &'static str,
    pub detail: String,
}

/// Per-row comparison summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCheck {
    pub row: String,
    pub samples: usize,
    pub max_theta_error: f64,
    pub max_ratio_error: f64,
    pub pass: bool,
}

pub fn row_label(alice: ModulatorKind, bob: ModulatorKind) -> String {
    format!("{alice}-{bob}")
}

/// Compares classifier rows with a fixture. Rows are matched by kind pair;
/// a pair missing on either side is itself a mismatch.
pub fn compare(rows: &[Table2Row], fixture: &[FixtureRow]) -> (Vec<RowCheck>, Vec<Mismatch>) {
    let mut checks = Vec::new();
    let mut mismatches = Vec::new();
    for (alice, bob) in TABLE_ORDER {
        let label = row_label(alice, bob);
        let row = rows
            .iter()
            .find(|r| r.alice_kind == alice && r.bob_kind == bob);
        let fix = fixture.iter().find(|f| f.alice == alice && f.bob == bob);
        let (row, fix) = match (row, fix) {
            (Some(r), Some(f)) => (r, f),
            _ => {
                mismatches.push(Mismatch {
                    row: label.clone(),
                    cell: "row",
                    detail: "missing".into(),
                });
                continue;
            }
        };

        let before = mismatches.len();
        let mut max_theta = 0.0f64;
        let mut max_ratio = 0.0f64;
        let mut worst_theta = None;
        let mut worst_ratio = None;
        for s in &row.samples {
            let (Some(theta), Some(ratio)) = (s.theta, s.ratio) else {
                continue;
            };
            let dt = modular_distance(theta, fix.expected_theta(s.psi_a, s.psi_b), 2.0 * PI);
            if dt > max_theta {
                max_theta = dt;
                worst_theta = Some((s.psi_a, s.psi_b, theta));
            }
            let want = fix.expected_ratio(s.psi_a, s.psi_b);
            let dr = (ratio - want).abs() / want;
            if !(dr <= max_ratio) {
                max_ratio = dr;
                worst_ratio = Some((s.psi_a, s.psi_b, ratio, want));
            }
        }
        if max_theta > FIXTURE_TOL {
            let (a, b, t) = worst_theta.expect("set with max");
            mismatches.push(Mismatch {
                row: label.clone(),
                cell: "theta",
                detail: format!(
                    "printed {}; computed {t:.12} at ψ_A={a:.6}, ψ_B={b:.6} (error {max_theta:.3e})",
                    fix.theta_text
                ),
            });
        }
        if !(max_ratio <= FIXTURE_TOL) {
            let (a, b, r, w) = worst_ratio.expect("set with max");
            mismatches.push(Mismatch {
                row: label.clone(),
                cell: "ratio",
                detail: format!(
                    "printed {}; computed {r:.12}, printed value {w:.12} at ψ_A={a:.6}, ψ_B={b:.6} (relative error {max_ratio:.3e})",
                    fix.ratio_text
                ),
            });
        }
        for (protocol, cell) in [(Protocol::B92, "b92"), (Protocol::BB84, "bb84")] {
            let got = computed_verdict(row, protocol);
            let want = fix.verdict(protocol);
            if got != Some(want) {
                mismatches.push(Mismatch {
                    row: label.clone(),
                    cell,
                    detail: format!("printed {want:?}; computed {got:?}"),
                });
            }
        }
        let samples = row.samples.iter().filter(|s| s.theta.is_some()).count();
        if samples == 0 {
            mismatches.push(Mismatch {
                row: label.clone(),
                cell: "samples",
                detail: "no regular bias".into(),
            });
        }
        checks.push(RowCheck {
            row: label,
            samples,
            max_theta_error: max_theta,
            max_ratio_error: max_ratio,
            pass: mismatches.len() == before,
        });
    }
    (checks, mismatches)
}
