//! Subcommand implementations. Each returns a serializable report; writing
//! and exit codes live in [`crate::app`].

use fcqkd_core::modulator::LOW_MODULATION_LIMIT;
use fcqkd_core::montecarlo::{run_session, SessionStats};
use fcqkd_core::oracle::{
    default_order, exact_tandem_spectrum, lattice_errors, regression_bound, MAX_VERIFY_INDEX,
};
use fcqkd_core::protocol::{classify_all, default_psi_grid, delta_phi, ProtocolFeasibility};
use fcqkd_core::tandem::{analyze, sideband_powers, sideband_powers_direct};
use fcqkd_core::{LinkSpec, ModulatorKind, ModulatorSpec};
use serde::Serialize;

use crate::config::{RunConfig, SourceSection, SweepVariable};
use crate::error::{CliError, CliResult};
use crate::fixture::{compare, published_table, FixtureRow, Mismatch, RowCheck};

pub const SCHEMA_VERSION: u32 = 1;

/// Direct and closed-form sweep columns must agree to this.
pub const AGREEMENT_TOL: f64 = 1e-12;

/// Spectral lines weaker than this (relative to carrier) are clamped.
pub const DB_FLOOR: f64 = -300.0;

pub const DEFAULT_TABLE_GRID: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta_phi_rad: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub p_upper_closed: f64,
    pub p_lower_closed: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 5] = [
        "delta_phi_rad",
        "p_upper",
        "p_lower",
        "p_upper_closed",
        "p_lower_closed",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.delta_phi_rad,
            self.p_upper,
            self.p_lower,
            self.p_upper_closed,
            self.p_lower_closed,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub offset_ghz: f64,
    pub power_db_rel_carrier: f64,
}

impl SpectrumRow {
    pub const HEADER: [&'static str; 2] = ["offset_ghz", "power_db_rel_carrier"];

    pub fn values(&self) -> [f64; 2] {
        [self.offset_ghz, self.power_db_rel_carrier]
    }
}

fn warn_if_strong(specs: &[&ModulatorSpec]) {
    for s in specs {
        if s.low_modulation_warning() {
            eprintln!(
                "warning: {} index {} exceeds {LOW_MODULATION_LIMIT}; the three-band model loses accuracy",
                s.kind(),
                s.max_index()
            );
        }
    }
}

/// Bob's RF phase that yields effective phase `dphi`.
fn bob_phase_for(alice: &ModulatorSpec, link: &LinkSpec, theta: f64, dphi: f64) -> f64 {
    alice.phi() + dphi - link.link_phase() + theta
}

pub fn sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let alice = cfg.alice_spec()?;
    let bob = cfg.bob_spec()?;
    let link = cfg.link_spec()?;
    warn_if_strong(&[&alice, &bob]);
    let theta = analyze(&alice, &bob)?.theta_or_zero();

    let mut rows = Vec::with_capacity(cfg.sweep.steps);
    for x in cfg.sweep.points()? {
        let (phi_b, dphi) = match cfg.sweep.variable {
            SweepVariable::DeltaPhi => (bob_phase_for(&alice, &link, theta, x), x),
            SweepVariable::PhiB => (x, delta_phi(alice.phi(), x, link.link_phase(), theta)),
        };
        let b = bob.with_phi(phi_b);
        let direct = sideband_powers_direct(&alice, &b, &link)?;
        let closed = sideband_powers(&alice, &b, &link)?;
        let gap = (direct.upper - closed.upper)
            .abs()
            .max((direct.lower - closed.lower).abs());
        if !(gap <= AGREEMENT_TOL) {
            return Err(CliError::Validation(format!(
                "direct and closed-form powers differ by {gap:e} at delta_phi = {dphi}"
            )));
        }
        rows.push(SweepRow {
            delta_phi_rad: dphi,
            p_upper: direct.upper,
            p_lower: direct.lower,
            p_upper_closed: closed.upper,
            p_lower_closed: closed.lower,
        });
    }
    Ok(rows)
}

/// Exact tandem spectrum at effective phase `dphi`, in dB relative to the
/// output carrier.
pub fn spectrum(cfg: &RunConfig, dphi: f64, order: Option<usize>) -> CliResult<Vec<SpectrumRow>> {
    if !dphi.is_finite() {
        return Err(CliError::config("--delta-phi must be finite"));
    }
    let alice = cfg.alice_spec()?;
    let bob = cfg.bob_spec()?;
    let link = cfg.link_spec()?;
    // With no sideband at all Θ is irrelevant; the spectrum is still defined.
    let theta = analyze(&alice, &bob)
        .map(|r| r.theta_or_zero())
        .unwrap_or(0.0);
    let bob = bob.with_phi(bob_phase_for(&alice, &link, theta, dphi));
    let order = order.unwrap_or_else(|| default_order(alice.max_index().max(bob.max_index())));
    let s = exact_tandem_spectrum(&alice, &bob, &link, order)?;

    let carrier = s.amp(0).norm_sqr();
    if !(carrier > 0.0) {
        return Err(CliError::Validation(
            "output carrier is extinguished; power relative to carrier is undefined".into(),
        ));
    }
    Ok(s.iter()
        .map(|(k, a)| {
            let rel = a.norm_sqr() / carrier;
            let db = if rel > 0.0 {
                (10.0 * rel.log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            };
            SpectrumRow {
                offset_ghz: k as f64 * link.rf_ghz(),
                power_db_rel_carrier: db,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Entry {
    pub alice_kind: ModulatorKind,
    pub bob_kind: ModulatorKind,
    pub theta_printed: &'static str,
    pub ratio_printed: &'static str,
    pub b92: ProtocolFeasibility,
    pub bb84: ProtocolFeasibility,
    pub check: RowCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Report {
    pub schema_version: u32,
    pub grid_points_per_axis: usize,
    pub rows: Vec<Table2Entry>,
    pub mismatches: Vec<Mismatch>,
    pub pass: bool,
}

pub fn table2(grid: usize) -> CliResult<Table2Report> {
    table2_against(grid, &published_table())
}

/// Same as [`table2`] with a caller-supplied fixture.
pub fn table2_against(grid: usize, fixture: &[FixtureRow]) -> CliResult<Table2Report> {
    if grid < 2 {
        return Err(CliError::config(
            "table grid needs at least 2 points per axis",
        ));
    }
    let rows = classify_all(&default_psi_grid(grid))?;
    let (checks, mismatches) = compare(&rows, fixture);
    let entries = rows
        .iter()
        .zip(checks)
        .map(|(r, check)| {
            let fix = fixture
                .iter()
                .find(|f| f.alice == r.alice_kind && f.bob == r.bob_kind);
            Table2Entry {
                alice_kind: r.alice_kind,
                bob_kind: r.bob_kind,
                theta_printed: fix.map_or("", |f| f.theta_text),
                ratio_printed: fix.map_or("", |f| f.ratio_text),
                b92: r.b92,
                bb84: r.bb84,
                check,
            }
        })
        .collect();
    Ok(Table2Report {
        schema_version: SCHEMA_VERSION,
        grid_points_per_axis: grid,
        rows: entries,
        pass: mismatches.is_empty(),
        mismatches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyPair {
    pub alice_kind: ModulatorKind,
    pub bob_kind: ModulatorKind,
    pub worst_relative: f64,
    pub worst_relative_reference: f64,
    pub worst_absolute: f64,
    pub regression_bound: f64,
    /// Error at `max_m` over error at `max_m / 10`; about 100 for a
    /// quadratic error.
    pub scaling_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub max_m: f64,
    pub reference_m: f64,
    pub pairs: Vec<VerifyPair>,
    pub pass: bool,
}

/// Oracle lattice at `max_m` and `max_m / 10`, checked against the frozen
/// regression bounds.
pub fn verify(max_m: f64) -> CliResult<VerifyReport> {
    if !(max_m > 0.0 && max_m <= MAX_VERIFY_INDEX) {
        return Err(CliError::config(format!(
            "max_m = {max_m} is outside the supported regime (0, {MAX_VERIFY_INDEX}]"
        )));
    }
    let link = LinkSpec::back_to_back(crate::config::DEFAULT_RF_GHZ)?;
    let reference_m = max_m / 10.0;
    let at_max = lattice_errors(max_m, &link)?;
    let at_ref = lattice_errors(reference_m, &link)?;
    let pairs: Vec<VerifyPair> = at_max
        .iter()
        .zip(&at_ref)
        .map(|(hi, lo)| {
            let bound = regression_bound(hi.alice_kind, hi.bob_kind, max_m);
            let ref_bound = regression_bound(hi.alice_kind, hi.bob_kind, reference_m);
            VerifyPair {
                alice_kind: hi.alice_kind,
                bob_kind: hi.bob_kind,
                worst_relative: hi.worst_relative,
                worst_relative_reference: lo.worst_relative,
                worst_absolute: hi.worst_absolute.max(lo.worst_absolute),
                regression_bound: bound,
                scaling_ratio: hi.worst_relative / lo.worst_relative,
                pass: hi.worst_relative <= bound && lo.worst_relative <= ref_bound,
            }
        })
        .collect();
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        max_m,
        reference_m,
        pass: pairs.iter().all(|p| p.pass),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QkdReport {
    pub schema_version: u32,
    pub seed: u64,
    pub source: SourceReport,
    pub stats: SessionStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceReport {
    pub wavelength_nm: f64,
    pub power_dbm: f64,
}

impl From<&SourceSection> for SourceReport {
    fn from(s: &SourceSection) -> Self {
        Self {
            wavelength_nm: s.wavelength_nm,
            power_dbm: s.power_dbm,
        }
    }
}

pub fn qkd(cfg: &RunConfig, seed: Option<u64>) -> CliResult<QkdReport> {
    let session = cfg.session(seed)?;
    let stats = run_session(&session)?;
    Ok(QkdReport {
        schema_version: SCHEMA_VERSION,
        seed: session.seed,
        source: (&cfg.source).into(),
        stats,
    })
}
