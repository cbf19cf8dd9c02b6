//! Cross-checks the closed forms against brute-force Fock-space numerics.
//!
//! Heralded states come from [`SubtractionOracle`] (a squeezed vacuum sent
//! through the tap and projected), interferometer statistics from
//! [`ModeMixer`] evolution and [`quasi_spin_moments`]. A heralding event of
//! probability zero leaves the vacuum as interferometer input.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    fidelity, smsv_state, subtracted_cv_state, CutoffPolicy, FockVector, Sign, TwoModeFockVector,
    DEFAULT_MAX_CUTOFF,
};
use crate::metrology::{self as m, InputFamily};
use crate::optics::{quasi_spin_moments, ModeMatrix, ModeMixer, SubtractionOracle};
use crate::scalar::{
    squeeze_from_db, tap_from_transmittance, SqueezeSpec, TapSpec, DB_PER_AMPLITUDE,
};

pub const ABS_FLOOR: f64 = 1e-14;
pub const FIDELITY_TOL: f64 = 1e-10;
pub const PROBABILITY_TOL: f64 = 1e-8;
pub const QFI_TOL: f64 = 1e-8;
pub const NORMALIZATION_TOL: f64 = 1e-10;
pub const REDUCTION_TOL: f64 = 1e-12;
pub const DPHI_TOL: f64 = 1e-4;
pub const GOLDEN_DRIFT_TOL: f64 = 1e-10;
/// Largest subtraction count simulated unless the cutoff ceiling is raised.
pub const BRUTE_FORCE_MAX_N: usize = 12;
pub const MAX_SQUEEZING_DB: f64 = 30.0;
pub const GOLDEN_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    StateFidelity,
    Probability,
    Qfi,
    JxVar,
    JzStats,
    DetectionDphi,
    NormalizationSum,
    ReductionIdentity,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::StateFidelity => "state_fidelity",
            Quantity::Probability => "probability",
            Quantity::Qfi => "qfi",
            Quantity::JxVar => "jx_var",
            Quantity::JzStats => "jz_stats",
            Quantity::DetectionDphi => "detection_dphi",
            Quantity::NormalizationSum => "normalization_sum",
            Quantity::ReductionIdentity => "reduction_identity",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// The closed-form operations a case exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnalyticOp {
    SuccessProbability,
    QfiPair,
    QfiPairEqual,
    QfiSmsvPair,
    QfiOneSided,
    QcrBound,
    GainDb,
    JxVariancePair,
    DetectionSensitivity,
}

impl AnalyticOp {
    pub const ALL: [AnalyticOp; 9] = [
        AnalyticOp::SuccessProbability,
        AnalyticOp::QfiPair,
        AnalyticOp::QfiPairEqual,
        AnalyticOp::QfiSmsvPair,
        AnalyticOp::QfiOneSided,
        AnalyticOp::QcrBound,
        AnalyticOp::GainDb,
        AnalyticOp::JxVariancePair,
        AnalyticOp::DetectionSensitivity,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckCase {
    pub name: String,
    pub family: InputFamily,
    pub quantity: Quantity,
    pub tolerance: f64,
    pub ops: Vec<AnalyticOp>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckVerdict {
    pub case: CheckCase,
    pub analytic_value: f64,
    pub oracle_value: f64,
    pub relative_error: f64,
    pub passed: bool,
    pub runtime_ms: f64,
    pub reason: Option<String>,
}

/// `|a − o| / |o|`; zero for identical values (including matching
/// infinities) and for finite values within [`ABS_FLOOR`] of each other.
pub fn relative_error(analytic: f64, oracle: f64) -> f64 {
    if analytic == oracle {
        return 0.0;
    }
    if !analytic.is_finite() || !oracle.is_finite() {
        return f64::INFINITY;
    }
    let diff = (analytic - oracle).abs();
    if diff <= ABS_FLOOR {
        return 0.0;
    }
    if oracle == 0.0 {
        return f64::INFINITY;
    }
    diff / oracle.abs()
}

fn within(analytic: f64, oracle: f64, tolerance: f64) -> bool {
    relative_error(analytic, oracle) <= tolerance
}

/// A detection check outside the regular pair grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionPoint {
    pub s: f64,
    pub t: f64,
    pub n1: usize,
    pub n2: usize,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    /// Squeezing amplitudes `s`.
    pub squeezing: Vec<f64>,
    pub transmittances: Vec<f64>,
    /// Pairs `(n1, n2)` run over `0..=max_n` in each channel.
    pub max_n: usize,
    /// Heralding outcomes checked for state fidelity.
    pub max_outcome: usize,
    pub phases: Vec<f64>,
    pub derivative_step: f64,
    pub policy: CutoffPolicy,
    /// Power of `cosh s` in the two-channel success probability; 2 is correct.
    pub cosh_power: i32,
    pub extra_detection: Vec<DetectionPoint>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let five_db = squeeze_from_db(5.0).map(|s| s.amplitude()).unwrap_or(0.0);
        Self {
            squeezing: vec![0.1, 0.3, five_db, 0.8, 1.0],
            transmittances: vec![0.8, 0.9, 0.95],
            max_n: 4,
            max_outcome: 6,
            phases: vec![0.3, FRAC_PI_2, 2.0],
            derivative_step: 1e-5,
            policy: CutoffPolicy {
                tolerance: 1e-13,
                max_cutoff: DEFAULT_MAX_CUTOFF,
            },
            cosh_power: 2,
            extra_detection: vec![DetectionPoint {
                s: five_db,
                t: 0.9,
                n1: 10,
                n2: 0,
                phase: FRAC_PI_2,
            }],
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let s_max = MAX_SQUEEZING_DB / DB_PER_AMPLITUDE;
        if self.squeezing.is_empty() || self.transmittances.is_empty() {
            return Err(Error::Config(
                "grid needs at least one squeezing and one transmittance".into(),
            ));
        }
        for &s in self
            .squeezing
            .iter()
            .chain(self.extra_detection.iter().map(|d| &d.s))
        {
            if !(s.is_finite() && s >= 0.0 && s <= s_max * (1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "squeezing amplitude {s} outside [0, {s_max}] (0 to {MAX_SQUEEZING_DB} dB)"
                )));
            }
        }
        for &t in self
            .transmittances
            .iter()
            .chain(self.extra_detection.iter().map(|d| &d.t))
        {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("transmittance {t} outside (0, 1]")));
            }
        }
        let largest = self
            .extra_detection
            .iter()
            .flat_map(|d| [d.n1, d.n2])
            .chain([self.max_n, self.max_outcome])
            .max()
            .unwrap_or(0);
        if largest > BRUTE_FORCE_MAX_N && self.policy.max_cutoff <= DEFAULT_MAX_CUTOFF {
            return Err(Error::Config(format!(
                "subtraction count {largest} exceeds the brute-force ceiling {BRUTE_FORCE_MAX_N}; \
                 raise the cutoff ceiling above {DEFAULT_MAX_CUTOFF} to allow it"
            )));
        }
        if !(self.derivative_step > 0.0 && self.derivative_step < 0.1) {
            return Err(Error::Config(format!(
                "derivative step {} outside (0, 0.1)",
                self.derivative_step
            )));
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("phases must be finite".into()));
        }
        Ok(())
    }
}

/// Brute-force heralded states of one `(s, t)` point.
struct PointStates {
    plus: Vec<FockVector>,
    minus: Vec<FockVector>,
    probs: Vec<f64>,
    smsv_plus: FockVector,
    smsv_minus: FockVector,
}

impl PointStates {
    fn build(
        spec: &SqueezeSpec,
        tap: &TapSpec,
        policy: &CutoffPolicy,
        max_outcome: usize,
    ) -> Result<Self> {
        let plus_oracle = SubtractionOracle::new(spec, tap, Sign::Plus, policy, max_outcome)?;
        let minus_oracle = SubtractionOracle::new(spec, tap, Sign::Minus, policy, max_outcome)?;
        let pick = |o: &SubtractionOracle, k: usize| match o.project(k) {
            Ok(r) => Ok(r.conditioned_state),
            Err(Error::DegenerateEvent { .. }) | Err(Error::Domain { .. }) => {
                Ok(FockVector::vacuum())
            }
            Err(e) => Err(e),
        };
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut probs = Vec::new();
        for k in 0..=max_outcome {
            plus.push(pick(&plus_oracle, k)?);
            minus.push(pick(&minus_oracle, k)?);
            probs.push(plus_oracle.probability(k));
        }
        Ok(Self {
            plus,
            minus,
            probs,
            smsv_plus: smsv_state(spec, Sign::Plus, policy)?,
            smsv_minus: smsv_state(spec, Sign::Minus, policy)?,
        })
    }
}

fn total_reach(a: &FockVector, b: &FockVector) -> usize {
    a.cutoff() + b.cutoff()
}

/// Mixers for every phase and its two derivative neighbours.
struct PhaseMixers {
    entries: Vec<(f64, [ModeMixer; 3])>,
}

impl PhaseMixers {
    fn new(phases: &[f64], h: f64, max_total: usize) -> Self {
        let mk = |p: f64| ModeMixer::new(ModeMatrix::mach_zehnder(p), max_total);
        Self {
            entries: phases
                .iter()
                .map(|&p| (p, [mk(p), mk(p - h), mk(p + h)]))
                .collect(),
        }
    }
}

fn mean_jz(state: &TwoModeFockVector) -> f64 {
    state
        .entries()
        .map(|(i, j, a)| 0.5 * (i as f64 - j as f64) * a.norm_sqr())
        .sum()
}

struct Collector {
    verdicts: Vec<CheckVerdict>,
    clock: Instant,
}

impl Collector {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: String,
        family: InputFamily,
        quantity: Quantity,
        tolerance: f64,
        ops: &[AnalyticOp],
        analytic: f64,
        oracle: f64,
    ) {
        let elapsed = self.clock.elapsed().as_secs_f64() * 1e3;
        self.clock = Instant::now();
        self.verdicts.push(CheckVerdict {
            case: CheckCase {
                name,
                family,
                quantity,
                tolerance,
                ops: ops.to_vec(),
            },
            analytic_value: analytic,
            oracle_value: oracle,
            relative_error: relative_error(analytic, oracle),
            passed: within(analytic, oracle, tolerance),
            runtime_ms: elapsed,
            reason: None,
        });
    }

    fn fail(&mut self, name: String, family: InputFamily, quantity: Quantity, reason: String) {
        self.verdicts.push(CheckVerdict {
            case: CheckCase {
                name,
                family,
                quantity,
                tolerance: 0.0,
                ops: Vec::new(),
            },
            analytic_value: f64::NAN,
            oracle_value: f64::NAN,
            relative_error: f64::INFINITY,
            passed: false,
            runtime_ms: 0.0,
            reason: Some(reason),
        });
    }
}

fn point_label(s: f64, t: f64) -> String {
    format!("s={s},t={t}")
}

/// Runs every check on the grid; verdicts are sorted by case name.
pub fn run_suite(grid: &GridConfig) -> Result<Vec<CheckVerdict>> {
    grid.validate()?;
    let mut out = Collector {
        verdicts: Vec::new(),
        clock: Instant::now(),
    };
    for &s in &grid.squeezing {
        let spec = SqueezeSpec::from_amplitude(s)?;
        reduction_checks(&mut out, &spec)?;
        for &t in &grid.transmittances {
            let tap = tap_from_transmittance(t, &spec)?;
            let label = point_label(s, t);
            let max_outcome = grid.max_outcome.max(grid.max_n);
            match PointStates::build(&spec, &tap, &grid.policy, max_outcome) {
                Ok(states) => point_checks(&mut out, grid, &spec, &tap, &label, &states)?,
                Err(e @ Error::Cutoff { .. }) => out.fail(
                    format!("certification[{label}]"),
                    InputFamily::smsv_pair(spec),
                    Quantity::StateFidelity,
                    e.to_string(),
                ),
                Err(e) => return Err(e),
            }
        }
    }
    let fold = 10f64.powf(1.5);
    out.push(
        "reduction_gain_fold".to_string(),
        InputFamily::smsv_pair(SqueezeSpec::from_amplitude(0.0)?),
        Quantity::ReductionIdentity,
        REDUCTION_TOL,
        &[AnalyticOp::GainDb],
        1.0 / m::ratio_from_gain_db(m::gain_db(1.0 / fold, 1.0)?),
        fold,
    );
    for point in &grid.extra_detection {
        extra_detection(&mut out, grid, point)?;
    }
    let mut verdicts = out.verdicts;
    verdicts.sort_by(|a, b| a.case.name.cmp(&b.case.name));
    assert_coverage(&verdicts);
    for pair in verdicts.windows(2) {
        assert!(
            pair[0].case.name != pair[1].case.name,
            "duplicate case {}",
            pair[0].case.name
        );
    }
    Ok(verdicts)
}

/// Every closed-form operation must be exercised by at least one case.
fn assert_coverage(verdicts: &[CheckVerdict]) {
    for op in AnalyticOp::ALL {
        assert!(
            verdicts.iter().any(|v| v.case.ops.contains(&op)),
            "suite does not cover {op:?}"
        );
    }
}

fn reduction_checks(out: &mut Collector, spec: &SqueezeSpec) -> Result<()> {
    let s = spec.amplitude();
    let unit = tap_from_transmittance(1.0, spec)?;
    let smsv = m::qfi_smsv_pair(spec);
    let family = InputFamily::subtracted_pair(*spec, unit, 0, 0);
    out.push(
        format!("reduction_equal_to_smsv[s={s}]"),
        family,
        Quantity::ReductionIdentity,
        REDUCTION_TOL,
        &[AnalyticOp::QfiPairEqual, AnalyticOp::QfiSmsvPair],
        m::qfi_pair_equal(spec, &unit, 0)?,
        smsv,
    );
    out.push(
        format!("reduction_one_sided_to_smsv[s={s}]"),
        InputFamily::subtracted_plus_smsv(*spec, unit, 0),
        Quantity::ReductionIdentity,
        REDUCTION_TOL,
        &[AnalyticOp::QfiOneSided, AnalyticOp::QfiSmsvPair],
        m::qfi_one_sided(spec, &unit, 0)?,
        smsv,
    );
    Ok(())
}

fn point_checks(
    out: &mut Collector,
    grid: &GridConfig,
    spec: &SqueezeSpec,
    tap: &TapSpec,
    label: &str,
    st: &PointStates,
) -> Result<()> {
    let policy = &grid.policy;

    // heralded states against the ladder construction
    for k in 0..=grid.max_outcome {
        let family = InputFamily::subtracted_plus_smsv(*spec, *tap, k);
        let analytic_p = m::single_channel_probability(spec, tap, k)?;
        out.push(
            format!("probability_single[{label},n={k}]"),
            family,
            Quantity::Probability,
            PROBABILITY_TOL,
            &[AnalyticOp::SuccessProbability],
            analytic_p,
            st.probs[k],
        );
        if st.probs[k] > 0.0 {
            let direct = subtracted_cv_state(tap, k, Sign::Plus, policy)?;
            out.push(
                format!("state_fidelity[{label},n={k}]"),
                family,
                Quantity::StateFidelity,
                FIDELITY_TOL,
                &[],
                1.0,
                fidelity(&st.plus[k], &direct),
            );
        }
    }
    let direct0 = subtracted_cv_state(tap, 0, Sign::Plus, policy)?;
    let reduced = SqueezeSpec::from_amplitude((2.0 * tap.y1()).atanh())?;
    out.push(
        format!("reduction_n0_is_smsv[{label}]"),
        InputFamily::subtracted_pair(*spec, *tap, 0, 0),
        Quantity::ReductionIdentity,
        REDUCTION_TOL,
        &[],
        1.0,
        fidelity(&direct0, &smsv_state(&reduced, Sign::Plus, policy)?),
    );

    // completeness of the joint heralding distribution
    let mut reach = 0usize;
    let mut acc = 0.0;
    while reach < policy.max_cutoff {
        acc += m::single_channel_probability(spec, tap, reach)?;
        reach += 1;
        if 1.0 - acc < 1e-14 {
            break;
        }
    }
    let mut total = 0.0;
    for n1 in 0..reach {
        for n2 in 0..reach {
            total += m::success_probability_with_cosh_power(spec, tap, n1, n2, grid.cosh_power)?;
        }
    }
    out.push(
        format!("normalization_sum[{label}]"),
        InputFamily::subtracted_pair(*spec, *tap, 0, 0),
        Quantity::NormalizationSum,
        NORMALIZATION_TOL,
        &[AnalyticOp::SuccessProbability],
        total,
        1.0,
    );

    // SMSV pair
    let smsv_pair = TwoModeFockVector::product(&st.smsv_plus, &st.smsv_minus);
    let smsv_qfi = 4.0 * quasi_spin_moments(&smsv_pair).var_jy;
    out.push(
        format!("qfi_smsv_pair[{label}]"),
        InputFamily::smsv_pair(*spec),
        Quantity::Qfi,
        QFI_TOL,
        &[AnalyticOp::QfiSmsvPair],
        m::qfi_smsv_pair(spec),
        smsv_qfi,
    );

    let mut one_sided_oracle = Vec::new();
    for n1 in 0..=grid.max_n {
        let state = TwoModeFockVector::product(&st.plus[n1], &st.smsv_minus);
        let oracle = 4.0 * quasi_spin_moments(&state).var_jy;
        out.push(
            format!("qfi_one_sided[{label},n1={n1}]"),
            InputFamily::subtracted_plus_smsv(*spec, *tap, n1),
            Quantity::Qfi,
            QFI_TOL,
            &[AnalyticOp::QfiOneSided],
            m::qfi_one_sided(spec, tap, n1)?,
            oracle,
        );
        one_sided_oracle.push(oracle);
    }

    let max_total = (0..=grid.max_n)
        .flat_map(|a| (0..=grid.max_n).map(move |b| (a, b)))
        .map(|(a, b)| total_reach(&st.plus[a], &st.minus[b]))
        .max()
        .unwrap_or(0);
    let mixers = PhaseMixers::new(&grid.phases, grid.derivative_step, max_total);

    #[allow(clippy::needless_range_loop)]
    for n1 in 0..=grid.max_n {
        for n2 in 0..=grid.max_n {
            let family = InputFamily::subtracted_pair(*spec, *tap, n1, n2);
            let tag = format!("{label},n1={n1},n2={n2}");
            let state = TwoModeFockVector::product(&st.plus[n1], &st.minus[n2]);
            let qs = quasi_spin_moments(&state);
            let oracle_qfi = 4.0 * qs.var_jy;
            let qfi = m::qfi_pair(spec, tap, n1, n2)?;

            out.push(
                format!("probability_pair[{tag}]"),
                family,
                Quantity::Probability,
                PROBABILITY_TOL,
                &[AnalyticOp::SuccessProbability],
                m::success_probability(spec, tap, n1, n2)?,
                st.probs[n1] * st.probs[n2],
            );
            out.push(
                format!("qfi_pair[{tag}]"),
                family,
                Quantity::Qfi,
                QFI_TOL,
                &[AnalyticOp::QfiPair],
                qfi,
                oracle_qfi,
            );
            let oracle_qcr = if oracle_qfi > ABS_FLOOR {
                1.0 / oracle_qfi.sqrt()
            } else {
                f64::INFINITY
            };
            out.push(
                format!("qcr_pair[{tag}]"),
                family,
                Quantity::Qfi,
                QFI_TOL,
                &[AnalyticOp::QcrBound],
                m::qcr_bound(qfi)?.value(),
                oracle_qcr,
            );
            if qfi > 0.0 && oracle_qfi > 0.0 && one_sided_oracle[n1] > 0.0 {
                let gain = m::gain_db(
                    m::qcr_bound(qfi)?.value(),
                    m::qcr_bound(m::qfi_one_sided(spec, tap, n1)?)?.value(),
                )?;
                out.push(
                    format!("gain_fold_vs_one_sided[{tag}]"),
                    family,
                    Quantity::Qfi,
                    QFI_TOL,
                    &[AnalyticOp::GainDb],
                    m::ratio_from_gain_db(gain),
                    (one_sided_oracle[n1] / oracle_qfi).sqrt(),
                );
            }
            let jx = m::jx_variance_pair(spec, tap, n1, n2)?;
            out.push(
                format!("jx_var[{tag}]"),
                family,
                Quantity::JxVar,
                QFI_TOL,
                &[AnalyticOp::JxVariancePair],
                jx,
                qs.var_jx,
            );
            if n1 == n2 {
                out.push(
                    format!("qfi_pair_equal[{tag}]"),
                    family,
                    Quantity::Qfi,
                    QFI_TOL,
                    &[AnalyticOp::QfiPairEqual],
                    m::qfi_pair_equal(spec, tap, n1)?,
                    oracle_qfi,
                );
                out.push(
                    format!("reduction_pair_to_equal[{tag}]"),
                    family,
                    Quantity::ReductionIdentity,
                    REDUCTION_TOL,
                    &[AnalyticOp::QfiPair, AnalyticOp::QfiPairEqual],
                    qfi,
                    m::qfi_pair_equal(spec, tap, n1)?,
                );
                out.push(
                    format!("reduction_jx_to_equal[{tag}]"),
                    family,
                    Quantity::ReductionIdentity,
                    REDUCTION_TOL,
                    &[AnalyticOp::JxVariancePair],
                    jx,
                    m::jx_variance_pair_equal(spec, tap, n1)?,
                );
            }
            for (phase, mx) in &mixers.entries {
                detection_checks(
                    out,
                    spec,
                    tap,
                    (n1, n2),
                    *phase,
                    &state,
                    mx,
                    grid.derivative_step,
                    &tag,
                )?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn detection_checks(
    out: &mut Collector,
    spec: &SqueezeSpec,
    tap: &TapSpec,
    (n1, n2): (usize, usize),
    phase: f64,
    state: &TwoModeFockVector,
    mx: &[ModeMixer; 3],
    h: f64,
    tag: &str,
) -> Result<()> {
    let family = InputFamily::subtracted_pair(*spec, *tap, n1, n2);
    let tag = format!("{tag},phi={phase}");
    let report = m::detection_sensitivity(spec, tap, n1, n2, phase)?;
    let center = mx[0].apply(state)?;
    let qs = quasi_spin_moments(&center);
    out.push(
        format!("jz_mean[{tag}]"),
        family,
        Quantity::JzStats,
        QFI_TOL,
        &[AnalyticOp::DetectionSensitivity],
        0.5 * report.mean_d,
        qs.mean_jz,
    );
    out.push(
        format!("jz_var[{tag}]"),
        family,
        Quantity::JzStats,
        QFI_TOL,
        &[AnalyticOp::DetectionSensitivity],
        0.25 * report.std_d * report.std_d,
        qs.var_jz,
    );
    let d_minus = 2.0 * mean_jz(&mx[1].apply(state)?);
    let d_plus = 2.0 * mean_jz(&mx[2].apply(state)?);
    let slope = ((d_plus - d_minus) / (2.0 * h)).abs();
    // central-difference noise is ~1e-16 |D| / h
    let oracle_dphi = if slope < 1e-9 {
        f64::INFINITY
    } else {
        2.0 * qs.var_jz.sqrt() / slope
    };
    out.push(
        format!("detection_dphi[{tag}]"),
        family,
        Quantity::DetectionDphi,
        DPHI_TOL,
        &[AnalyticOp::DetectionSensitivity],
        report.dphi.value(),
        oracle_dphi,
    );
    Ok(())
}

fn extra_detection(out: &mut Collector, grid: &GridConfig, p: &DetectionPoint) -> Result<()> {
    let spec = SqueezeSpec::from_amplitude(p.s)?;
    let tap = tap_from_transmittance(p.t, &spec)?;
    let label = point_label(p.s, p.t);
    let states = match PointStates::build(&spec, &tap, &grid.policy, p.n1.max(p.n2)) {
        Ok(s) => s,
        Err(e @ Error::Cutoff { .. }) => {
            out.fail(
                format!("certification_detection[{label},n1={},n2={}]", p.n1, p.n2),
                InputFamily::subtracted_pair(spec, tap, p.n1, p.n2),
                Quantity::DetectionDphi,
                e.to_string(),
            );
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let state = TwoModeFockVector::product(&states.plus[p.n1], &states.minus[p.n2]);
    let reach = total_reach(&states.plus[p.n1], &states.minus[p.n2]);
    let mixers = PhaseMixers::new(&[p.phase], grid.derivative_step, reach);
    let (phase, mx) = &mixers.entries[0];
    let tag = format!("{label},n1={},n2={},extra", p.n1, p.n2);
    detection_checks(
        out,
        &spec,
        &tap,
        (p.n1, p.n2),
        *phase,
        &state,
        mx,
        grid.derivative_step,
        &tag,
    )
}

/// Worst relative error and failure count per quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantitySummary {
    pub quantity: Quantity,
    pub cases: usize,
    pub failed: usize,
    pub worst_relative_error: f64,
    pub worst_case: String,
}

pub fn summarize(verdicts: &[CheckVerdict]) -> Vec<QuantitySummary> {
    let mut map: BTreeMap<Quantity, QuantitySummary> = BTreeMap::new();
    for v in verdicts {
        let e = map
            .entry(v.case.quantity)
            .or_insert_with(|| QuantitySummary {
                quantity: v.case.quantity,
                cases: 0,
                failed: 0,
                worst_relative_error: 0.0,
                worst_case: String::new(),
            });
        e.cases += 1;
        if !v.passed {
            e.failed += 1;
        }
        let r = if v.relative_error.is_nan() {
            f64::INFINITY
        } else {
            v.relative_error
        };
        if r > e.worst_relative_error || e.worst_case.is_empty() {
            e.worst_relative_error = r;
            e.worst_case = v.case.name.clone();
        }
    }
    map.into_values().collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenEntry {
    pub key: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenFile {
    pub version: u32,
    pub entries: Vec<GoldenEntry>,
}

/// 17 significant digits; non-finite values as `inf`, `-inf` or `nan`.
pub fn format_golden_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_golden_value(key: &str, s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| {
            Error::Golden(format!("entry {key}: value {s:?} is not a decimal number"))
        }),
    }
}

/// Oracle values keyed by case name, sorted by key.
pub fn golden_file(verdicts: &[CheckVerdict]) -> GoldenFile {
    let mut entries: Vec<GoldenEntry> = verdicts
        .iter()
        .map(|v| GoldenEntry {
            key: v.case.name.clone(),
            value: format_golden_value(v.oracle_value),
        })
        .collect();
    entries.sort_by(|a, b| a.key.cmp(&b.key));
    GoldenFile {
        version: GOLDEN_VERSION,
        entries,
    }
}

pub fn golden_to_string(file: &GoldenFile) -> Result<String> {
    let mut s = serde_json::to_string_pretty(file)?;
    s.push('\n');
    Ok(s)
}

pub fn golden_write(path: &Path, verdicts: &[CheckVerdict]) -> Result<()> {
    std::fs::write(path, golden_to_string(&golden_file(verdicts))?)?;
    Ok(())
}

pub fn golden_read(path: &Path) -> Result<GoldenFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Golden(format!("cannot read {}: {e}", path.display())))?;
    let file: GoldenFile = serde_json::from_str(&text)
        .map_err(|e| Error::Golden(format!("schema mismatch in {}: {e}", path.display())))?;
    if file.version != GOLDEN_VERSION {
        return Err(Error::Golden(format!(
            "unsupported version {} (expected {GOLDEN_VERSION})",
            file.version
        )));
    }
    Ok(file)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenSummary {
    pub compared: usize,
    pub max_drift: f64,
    pub worst_key: Option<String>,
    /// Keys whose drift exceeds the tolerance.
    pub drifted: Vec<(String, f64)>,
    /// Keys present in the file but not produced by the run.
    pub missing: Vec<String>,
    /// Keys produced by the run but absent from the file.
    pub unexpected: Vec<String>,
    pub tolerance: f64,
}

impl GoldenSummary {
    pub fn passed(&self) -> bool {
        self.drifted.is_empty() && self.missing.is_empty() && self.unexpected.is_empty()
    }
}

pub fn golden_compare(
    path: &Path,
    verdicts: &[CheckVerdict],
    tolerance: f64,
) -> Result<GoldenSummary> {
    let file = golden_read(path)?;
    compare_golden(&file, verdicts, tolerance)
}

pub fn compare_golden(
    file: &GoldenFile,
    verdicts: &[CheckVerdict],
    tolerance: f64,
) -> Result<GoldenSummary> {
    let mut stored = BTreeMap::new();
    for e in &file.entries {
        if stored
            .insert(e.key.as_str(), parse_golden_value(&e.key, &e.value)?)
            .is_some()
        {
            return Err(Error::Golden(format!("duplicate key {}", e.key)));
        }
    }
    let mut summary = GoldenSummary {
        compared: 0,
        max_drift: 0.0,
        worst_key: None,
        drifted: Vec::new(),
        missing: Vec::new(),
        unexpected: Vec::new(),
        tolerance,
    };
    let mut seen = std::collections::BTreeSet::new();
    for v in verdicts {
        let key = v.case.name.as_str();
        seen.insert(key);
        let Some(&old) = stored.get(key) else {
            summary.unexpected.push(key.to_string());
            continue;
        };
        summary.compared += 1;
        let drift = if old.is_nan() && v.oracle_value.is_nan() {
            0.0
        } else {
            relative_error(v.oracle_value, old)
        };
        if drift > summary.max_drift || summary.worst_key.is_none() {
            summary.max_drift = summary.max_drift.max(drift);
            summary.worst_key = Some(key.to_string());
        }
        if drift > tolerance {
            summary.drifted.push((key.to_string(), drift));
        }
    }
    summary.missing = stored
        .keys()
        .filter(|k| !seen.contains(*k))
        .map(|k| k.to_string())
        .collect();
    Ok(summary)
}
