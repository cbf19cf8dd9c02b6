//! Closed-form phase-estimation figures for Mach-Zehnder inputs built from
//! heralded subtracted squeezed states.
//!
//! Every `y1` below is the reduced parameter `y·t²` of the heralded state.
//! At `s = 0` nothing is squeezed: heralding `n > 0` photons has probability
//! zero, and all families are treated as the vacuum input.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::scalar::{log_factorial, z_derivatives, SqueezeSpec, TapSpec};

/// Denominators below this mark an error-propagation estimate as divergent.
pub const DIVERGENCE_EPS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    SubtractedPair,
    SubtractedPlusSmsv,
    SmsvPair,
}

impl InputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InputKind::SubtractedPair => "subtracted_pair",
            InputKind::SubtractedPlusSmsv => "subtracted_plus_smsv",
            InputKind::SmsvPair => "smsv_pair",
        }
    }
}

/// One of the three two-mode interferometer inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputFamily {
    pub kind: InputKind,
    pub spec: SqueezeSpec,
    pub tap: Option<TapSpec>,
    pub n1: usize,
    pub n2: usize,
}

impl InputFamily {
    pub fn subtracted_pair(spec: SqueezeSpec, tap: TapSpec, n1: usize, n2: usize) -> Self {
        Self {
            kind: InputKind::SubtractedPair,
            spec,
            tap: Some(tap),
            n1,
            n2,
        }
    }

    pub fn subtracted_plus_smsv(spec: SqueezeSpec, tap: TapSpec, n1: usize) -> Self {
        Self {
            kind: InputKind::SubtractedPlusSmsv,
            spec,
            tap: Some(tap),
            n1,
            n2: 0,
        }
    }

    pub fn smsv_pair(spec: SqueezeSpec) -> Self {
        Self {
            kind: InputKind::SmsvPair,
            spec,
            tap: None,
            n1: 0,
            n2: 0,
        }
    }

    fn tap(&self) -> Result<&TapSpec> {
        self.tap.as_ref().ok_or_else(|| {
            crate::Error::Config(format!("{} input needs a tap", self.kind.as_str()))
        })
    }

    /// Short identifier such as `subtracted_pair(n1=2,n2=2)`.
    pub fn label(&self) -> String {
        match self.kind {
            InputKind::SubtractedPair => format!("subtracted_pair(n1={},n2={})", self.n1, self.n2),
            InputKind::SubtractedPlusSmsv => format!("subtracted_plus_smsv(n1={})", self.n1),
            InputKind::SmsvPair => "smsv_pair".to_string(),
        }
    }
}

/// Photon statistics of one heralded channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelStats {
    pub subtracted: usize,
    pub mean: f64,
    pub variance: f64,
}

fn is_vacuum(spec: &SqueezeSpec) -> bool {
    spec.amplitude() == 0.0
}

/// `<n> = y1 Z^(n+1)(y1) / Z^(n)(y1)` and `(Δn)² = y1² Z^(n+2)/Z^(n) + <n> − <n>²`.
pub fn channel_stats(tap: &TapSpec, n: usize) -> Result<ChannelStats> {
    let y1 = tap.y1();
    if y1 == 0.0 {
        return Ok(ChannelStats {
            subtracted: n,
            mean: 0.0,
            variance: 0.0,
        });
    }
    let z = z_derivatives(y1, n + 2)?;
    let mean = y1 * z.ratio(n + 1, n);
    let variance = y1 * y1 * z.ratio(n + 2, n) + mean - mean * mean;
    Ok(ChannelStats {
        subtracted: n,
        mean,
        variance: variance.max(0.0),
    })
}

pub fn mean_photons(tap: &TapSpec, n: usize) -> Result<f64> {
    Ok(channel_stats(tap, n)?.mean)
}

pub fn photon_variance(tap: &TapSpec, n: usize) -> Result<f64> {
    Ok(channel_stats(tap, n)?.variance)
}

/// `sinh² s` and `2 sinh² s cosh² s`.
pub fn smsv_stats(spec: &SqueezeSpec) -> ChannelStats {
    let m = spec.mean_photons();
    ChannelStats {
        subtracted: 0,
        mean: m,
        variance: 2.0 * m * (m + 1.0),
    }
}

/// Probability of heralding `n` photons in one tap:
/// `(y r²)^n / n! · Z^(n)(y1) / cosh^power(s)`.
fn single_channel_with_power(
    spec: &SqueezeSpec,
    tap: &TapSpec,
    n: usize,
    cosh_power: i32,
) -> Result<f64> {
    let s = spec.amplitude();
    let reflected = tap.reflected_y();
    if n == 0 && (reflected == 0.0 || s == 0.0) {
        // nothing reaches the detector: Z(y1) = Z(y) = cosh s when r = 0
        let z0 = crate::scalar::z_function(tap.y1());
        return Ok(z0 / s.cosh().powi(cosh_power));
    }
    if reflected == 0.0 {
        return Ok(0.0);
    }
    let z = z_derivatives(tap.y1(), n)?;
    let ln = n as f64 * reflected.ln() - log_factorial(n as u64) + z.ln_value(n)
        - cosh_power as f64 * s.cosh().ln();
    Ok(ln.exp())
}

pub fn single_channel_probability(spec: &SqueezeSpec, tap: &TapSpec, n: usize) -> Result<f64> {
    single_channel_with_power(spec, tap, n, 1)
}

/// Joint heralding probability of the two independent taps.
pub fn success_probability(spec: &SqueezeSpec, tap: &TapSpec, n1: usize, n2: usize) -> Result<f64> {
    success_probability_with_cosh_power(spec, tap, n1, n2, 2)
}

/// [`success_probability`] with the overall `cosh(s)` power exposed; only
/// the power 2 is normalized.
pub fn success_probability_with_cosh_power(
    spec: &SqueezeSpec,
    tap: &TapSpec,
    n1: usize,
    n2: usize,
    cosh_power: i32,
) -> Result<f64> {
    let p1 = single_channel_with_power(spec, tap, n1, 0)?;
    let p2 = single_channel_with_power(spec, tap, n2, 0)?;
    Ok(p1 * p2 / spec.amplitude().cosh().powi(cosh_power))
}

/// `F_{n1,n2}` for two heralded states with opposite squeezing signs.
pub fn qfi_pair(spec: &SqueezeSpec, tap: &TapSpec, n1: usize, n2: usize) -> Result<f64> {
    if is_vacuum(spec) {
        return Ok(0.0);
    }
    let m1 = mean_photons(tap, n1)?;
    let m2 = mean_photons(tap, n2)?;
    let y12 = tap.y1() * tap.y1();
    let (k1, k2) = ((n1 + 1) as f64, (n2 + 1) as f64);
    Ok(2.0 * (1.0 + 4.0 * y12) * m1 * m2
        + (1.0 + 8.0 * y12 * k2) * m1
        + (1.0 + 8.0 * y12 * k1) * m2
        + 8.0 * y12 * k1 * k2)
}

pub fn qfi_pair_equal(spec: &SqueezeSpec, tap: &TapSpec, n: usize) -> Result<f64> {
    if is_vacuum(spec) {
        return Ok(0.0);
    }
    let m = mean_photons(tap, n)?;
    let y12 = tap.y1() * tap.y1();
    let k = (n + 1) as f64;
    Ok(2.0 * ((1.0 + 4.0 * y12) * m * m + (1.0 + 8.0 * y12 * k) * m + 4.0 * y12 * k * k))
}

pub fn qfi_smsv_pair(spec: &SqueezeSpec) -> f64 {
    let m = spec.mean_photons();
    4.0 * (m * m + m)
}

/// Heralded state in mode 1, unsubtracted opposite-sign squeezed vacuum in mode 2.
pub fn qfi_one_sided(spec: &SqueezeSpec, tap: &TapSpec, n1: usize) -> Result<f64> {
    if is_vacuum(spec) {
        return Ok(0.0);
    }
    let m1 = mean_photons(tap, n1)?;
    let ms = spec.mean_photons();
    let c = 2.0 * tap.y1() / spec.amplitude().tanh();
    let k1 = (n1 + 1) as f64;
    Ok(2.0 * (1.0 + c) * m1 * ms + m1 + (1.0 + 2.0 * c * k1) * ms)
}

/// A phase uncertainty, possibly infinite by symmetry or absent signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Uncertainty {
    Finite(f64),
    Divergent { numerator: f64, denominator: f64 },
}

impl Uncertainty {
    /// The uncertainty, `+∞` when divergent.
    pub fn value(&self) -> f64 {
        match *self {
            Uncertainty::Finite(v) => v,
            Uncertainty::Divergent { .. } => f64::INFINITY,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Uncertainty::Divergent { .. })
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Uncertainty::Finite(v) => Some(v),
            Uncertainty::Divergent { .. } => None,
        }
    }
}

pub fn qcr_bound(qfi: f64) -> Result<Uncertainty> {
    if qfi.is_nan() || qfi < 0.0 || !qfi.is_finite() {
        return Err(domain("qfi", qfi, "finite and >= 0"));
    }
    if qfi == 0.0 {
        return Ok(Uncertainty::Divergent {
            numerator: 1.0,
            denominator: 0.0,
        });
    }
    Ok(Uncertainty::Finite(1.0 / qfi.sqrt()))
}

/// `−10 log10(dphi_a / dphi_b)`; positive when `a` is the smaller uncertainty.
pub fn gain_db(dphi_a: f64, dphi_b: f64) -> Result<f64> {
    for (name, v) in [("dphi_a", dphi_a), ("dphi_b", dphi_b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain(name, v, "positive and finite"));
        }
    }
    Ok(-10.0 * (dphi_a / dphi_b).log10())
}

/// Uncertainty ratio for a gain in dB: `10^(−g/10)`.
pub fn ratio_from_gain_db(gain: f64) -> f64 {
    10f64.powf(-gain / 10.0)
}

pub fn jx_variance_pair(spec: &SqueezeSpec, tap: &TapSpec, n1: usize, n2: usize) -> Result<f64> {
    if is_vacuum(spec) {
        return Ok(0.0);
    }
    let m1 = mean_photons(tap, n1)?;
    let m2 = mean_photons(tap, n2)?;
    let y12 = tap.y1() * tap.y1();
    let (k1, k2) = ((n1 + 1) as f64, (n2 + 1) as f64);
    let v = 0.25
        * (2.0 * (1.0 - 4.0 * y12) * m1 * m2
            + (1.0 - 8.0 * y12 * k2) * m1
            + (1.0 - 8.0 * y12 * k1) * m2
            - 8.0 * y12 * k1 * k2);
    Ok(clamp_cancellation(v, m1 + m2 + 2.0 * m1 * m2))
}

pub fn jx_variance_pair_equal(spec: &SqueezeSpec, tap: &TapSpec, n: usize) -> Result<f64> {
    if is_vacuum(spec) {
        return Ok(0.0);
    }
    let m = mean_photons(tap, n)?;
    let y12 = tap.y1() * tap.y1();
    let k = (n + 1) as f64;
    let v = 0.5 * ((1.0 - 4.0 * y12) * m * m + (1.0 - 8.0 * y12 * k) * m - 4.0 * y12 * k * k);
    Ok(clamp_cancellation(v, 2.0 * m + 2.0 * m * m))
}

/// Negative values from cancellation are reported at warn level and set to zero.
fn clamp_cancellation(v: f64, scale: f64) -> f64 {
    if v < 0.0 {
        if v < -1e-12 * scale.max(1.0) {
            log::warn!("J_x variance {v:e} is negative beyond rounding; clamped to 0");
        }
        0.0
    } else {
        v
    }
}

/// Intensity-difference readout `D = n1 − n2` at the interferometer output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionReport {
    pub phase: f64,
    pub mean_d: f64,
    pub std_d: f64,
    pub dphi: Uncertainty,
}

pub fn detection_sensitivity(
    spec: &SqueezeSpec,
    tap: &TapSpec,
    n1: usize,
    n2: usize,
    phase: f64,
) -> Result<DetectionReport> {
    let (c1, c2) = if is_vacuum(spec) {
        let zero = ChannelStats {
            subtracted: 0,
            mean: 0.0,
            variance: 0.0,
        };
        (zero, zero)
    } else {
        (channel_stats(tap, n1)?, channel_stats(tap, n2)?)
    };
    let var_jx = jx_variance_pair(spec, tap, n1, n2)?;
    let (sin, cos) = phase.sin_cos();
    let diff = c1.mean - c2.mean;
    let var_d = cos * cos * (c1.variance + c2.variance) + 4.0 * sin * sin * var_jx;
    let std_d = var_d.max(0.0).sqrt();
    let slope = (sin * diff).abs();
    let dphi = if slope < DIVERGENCE_EPS {
        Uncertainty::Divergent {
            numerator: std_d,
            denominator: slope,
        }
    } else {
        Uncertainty::Finite(std_d / slope)
    };
    Ok(DetectionReport {
        phase,
        mean_d: cos * diff,
        std_d,
        dphi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetrologyReport {
    pub qfi: f64,
    pub qcr: Uncertainty,
    pub mean_n1: f64,
    pub mean_n2: f64,
    pub success_probability: f64,
    pub hl_ref: f64,
    pub sql_ref: f64,
}

pub fn report(family: &InputFamily) -> Result<MetrologyReport> {
    let spec = &family.spec;
    let (qfi, mean_n1, mean_n2, success) = match family.kind {
        InputKind::SmsvPair => {
            let m = spec.mean_photons();
            (qfi_smsv_pair(spec), m, m, 1.0)
        }
        InputKind::SubtractedPair => {
            let tap = family.tap()?;
            let (m1, m2) = if is_vacuum(spec) {
                (0.0, 0.0)
            } else {
                (mean_photons(tap, family.n1)?, mean_photons(tap, family.n2)?)
            };
            (
                qfi_pair(spec, tap, family.n1, family.n2)?,
                m1,
                m2,
                success_probability(spec, tap, family.n1, family.n2)?,
            )
        }
        InputKind::SubtractedPlusSmsv => {
            let tap = family.tap()?;
            let m1 = if is_vacuum(spec) {
                0.0
            } else {
                mean_photons(tap, family.n1)?
            };
            (
                qfi_one_sided(spec, tap, family.n1)?,
                m1,
                spec.mean_photons(),
                single_channel_probability(spec, tap, family.n1)?,
            )
        }
    };
    let total = mean_n1 + mean_n2;
    Ok(MetrologyReport {
        qfi,
        qcr: qcr_bound(qfi)?,
        mean_n1,
        mean_n2,
        success_probability: success,
        hl_ref: 1.0 / total,
        sql_ref: 1.0 / total.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{squeeze_from_db, tap_from_transmittance};
    use std::f64::consts::FRAC_PI_2;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn setup(db: f64, t: f64) -> (SqueezeSpec, TapSpec) {
        let spec = squeeze_from_db(db).unwrap();
        let tap = tap_from_transmittance(t, &spec).unwrap();
        (spec, tap)
    }

    #[test]
    fn single_channel_probabilities() {
        let (spec, tap) = setup(5.0, 0.9);
        let expected = [
            0.941_924_255_973_147_3,
            0.047_538_939_975_651_11,
            0.009_174_491_863_668_825,
            0.001_146_925_883_614_904_6,
            0.000_182_759_592_278_215_6,
        ];
        for (n, e) in expected.iter().enumerate() {
            assert!(
                rel(single_channel_probability(&spec, &tap, n).unwrap(), *e) < 1e-12,
                "n={n}"
            );
        }
        assert!(
            rel(
                success_probability(&spec, &tap, 0, 0).unwrap(),
                0.887_221_303_990_567_1
            ) < 1e-12
        );
    }

    #[test]
    fn probability_edges() {
        let (spec, tap) = setup(5.0, 1.0);
        assert!((success_probability(&spec, &tap, 0, 0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(success_probability(&spec, &tap, 1, 0).unwrap(), 0.0);
        let (spec, tap) = setup(0.0, 0.9);
        assert_eq!(success_probability(&spec, &tap, 0, 0).unwrap(), 1.0);
        assert_eq!(success_probability(&spec, &tap, 0, 3).unwrap(), 0.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (spec, tap) = setup(10.0, 0.8);
        let total: f64 = (0..400)
            .map(|n| single_channel_probability(&spec, &tap, n).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        let wrong: f64 = (0..400)
            .map(|n| single_channel_with_power(&spec, &tap, n, 0).unwrap())
            .sum();
        assert!(rel(wrong, spec.amplitude().cosh()) < 1e-12);
    }

    #[test]
    fn smsv_pair_values() {
        let spec = squeeze_from_db(5.0).unwrap();
        assert!(rel(qfi_smsv_pair(&spec), 2.025) < 1e-14);
        let q = qcr_bound(qfi_smsv_pair(&spec)).unwrap().value();
        assert!(rel(q, 0.702_728_368_926_306_5) < 1e-14);
        assert!(q < 0.5 / spec.mean_photons());
        assert_eq!(
            qfi_smsv_pair(&SqueezeSpec::from_amplitude(0.0).unwrap()),
            0.0
        );
    }

    #[test]
    fn frozen_pair_values() {
        let (spec, tap) = setup(5.0, 0.9);
        assert!(rel(qfi_pair(&spec, &tap, 2, 2).unwrap(), 15.799_881_600_184_033) < 1e-12);
        assert!(rel(qfi_pair(&spec, &tap, 4, 1).unwrap(), 25.981_375_538_750_71) < 1e-12);
        assert!(
            rel(
                qfi_one_sided(&spec, &tap, 4).unwrap(),
                10.853_239_282_694_44
            ) < 1e-12
        );
        assert!(
            rel(
                jx_variance_pair(&spec, &tap, 4, 1).unwrap(),
                1.200_188_874_219_405_7
            ) < 1e-12
        );
        assert!(
            rel(
                jx_variance_pair(&spec, &tap, 2, 2).unwrap(),
                0.205_174_426_336_209_63
            ) < 1e-11
        );
    }

    #[test]
    fn reductions() {
        for db in [0.5, 5.0, 12.0] {
            for t in [0.8, 0.9, 1.0] {
                let (spec, tap) = setup(db, t);
                for n in 0..6 {
                    let a = qfi_pair(&spec, &tap, n, n).unwrap();
                    assert!(rel(qfi_pair_equal(&spec, &tap, n).unwrap(), a) < 1e-12);
                    let v = jx_variance_pair(&spec, &tap, n, n).unwrap();
                    let w = jx_variance_pair_equal(&spec, &tap, n).unwrap();
                    assert!((v - w).abs() <= 1e-12 * v.max(1e-2));
                }
                assert!(
                    rel(
                        qfi_pair(&spec, &tap, 1, 3).unwrap(),
                        qfi_pair(&spec, &tap, 3, 1).unwrap()
                    ) < 1e-14
                );
            }
            let (spec, tap) = setup(db, 1.0);
            let smsv = qfi_smsv_pair(&spec);
            assert!(rel(qfi_pair_equal(&spec, &tap, 0).unwrap(), smsv) < 1e-12);
            assert!(rel(qfi_one_sided(&spec, &tap, 0).unwrap(), smsv) < 1e-12);
        }
    }

    #[test]
    fn zero_squeezing() {
        let (spec, tap) = setup(0.0, 0.9);
        assert_eq!(qfi_pair(&spec, &tap, 2, 3).unwrap(), 0.0);
        assert_eq!(qfi_one_sided(&spec, &tap, 2).unwrap(), 0.0);
        assert_eq!(jx_variance_pair(&spec, &tap, 2, 3).unwrap(), 0.0);
        assert!(qcr_bound(0.0).unwrap().is_divergent());
        let r = report(&InputFamily::subtracted_pair(spec, tap, 1, 0)).unwrap();
        assert!(r.qcr.is_divergent());
        assert_eq!(r.hl_ref, f64::INFINITY);
    }

    #[test]
    fn small_squeezing_limit() {
        // <n> ≈ 4 y1² at n = 0, so F ≈ 2(<n> + 4 y1²) ≈ 16 y1²
        let spec = SqueezeSpec::from_amplitude(1e-4).unwrap();
        let tap = tap_from_transmittance(0.9, &spec).unwrap();
        let y1 = tap.y1();
        let f = qfi_pair_equal(&spec, &tap, 0).unwrap();
        assert!(rel(f, 16.0 * y1 * y1) < 1e-6);
        for n in [2, 4] {
            assert!(qfi_pair_equal(&spec, &tap, n).unwrap() < 1e-6);
        }
    }

    #[test]
    fn qcr_and_gain() {
        assert_eq!(qcr_bound(4.0).unwrap(), Uncertainty::Finite(0.5));
        assert!(qcr_bound(-1.0).is_err());
        assert_eq!(gain_db(0.3, 0.3).unwrap(), 0.0);
        assert!((gain_db(0.5, 1.0).unwrap() - 3.010_299_956_639_812).abs() < 1e-12);
        assert!(gain_db(0.0, 1.0).is_err());
        assert!(gain_db(1.0, f64::INFINITY).is_err());
        assert!(rel(1.0 / ratio_from_gain_db(15.0), 31.62) < 0.5e-2);
    }

    #[test]
    fn detection_cases() {
        let (spec, tap) = setup(5.0, 0.9);
        let d = detection_sensitivity(&spec, &tap, 10, 0, FRAC_PI_2).unwrap();
        assert!(rel(d.dphi.value(), 0.237_913_025_296_000_84) < 1e-10);
        assert!(d.mean_d.abs() < 1e-14);
        for phase in [0.0, std::f64::consts::PI] {
            assert!(detection_sensitivity(&spec, &tap, 4, 1, phase)
                .unwrap()
                .dphi
                .is_divergent());
        }
        for phase in [0.3, 1.0, 2.0] {
            let d = detection_sensitivity(&spec, &tap, 3, 3, phase).unwrap();
            assert!(d.dphi.is_divergent());
            assert!(d.std_d > 0.0);
        }
    }

    #[test]
    fn detection_optimum_at_quarter_turn() {
        let (spec, tap) = setup(5.0, 0.9);
        let at = |p: f64| {
            detection_sensitivity(&spec, &tap, 8, 3, p)
                .unwrap()
                .dphi
                .value()
        };
        let best = at(FRAC_PI_2);
        for k in 1..60 {
            let p = k as f64 * std::f64::consts::PI / 60.0;
            assert!(at(p) >= best * (1.0 - 1e-14));
        }
    }

    #[test]
    fn reports() {
        let (spec, tap) = setup(5.0, 0.9);
        let r = report(&InputFamily::subtracted_pair(spec, tap, 2, 2)).unwrap();
        assert!((r.qcr.value() * r.qfi.sqrt() - 1.0).abs() < 1e-12);
        assert!(r.hl_ref <= r.sql_ref);
        let r = report(&InputFamily::smsv_pair(spec)).unwrap();
        assert_eq!(r.success_probability, 1.0);
        let r = report(&InputFamily::subtracted_plus_smsv(spec, tap, 1)).unwrap();
        assert!(rel(r.success_probability, 0.047_538_939_975_651_11) < 1e-12);
    }
}
