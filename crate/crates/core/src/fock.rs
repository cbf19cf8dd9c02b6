//! Truncated Fock-basis states: single-mode and two-mode squeezed vacua and
//! the definite-parity states left behind after photon subtraction.
//!
//! All ladder amplitudes are accumulated as log-magnitudes and exponentiated
//! only after the normalization has been subtracted. Truncation is adaptive:
//! every constructor certifies that the probability mass it dropped stays
//! below the requested tolerance, estimated from a geometric majorant of the
//! ratio between neighbouring same-parity probabilities.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{log_factorial, z_derivatives, SqueezeSpec, TapSpec};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_CUTOFF: usize = 4096;

/// Amplitudes below this magnitude count as absent when deciding parity.
pub const PARITY_EPS: f64 = 1e-14;

/// Sign of the squeeze parameter; `Minus` multiplies the `k`-th rung of a
/// definite-parity ladder by `(-1)^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffPolicy {
    pub tolerance: f64,
    pub max_cutoff: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TAIL_TOL,
            max_cutoff: DEFAULT_MAX_CUTOFF,
        }
    }
}

impl CutoffPolicy {
    pub fn new(tolerance: f64, max_cutoff: usize) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(domain("cutoff_tol", tolerance, "0 < tol < 1"));
        }
        Ok(Self {
            tolerance,
            max_cutoff,
        })
    }

    pub fn tolerance(tolerance: f64) -> Result<Self> {
        Self::new(tolerance, DEFAULT_MAX_CUTOFF)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    pub fn of_count(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        }
    }
}

/// Single-mode state on the photon-number basis `0..=cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
    tail_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct FockDump {
    cutoff: usize,
    amplitudes: Vec<[f64; 2]>,
    tail_bound: f64,
}

impl FockVector {
    /// Wraps raw amplitudes as given (no normalization, zero tail bound).
    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        assert!(
            !amps.is_empty(),
            "a Fock vector needs at least the vacuum amplitude"
        );
        Self {
            amps,
            tail_bound: 0.0,
        }
    }

    pub fn number_state(n: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); n + 1];
        amps[n] = C64::new(1.0, 0.0);
        Self::from_amplitudes(amps)
    }

    pub fn vacuum() -> Self {
        Self::number_state(0)
    }

    pub(crate) fn with_tail_bound(mut self, tail_bound: f64) -> Self {
        self.tail_bound = tail_bound;
        self
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// Amplitude on `|n>`, zero beyond the cutoff.
    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or_default()
    }

    /// Probability mass dropped by the truncation (upper estimate).
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn is_certified(&self, tolerance: f64) -> bool {
        self.tail_bound <= tolerance
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let norm = self.norm_sqr().sqrt();
        for a in &mut self.amps {
            *a /= norm;
        }
        self
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Re-estimates the dropped mass from the last two nonzero same-parity
    /// probabilities, assuming their ratio keeps decreasing geometrically.
    pub fn estimate_tail(&self) -> f64 {
        let probs = self.probabilities();
        let total: f64 = probs.iter().sum();
        let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
            return 0.0;
        };
        if last < 2 || probs[last - 2] == 0.0 {
            return 0.0;
        }
        let ratio = probs[last] / probs[last - 2];
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        probs[last] * ratio / (1.0 - ratio) / total
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = FockDump {
            cutoff: self.cutoff(),
            amplitudes: self.amps.iter().map(|a| [a.re, a.im]).collect(),
            tail_bound: self.tail_bound,
        };
        Ok(serde_json::to_string(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: FockDump = serde_json::from_str(text)?;
        if dump.amplitudes.len() != dump.cutoff + 1 {
            return Err(Error::Config(format!(
                "cutoff {} does not match {} amplitudes",
                dump.cutoff,
                dump.amplitudes.len()
            )));
        }
        Ok(Self {
            amps: dump
                .amplitudes
                .iter()
                .map(|&[re, im]| C64::new(re, im))
                .collect(),
            tail_bound: dump.tail_bound,
        })
    }
}

/// Two-mode state stored row-major, indexed `(n1, n2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeFockVector {
    amps: Vec<C64>,
    dim1: usize,
    dim2: usize,
    tail_bound: f64,
}

impl TwoModeFockVector {
    pub fn zeros(dim1: usize, dim2: usize) -> Self {
        assert!(dim1 > 0 && dim2 > 0);
        Self {
            amps: vec![C64::new(0.0, 0.0); dim1 * dim2],
            dim1,
            dim2,
            tail_bound: 0.0,
        }
    }

    pub fn basis(n1: usize, n2: usize) -> Self {
        let mut out = Self::zeros(n1 + 1, n2 + 1);
        out.set(n1, n2, C64::new(1.0, 0.0));
        out
    }

    pub fn product(a: &FockVector, b: &FockVector) -> Self {
        let mut out = Self::zeros(a.amps.len(), b.amps.len());
        for (i, &ai) in a.amps.iter().enumerate() {
            if ai == C64::default() {
                continue;
            }
            let row = &mut out.amps[i * out.dim2..(i + 1) * out.dim2];
            for (slot, &bj) in row.iter_mut().zip(&b.amps) {
                *slot = ai * bj;
            }
        }
        out.tail_bound = a.tail_bound + b.tail_bound;
        out
    }

    pub(crate) fn with_tail_bound(mut self, tail_bound: f64) -> Self {
        self.tail_bound = tail_bound;
        self
    }

    /// `(dim1, dim2)`: one more than the per-mode cutoffs.
    pub fn dims(&self) -> (usize, usize) {
        (self.dim1, self.dim2)
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn get(&self, n1: usize, n2: usize) -> C64 {
        if n1 < self.dim1 && n2 < self.dim2 {
            self.amps[n1 * self.dim2 + n2]
        } else {
            C64::default()
        }
    }

    pub fn set(&mut self, n1: usize, n2: usize, value: C64) {
        self.amps[n1 * self.dim2 + n2] = value;
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Iterates over `(n1, n2, amplitude)` for every stored entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let d2 = self.dim2;
        self.amps
            .iter()
            .enumerate()
            .map(move |(k, &a)| (k / d2, k % d2, a))
    }

    /// Photon-number distribution of one mode (`mode` is 1 or 2).
    pub fn marginal(&self, mode: usize) -> Vec<f64> {
        let mut out = vec![0.0; if mode == 1 { self.dim1 } else { self.dim2 }];
        for (i, j, a) in self.entries() {
            out[if mode == 1 { i } else { j }] += a.norm_sqr();
        }
        out
    }

    /// Distribution of the total photon number `n1 + n2`.
    pub fn total_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim1 + self.dim2 - 1];
        for (i, j, a) in self.entries() {
            out[i + j] += a.norm_sqr();
        }
        out
    }

    pub fn inner(&self, other: &Self) -> C64 {
        let d1 = self.dim1.min(other.dim1);
        let d2 = self.dim2.min(other.dim2);
        let mut acc = C64::default();
        for i in 0..d1 {
            for j in 0..d2 {
                acc += self.get(i, j).conj() * other.get(i, j);
            }
        }
        acc
    }

    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Log-magnitude of the unnormalized rung on `|n>` of the state left after
/// subtracting `subtracted` photons: `y1^(n/2) (2j)!/j! / sqrt(n!)` with
/// `2j = n + subtracted`.
fn ladder_log_amplitude(ln_y1: f64, n: usize, subtracted: usize) -> f64 {
    let two_j = (n + subtracted) as u64;
    0.5 * n as f64 * ln_y1 + log_factorial(two_j)
        - log_factorial(two_j / 2)
        - 0.5 * log_factorial(n as u64)
}

fn ladder_state(
    y1: f64,
    subtracted: usize,
    sign: Sign,
    policy: &CutoffPolicy,
) -> Result<FockVector> {
    let low = subtracted % 2;
    if y1 == 0.0 {
        return Ok(FockVector::number_state(low));
    }
    let z = z_derivatives(y1, subtracted + 1)?;
    let mean = y1 * z.ratio(subtracted + 1, subtracted);
    let four_y2 = 4.0 * y1 * y1;
    let ln_y1 = y1.ln();
    let mut cutoff = (4.0 * mean) as usize + 30;
    let mut tail = f64::INFINITY;
    while cutoff <= policy.max_cutoff {
        let logs: Vec<(usize, f64)> = (low..=cutoff)
            .step_by(2)
            .map(|n| (n, ladder_log_amplitude(ln_y1, n, subtracted)))
            .collect();
        let peak = logs
            .iter()
            .map(|&(_, l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = logs.iter().map(|&(_, l)| (2.0 * (l - peak)).exp()).sum();
        let &(n_last, l_last) = logs.last().unwrap();
        // p(n+2)/p(n) = 4y1² (n+N+1)² / ((n+1)(n+2)) is monotone in n with limit 4y1²
        let nf = n_last as f64;
        let local = four_y2 * (nf + subtracted as f64 + 1.0).powi(2) / ((nf + 1.0) * (nf + 2.0));
        let ratio = local.max(four_y2);
        tail = if ratio < 1.0 {
            (2.0 * (l_last - peak)).exp() / norm * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if tail <= policy.tolerance {
            let scale = 0.5 * norm.ln() + peak;
            let mut amps = vec![C64::default(); cutoff + 1];
            for (k, &(n, l)) in logs.iter().enumerate() {
                let parity_sign = if sign == Sign::Minus && k % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                amps[n] = C64::new(parity_sign * (l - scale).exp(), 0.0);
            }
            return Ok(FockVector::from_amplitudes(amps).with_tail_bound(tail));
        }
        if cutoff == policy.max_cutoff {
            break;
        }
        cutoff = (2 * cutoff).min(policy.max_cutoff);
    }
    Err(Error::Cutoff {
        tail,
        tolerance: policy.tolerance,
        max_cutoff: policy.max_cutoff,
    })
}

/// Single-mode squeezed vacuum with squeeze parameter `±y`.
pub fn smsv_state(spec: &SqueezeSpec, sign: Sign, policy: &CutoffPolicy) -> Result<FockVector> {
    ladder_state(spec.y(), 0, sign, policy)
}

/// Definite-parity state heralded by `n_subtracted` reflected photons,
/// with parameter `±y1`.
pub fn subtracted_cv_state(
    tap: &TapSpec,
    n_subtracted: usize,
    sign: Sign,
    policy: &CutoffPolicy,
) -> Result<FockVector> {
    ladder_state(tap.y1(), n_subtracted, sign, policy)
}

/// Two-mode squeezed vacuum `Σ tanh(s)^n / cosh(s) |n, n>`.
pub fn tmsv_state(spec: &SqueezeSpec, policy: &CutoffPolicy) -> Result<TwoModeFockVector> {
    let s = spec.amplitude();
    if s == 0.0 {
        return Ok(TwoModeFockVector::basis(0, 0));
    }
    let lambda = s.tanh().powi(2);
    // dropped mass beyond |K, K> is lambda^(K+1)
    let needed = (policy.tolerance.ln() / lambda.ln()).ceil().max(1.0) as usize - 1;
    if needed > policy.max_cutoff {
        return Err(Error::Cutoff {
            tail: lambda.powi(policy.max_cutoff as i32 + 1),
            tolerance: policy.tolerance,
            max_cutoff: policy.max_cutoff,
        });
    }
    let cutoff = needed;
    let tail = lambda.powi(cutoff as i32 + 1);
    let scale = 1.0 / (s.cosh() * (1.0 - tail).sqrt());
    let mut out = TwoModeFockVector::zeros(cutoff + 1, cutoff + 1);
    let th = s.tanh();
    let mut amp = scale;
    for n in 0..=cutoff {
        out.set(n, n, C64::new(amp, 0.0));
        amp *= th;
    }
    Ok(out.with_tail_bound(tail))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateMoments {
    pub mean_n: f64,
    pub mean_n_squared: f64,
    pub var_n: f64,
    /// `<a²>`
    pub a_squared: C64,
    /// `<a†²>`
    pub a_dag_a_dag: C64,
}

pub fn moments(state: &FockVector) -> StateMoments {
    let amps = state.amplitudes();
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for (n, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        let nf = n as f64;
        mean += nf * p;
        mean_sq += nf * nf * p;
    }
    let mut a2 = C64::default();
    for n in 0..amps.len().saturating_sub(2) {
        let nf = n as f64;
        a2 += ((nf + 1.0) * (nf + 2.0)).sqrt() * amps[n].conj() * amps[n + 2];
    }
    StateMoments {
        mean_n: mean,
        mean_n_squared: mean_sq,
        var_n: (mean_sq - mean * mean).max(0.0),
        a_squared: a2,
        a_dag_a_dag: a2.conj(),
    }
}

pub fn parity_of(state: &FockVector) -> Parity {
    let occupied = |odd: bool| {
        state
            .amplitudes()
            .iter()
            .enumerate()
            .any(|(n, a)| (n % 2 == 1) == odd && a.norm() >= PARITY_EPS)
    };
    match (occupied(false), occupied(true)) {
        (_, false) => Parity::Even,
        (false, true) => Parity::Odd,
        (true, true) => Parity::None,
    }
}

/// `|<a|b>|²`, treating amplitudes beyond either cutoff as zero.
pub fn fidelity(a: &FockVector, b: &FockVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum::<C64>()
        .norm_sqr()
}
