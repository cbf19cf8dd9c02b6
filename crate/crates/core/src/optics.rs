//! Exact linear optics on truncated two-mode Fock states.
//!
//! A passive two-mode unitary conserves the total photon number `N`, so it
//! acts block-diagonally; each `(N+1) × (N+1)` block is generated from the
//! previous one by applying one transformed creation operator. A
//! [`ModeMixer`] caches those blocks so that one transformation can be
//! applied to many states.

use std::ops::{Add, Mul};

use num_complex::Complex64 as C64;

use crate::error::{domain, Error, Result};
use crate::fock::{smsv_state, CutoffPolicy, FockVector, Sign, TwoModeFockVector};
use crate::scalar::{SqueezeSpec, TapSpec};

/// Variances below zero by more than this are reported as a warning.
pub const VARIANCE_NEGATIVE_TOL: f64 = 1e-12;

/// Real beam splitter: `a1† → t a1† − r a2†`, `a2† → r a1† + t a2†`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitter {
    t: f64,
    r: f64,
}

impl BeamSplitter {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain("t", t, "0 <= t <= 1"));
        }
        Ok(Self {
            t,
            r: ((1.0 - t) * (1.0 + t)).sqrt(),
        })
    }

    pub fn balanced() -> Self {
        Self {
            t: std::f64::consts::FRAC_1_SQRT_2,
            r: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn from_tap(tap: &TapSpec) -> Self {
        Self {
            t: tap.t(),
            r: tap.r(),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn inverse(&self) -> Self {
        Self {
            t: self.t,
            r: -self.r,
        }
    }

    pub fn matrix(&self) -> ModeMatrix {
        ModeMatrix::real([[self.t, self.r], [-self.r, self.t]])
    }
}

/// 2×2 unitary `M` of a passive transformation `U`, acting on creation
/// operators as `U a_j† U† = Σ_k M[k][j] a_k†`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeMatrix {
    m: [[C64; 2]; 2],
}

impl ModeMatrix {
    pub fn new(m: [[C64; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn real(m: [[f64; 2]; 2]) -> Self {
        Self::new(m.map(|row| row.map(|x| C64::new(x, 0.0))))
    }

    pub fn identity() -> Self {
        Self::real([[1.0, 0.0], [0.0, 1.0]])
    }

    /// `exp(−iφ J_y)`.
    pub fn mach_zehnder(phase: f64) -> Self {
        let (s, c) = (0.5 * phase).sin_cos();
        Self::real([[c, -s], [s, c]])
    }

    /// `exp(−iφ J_z)`.
    pub fn phase_shift(phase: f64) -> Self {
        let half = 0.5 * phase;
        Self::new([
            [C64::from_polar(1.0, -half), C64::default()],
            [C64::default(), C64::from_polar(1.0, half)],
        ])
    }

    /// `exp(−iθ J_x)`.
    pub fn jx_rotation(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new([
            [C64::new(c, 0.0), C64::new(0.0, -s)],
            [C64::new(0.0, -s), C64::new(c, 0.0)],
        ])
    }

    /// Matrix of `U_after · U_before`.
    pub fn then(&self, after: &ModeMatrix) -> Self {
        let (a, b) = (&after.m, &self.m);
        let mut m = [[C64::default(); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { m }
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.m
    }

    fn is_real(&self) -> bool {
        self.m.iter().flatten().all(|z| z.im == 0.0)
    }
}

trait Amp: Copy + Default + Add<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> {
    fn one() -> Self;
}

impl Amp for f64 {
    fn one() -> Self {
        1.0
    }
}

impl Amp for C64 {
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
}

#[derive(Clone, Debug)]
enum Blocks {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

fn block_offset(total: usize) -> usize {
    total * (total + 1) * (2 * total + 1) / 6
}

/// Blocks `U^N[i][p] = <i, N−i| U |p, N−p>` for `N = 0..=max_total`.
///
/// `U^N = J (U^(N−1) ⊗ M) J†`, where `J†` splits one photon off a symmetric
/// `N`-photon state and `J` merges it back. `J` is a partial isometry, so
/// rounding errors accumulate linearly in `N` instead of being amplified by
/// repeated unnormalized ladder steps.
fn build_blocks<T: Amp>(m: [[T; 2]; 2], max_total: usize) -> Vec<T> {
    let sqrt: Vec<f64> = (0..=max_total + 1).map(|k| (k as f64).sqrt()).collect();
    let mut blocks = vec![T::default(); block_offset(max_total + 1)];
    blocks[0] = T::one();
    for total in 1..=max_total {
        let (prev, cur) = blocks.split_at_mut(block_offset(total));
        let prev = &prev[block_offset(total - 1)..];
        let cur = &mut cur[..(total + 1) * (total + 1)];
        let w_prev = total;
        let w = total + 1;
        let inv = 1.0 / total as f64;
        let at = |i: usize, p: usize| prev[i * w_prev + p];
        for i in 0..=total {
            let (ri, rq) = (sqrt[i], sqrt[total - i]);
            for p in 0..=total {
                let (cp, cq) = (sqrt[p], sqrt[total - p]);
                let mut acc = T::default();
                if p >= 1 {
                    if i >= 1 {
                        acc = acc + m[0][0] * at(i - 1, p - 1) * (cp * ri);
                    }
                    if i < total {
                        acc = acc + m[1][0] * at(i, p - 1) * (cp * rq);
                    }
                }
                if p < total {
                    if i >= 1 {
                        acc = acc + m[0][1] * at(i - 1, p) * (cq * ri);
                    }
                    if i < total {
                        acc = acc + m[1][1] * at(i, p) * (cq * rq);
                    }
                }
                cur[i * w + p] = acc * inv;
            }
        }
    }
    blocks
}

/// Cached block representation of a passive two-mode transformation, valid
/// for states whose total photon number stays within `max_total`.
#[derive(Clone, Debug)]
pub struct ModeMixer {
    matrix: ModeMatrix,
    max_total: usize,
    blocks: Blocks,
}

impl ModeMixer {
    pub fn new(matrix: ModeMatrix, max_total: usize) -> Self {
        let blocks = if matrix.is_real() {
            Blocks::Real(build_blocks(
                matrix.m.map(|row| row.map(|z| z.re)),
                max_total,
            ))
        } else {
            Blocks::Complex(build_blocks(matrix.m, max_total))
        };
        Self {
            matrix,
            max_total,
            blocks,
        }
    }

    pub fn matrix(&self) -> &ModeMatrix {
        &self.matrix
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    /// `<i, N−i| U |p, N−p>`.
    pub fn element(&self, total: usize, i: usize, p: usize) -> C64 {
        let k = block_offset(total) + i * (total + 1) + p;
        match &self.blocks {
            Blocks::Real(b) => C64::new(b[k], 0.0),
            Blocks::Complex(b) => b[k],
        }
    }

    /// Applies the transformation; the output holds every basis state with
    /// total photon number up to that of the input's largest component.
    pub fn apply(&self, state: &TwoModeFockVector) -> Result<TwoModeFockVector> {
        let (d1, d2) = state.dims();
        let top = d1 + d2 - 2;
        if top > self.max_total {
            return Err(Error::Config(format!(
                "state reaches total photon number {top}, mixer was built for {}",
                self.max_total
            )));
        }
        let mut out = TwoModeFockVector::zeros(top + 1, top + 1);
        let mut column: Vec<(usize, C64)> = Vec::with_capacity(top + 1);
        for total in 0..=top {
            column.clear();
            let lo = total.saturating_sub(d2 - 1);
            let hi = total.min(d1 - 1);
            for p in lo..=hi {
                let a = state.get(p, total - p);
                if a != C64::default() {
                    column.push((p, a));
                }
            }
            if column.is_empty() {
                continue;
            }
            let base = block_offset(total);
            let w = total + 1;
            for i in 0..=total {
                let row = base + i * w;
                let acc: C64 = match &self.blocks {
                    Blocks::Real(b) => column.iter().map(|&(p, a)| a * b[row + p]).sum(),
                    Blocks::Complex(b) => column.iter().map(|&(p, a)| a * b[row + p]).sum(),
                };
                out.set(i, total - i, acc);
            }
        }
        Ok(out.with_tail_bound(state.tail_bound()))
    }
}

fn max_total(state: &TwoModeFockVector) -> usize {
    let (d1, d2) = state.dims();
    d1 + d2 - 2
}

pub fn apply_mode_matrix(state: &TwoModeFockVector, matrix: ModeMatrix) -> TwoModeFockVector {
    ModeMixer::new(matrix, max_total(state))
        .apply(state)
        .expect("mixer sized to the state")
}

pub fn apply_bs(state: &TwoModeFockVector, bs: &BeamSplitter) -> TwoModeFockVector {
    apply_mode_matrix(state, bs.matrix())
}

/// `exp(−iφ J_y) |state>`, realized as the real mode rotation by `φ/2`.
pub fn mz_evolve(state: &TwoModeFockVector, phase: f64) -> TwoModeFockVector {
    apply_mode_matrix(state, ModeMatrix::mach_zehnder(phase))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub conditioned_state: FockVector,
    pub probability: f64,
    pub outcome: usize,
}

/// Squared norm of the mode-2 slice `n2 = outcome`.
pub fn branch_probability(state: &TwoModeFockVector, outcome: usize) -> f64 {
    let (d1, d2) = state.dims();
    if outcome >= d2 {
        return 0.0;
    }
    (0..d1).map(|i| state.get(i, outcome).norm_sqr()).sum()
}

/// Conditions mode 1 on detecting `outcome` photons in mode 2.
///
/// The conditioned tail bound is the input's dropped mass divided by the
/// branch probability, which bounds the mass the branch can have lost.
pub fn project_ancilla(state: &TwoModeFockVector, outcome: usize) -> Result<ProjectionResult> {
    let (d1, d2) = state.dims();
    if outcome >= d2 {
        return Err(domain(
            "outcome",
            outcome as f64,
            "within the ancilla cutoff",
        ));
    }
    let mut amps: Vec<C64> = (0..d1).map(|i| state.get(i, outcome)).collect();
    let probability: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if probability == 0.0 {
        return Err(Error::DegenerateEvent { outcome });
    }
    let last = amps.iter().rposition(|a| *a != C64::default()).unwrap_or(0);
    amps.truncate(last + 1);
    let conditioned = FockVector::from_amplitudes(amps).normalized();
    let tail = (state.tail_bound() / probability).min(1.0);
    Ok(ProjectionResult {
        conditioned_state: conditioned.with_tail_bound(tail),
        probability,
        outcome,
    })
}

/// Brute-force photon subtraction: `SMSV(±y) ⊗ |0>` through the tap, with
/// mode 2 measured. The SMSV truncation is tightened until every branch up
/// to `max_outcome` with nonzero probability meets the policy tolerance.
#[derive(Clone, Debug)]
pub struct SubtractionOracle {
    output: TwoModeFockVector,
}

impl SubtractionOracle {
    pub fn new(
        spec: &SqueezeSpec,
        tap: &TapSpec,
        sign: Sign,
        policy: &CutoffPolicy,
        max_outcome: usize,
    ) -> Result<Self> {
        let bs = BeamSplitter::from_tap(tap);
        let mut smsv_policy = *policy;
        for _ in 0..8 {
            let input = TwoModeFockVector::product(
                &smsv_state(spec, sign, &smsv_policy)?,
                &FockVector::vacuum(),
            );
            let output = apply_bs(&input, &bs);
            let min_p = (0..=max_outcome)
                .map(|k| branch_probability(&output, k))
                .filter(|&p| p > 0.0)
                .fold(1.0, f64::min);
            if output.tail_bound() <= policy.tolerance * min_p {
                return Ok(Self { output });
            }
            smsv_policy.tolerance = (policy.tolerance * min_p * 0.5).max(f64::MIN_POSITIVE);
        }
        Err(Error::Cutoff {
            tail: f64::NAN,
            tolerance: policy.tolerance,
            max_cutoff: policy.max_cutoff,
        })
    }

    pub fn output(&self) -> &TwoModeFockVector {
        &self.output
    }

    pub fn probability(&self, outcome: usize) -> f64 {
        branch_probability(&self.output, outcome)
    }

    pub fn project(&self, outcome: usize) -> Result<ProjectionResult> {
        project_ancilla(&self.output, outcome)
    }
}

pub fn subtract_photons_oracle(
    spec: &SqueezeSpec,
    tap: &TapSpec,
    outcome: usize,
    sign: Sign,
    policy: &CutoffPolicy,
) -> Result<ProjectionResult> {
    SubtractionOracle::new(spec, tap, sign, policy, outcome)?.project(outcome)
}

/// The balanced splitter turns a two-mode squeezed vacuum into
/// `SMSV(s) ⊗ SMSV(−s)`.
pub fn tmsv_to_two_smsv(spec: &SqueezeSpec, policy: &CutoffPolicy) -> Result<TwoModeFockVector> {
    let tmsv = crate::fock::tmsv_state(spec, policy)?;
    Ok(apply_bs(&tmsv, &BeamSplitter::balanced()))
}

/// `a1† a2 |ψ>` and `a1 a2† |ψ>` on dimensions grown by one in each mode.
fn hopping(state: &TwoModeFockVector) -> (TwoModeFockVector, TwoModeFockVector) {
    let (d1, d2) = state.dims();
    let mut up = TwoModeFockVector::zeros(d1 + 1, d2 + 1);
    let mut down = TwoModeFockVector::zeros(d1 + 1, d2 + 1);
    for (i, j, a) in state.entries() {
        if a == C64::default() {
            continue;
        }
        if j >= 1 {
            // a1† a2 |i, j> = √(i+1) √j |i+1, j−1>
            let v = up.get(i + 1, j - 1) + a * (((i + 1) * j) as f64).sqrt();
            up.set(i + 1, j - 1, v);
        }
        if i >= 1 {
            let v = down.get(i - 1, j + 1) + a * ((i * (j + 1)) as f64).sqrt();
            down.set(i - 1, j + 1, v);
        }
    }
    (up, down)
}

fn combine(a: &TwoModeFockVector, b: &TwoModeFockVector, ca: C64, cb: C64) -> TwoModeFockVector {
    let (d1, d2) = a.dims();
    let mut out = TwoModeFockVector::zeros(d1, d2);
    for (i, j, x) in a.entries() {
        out.set(i, j, ca * x + cb * b.get(i, j));
    }
    out
}

pub fn apply_jx(state: &TwoModeFockVector) -> TwoModeFockVector {
    let (up, down) = hopping(state);
    combine(&up, &down, C64::new(0.5, 0.0), C64::new(0.5, 0.0))
}

pub fn apply_jy(state: &TwoModeFockVector) -> TwoModeFockVector {
    let (up, down) = hopping(state);
    // (a1†a2 − a1a2†) / 2i
    combine(&up, &down, C64::new(0.0, -0.5), C64::new(0.0, 0.5))
}

pub fn apply_jz(state: &TwoModeFockVector) -> TwoModeFockVector {
    let (d1, d2) = state.dims();
    let mut out = TwoModeFockVector::zeros(d1, d2);
    for (i, j, a) in state.entries() {
        out.set(i, j, a * (0.5 * (i as f64 - j as f64)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiSpinMoments {
    pub mean_jx: f64,
    pub mean_jy: f64,
    pub mean_jz: f64,
    pub var_jx: f64,
    pub var_jy: f64,
    pub var_jz: f64,
}

fn clamp_variance(name: &str, v: f64) -> f64 {
    if v < 0.0 {
        if v < -VARIANCE_NEGATIVE_TOL {
            log::warn!("{name} variance {v:e} is negative beyond rounding; clamped to 0");
        }
        0.0
    } else {
        v
    }
}

/// Means and variances of the Schwinger operators on a normalized state.
pub fn quasi_spin_moments(state: &TwoModeFockVector) -> QuasiSpinMoments {
    let jx = apply_jx(state);
    let jy = apply_jy(state);
    let mean_jx = state.inner(&jx).re;
    let mean_jy = state.inner(&jy).re;
    let (mut mean_jz, mut sq_jz) = (0.0, 0.0);
    for (i, j, a) in state.entries() {
        let m = 0.5 * (i as f64 - j as f64);
        let p = a.norm_sqr();
        mean_jz += m * p;
        sq_jz += m * m * p;
    }
    QuasiSpinMoments {
        mean_jx,
        mean_jy,
        mean_jz,
        var_jx: clamp_variance("J_x", jx.norm_sqr() - mean_jx * mean_jx),
        var_jy: clamp_variance("J_y", jy.norm_sqr() - mean_jy * mean_jy),
        var_jz: clamp_variance("J_z", sq_jz - mean_jz * mean_jz),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{moments, subtracted_cv_state};
    use crate::scalar::{squeeze_from_db, tap_from_transmittance};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn policy() -> CutoffPolicy {
        CutoffPolicy::tolerance(1e-14).unwrap()
    }

    fn max_diff(a: &TwoModeFockVector, b: &TwoModeFockVector) -> f64 {
        let (a1, a2) = a.dims();
        let (b1, b2) = b.dims();
        let mut m: f64 = 0.0;
        for i in 0..a1.max(b1) {
            for j in 0..a2.max(b2) {
                m = m.max((a.get(i, j) - b.get(i, j)).norm());
            }
        }
        m
    }

    fn random_state(d1: usize, d2: usize, seed: u64) -> TwoModeFockVector {
        // small LCG; only needs to be deterministic
        let mut x = seed;
        let mut next = move || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut s = TwoModeFockVector::zeros(d1, d2);
        for i in 0..d1 {
            for j in 0..d2 {
                s.set(i, j, C64::new(next(), next()));
            }
        }
        let n = s.norm_sqr().sqrt();
        let mut out = TwoModeFockVector::zeros(d1, d2);
        for (i, j, a) in s.entries() {
            out.set(i, j, a / n);
        }
        out
    }

    #[test]
    fn identity_splitter() {
        let psi = random_state(5, 4, 1);
        let out = apply_bs(&psi, &BeamSplitter::new(1.0).unwrap());
        assert!(max_diff(&out, &psi) < 1e-15);
    }

    #[test]
    fn single_photon_split() {
        let out = apply_bs(&TwoModeFockVector::basis(1, 0), &BeamSplitter::balanced());
        assert!((out.get(1, 0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((out.get(0, 1).re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let out = apply_bs(&TwoModeFockVector::basis(1, 1), &BeamSplitter::balanced());
        assert!(out.get(1, 1).norm() < 1e-15);
        assert!((out.get(2, 0).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((out.get(0, 2).norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn block_elements_match_binomial_expansion() {
        // <i, N−i|U|N, 0> = (−r)^(N−i) t^i √C(N, i)
        let bs = BeamSplitter::new(0.83).unwrap();
        let mixer = ModeMixer::new(bs.matrix(), 40);
        for total in [1usize, 7, 40] {
            for i in 0..=total {
                let expected = crate::scalar::log_factorial(total as u64)
                    - crate::scalar::log_factorial(i as u64)
                    - crate::scalar::log_factorial((total - i) as u64);
                let expected = (0.5 * expected).exp()
                    * bs.t().powi(i as i32)
                    * (-bs.r()).powi((total - i) as i32);
                let got = mixer.element(total, i, total).re;
                assert!(
                    (got - expected).abs() <= 1e-13 * expected.abs().max(1e-300),
                    "N={total} i={i}"
                );
            }
        }
    }

    #[test]
    fn large_blocks_stay_unitary() {
        let mixer = ModeMixer::new(ModeMatrix::mach_zehnder(FRAC_PI_2), 400);
        for total in [100usize, 250, 400] {
            for p in [0, total / 3, total / 2, total] {
                let col: f64 = (0..=total)
                    .map(|i| mixer.element(total, i, p).norm_sqr())
                    .sum();
                assert!((col - 1.0).abs() < 1e-11, "N={total} p={p} norm={col}");
            }
        }
    }

    #[test]
    fn unitarity_and_inverse() {
        let psi = random_state(9, 7, 2);
        let bs = BeamSplitter::new(0.6).unwrap();
        let out = apply_bs(&psi, &bs);
        assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
        let dist_in = psi.total_distribution();
        let dist_out = out.total_distribution();
        for (a, b) in dist_in.iter().zip(&dist_out) {
            assert!((a - b).abs() < 1e-13);
        }
        let back = apply_bs(&out, &bs.inverse());
        assert!(max_diff(&back, &psi) < 1e-12);
    }

    #[test]
    fn projection_cases() {
        let psi = smsv_state(&squeeze_from_db(3.0).unwrap(), Sign::Plus, &policy()).unwrap();
        let prod = TwoModeFockVector::product(&psi, &FockVector::number_state(2));
        let res = project_ancilla(&prod, 2).unwrap();
        assert!((res.probability - 1.0).abs() < 1e-14);
        assert!((crate::fock::fidelity(&res.conditioned_state, &psi) - 1.0).abs() < 1e-14);
        assert!(matches!(
            project_ancilla(&prod, 1),
            Err(Error::DegenerateEvent { outcome: 1 })
        ));
        assert!(project_ancilla(&prod, 7).is_err());
    }

    #[test]
    fn projection_probability_at_5db() {
        let spec = squeeze_from_db(5.0).unwrap();
        let tap = tap_from_transmittance(0.9, &spec).unwrap();
        let res = subtract_photons_oracle(&spec, &tap, 0, Sign::Plus, &policy()).unwrap();
        // Z(y1) / cosh(s), 50-digit reference
        assert!(
            ((res.probability - 0.941_924_255_973_147_3) / 0.941_924_255_973_147_3).abs() < 1e-12
        );
    }

    #[test]
    fn oracle_identity_tap() {
        let spec = squeeze_from_db(4.0).unwrap();
        let tap = tap_from_transmittance(1.0, &spec).unwrap();
        let res = subtract_photons_oracle(&spec, &tap, 0, Sign::Plus, &policy()).unwrap();
        assert!((res.probability - 1.0).abs() < 1e-14);
        let smsv = smsv_state(&spec, Sign::Plus, &policy()).unwrap();
        assert!((crate::fock::fidelity(&res.conditioned_state, &smsv) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_matches_ladder_construction() {
        let spec = squeeze_from_db(5.0).unwrap();
        let tap = tap_from_transmittance(0.9, &spec).unwrap();
        let oracle = SubtractionOracle::new(&spec, &tap, Sign::Minus, &policy(), 6).unwrap();
        for n in 0..=6 {
            let res = oracle.project(n).unwrap();
            let direct = subtracted_cv_state(&tap, n, Sign::Minus, &policy()).unwrap();
            assert!(1.0 - crate::fock::fidelity(&res.conditioned_state, &direct) < 1e-10);
            assert_eq!(
                crate::fock::parity_of(&res.conditioned_state),
                crate::fock::Parity::of_count(n)
            );
        }
    }

    #[test]
    fn outcome_probabilities_are_complete() {
        let spec = SqueezeSpec::from_amplitude(0.8).unwrap();
        let tap = tap_from_transmittance(0.8, &spec).unwrap();
        let oracle = SubtractionOracle::new(&spec, &tap, Sign::Plus, &policy(), 0).unwrap();
        let (_, d2) = oracle.output().dims();
        let total: f64 = (0..d2).map(|k| oracle.probability(k)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tmsv_splits_into_opposite_smsv() {
        let zero = SqueezeSpec::from_amplitude(0.0).unwrap();
        let out = tmsv_to_two_smsv(&zero, &policy()).unwrap();
        assert!((out.get(0, 0).norm_sqr() - 1.0).abs() < 1e-15);

        let spec = squeeze_from_db(3.0).unwrap();
        let out = tmsv_to_two_smsv(&spec, &policy()).unwrap();
        let a = smsv_state(&spec, Sign::Plus, &policy()).unwrap();
        let b = smsv_state(&spec, Sign::Minus, &policy()).unwrap();
        let product = TwoModeFockVector::product(&a, &b);
        assert!(1.0 - out.fidelity(&product) < 1e-10);
        let marginal = out.marginal(1);
        for (n, p) in a.probabilities().iter().enumerate() {
            assert!((marginal.get(n).copied().unwrap_or(0.0) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn mz_identity_and_double_cover() {
        let psi = random_state(4, 5, 3);
        assert!(max_diff(&mz_evolve(&psi, 0.0), &psi) < 1e-15);
        let out = mz_evolve(&TwoModeFockVector::basis(1, 0), 2.0 * PI);
        assert!((out.get(1, 0).re + 1.0).abs() < 1e-14);
        assert!(out.get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn mz_matches_three_factor_product() {
        let phase = 0.77;
        let composite = ModeMatrix::jx_rotation(PI / 2.0)
            .then(&ModeMatrix::phase_shift(phase))
            .then(&ModeMatrix::jx_rotation(-PI / 2.0));
        let psi = random_state(6, 6, 4);
        let direct = mz_evolve(&psi, phase);
        let three = apply_mode_matrix(&psi, composite);
        assert!(max_diff(&direct, &three) < 1e-10);
    }

    #[test]
    fn mz_generator_is_jy() {
        // (U(h) − U(−h)) / 2h → −i J_y
        let psi = random_state(5, 5, 5);
        let h = 1e-5;
        let plus = mz_evolve(&psi, h);
        let minus = mz_evolve(&psi, -h);
        let jy = apply_jy(&psi);
        let (d1, d2) = jy.dims();
        for i in 0..d1 {
            for j in 0..d2 {
                let fd = (plus.get(i, j) - minus.get(i, j)) / (2.0 * h);
                let expected = C64::new(0.0, -1.0) * jy.get(i, j);
                assert!((fd - expected).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn commutator_closes_on_low_blocks() {
        // [J_x, J_y] = i J_z on a state supported on totals <= 12
        let mut psi = TwoModeFockVector::zeros(14, 14);
        let raw = random_state(13, 13, 6);
        for (i, j, a) in raw.entries() {
            if i + j <= 12 {
                psi.set(i, j, a);
            }
        }
        let xy = apply_jx(&apply_jy(&psi));
        let yx = apply_jy(&apply_jx(&psi));
        let z = apply_jz(&psi);
        let (d1, d2) = xy.dims();
        for i in 0..d1 {
            for j in 0..d2 {
                let lhs = xy.get(i, j) - yx.get(i, j);
                let rhs = C64::new(0.0, 1.0) * z.get(i, j);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn moments_of_simple_states() {
        let m = quasi_spin_moments(&TwoModeFockVector::basis(0, 0));
        assert_eq!(
            m,
            QuasiSpinMoments {
                mean_jx: 0.0,
                mean_jy: 0.0,
                mean_jz: 0.0,
                var_jx: 0.0,
                var_jy: 0.0,
                var_jz: 0.0
            }
        );

        let spec = squeeze_from_db(5.0).unwrap();
        let tap = tap_from_transmittance(0.9, &spec).unwrap();
        let a = subtracted_cv_state(&tap, 3, Sign::Plus, &policy()).unwrap();
        let b = subtracted_cv_state(&tap, 2, Sign::Minus, &policy()).unwrap();
        let prod = TwoModeFockVector::product(&a, &b);
        let m = quasi_spin_moments(&prod);
        assert!(m.mean_jx.abs() < 1e-14);
        assert!(m.mean_jy.abs() < 1e-14);
        let expected_jz = 0.5 * (moments(&a).mean_n - moments(&b).mean_n);
        assert!((m.mean_jz - expected_jz).abs() < 1e-12);
    }

    #[test]
    fn qfi_of_subtracted_pair_at_5db() {
        // 4 Var(J_y) for n1 = n2 = 2 at 5 dB, t = 0.9: the closed form gives 15.799881600184033
        let spec = squeeze_from_db(5.0).unwrap();
        let tap = tap_from_transmittance(0.9, &spec).unwrap();
        let a = subtract_photons_oracle(&spec, &tap, 2, Sign::Plus, &policy()).unwrap();
        let b = subtract_photons_oracle(&spec, &tap, 2, Sign::Minus, &policy()).unwrap();
        let prod = TwoModeFockVector::product(&a.conditioned_state, &b.conditioned_state);
        let qfi = 4.0 * quasi_spin_moments(&prod).var_jy;
        assert!(((qfi - 15.799_881_600_184_033) / 15.799_881_600_184_033).abs() < 1e-10);
    }
}
