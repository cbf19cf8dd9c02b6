//! Scalar building blocks: squeezing parameterizations, beam-splitter taps,
//! log-domain factorials and the derivative family of
//! `Z(y) = (1 - 4y²)^(-1/2)`, whose `n`-th derivative normalizes the
//! `n`-photon-subtracted squeezed state.

use std::f64::consts::LN_10;

use crate::error::{domain, Error, Result};

/// Decibels per unit of squeeze amplitude: `S = (20 / ln 10) · s`.
pub const DB_PER_AMPLITUDE: f64 = 20.0 / LN_10;

/// Relative disagreement tolerated between the two Z-derivative evaluations.
pub const Z_CROSS_CHECK_TOL: f64 = 1e-10;

const SERIES_REL_TAIL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 10_000_000;

/// Squeezing of a single-mode squeezed vacuum in its three equivalent forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeSpec {
    s: f64,
    s_db: f64,
    y: f64,
}

impl SqueezeSpec {
    pub fn from_amplitude(s: f64) -> Result<Self> {
        if !s.is_finite() || s < 0.0 {
            return Err(domain("s", s, "finite and >= 0"));
        }
        Ok(Self {
            s,
            s_db: s * DB_PER_AMPLITUDE,
            y: 0.5 * s.tanh(),
        })
    }

    pub fn from_db(s_db: f64) -> Result<Self> {
        if !s_db.is_finite() || s_db < 0.0 {
            return Err(domain("S_db", s_db, "finite and >= 0"));
        }
        let s = s_db / DB_PER_AMPLITUDE;
        Ok(Self {
            s,
            s_db,
            y: 0.5 * s.tanh(),
        })
    }

    /// Squeeze amplitude `s`.
    pub fn amplitude(&self) -> f64 {
        self.s
    }

    pub fn db(&self) -> f64 {
        self.s_db
    }

    /// Squeeze parameter `y = tanh(s) / 2`, always in `[0, 0.5)`.
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Mean photon number `sinh²(s)`.
    pub fn mean_photons(&self) -> f64 {
        self.s.sinh().powi(2)
    }

    /// Magnitude of `<a²>`: `sinh(s) cosh(s)`.
    pub fn pair_coherence(&self) -> f64 {
        0.5 * (2.0 * self.s).sinh()
    }
}

pub fn squeeze_from_db(s_db: f64) -> Result<SqueezeSpec> {
    SqueezeSpec::from_db(s_db)
}

pub fn db_from_squeeze(s: f64) -> f64 {
    s * DB_PER_AMPLITUDE
}

/// Beam-splitter tap that feeds the photon-number-resolving detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TapSpec {
    t: f64,
    r: f64,
    b: f64,
    y: f64,
    y1: f64,
}

impl TapSpec {
    /// Transmission amplitude.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Reflection amplitude `sqrt(1 - t²)`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// `B = (1 - t²) / t²`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Reduced squeeze parameter `y1 = y t²` seen by the transmitted mode.
    pub fn y1(&self) -> f64 {
        self.y1
    }

    /// Squeeze parameter of the parent state.
    pub fn parent_y(&self) -> f64 {
        self.y
    }

    /// Shift `y r²` with `y1 + y r² = y`; weights the reflected branch.
    pub fn reflected_y(&self) -> f64 {
        self.y * self.r * self.r
    }
}

pub fn tap_from_transmittance(t: f64, spec: &SqueezeSpec) -> Result<TapSpec> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(domain("t", t, "0 < t <= 1"));
    }
    let t2 = t * t;
    let r2 = (1.0 - t) * (1.0 + t);
    Ok(TapSpec {
        t,
        r: r2.sqrt(),
        b: r2 / t2,
        y: spec.y(),
        y1: spec.y() * t2,
    })
}

/// `ln(n!)`.
pub fn log_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

/// `Z(y) = (1 - 4y²)^(-1/2)`.
pub fn z_function(y: f64) -> f64 {
    1.0 / ((1.0 - 2.0 * y) * (1.0 + 2.0 * y)).sqrt()
}

/// `Z^(0)(y1) ..= Z^(max_order)(y1)`, stored as natural logarithms so that
/// high orders close to `y1 = 0.5` stay representable.
#[derive(Clone, Debug, PartialEq)]
pub struct ZDerivatives {
    y1: f64,
    ln_values: Vec<f64>,
}

impl ZDerivatives {
    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn max_order(&self) -> usize {
        self.ln_values.len() - 1
    }

    /// `ln Z^(order)(y1)`; `-inf` for odd orders at `y1 = 0`.
    pub fn ln_value(&self, order: usize) -> f64 {
        self.ln_values[order]
    }

    pub fn value(&self, order: usize) -> f64 {
        self.ln_values[order].exp()
    }

    pub fn values(&self) -> Vec<f64> {
        self.ln_values.iter().map(|l| l.exp()).collect()
    }

    /// `Z^(num)(y1) / Z^(den)(y1)`.
    pub fn ratio(&self, num: usize, den: usize) -> f64 {
        (self.ln_values[num] - self.ln_values[den]).exp()
    }
}

/// Evaluates the derivative family twice, by the term-wise differentiated
/// series `Z = Σ C(2k,k) y^(2k)` and by the recurrence that follows from
/// `(1 - 4y²) Z' = 4y Z`, and fails if the two disagree.
pub fn z_derivatives(y1: f64, max_order: usize) -> Result<ZDerivatives> {
    if !y1.is_finite() || !(0.0..0.5).contains(&y1) {
        return Err(domain("y1", y1, "0 <= y1 < 0.5"));
    }
    let recurrence = z_recurrence_ln(y1, max_order);
    for (order, &rec) in recurrence.iter().enumerate() {
        let series = z_series_ln(y1, order)?;
        let agree = if rec == f64::NEG_INFINITY || series == f64::NEG_INFINITY {
            rec == series
        } else {
            (series - rec).exp_m1().abs() <= Z_CROSS_CHECK_TOL
        };
        if !agree {
            return Err(Error::Precision {
                order,
                y1,
                series,
                recurrence: rec,
            });
        }
    }
    Ok(ZDerivatives {
        y1,
        ln_values: recurrence,
    })
}

/// ln-values from the three-term recurrence
/// `(1 - 4y²) Z^(m+1) = (8m + 4) y Z^(m) + 4m² Z^(m-1)`, run on successive
/// ratios `Z^(m) / Z^(m-1)`.
fn z_recurrence_ln(y: f64, max_order: usize) -> Vec<f64> {
    let q = (1.0 - 2.0 * y) * (1.0 + 2.0 * y);
    let mut out = Vec::with_capacity(max_order + 1);
    out.push(-0.5 * q.ln());
    if max_order == 0 {
        return out;
    }
    if y == 0.0 {
        for order in 1..=max_order {
            out.push(z_at_origin_ln(order));
        }
        return out;
    }
    let mut ratio = 4.0 * y / q;
    out.push(out[0] + ratio.ln());
    for m in 1..max_order {
        let mf = m as f64;
        ratio = ((8.0 * mf + 4.0) * y + 4.0 * mf * mf / ratio) / q;
        let prev = out[m];
        out.push(prev + ratio.ln());
    }
    out
}

fn z_at_origin_ln(order: usize) -> f64 {
    if order % 2 == 1 {
        return f64::NEG_INFINITY;
    }
    let k = (order / 2) as u64;
    // C(2k, k) (2k)!
    2.0 * log_factorial(2 * k) - 2.0 * log_factorial(k)
}

/// ln of `Σ_j C(2j,j) (2j)!/(2j-n)! y^(2j-n)`, truncated once the geometric
/// majorant of the remaining tail drops below `SERIES_REL_TAIL` of the sum.
fn z_series_ln(y: f64, order: usize) -> Result<f64> {
    if y == 0.0 {
        return Ok(z_at_origin_ln(order));
    }
    let n = order as f64;
    let y2 = y * y;
    let j0 = order.div_ceil(2);
    let jf = j0 as f64;
    let mut ln_ref = log_factorial(2 * j0 as u64) - 2.0 * log_factorial(j0 as u64)
        + log_factorial(2 * j0 as u64)
        - log_factorial((2 * j0 - order) as u64)
        + (2.0 * jf - n) * y.ln();
    let mut term = 1.0;
    let mut acc = 1.0;
    let mut j = jf;
    for _ in 0..SERIES_MAX_TERMS {
        let falling =
            (2.0 * j + 2.0) * (2.0 * j + 1.0) / ((2.0 * j + 2.0 - n) * (2.0 * j + 1.0 - n));
        let next_ratio = 2.0 * (2.0 * j + 1.0) / (j + 1.0) * falling * y2;
        // every later ratio is bounded by 4 y² times the current falling factor
        let bound = 4.0 * y2 * falling;
        if bound < 1.0 && term * bound / (1.0 - bound) < SERIES_REL_TAIL * acc {
            return Ok(ln_ref + acc.ln());
        }
        term *= next_ratio;
        acc += term;
        j += 1.0;
        if acc > 1e200 {
            ln_ref += acc.ln();
            term /= acc;
            acc = 1.0;
        }
    }
    Err(Error::Precision {
        order,
        y1: y,
        series: f64::NAN,
        recurrence: f64::NAN,
    })
}
