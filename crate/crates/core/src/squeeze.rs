//! Squeezed-number-state overlap coefficients.
//!
//! `S[l][n] = <l| exp[-xi (b^2 - b^dag^2)/2] |n>` is the matrix element of
//! the single-mode squeeze operator between Fock states. These
//! coefficients carry the two-phonon selection rule of the quadratic
//! coupling: `S[l][n] = 0` whenever `l - n` is odd, enforced structurally
//! here rather than by numerical cancellation.
//!
//! Each entry is an alternating sum whose largest summand can exceed the
//! result by many orders of magnitude (about 1e22 at column index 200),
//! so plain double accumulation loses every digit exactly where the
//! scattering-rate ladders need the matrix. Consecutive summands are
//! related by a ratio that is rational in the summation index, which lets
//! the sum run as a term recurrence accumulated in double-double
//! arithmetic: ~32 digits of working precision absorb the cancellation.
//! Only the overall scale of the leading term is taken through log space.
//!
//! Cancellation grows with the *column* (ket) index, not the row, so the
//! matrix is stored rectangularly: tall ladders of intermediate states
//! over a moderate number of columns stay fully accurate.

use ndarray::Array2;

use crate::error::Error;
use crate::Result;

/// Validated range of the squeeze parameter.
pub const MAX_XI: f64 = 2.0;

/// Hard bound on either matrix dimension.
pub const MAX_DIM: usize = 520;

/// Column bound keeping the double-double evaluation at or below ~1e21
/// cancellation for |xi| <= 0.5 (verified against 80-digit references).
pub const MAX_ACCURATE_COLS: usize = 260;

/// Squeeze parameter from the quadratic coupling strength:
/// `xi = ln(1 + 4 g / omega_m) / 4`.
///
/// The argument of the logarithm is the single-photon stability
/// discriminant; a non-positive value means the one-photon mechanical
/// frequency is imaginary and no squeeze frame exists.
pub fn squeeze_param(g: f64, omega_m: f64) -> Result<f64> {
    if omega_m.is_nan() || omega_m <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "omega_m must be positive, got {omega_m}"
        )));
    }
    let discriminant = 1.0 + 4.0 * g / omega_m;
    if discriminant <= 0.0 {
        return Err(Error::StabilityViolation { photon_number: 1 });
    }
    Ok(0.25 * discriminant.ln())
}

/// Real matrix of squeezed-number-state coefficients.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    xi: f64,
    rows: usize,
    cols: usize,
    entries: Array2<f64>,
}

impl OverlapMatrix {
    /// Square matrix: `S[l][n]` for all `l, n < dim`.
    pub fn new(xi: f64, dim: usize) -> Result<Self> {
        Self::new_rect(xi, dim, dim)
    }

    /// Rectangular matrix: bra index `l < rows`, ket index `n < cols`.
    pub fn new_rect(xi: f64, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(
                "overlap matrix needs rows >= 1 and cols >= 1".into(),
            ));
        }
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::OverlapDim {
                dim: rows.max(cols),
                max: MAX_DIM,
            });
        }
        if !xi.is_finite() || xi.abs() > MAX_XI {
            return Err(Error::SqueezeRange { xi, max: MAX_XI });
        }

        let mut entries = Array2::zeros((rows, cols));
        if xi == 0.0 {
            for i in 0..rows.min(cols) {
                entries[[i, i]] = 1.0;
            }
            return Ok(Self {
                xi,
                rows,
                cols,
                entries,
            });
        }

        let ctx = EntryContext::new(xi, rows.max(cols));
        for l in 0..rows {
            for n in (l % 2..cols).step_by(2) {
                entries[[l, n]] = ctx.entry(l, n);
            }
        }
        Ok(Self {
            xi,
            rows,
            cols,
            entries,
        })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Row count; equals the column count for square matrices.
    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, l: usize, n: usize) -> f64 {
        self.entries[[l, n]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.entries
    }
}

/// Shared per-matrix quantities for entry evaluation.
struct EntryContext {
    ln_fact: Vec<f64>,
    ln_abs_half_tanh: f64,
    half_tanh_negative: bool,
    ln_cosh: f64,
    /// `(sinh(xi)/2)^2`, the k -> k+1 term-ratio scale.
    quarter_sinh_sq: f64,
}

impl EntryContext {
    fn new(xi: f64, max_index: usize) -> Self {
        let tanh_xi = xi.tanh();
        let sinh_xi = xi.sinh();
        Self {
            ln_fact: ln_factorials(max_index + 1),
            ln_abs_half_tanh: (tanh_xi.abs() / 2.0).ln(),
            half_tanh_negative: tanh_xi < 0.0,
            ln_cosh: xi.cosh().ln(),
            quarter_sinh_sq: (sinh_xi / 2.0) * (sinh_xi / 2.0),
        }
    }

    /// One coefficient, `l` and `n` of equal parity. The double sum over
    /// contraction indices collapses to a single sum over `k` with
    /// `k' = k + (l - n)/2` fixed by the Kronecker delta.
    fn entry(&self, l: usize, n: usize) -> f64 {
        debug_assert_eq!(l % 2, n % 2);
        let diff = (l as i64 - n as i64) / 2;
        let k_min = (-diff).max(0) as usize;
        let k_max = n / 2;
        if k_min > k_max {
            return 0.0;
        }

        // Leading term at k_min: scale through log space, sign separately.
        let kp_min = (k_min as i64 + diff) as usize;
        let power = kp_min + k_min;
        let ln_lead = if power == 0 { 0.0 } else { power as f64 * self.ln_abs_half_tanh }
            - self.ln_fact[kp_min]
            - self.ln_fact[k_min]
            - self.ln_fact[n - 2 * k_min]
            + 2.0 * k_min as f64 * self.ln_cosh;
        let lead_negative =
            (k_min % 2 == 1) != (self.half_tanh_negative && power % 2 == 1);

        // Scaled summands U_k = T_k / T_{k_min} by the term-ratio
        // recurrence, accumulated in double-double arithmetic. The integer
        // products are exact in f64 and the ratio is applied as exact
        // multiply, corrected divide, and one coherent scale factor, so
        // each step costs O(eps^2) relative error.
        let mut u = Dd::from(1.0);
        let mut sum = u;
        for k in k_min..k_max {
            let decrements = (n - 2 * k) as f64 * (n - 2 * k - 1) as f64;
            let increments = (k + 1) as f64 * ((k as i64 + 1 + diff) as f64);
            u = u
                .mul_f64(decrements)
                .div_f64(increments)
                .mul_f64(-self.quarter_sinh_sq);
            sum = sum.add(u);
        }
        let (sum_mag, sum_negative) = sum.ln_abs_sign();
        let Some(ln_sum) = sum_mag else { return 0.0 };

        let ln_prefactor =
            0.5 * (self.ln_fact[l] + self.ln_fact[n]) - (n as f64 + 0.5) * self.ln_cosh;
        let magnitude = (ln_prefactor + ln_lead + ln_sum).exp();
        if lead_negative != sum_negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// `ln(k!)` for `k < dim`, by compensated cumulative summation.
fn ln_factorials(dim: usize) -> Vec<f64> {
    let mut table = vec![0.0f64; dim.max(2)];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 2..table.len() {
        let term = (k as f64).ln();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        table[k] = sum;
    }
    table
}

/// Minimal double-double value: an unevaluated sum `hi + lo` carrying
/// roughly 32 significant digits.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

impl Dd {
    /// Cancellation-safe addition (both components error-free).
    fn add(self, other: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, other.hi);
        let (t1, t2) = two_sum(self.lo, other.lo);
        let s2 = s2 + t1;
        let Dd { hi: s1, lo: s2 } = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        quick_two_sum(s1, s2)
    }

    fn mul_f64(self, f: f64) -> Dd {
        let (p, e) = two_prod(self.hi, f);
        let e = e + self.lo * f;
        quick_two_sum(p, e)
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, pe) = two_prod(q1, b);
        let r = ((self.hi - p) - pe) + self.lo;
        let q2 = r / b;
        quick_two_sum(q1, q2)
    }

    /// `(ln|x|, x < 0)`; `None` magnitude for exact zero.
    fn ln_abs_sign(self) -> (Option<f64>, bool) {
        let value = self.hi;
        if value == 0.0 {
            return (None, false);
        }
        // ln(hi + lo) = ln|hi| + ln(1 + lo/hi).
        let correction = (self.lo / self.hi).ln_1p();
        (Some(value.abs().ln() + correction), value < 0.0)
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let err = b - (s - a);
    Dd { hi: s, lo: err }
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}
