//! Dense operator algebra on truncated Fock spaces.
//!
//! Operators are plain row-major complex matrices. The composite
//! cavity⊗mechanics space uses the fixed basis ordering
//! `index = photon * n_phonon_states + phonon`; every partial trace and
//! observable in the crate relies on that convention.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::Error;
use crate::linalg;
use crate::Result;

/// Dense complex matrix, row-major.
pub type CMatrix = Array2<Complex64>;

/// Truncation sizes of the composite cavity⊗mechanics space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertDims {
    pub n_photon_states: usize,
    pub n_phonon_states: usize,
}

impl HilbertDims {
    /// At least two photon states (|0> and |1>) and one phonon state.
    pub fn new(n_photon_states: usize, n_phonon_states: usize) -> Result<Self> {
        if n_photon_states < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 photon states, got {n_photon_states}"
            )));
        }
        if n_phonon_states < 1 {
            return Err(Error::InvalidDimension(
                "need at least 1 phonon state".into(),
            ));
        }
        Ok(Self {
            n_photon_states,
            n_phonon_states,
        })
    }

    pub fn composite_dim(&self) -> usize {
        self.n_photon_states * self.n_phonon_states
    }

    /// Composite basis index of |photon, phonon>.
    pub fn composite_index(&self, photon: usize, phonon: usize) -> usize {
        debug_assert!(photon < self.n_photon_states);
        debug_assert!(phonon < self.n_phonon_states);
        photon * self.n_phonon_states + phonon
    }
}

/// Annihilation operator on a `dim`-state Fock space:
/// `<n-1|a|n> = sqrt(n)`.
pub fn destroy(dim: usize) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension(
            "annihilation operator needs dim >= 1".into(),
        ));
    }
    let mut a = CMatrix::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Number operator, exact diagonal 0..dim-1.
pub fn number(dim: usize) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension(
            "number operator needs dim >= 1".into(),
        ));
    }
    let mut n_op = CMatrix::zeros((dim, dim));
    for n in 0..dim {
        n_op[[n, n]] = Complex64::new(n as f64, 0.0);
    }
    Ok(n_op)
}

pub fn identity(dim: usize) -> CMatrix {
    let mut id = CMatrix::zeros((dim, dim));
    for n in 0..dim {
        id[[n, n]] = Complex64::new(1.0, 0.0);
    }
    id
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    let (rows, cols) = m.dim();
    CMatrix::from_shape_fn((cols, rows), |(i, j)| m[[j, i]].conj())
}

/// Kronecker product; dimensions multiply.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// `tr(op * rho)`.
pub fn expect(op: &CMatrix, rho: &CMatrix) -> Result<Complex64> {
    if op.dim() != rho.dim() || op.nrows() != op.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expect: op is {:?}, rho is {:?}",
            op.dim(),
            rho.dim()
        )));
    }
    let n = op.nrows();
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            tr += op[[i, k]] * rho[[k, i]];
        }
    }
    Ok(tr)
}

/// Largest entrywise deviation from Hermiticity, `max |M - M^dagger|`.
pub fn hermiticity_violation(m: &CMatrix) -> f64 {
    let (rows, cols) = m.dim();
    assert_eq!(rows, cols, "hermiticity is defined for square matrices");
    let mut max = 0.0f64;
    for i in 0..rows {
        for j in 0..cols {
            let d = (m[[i, j]] - m[[j, i]].conj()).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

fn one_norm(m: &CMatrix) -> f64 {
    let (rows, cols) = m.dim();
    let mut max = 0.0f64;
    for j in 0..cols {
        let mut s = 0.0;
        for i in 0..rows {
            s += m[[i, j]].norm();
        }
        if s > max {
            max = s;
        }
    }
    max
}

/// Matrix exponential by Pade approximation with scaling and squaring.
///
/// Verification oracle only; accuracy is limited by conditioning but
/// reaches ~1e-10 entrywise for the well-conditioned operators used in
/// the squeeze-overlap cross-checks.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {rows}x{cols}"
        )));
    }
    let norm = one_norm(m);

    const THETA_3: f64 = 1.495585217958292e-2;
    #[allow(clippy::excessive_precision)]
    const THETA_5: f64 = 2.539398330063230e-1;
    const THETA_7: f64 = 9.504178996162932e-1;
    const THETA_9: f64 = 2.097847961257068;
    const THETA_13: f64 = 5.371920351148152;

    if norm <= THETA_9 {
        let order = if norm <= THETA_3 {
            3
        } else if norm <= THETA_5 {
            5
        } else if norm <= THETA_7 {
            7
        } else {
            9
        };
        return pade(m, order);
    }

    let scaling = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = m.mapv(|v| v / 2f64.powi(scaling as i32));
    let mut result = pade(&scaled, 13)?;
    for _ in 0..scaling {
        result = result.dot(&result);
    }
    Ok(result)
}

fn pade_coefficients(order: usize) -> &'static [f64] {
    match order {
        3 => &[120., 60., 12., 1.],
        5 => &[30240., 15120., 3360., 420., 30., 1.],
        7 => &[
            17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.,
        ],
        9 => &[
            17643225600.,
            8821612800.,
            2075673600.,
            302702400.,
            30270240.,
            2162160.,
            110880.,
            3960.,
            90.,
            1.,
        ],
        13 => &[
            64764752532480000.,
            32382376266240000.,
            7771770303897600.,
            1187353796428800.,
            129060195264000.,
            10559470521600.,
            670442572800.,
            33522128640.,
            1323241920.,
            40840800.,
            960960.,
            16380.,
            182.,
            1.,
        ],
        _ => unreachable!("unsupported Pade order"),
    }
}

fn pade(a: &CMatrix, order: usize) -> Result<CMatrix> {
    let n = a.nrows();
    let b = pade_coefficients(order);
    let id = identity(n);
    let a2 = a.dot(a);

    let (u, v) = if order <= 9 {
        // Even powers a^0, a^2, a^4, ...
        let mut powers = vec![id.clone(), a2.clone()];
        while powers.len() <= order / 2 {
            let next = powers.last().unwrap().dot(&a2);
            powers.push(next);
        }
        let mut u_poly = CMatrix::zeros((n, n));
        let mut v_poly = CMatrix::zeros((n, n));
        for (k, p) in powers.iter().enumerate() {
            u_poly = u_poly + p.mapv(|x| x * b[2 * k + 1]);
            v_poly = v_poly + p.mapv(|x| x * b[2 * k]);
        }
        (a.dot(&u_poly), v_poly)
    } else {
        let a4 = a2.dot(&a2);
        let a6 = a4.dot(&a2);
        let u_inner = a6.mapv(|x| x * b[13]) + a4.mapv(|x| x * b[11]) + a2.mapv(|x| x * b[9]);
        let u_poly = a6.dot(&u_inner)
            + a6.mapv(|x| x * b[7])
            + a4.mapv(|x| x * b[5])
            + a2.mapv(|x| x * b[3])
            + id.mapv(|x| x * b[1]);
        let v_inner = a6.mapv(|x| x * b[12]) + a4.mapv(|x| x * b[10]) + a2.mapv(|x| x * b[8]);
        let v_poly = a6.dot(&v_inner)
            + a6.mapv(|x| x * b[6])
            + a4.mapv(|x| x * b[4])
            + a2.mapv(|x| x * b[2])
            + id.mapv(|x| x * b[0]);
        (a.dot(&u_poly), v_poly)
    };

    // Solve (V - U) R = (V + U).
    let denom = &v - &u;
    let numer = &v + &u;
    let mut a_buf: Vec<Complex64> = denom.iter().copied().collect();
    let mut b_buf: Vec<Complex64> = numer.iter().copied().collect();
    linalg::solve_complex_matrix(&mut a_buf, n, &mut b_buf, n)?;
    Ok(CMatrix::from_shape_vec((n, n), b_buf).expect("shape preserved"))
}
