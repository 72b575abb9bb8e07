//! K-mode Gaussian states in quadrature form and their characteristic
//! functions.
//!
//! Conventions, fixed repo-wide: quadrature ordering `(q1, p1, ..., qK, pK)`,
//! shot-noise units with vacuum variance 1 (hbar = 2), and the characteristic
//! function
//!
//! ```text
//!   chi(xi) = exp(-1/2 xt^H Vt xt + mt^H xt)
//! ```
//!
//! where `xt = (xi_1, xi_1*, ..., xi_K, xi_K*)^T` is the augmented argument,
//! `Vt = Z J V J^H Z`, `mt = Z J mu`, `Z = I_K (x) diag(1, -1)` and
//! `J = I_K (x) [1, i; 1, -i] / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Two-mode squeezing strength with the dB convention
/// `r_dB = -10 log10(exp(-2r))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingParam {
    r: f64,
}

impl SqueezingParam {
    pub fn from_r(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "squeezing parameter must be finite and non-negative, got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::from_r(db * std::f64::consts::LN_10 / 20.0)
    }

    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 1), got {lambda}"
            )));
        }
        Ok(Self { r: lambda.atanh() })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// tanh r
    pub fn lambda(&self) -> f64 {
        self.r.tanh()
    }

    /// cosh 2r, the quadrature variance of the two-mode squeezed vacuum.
    pub fn v_scalar(&self) -> f64 {
        (2.0 * self.r).cosh()
    }

    pub fn r_db(&self) -> f64 {
        20.0 * self.r / std::f64::consts::LN_10
    }
}

/// Transmissivities of the two independent pure-loss channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
}

impl ChannelParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        for t in [t1, t2] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "transmissivity must lie in (0, 1], got {t}"
                )));
            }
        }
        Ok(Self { t1, t2 })
    }
}

/// K-mode Gaussian state: real symmetric covariance plus quadrature means.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    modes: usize,
    cov: DMatrix<f64>,
    mean: DVector<f64>,
}

impl GaussianState {
    pub fn new(modes: usize, cov: DMatrix<f64>, mean: DVector<f64>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter(
                "mode count must be positive".into(),
            ));
        }
        let d = 2 * modes;
        if cov.nrows() != d || cov.ncols() != d || mean.len() != d {
            return Err(Error::InvalidParameter(format!(
                "expected {d}x{d} covariance and length-{d} means"
            )));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { modes, cov, mean })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            cov: DMatrix::identity(2 * modes, 2 * modes),
            mean: DVector::zeros(2 * modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + i Omega`; physical
    /// states satisfy `>= -1e-9`.
    pub fn uncertainty_eigenvalue(&self) -> f64 {
        let d = 2 * self.modes;
        let mut m = DMatrix::from_element(d, d, Complex64::ZERO);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = Complex64::new(self.cov[(i, j)], 0.0);
            }
        }
        for k in 0..self.modes {
            m[(2 * k, 2 * k + 1)] += I;
            m[(2 * k + 1, 2 * k)] -= I;
        }
        let eig = m.symmetric_eigenvalues();
        eig.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn is_physical(&self) -> bool {
        self.uncertainty_eigenvalue() >= -1e-9
    }

    /// Augmented covariance `Vt = Z J V J^H Z` (Hermitian, complex).
    pub fn v_tilde(&self) -> DMatrix<Complex64> {
        let j = self.j_matrix();
        let z = self.z_matrix();
        let vc = self.cov.map(|x| Complex64::new(x, 0.0));
        &z * &j * vc * j.adjoint() * &z
    }

    /// Augmented means `mt = Z J mu`.
    pub fn mu_tilde(&self) -> DVector<Complex64> {
        let j = self.j_matrix();
        let z = self.z_matrix();
        let mc = self.mean.map(|x| Complex64::new(x, 0.0));
        &z * &j * mc
    }

    fn j_matrix(&self) -> DMatrix<Complex64> {
        let d = 2 * self.modes;
        let mut j = DMatrix::from_element(d, d, Complex64::ZERO);
        for k in 0..self.modes {
            let r = 2 * k;
            j[(r, r)] = Complex64::new(0.5, 0.0);
            j[(r, r + 1)] = 0.5 * I;
            j[(r + 1, r)] = Complex64::new(0.5, 0.0);
            j[(r + 1, r + 1)] = -0.5 * I;
        }
        j
    }

    fn z_matrix(&self) -> DMatrix<Complex64> {
        let d = 2 * self.modes;
        let mut z = DMatrix::from_element(d, d, Complex64::ZERO);
        for k in 0..self.modes {
            z[(2 * k, 2 * k)] = Complex64::new(1.0, 0.0);
            z[(2 * k + 1, 2 * k + 1)] = Complex64::new(-1.0, 0.0);
        }
        z
    }

    /// True when the state is zero-mean with the two-mode covariance pattern
    /// `[[v1, 0, s, 0], [0, v1, 0, -s], [s, 0, v2, 0], [0, -s, 0, v2]]`,
    /// for which every diagonal response quantity is a function of |xi|^2.
    pub fn has_radial_response(&self) -> bool {
        if self.mean.iter().any(|&m| m.abs() > 1e-12) {
            return false;
        }
        if self.modes == 1 {
            let c = &self.cov;
            return (c[(0, 0)] - c[(1, 1)]).abs() <= 1e-12 && c[(0, 1)].abs() <= 1e-12;
        }
        if self.modes != 2 {
            return false;
        }
        let c = &self.cov;
        let v1 = c[(0, 0)];
        let v2 = c[(2, 2)];
        let s = c[(0, 2)];
        let tol = 1e-12 * (1.0 + v1.abs().max(v2.abs()).max(s.abs()));
        let pattern = DMatrix::from_row_slice(
            4,
            4,
            &[
                v1, 0.0, s, 0.0, //
                0.0, v1, 0.0, -s, //
                s, 0.0, v2, 0.0, //
                0.0, -s, 0.0, v2,
            ],
        );
        (&self.cov - pattern).iter().all(|&d| d.abs() <= tol)
    }
}

/// Two-mode squeezed vacuum with quadrature variance `cosh 2r`.
pub fn tmsv(r: SqueezingParam) -> GaussianState {
    let v = r.v_scalar();
    let s = (2.0 * r.r()).sinh();
    let cov = DMatrix::from_row_slice(
        4,
        4,
        &[
            v, 0.0, s, 0.0, //
            0.0, v, 0.0, -s, //
            s, 0.0, v, 0.0, //
            0.0, -s, 0.0, v,
        ],
    );
    GaussianState {
        modes: 2,
        cov,
        mean: DVector::zeros(4),
    }
}

/// Two-mode squeezed coherent state: displacements applied after squeezing,
/// so the covariance equals the TMSV covariance and only the means change.
pub fn tmsc(r: SqueezingParam, z1: Complex64, z2: Complex64) -> GaussianState {
    let mut st = tmsv(r);
    st.mean = DVector::from_vec(vec![2.0 * z1.re, 2.0 * z1.im, 2.0 * z2.re, 2.0 * z2.im]);
    st
}

/// Displacements of the swapped-order definition (squeeze after displacing):
/// `z~_1 = z1 cosh r - z2* sinh r`, `z~_2 = z2 cosh r - z1* sinh r`.
pub fn tmsc_swapped_displacements(
    z1: Complex64,
    z2: Complex64,
    r: SqueezingParam,
) -> (Complex64, Complex64) {
    let ch = r.r().cosh();
    let sh = r.r().sinh();
    (z1 * ch - z2.conj() * sh, z2 * ch - z1.conj() * sh)
}

/// Two-mode squeezed thermal state with equal occupations: the TMSV
/// covariance scaled by `2 nbar + 1`.
pub fn tmst(r: SqueezingParam, nbar: f64) -> Result<GaussianState> {
    if nbar.is_nan() || nbar < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation must be non-negative, got {nbar}"
        )));
    }
    let mut st = tmsv(r);
    st.cov *= 2.0 * nbar + 1.0;
    Ok(st)
}

/// Single-mode squeezed vacuum, `Var(q) = e^{2s}`, `Var(p) = e^{-2s}`.
pub fn single_mode_squeezed(s: f64) -> GaussianState {
    let cov = DMatrix::from_row_slice(2, 2, &[(2.0 * s).exp(), 0.0, 0.0, (-2.0 * s).exp()]);
    GaussianState {
        modes: 1,
        cov,
        mean: DVector::zeros(2),
    }
}

/// Evaluate the characteristic function at a K-component complex argument.
pub fn gaussian_cf(state: &GaussianState, xi: &[Complex64]) -> Complex64 {
    assert_eq!(
        xi.len(),
        state.modes(),
        "argument length must match mode count"
    );
    let d = 2 * state.modes;
    let mut xt = DVector::from_element(d, Complex64::ZERO);
    for (k, &x) in xi.iter().enumerate() {
        xt[2 * k] = x;
        xt[2 * k + 1] = x.conj();
    }
    let vt = state.v_tilde();
    let mt = state.mu_tilde();
    let quad = (xt.adjoint() * &vt * &xt)[(0, 0)];
    let lin = (mt.adjoint() * &xt)[(0, 0)];
    (-0.5 * quad + lin).exp()
}

/// Propagate a two-mode state through independent pure-loss channels:
/// `V -> S V S + (I - S^2)`, `mu -> S mu`, `S = diag(sqrt(T1), sqrt(T1),
/// sqrt(T2), sqrt(T2))`.
pub fn apply_loss(state: &GaussianState, ch: ChannelParams) -> Result<GaussianState> {
    if state.modes() != 2 {
        return Err(Error::InvalidParameter(
            "loss channel is defined for two-mode states".into(),
        ));
    }
    let s = DVector::from_vec(vec![ch.t1.sqrt(), ch.t1.sqrt(), ch.t2.sqrt(), ch.t2.sqrt()]);
    let mut cov = state.cov.clone();
    for i in 0..4 {
        for j in 0..4 {
            cov[(i, j)] *= s[i] * s[j];
        }
        cov[(i, i)] += 1.0 - s[i] * s[i];
    }
    let mean = DVector::from_fn(4, |i, _| state.mean[i] * s[i]);
    Ok(GaussianState {
        modes: 2,
        cov,
        mean,
    })
}

// ---------------------------------------------------------------------------
// Serializable state descriptors
// ---------------------------------------------------------------------------

/// Complex scalar accepted either as a real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexDef {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexDef> for Complex64 {
    fn from(c: ComplexDef) -> Self {
        match c {
            ComplexDef::Real(re) => Complex64::new(re, 0.0),
            ComplexDef::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for ComplexDef {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            ComplexDef::Real(z.re)
        } else {
            ComplexDef::Pair([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateFamily {
    Tmsv,
    Tmsc,
    Tmst,
}

/// JSON-facing description of a resource state:
/// `{family, r_dB, z1?, z2?, nbar?, loss?: {T1, T2}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDescriptor {
    pub family: StateFamily,
    #[serde(rename = "r_dB")]
    pub r_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<ComplexDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<ComplexDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<ChannelParams>,
}

impl StateDescriptor {
    pub fn tmsv_db(r_db: f64) -> Self {
        Self {
            family: StateFamily::Tmsv,
            r_db,
            z1: None,
            z2: None,
            nbar: None,
            loss: None,
        }
    }

    pub fn squeezing(&self) -> Result<SqueezingParam> {
        SqueezingParam::from_db(self.r_db)
    }

    /// The described state before any loss channel.
    pub fn family_state(&self) -> Result<GaussianState> {
        let r = self.squeezing()?;
        match self.family {
            StateFamily::Tmsv => Ok(tmsv(r)),
            StateFamily::Tmsc => {
                let z1 = self.z1.map(Complex64::from).unwrap_or(Complex64::ZERO);
                let z2 = self.z2.map(Complex64::from).unwrap_or(Complex64::ZERO);
                Ok(tmsc(r, z1, z2))
            }
            StateFamily::Tmst => tmst(r, self.nbar.unwrap_or(0.0)),
        }
    }

    /// The described state with its loss channel applied (if any).
    pub fn to_state(&self) -> Result<GaussianState> {
        let st = self.family_state()?;
        match self.loss {
            Some(ch) => apply_loss(&st, ChannelParams::new(ch.t1, ch.t2)?),
            None => Ok(st),
        }
    }
}
