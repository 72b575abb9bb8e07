//! Photon-varying operations on Gaussian states in the CF picture.
//!
//! Subtracting (or adding) `n_i` photons per mode multiplies the Gaussian CF
//! by a multi-index Hermite function of the augmented argument:
//!
//! ```text
//!   chi_PV(xi) = (-1)^{sum n_i} / N
//!                * H_{n1,n1,...,nK,nK}( X (Vt' xt + mt); -1/2 X Vt' )
//!                * chi(xi),
//!   Vt' = Vt + diag(t1, t1, ..., tK, tK) / 2,   X = I_K (x) [0,1;1,0],
//!   N   = (-1)^{sum n_i} H_{n1,n1,...}( X mt; -1/2 X Vt' ),
//! ```
//!
//! with `t_i = -1` for subtraction and `+1` for addition on mode `i`.
//!
//! Generalized operations `sum_n e_n a1^{dag n} a2^{dag n}` lead to a
//! quadratic form in the coefficient vector over a matrix of four-index
//! Hermite values; the same machinery also yields the response-ratio function
//! and the NLA coefficient mapping.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_states::{gaussian_cf, GaussianState, SqueezingParam};
use crate::hermite::{
    hermite_two_mode_four_index, stirling2, HermiteEvaluator, MultiIndex, PrecisionPolicy,
    DEGREE_CAP,
};

/// Relative tolerance on imaginary residues of quantities required real.
const IMAG_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Simple photon-varying specs
// ---------------------------------------------------------------------------

/// Per-mode operation: `t = -1` subtracts, `t = +1` adds `n` photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeOp {
    pub t: i8,
    pub n: u32,
}

impl ModeOp {
    pub fn subtract(n: u32) -> Self {
        Self { t: -1, n }
    }

    pub fn add(n: u32) -> Self {
        Self { t: 1, n }
    }
}

/// Photon-varying spec, one entry per mode of the target state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PVSpec {
    pub ops: Vec<ModeOp>,
}

impl PVSpec {
    pub fn new(ops: Vec<ModeOp>) -> Result<Self> {
        let spec = Self { ops };
        spec.validate()?;
        Ok(spec)
    }

    /// Same operation applied to both modes of a two-mode state.
    pub fn symmetric(t: i8, n: u32) -> Result<Self> {
        Self::new(vec![ModeOp { t, n }, ModeOp { t, n }])
    }

    fn validate(&self) -> Result<()> {
        for op in &self.ops {
            if op.t != -1 && op.t != 1 {
                return Err(Error::InvalidParameter(format!(
                    "mode op sign must be -1 or +1, got {}",
                    op.t
                )));
            }
        }
        let degree = 2 * self.total_photons();
        if degree > DEGREE_CAP {
            return Err(Error::DegreeLimit {
                degree,
                max: DEGREE_CAP,
            });
        }
        Ok(())
    }

    pub fn total_photons(&self) -> u32 {
        self.ops.iter().map(|op| op.n).sum()
    }

    pub fn modes(&self) -> usize {
        self.ops.len()
    }
}

/// Sign `(-1)^{sum n_i}` and the doubled Hermite index `(n1,n1,...,nK,nK)`.
fn pv_index(spec: &PVSpec) -> (f64, MultiIndex) {
    let mut idx = Vec::with_capacity(2 * spec.ops.len());
    for op in &spec.ops {
        idx.push(op.n);
        idx.push(op.n);
    }
    let sign = if spec.total_photons().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    (sign, MultiIndex::new(idx).expect("validated by PVSpec"))
}

/// `X = I_K (x) [0,1;1,0]`: swaps the two augmented slots of each mode.
fn swap_within_modes_vec(v: &DVector<Complex64>) -> DVector<Complex64> {
    let d = v.len();
    DVector::from_fn(d, |i, _| if i % 2 == 0 { v[i + 1] } else { v[i - 1] })
}

fn swap_within_modes_rows(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = m.nrows();
    DMatrix::from_fn(d, d, |i, j| {
        if i % 2 == 0 {
            m[(i + 1, j)]
        } else {
            m[(i - 1, j)]
        }
    })
}

/// Shared augmented geometry of a photon-varied family: `Vt'`, `mt`, the
/// Hermite matrix `-1/2 X Vt'` and the affine map to the Hermite argument.
#[derive(Debug)]
struct PvGeometry {
    vt_prime: DMatrix<Complex64>,
    mu_tilde: DVector<Complex64>,
    hermite_matrix: DMatrix<Complex64>,
}

impl PvGeometry {
    fn new(base: &GaussianState, ts: &[i8]) -> Self {
        let d = 2 * base.modes();
        let mut vt_prime = base.v_tilde();
        for (k, &t) in ts.iter().enumerate() {
            vt_prime[(2 * k, 2 * k)] += Complex64::new(t as f64 / 2.0, 0.0);
            vt_prime[(2 * k + 1, 2 * k + 1)] += Complex64::new(t as f64 / 2.0, 0.0);
        }
        let mu_tilde = base.mu_tilde();
        let mut hm = swap_within_modes_rows(&vt_prime) * Complex64::new(-0.5, 0.0);
        // Symmetrize away last-ulp asymmetry from the matrix products.
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (hm[(i, j)] + hm[(j, i)]);
                hm[(i, j)] = avg;
                hm[(j, i)] = avg;
            }
        }
        Self {
            vt_prime,
            mu_tilde,
            hermite_matrix: hm,
        }
    }

    /// Hermite argument `X (Vt' xt + mt)` at an augmented point.
    fn argument(&self, xt: &DVector<Complex64>) -> DVector<Complex64> {
        let v = &self.vt_prime * xt + &self.mu_tilde;
        swap_within_modes_vec(&v)
    }

    fn origin_argument(&self) -> DVector<Complex64> {
        swap_within_modes_vec(&self.mu_tilde)
    }
}

fn augment_point(xi: &[Complex64]) -> DVector<Complex64> {
    let mut xt = DVector::from_element(2 * xi.len(), Complex64::ZERO);
    for (k, &x) in xi.iter().enumerate() {
        xt[2 * k] = x;
        xt[2 * k + 1] = x.conj();
    }
    xt
}

/// Augmented vector of a formal two-mode point `(xi1, xi2)`.
fn augment_pair(xi1: Complex64, xi2: Complex64) -> DVector<Complex64> {
    DVector::from_vec(vec![xi1, xi1.conj(), xi2, xi2.conj()])
}

/// Gaussian state with per-mode photon subtraction/addition applied.
///
/// Normalization is computed once at construction; evaluation is pure.
#[derive(Debug)]
pub struct PhotonVariedState {
    base: GaussianState,
    spec: PVSpec,
    geometry: PvGeometry,
    evaluator: HermiteEvaluator,
    sign: f64,
    norm: f64,
}

impl PhotonVariedState {
    pub fn new(base: GaussianState, spec: PVSpec, policy: PrecisionPolicy) -> Result<Self> {
        if spec.modes() != base.modes() {
            return Err(Error::InvalidParameter(format!(
                "spec has {} mode entries but the state has {} modes",
                spec.modes(),
                base.modes()
            )));
        }
        spec.validate()?;
        let ts: Vec<i8> = spec.ops.iter().map(|op| op.t).collect();
        let geometry = PvGeometry::new(&base, &ts);
        let (sign, idx) = pv_index(&spec);
        let evaluator = HermiteEvaluator::new(&geometry.hermite_matrix, &idx, policy)?;
        let h0 = evaluator.eval(geometry.origin_argument().as_slice())?;
        let norm = sign * h0.re;
        if h0.im.abs() > IMAG_TOL * h0.re.abs().max(1.0) {
            return Err(Error::ImaginaryResidue {
                imag: h0.im.abs(),
                scale: h0.re.abs(),
            });
        }
        if norm.is_nan() || norm <= 1e-14 {
            return Err(Error::NonPositiveNorm { norm });
        }
        Ok(Self {
            base,
            spec,
            geometry,
            evaluator,
            sign,
            norm,
        })
    }

    pub fn base(&self) -> &GaussianState {
        &self.base
    }

    pub fn spec(&self) -> &PVSpec {
        &self.spec
    }

    /// The normalization constant `N` (the pre-normalization weight of the
    /// operation, e.g. `V sinh^2 r` for symmetric one-photon subtraction on
    /// a two-mode squeezed vacuum).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// The non-Gaussian multiplier of the base CF at a formal two-mode
    /// point; equals 1 at the origin.
    pub fn cf_ratio_at(&self, xi1: Complex64, xi2: Complex64) -> Result<Complex64> {
        let xt = augment_pair(xi1, xi2);
        let h = self
            .evaluator
            .eval(self.geometry.argument(&xt).as_slice())?;
        Ok(self.sign * h / self.norm)
    }

    /// Photon-varied CF at a K-component argument.
    pub fn cf(&self, xi: &[Complex64]) -> Result<Complex64> {
        let xt = augment_point(xi);
        let h = self
            .evaluator
            .eval(self.geometry.argument(&xt).as_slice())?;
        Ok(self.sign * h / self.norm * gaussian_cf(&self.base, xi))
    }

    /// Response ratio `H(xi) = chi_PV(xi, xi*) / chi(xi, xi*)`, checked real.
    pub fn response_ratio(&self, xi: Complex64) -> Result<f64> {
        let ratio = self.cf_ratio_at(xi, xi.conj())?;
        realize(ratio)
    }
}

fn realize(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue {
            imag: z.im.abs(),
            scale: z.re.abs(),
        });
    }
    Ok(z.re)
}

// ---------------------------------------------------------------------------
// Generalized photon-varying operations
// ---------------------------------------------------------------------------

/// Coefficient vector of the generalized operation
/// `A_N^dag = sum_{n=0}^N e_n a1^dag^n a2^dag^n` (or its conjugate `A_N`).
///
/// Coefficients are stored with unit Euclidean norm; the response ratio is
/// invariant under rescaling, so the convention is free.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPVSpec {
    e: Vec<f64>,
    dagger: bool,
}

impl GeneralizedPVSpec {
    pub fn new(e: Vec<f64>, dagger: bool) -> Result<Self> {
        if e.is_empty() {
            return Err(Error::InvalidParameter(
                "coefficient vector must be non-empty".into(),
            ));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "coefficients must be finite".into(),
            ));
        }
        let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::InvalidParameter(
                "coefficient vector must be nonzero".into(),
            ));
        }
        let order = (e.len() - 1) as u32;
        if 4 * order > DEGREE_CAP {
            return Err(Error::DegreeLimit {
                degree: 4 * order,
                max: DEGREE_CAP,
            });
        }
        Ok(Self {
            e: e.iter().map(|x| x / norm).collect(),
            dagger,
        })
    }

    pub fn order(&self) -> usize {
        self.e.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.e
    }

    pub fn dagger(&self) -> bool {
        self.dagger
    }
}

/// Evaluators for the Hermite matrix entries `H_{k,j,k,j}` of a generalized
/// operation family over a fixed base state and branch; independent of the
/// coefficient vector, so optimizers can precompute node matrices once.
#[derive(Debug)]
pub struct GeneralizedFamily {
    base: GaussianState,
    order: usize,
    geometry: PvGeometry,
    evaluators: Vec<HermiteEvaluator>, // row-major (j, k)
}

impl GeneralizedFamily {
    pub fn new(
        base: GaussianState,
        dagger: bool,
        order: usize,
        policy: PrecisionPolicy,
    ) -> Result<Self> {
        if base.modes() != 2 {
            return Err(Error::InvalidParameter(
                "generalized operations act on two-mode states".into(),
            ));
        }
        let t = if dagger { 1i8 } else { -1i8 };
        let geometry = PvGeometry::new(&base, &[t, t]);
        let n = order as u32;
        let mut evaluators = Vec::with_capacity((order + 1) * (order + 1));
        for j in 0..=n {
            for k in 0..=n {
                let idx = MultiIndex::new(vec![k, j, k, j])?;
                evaluators.push(HermiteEvaluator::new(
                    &geometry.hermite_matrix,
                    &idx,
                    policy,
                )?);
            }
        }
        Ok(Self {
            base,
            order,
            geometry,
            evaluators,
        })
    }

    pub fn base(&self) -> &GaussianState {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Matrix of Hermite values at a formal two-mode point, entry
    /// `(j, k) = H_{k,j,k,j}`.
    pub fn h_matrix_at(&self, xi1: Complex64, xi2: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.order + 1;
        let xt = augment_pair(xi1, xi2);
        let x = self.geometry.argument(&xt);
        let mut m = DMatrix::from_element(n, n, Complex64::ZERO);
        for j in 0..n {
            for k in 0..n {
                m[(j, k)] = self.evaluators[j * n + k].eval(x.as_slice())?;
            }
        }
        Ok(m)
    }
}

/// Two-mode Gaussian state with a generalized photon-varying operation.
///
/// The CF ratio against the base state is the quadratic form
/// `e^T Hm(xi1, xi2) e / e^T Hm(0, 0) e`, where entry `(j, k)` of `Hm` is the
/// four-index Hermite value `H_{k,j,k,j}` of the underlying family (`t = +1`
/// for the dagger variant, `t = -1` otherwise).
#[derive(Debug)]
pub struct GeneralizedPvState {
    family: GeneralizedFamily,
    spec: GeneralizedPVSpec,
    norm0: f64,
}

impl GeneralizedPvState {
    pub fn new(
        base: GaussianState,
        spec: GeneralizedPVSpec,
        policy: PrecisionPolicy,
    ) -> Result<Self> {
        let family = GeneralizedFamily::new(base, spec.dagger, spec.order(), policy)?;
        let h0 = family.h_matrix_at(Complex64::ZERO, Complex64::ZERO)?;
        let norm0 = realize(quadratic_form(&spec.e, &h0))?;
        if norm0.is_nan() || norm0 <= 1e-14 {
            return Err(Error::NonPositiveNorm { norm: norm0 });
        }
        Ok(Self {
            family,
            spec,
            norm0,
        })
    }

    pub fn base(&self) -> &GaussianState {
        self.family.base()
    }

    pub fn spec(&self) -> &GeneralizedPVSpec {
        &self.spec
    }

    pub fn h_matrix_complex_at(
        &self,
        xi1: Complex64,
        xi2: Complex64,
    ) -> Result<DMatrix<Complex64>> {
        self.family.h_matrix_at(xi1, xi2)
    }

    /// CF ratio against the base Gaussian at a formal two-mode point.
    pub fn cf_ratio_at(&self, xi1: Complex64, xi2: Complex64) -> Result<Complex64> {
        let m = self.family.h_matrix_at(xi1, xi2)?;
        Ok(quadratic_form(&self.spec.e, &m) / self.norm0)
    }

    pub fn cf(&self, xi: &[Complex64]) -> Result<Complex64> {
        if xi.len() != 2 {
            return Err(Error::InvalidParameter(
                "expected a two-mode argument".into(),
            ));
        }
        Ok(self.cf_ratio_at(xi[0], xi[1])? * gaussian_cf(self.base(), xi))
    }

    /// Response ratio of the generalized operation, checked real.
    pub fn response_ratio(&self, xi: Complex64) -> Result<f64> {
        realize(self.cf_ratio_at(xi, xi.conj())?)
    }
}

fn quadratic_form(e: &[f64], m: &DMatrix<Complex64>) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for j in 0..e.len() {
        for k in 0..e.len() {
            acc += e[j] * e[k] * m[(j, k)];
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Four-index fast path for radial resources
// ---------------------------------------------------------------------------

/// Constants `(A, B, C)` of the four-index closed form for a zero-mean state
/// with the symmetric two-mode covariance pattern (TMSV and TMST).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourIndexConsts {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FourIndexConsts {
    /// `A = B = -(v + t)/2`, `C = s/2` where `v` is the quadrature variance
    /// and `s` the cross correlation of the state (`t = +1` for the dagger
    /// branch, `-1` for the plain branch).
    pub fn for_state(base: &GaussianState, dagger: bool) -> Result<Self> {
        if base.modes() != 2 || !base.has_radial_response() {
            return Err(Error::InvalidParameter(
                "four-index constants require a zero-mean symmetric two-mode state".into(),
            ));
        }
        let cov = base.covariance();
        let v1 = cov[(0, 0)];
        let v2 = cov[(2, 2)];
        if (v1 - v2).abs() > 1e-12 * v1.abs().max(1.0) {
            return Err(Error::InvalidParameter(
                "four-index constants require equal mode variances".into(),
            ));
        }
        let s = cov[(0, 2)];
        let t = if dagger { 1.0 } else { -1.0 };
        Ok(Self {
            a: -(v1 + t) / 2.0,
            b: -(v1 + t) / 2.0,
            c: s / 2.0,
        })
    }

    pub fn tmsv(r: SqueezingParam, dagger: bool) -> Self {
        let v = r.v_scalar();
        let t = if dagger { 1.0 } else { -1.0 };
        Self {
            a: -(v + t) / 2.0,
            b: -(v + t) / 2.0,
            c: (v * v - 1.0).sqrt() / 2.0,
        }
    }

    pub fn tmst(r: SqueezingParam, nbar: f64, dagger: bool) -> Self {
        let tau = 2.0 * nbar + 1.0;
        let v = r.v_scalar();
        let t = if dagger { 1.0 } else { -1.0 };
        Self {
            a: -(tau * v + t) / 2.0,
            b: -(tau * v + t) / 2.0,
            c: tau * (v * v - 1.0).sqrt() / 2.0,
        }
    }
}

/// Matrix of four-index Hermite values for the dagger-branch TMSV family,
/// entry `(j, k) = H_{k,j,k,j}(xi, xi*)` with `A = B = -(V+1)/2` and
/// `C = sqrt(V^2-1)/2`. Real symmetric; positive definite at the origin.
pub fn h_matrix(
    r: SqueezingParam,
    n_max: usize,
    xi: Complex64,
    policy: PrecisionPolicy,
) -> Result<DMatrix<f64>> {
    h_matrix_with(FourIndexConsts::tmsv(r, true), n_max, xi, policy)
}

/// Same as [`h_matrix`] for arbitrary four-index constants.
pub fn h_matrix_with(
    consts: FourIndexConsts,
    n_max: usize,
    xi: Complex64,
    policy: PrecisionPolicy,
) -> Result<DMatrix<f64>> {
    let n = n_max + 1;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let h = hermite_two_mode_four_index(
                consts.a,
                consts.b,
                consts.c,
                [k as u32, j as u32, k as u32, j as u32],
                xi,
                xi.conj(),
                policy,
            )?;
            m[(j, k)] = realize(h)?;
        }
    }
    Ok(m)
}

/// Response ratio of a generalized spec over a radial family, evaluated
/// through the four-index fast path.
pub fn response_ratio_radial(
    consts: FourIndexConsts,
    spec: &GeneralizedPVSpec,
    xi: Complex64,
    policy: PrecisionPolicy,
) -> Result<f64> {
    let m = h_matrix_with(consts, spec.order(), xi, policy)?;
    let m0 = h_matrix_with(consts, spec.order(), Complex64::ZERO, policy)?;
    let e = DVector::from_column_slice(spec.coefficients());
    let num = (e.transpose() * &m * &e)[(0, 0)];
    let den = (e.transpose() * &m0 * &e)[(0, 0)];
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Noiseless-linear-amplifier coefficients
// ---------------------------------------------------------------------------

/// Coefficients making `A_N^dag` act on a TMSV like the NLA `g^{a1^dag a1}`
/// truncated at order `N`:
///
/// ```text
///   e_0 = 1,   e_m = lambda^m sum_{n=m}^{N} (ln^n g / n!) S(n, m),
/// ```
///
/// returned with unit Euclidean norm.
pub fn nla_coefficients(g: f64, n_max: usize, r: SqueezingParam) -> Result<Vec<f64>> {
    if !g.is_finite() || g <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gain must be positive and finite, got {g}"
        )));
    }
    let lambda = r.lambda();
    let lng = g.ln();
    let mut e = Vec::with_capacity(n_max + 1);
    e.push(1.0);
    for m in 1..=n_max {
        let mut acc = 0.0f64;
        let mut lng_term = lng.powi(m as i32) / crate::numerics::factorial_f64(m as u32);
        for n in m..=n_max {
            if n > m {
                lng_term *= lng / n as f64;
            }
            acc += lng_term * stirling_to_f64(n as u32, m as u32)?;
        }
        e.push(lambda.powi(m as i32) * acc);
    }
    let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(e.into_iter().map(|x| x / norm).collect())
}

fn stirling_to_f64(n: u32, m: u32) -> Result<f64> {
    let s = stirling2(n, m)?;
    s.to_string()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter("stirling number out of f64 range".into()))
}

/// Upper gain bound `sqrt((V+1)/(V-1)) = 1/lambda` of the truncated NLA.
pub fn nla_gain_limit(r: SqueezingParam) -> f64 {
    1.0 / r.lambda()
}

// ---------------------------------------------------------------------------
// Serializable operation descriptors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedDef {
    #[serde(rename = "N")]
    pub order: usize,
    pub e: Vec<f64>,
    pub dagger: bool,
}

/// JSON fragment for an operation: `{"pv": [{t, n}, ...]}` or
/// `{"generalized": {"N": .., "e": [..], "dagger": ..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperationDescriptor {
    Pv { pv: Vec<ModeOp> },
    Generalized { generalized: GeneralizedDef },
}

impl OperationDescriptor {
    pub fn pv_spec(&self) -> Result<Option<PVSpec>> {
        match self {
            Self::Pv { pv } => Ok(Some(PVSpec::new(pv.clone())?)),
            Self::Generalized { .. } => Ok(None),
        }
    }

    pub fn generalized_spec(&self) -> Result<Option<GeneralizedPVSpec>> {
        match self {
            Self::Pv { .. } => Ok(None),
            Self::Generalized { generalized } => {
                if generalized.e.len() != generalized.order + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "generalized spec declares N={} but has {} coefficients",
                        generalized.order,
                        generalized.e.len()
                    )));
                }
                Ok(Some(GeneralizedPVSpec::new(
                    generalized.e.clone(),
                    generalized.dagger,
                )?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_states::tmsv;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn r8() -> SqueezingParam {
        SqueezingParam::from_db(8.0).unwrap()
    }

    #[test]
    fn zero_photon_spec_reproduces_gaussian_cf() {
        let st = tmsv(r8());
        let pv = PhotonVariedState::new(
            st.clone(),
            PVSpec::symmetric(-1, 0).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        for (x1, x2) in [(c(0.4, -0.2), c(0.8, 0.3)), (c(-1.0, 0.5), c(0.2, 0.2))] {
            let a = pv.cf(&[x1, x2]).unwrap();
            let b = gaussian_cf(&st, &[x1, x2]);
            assert!((a - b).norm() <= 1e-13 * b.norm());
        }
    }

    #[test]
    fn one_photon_addition_on_vacuum_gives_fock_one_cf() {
        let pv = PhotonVariedState::new(
            GaussianState::vacuum(1),
            PVSpec::new(vec![ModeOp::add(1)]).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        assert_relative_eq!(pv.norm(), 1.0, max_relative = 1e-13);
        for &xi in &[c(0.3, 0.0), c(0.9, -1.2), c(2.0, 1.0)] {
            let got = pv.cf(&[xi]).unwrap();
            let expect = (-xi.norm_sqr() / 2.0).exp() * (1.0 - xi.norm_sqr());
            assert!((got - c(expect, 0.0)).norm() <= 1e-13 * expect.abs().max(1e-3));
        }
    }

    #[test]
    fn subtraction_from_vacuum_is_rejected() {
        let err = PhotonVariedState::new(
            GaussianState::vacuum(1),
            PVSpec::new(vec![ModeOp::subtract(1)]).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonPositiveNorm { .. }));
    }

    #[test]
    fn symmetric_subtraction_norm_is_v_sinh_sq() {
        let r = r8();
        let pv = PhotonVariedState::new(
            tmsv(r),
            PVSpec::symmetric(-1, 1).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        let expect = r.v_scalar() * r.r().sinh().powi(2);
        assert_relative_eq!(pv.norm(), expect, max_relative = 1e-12);
    }

    #[test]
    fn pv_cf_is_exactly_one_at_origin() {
        let pv = PhotonVariedState::new(
            tmsv(r8()),
            PVSpec::symmetric(-1, 2).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        assert_eq!(
            pv.cf(&[Complex64::ZERO, Complex64::ZERO]).unwrap(),
            c(1.0, 0.0)
        );
    }

    #[test]
    fn response_ratio_is_one_at_origin() {
        let pv = PhotonVariedState::new(
            tmsv(r8()),
            PVSpec::symmetric(1, 2).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        assert_eq!(pv.response_ratio(Complex64::ZERO).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_subtraction_beats_unity_everywhere() {
        let pv = PhotonVariedState::new(
            tmsv(r8()),
            PVSpec::symmetric(-1, 1).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        for k in 1..=30 {
            let xi = c(0.1 * k as f64, 0.0);
            assert!(pv.response_ratio(xi).unwrap() > 1.0, "failed at {xi}");
        }
    }

    #[test]
    fn symmetric_addition_crosses_unity() {
        let pv = PhotonVariedState::new(
            tmsv(r8()),
            PVSpec::symmetric(1, 1).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        assert!(pv.response_ratio(c(0.5, 0.0)).unwrap() < 1.0);
        assert!(pv.response_ratio(c(2.5, 0.0)).unwrap() > 1.0);
    }

    #[test]
    fn response_ratio_depends_only_on_radius() {
        let pv = PhotonVariedState::new(
            tmsv(r8()),
            PVSpec::new(vec![ModeOp::subtract(2), ModeOp::subtract(1)]).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        let r0 = pv.response_ratio(c(1.3, 0.0)).unwrap();
        for ang in [0.4, 1.1, 2.0, 3.9, 5.5] {
            let xi = 1.3 * c(f64::cos(ang), f64::sin(ang));
            assert_relative_eq!(pv.response_ratio(xi).unwrap(), r0, max_relative = 1e-12);
        }
    }

    #[test]
    fn response_ratio_respects_upper_bound() {
        let r = r8();
        let hmax = |xi: Complex64| ((-2.0 * r.r()).exp() * xi.norm_sqr()).exp();
        for spec in [
            PVSpec::symmetric(-1, 1).unwrap(),
            PVSpec::symmetric(-1, 3).unwrap(),
            PVSpec::symmetric(1, 2).unwrap(),
            PVSpec::new(vec![ModeOp::subtract(1), ModeOp::add(1)]).unwrap(),
        ] {
            let pv = PhotonVariedState::new(tmsv(r), spec, PrecisionPolicy::machine()).unwrap();
            for k in 0..=15 {
                let xi = c(0.2 * k as f64, 0.0);
                assert!(pv.response_ratio(xi).unwrap() <= hmax(xi) + 1e-9);
            }
        }
    }

    #[test]
    fn generalized_order_zero_is_identity() {
        let st = GeneralizedPvState::new(
            tmsv(r8()),
            GeneralizedPVSpec::new(vec![1.0], true).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        for &xi in &[c(0.7, 0.1), c(1.9, -0.8)] {
            assert_relative_eq!(st.response_ratio(xi).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generalized_matches_simple_pv_for_single_term() {
        // e = (0, 1) with dagger keeps only a1^dag a2^dag: symmetric
        // one-photon addition.
        let gen = GeneralizedPvState::new(
            tmsv(r8()),
            GeneralizedPVSpec::new(vec![0.0, 1.0], true).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        let simple = PhotonVariedState::new(
            tmsv(r8()),
            PVSpec::symmetric(1, 1).unwrap(),
            PrecisionPolicy::machine(),
        )
        .unwrap();
        for &xi in &[c(0.4, 0.0), c(1.2, 0.9), c(2.3, -0.4)] {
            assert_relative_eq!(
                gen.response_ratio(xi).unwrap(),
                simple.response_ratio(xi).unwrap(),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn generalized_scale_invariance() {
        let e = vec![0.8, 0.4, -0.2, 0.1];
        let a = GeneralizedPVSpec::new(e.clone(), true).unwrap();
        let b = GeneralizedPVSpec::new(e.iter().map(|x| -3.7 * x).collect(), true).unwrap();
        let sa = GeneralizedPvState::new(tmsv(r8()), a, PrecisionPolicy::machine()).unwrap();
        let sb = GeneralizedPvState::new(tmsv(r8()), b, PrecisionPolicy::machine()).unwrap();
        for &xi in &[c(0.6, 0.3), c(1.8, -1.0)] {
            assert_relative_eq!(
                sa.response_ratio(xi).unwrap(),
                sb.response_ratio(xi).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn h_matrix_order_zero_is_unity_at_origin() {
        let m = h_matrix(r8(), 0, Complex64::ZERO, PrecisionPolicy::machine()).unwrap();
        assert_eq!(m.nrows(), 1);
        assert_relative_eq!(m[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn h_matrix_at_origin_is_gram_positive_definite() {
        // Orders above 6 push entry degrees past the machine limit and run
        // on the extended path. Diagonal entries grow factorially, so the
        // raw matrix spans ~17 orders of magnitude at N = 10 and f64
        // eigenvalues of it are meaningless at the small end; definiteness
        // is invariant under diagonal congruence, so test the balanced
        // (correlation) form instead.
        for n in [1usize, 3, 6, 8, 10] {
            let m = h_matrix(r8(), n, Complex64::ZERO, PrecisionPolicy::machine()).unwrap();
            assert!((&m - m.transpose()).amax() <= 1e-9 * m.amax());
            let d = m.nrows();
            let balanced =
                DMatrix::from_fn(d, d, |j, k| m[(j, k)] / (m[(j, j)] * m[(k, k)]).sqrt());
            let eig = balanced.symmetric_eigenvalues();
            assert!(
                eig.iter().all(|&l| l > 0.0),
                "N={n}: balanced eigenvalues {eig:?}"
            );
        }
    }

    #[test]
    fn machine_and_extended_agree_across_the_degree_boundary() {
        // Total degree 24 evaluates in f64, 28 in extended arithmetic under
        // the default policy; both must agree with a forced-extended run.
        let r = r8();
        let xi = c(1.3, -0.4);
        for idx in [[6u32, 6, 6, 6], [7, 7, 7, 7]] {
            let auto = hermite_two_mode_four_index(
                -(r.v_scalar() + 1.0) / 2.0,
                -(r.v_scalar() + 1.0) / 2.0,
                (r.v_scalar() * r.v_scalar() - 1.0).sqrt() / 2.0,
                idx,
                xi,
                xi.conj(),
                PrecisionPolicy::machine(),
            )
            .unwrap();
            let forced = hermite_two_mode_four_index(
                -(r.v_scalar() + 1.0) / 2.0,
                -(r.v_scalar() + 1.0) / 2.0,
                (r.v_scalar() * r.v_scalar() - 1.0).sqrt() / 2.0,
                idx,
                xi,
                xi.conj(),
                PrecisionPolicy::extended(320).unwrap(),
            )
            .unwrap();
            assert!(
                (auto - forced).norm() <= 1e-10 * forced.norm().max(1.0),
                "idx {idx:?}: {auto} vs {forced}"
            );
        }
    }

    #[test]
    fn h_matrix_vacuum_entries_are_factorial_squares() {
        // r = 0: entry (j,k) = delta_{jk} (k!)^2 from vacuum expectations.
        let r0 = SqueezingParam::from_r(0.0).unwrap();
        let m = h_matrix(r0, 3, Complex64::ZERO, PrecisionPolicy::machine()).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let expect = if j == k {
                    let f = crate::numerics::factorial_f64(k as u32);
                    f * f
                } else {
                    0.0
                };
                assert_relative_eq!(m[(j, k)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn h_matrix_matches_general_path_entries() {
        let r = r8();
        let spec = GeneralizedPVSpec::new(vec![0.5, 0.5, 0.5], true).unwrap();
        let gen = GeneralizedPvState::new(tmsv(r), spec, PrecisionPolicy::machine()).unwrap();
        for &xi in &[c(0.9, 0.5), c(1.7, -0.3)] {
            let fast = h_matrix(r, 2, xi, PrecisionPolicy::machine()).unwrap();
            let general = gen.h_matrix_complex_at(xi, xi.conj()).unwrap();
            for j in 0..3 {
                for k in 0..3 {
                    assert!(
                        (general[(j, k)] - c(fast[(j, k)], 0.0)).norm()
                            <= 1e-10 * fast[(j, k)].abs().max(1.0),
                        "entry ({j},{k}) at {xi}"
                    );
                }
            }
        }
    }

    #[test]
    fn nla_coefficients_low_orders() {
        let r = r8();
        let lambda = r.lambda();
        let g: f64 = 1.25;
        assert_eq!(nla_coefficients(g, 0, r).unwrap(), vec![1.0]);

        let e1 = nla_coefficients(g, 1, r).unwrap();
        let raw1 = [1.0, lambda * g.ln()];
        let n1 = (raw1[0] * raw1[0] + raw1[1] * raw1[1]).sqrt();
        assert_relative_eq!(e1[0], raw1[0] / n1, max_relative = 1e-14);
        assert_relative_eq!(e1[1], raw1[1] / n1, max_relative = 1e-14);

        let e2 = nla_coefficients(g, 2, r).unwrap();
        let l = g.ln();
        let raw2 = [
            1.0,
            lambda * (l + l * l / 2.0),
            lambda * lambda * l * l / 2.0,
        ];
        let n2 = raw2.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..3 {
            assert_relative_eq!(e2[i], raw2[i] / n2, max_relative = 1e-13);
        }
    }

    #[test]
    fn unit_gain_nla_is_identity() {
        let e = nla_coefficients(1.0, 4, r8()).unwrap();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-15);
        assert!(e[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gain_limit_is_inverse_lambda() {
        let r = r8();
        let v = r.v_scalar();
        assert_relative_eq!(
            nla_gain_limit(r),
            ((v + 1.0) / (v - 1.0)).sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn operation_descriptor_round_trip() {
        let pv = OperationDescriptor::Pv {
            pv: vec![ModeOp::subtract(1), ModeOp::add(2)],
        };
        let js = serde_json::to_string(&pv).unwrap();
        assert_eq!(js, r#"{"pv":[{"t":-1,"n":1},{"t":1,"n":2}]}"#);
        let back: OperationDescriptor = serde_json::from_str(&js).unwrap();
        assert_eq!(back, pv);

        let gen = OperationDescriptor::Generalized {
            generalized: GeneralizedDef {
                order: 2,
                e: vec![0.9, 0.3, 0.1],
                dagger: true,
            },
        };
        let js = serde_json::to_string(&gen).unwrap();
        assert!(js.contains("\"N\":2"));
        let back: OperationDescriptor = serde_json::from_str(&js).unwrap();
        assert_eq!(back, gen);
        assert!(back.generalized_spec().unwrap().is_some());
    }
}
