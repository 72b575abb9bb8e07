//! The teleportation channel in the CF picture.
//!
//! The protocol acts as a multiplicative channel: the output CF is the input
//! CF times the resource response function `chi(xi, xi*)`. Fidelity between
//! input and output is the phase-space overlap
//!
//! ```text
//!   F = (1/pi) int d^2xi  chi_in(-xi) chi_out(xi),
//! ```
//!
//! with `d^2xi = d(Re xi) d(Im xi)`; the measure normalization is pinned by
//! the identity channel giving F = 1 exactly.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_states::{gaussian_cf, tmsv, ChannelParams, GaussianState, SqueezingParam};
use crate::hermite::PrecisionPolicy;
use crate::numerics::{gauss_legendre, laguerre, NeumaierSum};
use crate::pv_ops::{GeneralizedPVSpec, GeneralizedPvState, PVSpec, PhotonVariedState};

/// Tolerance for the imaginary residue of response-function ratios.
const IMAG_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Input states
// ---------------------------------------------------------------------------

/// Pure single-mode input to the teleporter.
#[derive(Clone)]
pub enum InputState {
    Coherent(Complex64),
    /// Squeezed vacuum with `Var(q) = e^{2s}`.
    SqueezedVacuum(f64),
    Fock(u32),
    /// Arbitrary pure-state CF; must satisfy `cf(0) = 1`, `|cf| <= 1`.
    Custom(Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for InputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Coherent(a) => write!(f, "Coherent({a})"),
            Self::SqueezedVacuum(s) => write!(f, "SqueezedVacuum({s})"),
            Self::Fock(n) => write!(f, "Fock({n})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl InputState {
    pub fn cf(&self, xi: Complex64) -> Complex64 {
        match self {
            Self::Coherent(alpha) => {
                let phase = xi * alpha.conj() - xi.conj() * alpha;
                (Complex64::new(-xi.norm_sqr() / 2.0, 0.0) + phase).exp()
            }
            Self::SqueezedVacuum(s) => {
                let x = xi.norm_sqr();
                let re2 = (xi * xi).re;
                Complex64::new(
                    (-0.5 * (2.0 * s).cosh() * x + 0.5 * (2.0 * s).sinh() * re2).exp(),
                    0.0,
                )
            }
            Self::Fock(n) => {
                let x = xi.norm_sqr();
                Complex64::new((-x / 2.0).exp() * laguerre(*n as usize, 0.0, x), 0.0)
            }
            Self::Custom(f) => f(xi),
        }
    }

    /// True when `cf(-xi) cf(xi)` depends only on `|xi|`.
    fn radial_overlap(&self) -> bool {
        matches!(self, Self::Coherent(_) | Self::Fock(_))
    }

    /// Factor by which the integration window must grow to capture the
    /// overlap tail: squeezed CFs decay only like `exp(-e^{-2s} x^2)` along
    /// the anti-squeezed axis, Fock overlaps carry polynomial prefactors.
    fn support_scale(&self) -> f64 {
        match self {
            Self::Coherent(_) | Self::Custom(_) => 1.0,
            Self::SqueezedVacuum(s) => s.abs().exp(),
            Self::Fock(n) => 1.0 + 0.06 * f64::from(*n),
        }
    }

    /// Peak exponent of the angular variation of `cf(-xi) cf(xi)` at the
    /// window edge; sets the angular node count for the tensor rule.
    fn angular_sharpness(&self, cutoff: f64) -> f64 {
        match self {
            Self::SqueezedVacuum(s) => (2.0 * s.abs()).sinh() * cutoff * cutoff,
            _ => 0.0,
        }
    }

    /// Physicality spot-check: unit normalization and bounded modulus.
    pub fn validate(&self) -> Result<()> {
        let at0 = self.cf(Complex64::ZERO);
        if (at0 - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "input CF must equal 1 at the origin, got {at0}"
            )));
        }
        for k in 1..=12 {
            let xi = Complex64::new(0.45 * k as f64, 0.31 * k as f64);
            if self.cf(xi).norm() > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "input CF modulus exceeds 1 at {xi}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Resources
// ---------------------------------------------------------------------------

/// Evaluatable two-mode resource CF feeding the teleportation channel.
pub enum ResourceCF {
    /// Flat response (infinite squeezing limit); useful as the identity
    /// channel reference.
    Ideal,
    Gaussian(GaussianState),
    PhotonVaried(PhotonVariedState),
    GeneralizedPv(GeneralizedPvState),
    /// Inner resource propagated through pure-loss channels via the CF
    /// substitution map.
    WithLoss {
        inner: Box<ResourceCF>,
        channel: ChannelParams,
    },
}

impl fmt::Debug for ResourceCF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ideal => write!(f, "Ideal"),
            Self::Gaussian(_) => write!(f, "Gaussian"),
            Self::PhotonVaried(p) => write!(f, "PhotonVaried({:?})", p.spec()),
            Self::GeneralizedPv(_) => write!(f, "GeneralizedPv"),
            Self::WithLoss { inner, channel } => write!(f, "WithLoss({inner:?}, {channel:?})"),
        }
    }
}

impl ResourceCF {
    pub fn with_loss(self, channel: ChannelParams) -> Self {
        Self::WithLoss {
            inner: Box::new(self),
            channel,
        }
    }

    /// The resource CF at a formal two-mode point.
    pub fn cf(&self, xi1: Complex64, xi2: Complex64) -> Result<Complex64> {
        match self {
            Self::Ideal => Ok(Complex64::new(1.0, 0.0)),
            Self::Gaussian(st) => Ok(gaussian_cf(st, &[xi1, xi2])),
            Self::PhotonVaried(pv) => {
                Ok(pv.cf_ratio_at(xi1, xi2)? * gaussian_cf(pv.base(), &[xi1, xi2]))
            }
            Self::GeneralizedPv(gp) => {
                Ok(gp.cf_ratio_at(xi1, xi2)? * gaussian_cf(gp.base(), &[xi1, xi2]))
            }
            Self::WithLoss { inner, channel } => {
                let scaled1 = channel.t1.sqrt() * xi1;
                let scaled2 = channel.t2.sqrt() * xi2;
                let vacuum_noise = (-(1.0 - channel.t1) * xi1.norm_sqr() / 2.0
                    - (1.0 - channel.t2) * xi2.norm_sqr() / 2.0)
                    .exp();
                Ok(inner.cf(scaled1, scaled2)? * vacuum_noise)
            }
        }
    }

    /// Whether the response function depends only on `|xi|`.
    pub fn is_radial(&self) -> bool {
        match self {
            Self::Ideal => true,
            Self::Gaussian(st) => st.has_radial_response(),
            Self::PhotonVaried(pv) => pv.base().has_radial_response(),
            Self::GeneralizedPv(gp) => gp.base().has_radial_response(),
            Self::WithLoss { inner, .. } => inner.is_radial(),
        }
    }
}

// ---------------------------------------------------------------------------
// Channel evaluation
// ---------------------------------------------------------------------------

/// Response function: the resource CF on the teleportation diagonal.
pub fn response_function(res: &ResourceCF, xi: Complex64) -> Result<Complex64> {
    res.cf(xi, xi.conj())
}

/// Output CF of the channel, `chi_out(xi) = chi(xi, xi*) chi_in(xi)`.
pub fn output_cf(res: &ResourceCF, input: &InputState, xi: Complex64) -> Result<Complex64> {
    Ok(response_function(res, xi)? * input.cf(xi))
}

/// Quadrature layout for the fidelity integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub radial_cutoff: f64,
    pub nodes: usize,
    pub angular_nodes: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            radial_cutoff: 6.0,
            nodes: 400,
            angular_nodes: 64,
        }
    }
}

impl QuadratureGrid {
    fn validate(&self) -> Result<()> {
        if self.radial_cutoff.is_nan() || self.radial_cutoff <= 0.0 {
            return Err(Error::InvalidParameter("cutoff must be positive".into()));
        }
        if self.nodes < 16 {
            return Err(Error::InvalidParameter(
                "at least 16 radial nodes required".into(),
            ));
        }
        Ok(())
    }
}

/// Teleportation fidelity for a pure input state.
///
/// Radial integrands collapse to a 1-D Gauss-Legendre rule; otherwise a
/// tensor radial x angular rule is used. The node count is doubled once and
/// the two estimates must agree to 1e-8.
pub fn fidelity(res: &ResourceCF, input: &InputState, grid: &QuadratureGrid) -> Result<f64> {
    grid.validate()?;
    input.validate()?;
    let coarse = fidelity_once(res, input, grid)?;
    let fine = fidelity_once(
        res,
        input,
        &QuadratureGrid {
            radial_cutoff: grid.radial_cutoff,
            nodes: grid.nodes * 2,
            angular_nodes: grid.angular_nodes * 2,
        },
    )?;
    let rel = (fine - coarse).abs() / fine.abs().max(1.0);
    if rel > 1e-8 {
        return Err(Error::QuadratureNonConvergent { coarse, fine, rel });
    }
    if !(-1e-9..=1.0 + 1e-9).contains(&fine) {
        return Err(Error::OutOfRange(format!(
            "fidelity estimate {fine} outside [0, 1] beyond tolerance"
        )));
    }
    Ok(fine.clamp(0.0, 1.0))
}

fn fidelity_once(res: &ResourceCF, input: &InputState, grid: &QuadratureGrid) -> Result<f64> {
    let scale = input.support_scale();
    let cutoff = grid.radial_cutoff * scale;
    let nodes = grid.nodes * scale.ceil() as usize;
    let (radii, weights) = gauss_legendre(nodes, 0.0, cutoff);
    let radial = res.is_radial() && input.radial_overlap();
    if radial {
        let values: Result<Vec<f64>> = radii
            .par_iter()
            .map(|&rho| {
                let xi = Complex64::new(rho, 0.0);
                let v = input.cf(-xi) * response_function(res, xi)? * input.cf(xi);
                Ok(rho * v.re)
            })
            .collect();
        let values = values?;
        let mut acc = NeumaierSum::new();
        for (w, v) in weights.iter().zip(&values) {
            acc.add(2.0 * w * v);
        }
        Ok(acc.value())
    } else {
        // The trapezoid rule on a periodic analytic integrand converges
        // geometrically once the node spacing resolves the angular peaks:
        // error ~ exp(-M^2 / 4 kappa) for integrands ~ exp(kappa cos 2theta).
        let kappa = input.angular_sharpness(cutoff);
        let m_needed = (9.2 * kappa.max(1.0).sqrt()).ceil() as usize;
        let m = grid.angular_nodes.max(8).max(m_needed.next_multiple_of(2));
        let values: Result<Vec<f64>> = (0..nodes * m)
            .into_par_iter()
            .map(|idx| {
                let (ir, ia) = (idx / m, idx % m);
                let theta = 2.0 * std::f64::consts::PI * ia as f64 / m as f64;
                let xi = radii[ir] * Complex64::new(theta.cos(), theta.sin());
                let v = input.cf(-xi) * response_function(res, xi)? * input.cf(xi);
                Ok(weights[ir] * radii[ir] * v.re)
            })
            .collect();
        let values = values?;
        let mut acc = NeumaierSum::new();
        for v in values {
            acc.add(v);
        }
        Ok(2.0 / m as f64 * acc.value())
    }
}

// ---------------------------------------------------------------------------
// Bounds and the dissipative-scenario ratio
// ---------------------------------------------------------------------------

/// Resource families with a closed-form response-ratio bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundFamily {
    Tmsv { r: SqueezingParam },
    Tmst { r: SqueezingParam, nbar: f64 },
}

/// Upper bound on the response ratio: the reciprocal of the bare response
/// function, `exp((V - sqrt(V^2-1)) |xi|^2)` for a TMSV and the same with an
/// extra factor `(2 nbar + 1)` in the exponent for a TMST.
pub fn h_max(family: BoundFamily, xi: Complex64) -> f64 {
    match family {
        BoundFamily::Tmsv { r } => ((-2.0 * r.r()).exp() * xi.norm_sqr()).exp(),
        BoundFamily::Tmst { r, nbar } => {
            ((2.0 * nbar + 1.0) * (-2.0 * r.r()).exp() * xi.norm_sqr()).exp()
        }
    }
}

/// Photon-varying operation of either kind, for paths that accept both.
#[derive(Debug, Clone)]
pub enum PvOperation {
    Simple(PVSpec),
    Generalized(GeneralizedPVSpec),
}

/// Ratio of loss-propagated response functions: photon-varied TMSV through
/// the channels against the bare TMSV through the same channels. Operations
/// are applied before transmission.
#[derive(Debug)]
pub struct HPrime {
    varied: ResourceCF,
    bare: ResourceCF,
}

impl HPrime {
    pub fn new(
        r: SqueezingParam,
        op: &PvOperation,
        ch: ChannelParams,
        policy: PrecisionPolicy,
    ) -> Result<Self> {
        let base = tmsv(r);
        let varied =
            match op {
                PvOperation::Simple(spec) => ResourceCF::PhotonVaried(PhotonVariedState::new(
                    base.clone(),
                    spec.clone(),
                    policy,
                )?),
                PvOperation::Generalized(spec) => ResourceCF::GeneralizedPv(
                    GeneralizedPvState::new(base.clone(), spec.clone(), policy)?,
                ),
            };
        Ok(Self {
            varied: varied.with_loss(ch),
            bare: ResourceCF::Gaussian(base).with_loss(ch),
        })
    }

    pub fn eval(&self, xi: Complex64) -> Result<f64> {
        let num = response_function(&self.varied, xi)?;
        let den = response_function(&self.bare, xi)?;
        let ratio = num / den;
        if ratio.im.abs() > IMAG_TOL * ratio.re.abs().max(1.0) {
            return Err(Error::ImaginaryResidue {
                imag: ratio.im.abs(),
                scale: ratio.re.abs(),
            });
        }
        Ok(ratio.re)
    }
}

/// One-shot evaluation of the dissipative response ratio.
pub fn h_prime(
    r: SqueezingParam,
    op: &PvOperation,
    ch: ChannelParams,
    xi: Complex64,
    policy: PrecisionPolicy,
) -> Result<f64> {
    HPrime::new(r, op, ch, policy)?.eval(xi)
}
