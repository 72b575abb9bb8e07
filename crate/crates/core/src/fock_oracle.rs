//! Brute-force validation in a truncated Fock basis.
//!
//! Every analytic quantity of the engine (characteristic functions, response
//! ratios, normalization weights, fidelities) is recomputed here by direct
//! matrix algebra on number-state amplitudes. The oracle is deliberately
//! independent of the Hermite machinery: states are amplitude arrays,
//! operations are ladder-operator matrices, and CFs are traces against
//! displacement matrices built from the associated Laguerre recurrence.
//!
//! Mixed states (thermal inputs, loss outputs) are kept as weighted ensembles
//! of pure components rather than density matrices; every oracle quantity is
//! linear in the density operator, so ensemble averaging is exact and avoids
//! D^4-sized allocations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian_states::{ChannelParams, SqueezingParam};
use crate::pv_ops::{GeneralizedPVSpec, PVSpec};

/// Default per-mode truncation.
pub const DEFAULT_DIM: usize = 60;

/// Default bound on probability mass beyond level `D - 5`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

const NORM_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Ladder and displacement operators at a fixed truncation.
#[derive(Debug, Clone)]
pub struct FockOperatorSet {
    dim: usize,
}

impl FockOperatorSet {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `a |n> = sqrt(n) |n-1>`.
    pub fn annihilation(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for n in 1..self.dim {
            a[(n - 1, n)] = (n as f64).sqrt();
        }
        a
    }

    pub fn creation(&self) -> DMatrix<f64> {
        self.annihilation().transpose()
    }

    /// Matrix elements `<m| D(xi) |n>` via the associated Laguerre three-term
    /// recurrence (stable at large truncation, no factorial ratios).
    pub fn displacement(&self, xi: Complex64) -> DMatrix<Complex64> {
        let d = self.dim;
        let x = xi.norm_sqr();
        let gauss = (-x / 2.0).exp();
        let mut m = DMatrix::from_element(d, d, Complex64::ZERO);
        // Lower triangle (row >= col), offset k = row - col:
        //   <n+k| D |n> = e^{-x/2} * prod_{j=1..k}(xi/sqrt(j))
        //                 * sqrt(n!/(n+k)!)*sqrt(k!) ... folded into the
        //                 running prefactor * L_n^{(k)}(x).
        for k in 0..d {
            let mut lag_prev = 0.0f64;
            let mut lag = 1.0f64; // L_0^{(k)}
            let mut pref = Complex64::new(gauss, 0.0);
            for j in 1..=k {
                pref *= xi / (j as f64).sqrt();
            }
            for n in 0..(d - k) {
                if n > 0 {
                    pref *= Complex64::new((n as f64 / (n + k) as f64).sqrt(), 0.0);
                }
                m[(n + k, n)] = pref * lag;
                let next = ((2 * n + 1 + k) as f64 - x) * lag - ((n + k) as f64) * lag_prev;
                lag_prev = lag;
                lag = next / (n + 1) as f64;
            }
        }
        // Upper triangle from D(xi)^dag = D(-xi):
        //   <m| D |m+k> = prefactor(m, k) * L_m^{(k)}(x), same running
        //   products as the lower triangle with xi -> -xi*.
        for k in 1..d {
            let mut lag_prev = 0.0f64;
            let mut lag = 1.0f64; // L_0^{(k)}
            let mut pref = Complex64::new(gauss, 0.0);
            for j in 1..=k {
                pref *= -xi.conj() / (j as f64).sqrt();
            }
            for mrow in 0..(d - k) {
                if mrow > 0 {
                    pref *= Complex64::new((mrow as f64 / (mrow + k) as f64).sqrt(), 0.0);
                }
                m[(mrow, mrow + k)] = pref * lag;
                let next = ((2 * mrow + 1 + k) as f64 - x) * lag - ((mrow + k) as f64) * lag_prev;
                lag_prev = lag;
                lag = next / (mrow + 1) as f64;
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    /// Amplitudes: `(n1, n2)` entry for two modes, column vector for one.
    amp: DMatrix<Complex64>,
}

/// Truncated state, stored as a weighted ensemble of pure components
/// (`rho = sum_i w_i |v_i><v_i|`, each `v_i` normalized, `sum_i w_i = 1`).
#[derive(Debug, Clone)]
pub struct FockState {
    modes: usize,
    dim: usize,
    components: Vec<Component>,
}

impl FockState {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    fn pure(modes: usize, dim: usize, amp: DMatrix<Complex64>) -> Self {
        Self {
            modes,
            dim,
            components: vec![Component { weight: 1.0, amp }],
        }
    }

    /// Total probability weight (1 for a valid state).
    pub fn trace(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.amp.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Probability mass at levels above `dim - margin` in either mode.
    pub fn tail_mass(&self, margin: usize) -> f64 {
        let cut = self.dim.saturating_sub(margin);
        let mut mass = 0.0;
        for comp in &self.components {
            let mut m = 0.0;
            for n1 in 0..comp.amp.nrows() {
                for n2 in 0..comp.amp.ncols() {
                    if n1 >= cut || (self.modes == 2 && n2 >= cut) {
                        m += comp.amp[(n1, n2)].norm_sqr();
                    }
                }
            }
            mass += comp.weight * m;
        }
        mass
    }

    /// Mean photon number of one mode.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        let mut acc = 0.0;
        for comp in &self.components {
            for n1 in 0..comp.amp.nrows() {
                for n2 in 0..comp.amp.ncols() {
                    let n = if mode == 0 { n1 } else { n2 };
                    acc += comp.weight * n as f64 * comp.amp[(n1, n2)].norm_sqr();
                }
            }
        }
        acc
    }

    fn check(self, tail_tol: f64) -> Result<Self> {
        let tr = self.trace();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "oracle state trace {tr} deviates from 1"
            )));
        }
        let tail = self.tail_mass(5);
        if tail > tail_tol {
            return Err(Error::TruncationTail {
                tail,
                tol: tail_tol,
                dim: self.dim,
            });
        }
        Ok(self)
    }
}

/// Build the truncated representation of a described resource family
/// (before any loss channel) at the given per-mode dimension.
pub fn oracle_state(
    descriptor: &crate::gaussian_states::StateDescriptor,
    dim: usize,
    tail_tol: f64,
) -> Result<FockState> {
    use crate::gaussian_states::StateFamily;
    let r = descriptor.squeezing()?;
    match descriptor.family {
        StateFamily::Tmsv => oracle_tmsv(r, dim, tail_tol),
        StateFamily::Tmsc => {
            let z1 = descriptor
                .z1
                .map(Complex64::from)
                .unwrap_or(Complex64::ZERO);
            let z2 = descriptor
                .z2
                .map(Complex64::from)
                .unwrap_or(Complex64::ZERO);
            oracle_tmsc(r, z1, z2, dim, tail_tol)
        }
        StateFamily::Tmst => oracle_tmst(r, descriptor.nbar.unwrap_or(0.0), dim, tail_tol),
    }
}

/// `|n>` in a single truncated mode.
pub fn oracle_fock(n: usize, dim: usize) -> Result<FockState> {
    if n >= dim {
        return Err(Error::OutOfRange(format!("level {n} >= dim {dim}")));
    }
    let mut amp = DMatrix::from_element(dim, 1, Complex64::ZERO);
    amp[(n, 0)] = Complex64::new(1.0, 0.0);
    FockState::pure(1, dim, amp).check(DEFAULT_TAIL_TOL)
}

/// Two-mode squeezed vacuum, `sqrt(1 - lambda^2) sum lambda^n |n, n>`.
pub fn oracle_tmsv(r: SqueezingParam, dim: usize, tail_tol: f64) -> Result<FockState> {
    let lambda = r.lambda();
    let mut amp = DMatrix::from_element(dim, dim, Complex64::ZERO);
    let scale = (1.0 - lambda * lambda).sqrt();
    let mut coeff = scale;
    for n in 0..dim {
        amp[(n, n)] = Complex64::new(coeff, 0.0);
        coeff *= lambda;
    }
    // Renormalize the truncated representation before validity checks.
    let norm = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amp /= Complex64::new(norm, 0.0);
    FockState::pure(2, dim, amp).check(tail_tol)
}

/// Two-mode squeezed coherent state: squeeze first, then displace each mode.
pub fn oracle_tmsc(
    r: SqueezingParam,
    z1: Complex64,
    z2: Complex64,
    dim: usize,
    tail_tol: f64,
) -> Result<FockState> {
    let base = oracle_tmsv(r, dim, 1.0)?; // tail checked after displacement
    let ops = FockOperatorSet::new(dim);
    let d1 = ops.displacement(z1);
    let d2 = ops.displacement(z2);
    let amp = &d1 * &base.components[0].amp * d2.transpose();
    let norm = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    FockState::pure(2, dim, amp / Complex64::new(norm, 0.0)).check(tail_tol)
}

/// Two-mode squeezed thermal state as a thermally weighted ensemble of
/// squeezed number states `S(r) |n, m>`.
///
/// Thermal weights use the normalized distribution
/// `p_n = nbar^n / (nbar + 1)^{n+1}`.
pub fn oracle_tmst(r: SqueezingParam, nbar: f64, dim: usize, tail_tol: f64) -> Result<FockState> {
    if nbar < 0.0 {
        return Err(Error::InvalidParameter("nbar must be non-negative".into()));
    }
    if nbar == 0.0 {
        return oracle_tmsv(r, dim, tail_tol);
    }
    let ratio = nbar / (nbar + 1.0);
    // Keep thermal levels until the per-mode tail is negligible.
    let mut n_max = 0usize;
    let mut tail = 1.0;
    while tail > 1e-12 && n_max < dim / 2 {
        n_max += 1;
        tail *= ratio;
    }
    let mut components = Vec::new();
    let mut total_weight = 0.0;
    for n in 0..=n_max {
        for m in 0..=n_max {
            let w = thermal_weight(nbar, n) * thermal_weight(nbar, m);
            let amp = squeeze_number_state(r, n, m, dim);
            total_weight += w;
            components.push(Component { weight: w, amp });
        }
    }
    for c in &mut components {
        c.weight /= total_weight;
    }
    FockState {
        modes: 2,
        dim,
        components,
    }
    .check(tail_tol)
}

fn thermal_weight(nbar: f64, n: usize) -> f64 {
    nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1)
}

/// `S(r) |n, m>` through the disentangled form
/// `exp(G a1+ a2+) exp(-g (n1 + n2 + 1)) exp(-G a1 a2)` with `G = tanh r`,
/// `g = ln cosh r`.
fn squeeze_number_state(r: SqueezingParam, n: usize, m: usize, dim: usize) -> DMatrix<Complex64> {
    let gamma = r.r().tanh();
    let sech = 1.0 / r.r().cosh();
    let mut amp = DMatrix::from_element(dim, dim, Complex64::ZERO);
    // exp(-G a1 a2) |n, m>: coefficients on |n-k, m-k>
    let kmax = n.min(m);
    let mut down = vec![0.0f64; kmax + 1];
    let mut coeff = 1.0;
    for (k, slot) in down.iter_mut().enumerate() {
        if k > 0 {
            coeff *= -gamma / k as f64 * (((n - k + 1) as f64) * ((m - k + 1) as f64)).sqrt();
        }
        *slot = coeff;
    }
    for (k, &down_k) in down.iter().enumerate() {
        let (p, q) = (n - k, m - k);
        let diag = sech.powi((p + q + 1) as i32); // e^{-g(p+q+1)}
        let mut up = down_k * diag;
        let mut l = 0usize;
        loop {
            let (rp, rq) = (p + l, q + l);
            if rp >= dim || rq >= dim {
                break;
            }
            amp[(rp, rq)] += Complex64::new(up, 0.0);
            up *= gamma / (l + 1) as f64 * (((rp + 1) as f64) * ((rq + 1) as f64)).sqrt();
            l += 1;
        }
    }
    let norm = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amp / Complex64::new(norm, 0.0)
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Apply a photon-varying spec; returns the renormalized state and the
/// pre-normalization weight `tr{Op rho Op^dag}`.
pub fn oracle_apply(state: &FockState, spec: &PVSpec) -> Result<(FockState, f64)> {
    if spec.modes() != state.modes {
        return Err(Error::InvalidParameter(
            "spec mode count does not match the state".into(),
        ));
    }
    let ops = FockOperatorSet::new(state.dim);
    let a = ops.annihilation().map(|x| Complex64::new(x, 0.0));
    let adag = ops.creation().map(|x| Complex64::new(x, 0.0));
    let mode_op = |t: i8, n: u32| -> DMatrix<Complex64> {
        let base = if t < 0 { &a } else { &adag };
        let mut acc = DMatrix::identity(state.dim, state.dim);
        for _ in 0..n {
            acc = base * acc;
        }
        acc
    };
    let op1 = mode_op(spec.ops[0].t, spec.ops[0].n);
    let op2 = if state.modes == 2 {
        Some(mode_op(spec.ops[1].t, spec.ops[1].n))
    } else {
        None
    };
    transform_components(state, |amp| match &op2 {
        Some(o2) => &op1 * amp * o2.transpose(),
        None => &op1 * amp,
    })
}

/// Apply a generalized operation `sum_n e_n (a1 a2)^{dag n}` (or undaggered).
pub fn oracle_apply_generalized(
    state: &FockState,
    spec: &GeneralizedPVSpec,
) -> Result<(FockState, f64)> {
    if state.modes != 2 {
        return Err(Error::InvalidParameter(
            "generalized operations act on two-mode states".into(),
        ));
    }
    let ops = FockOperatorSet::new(state.dim);
    let single = if spec.dagger() {
        ops.creation()
    } else {
        ops.annihilation()
    }
    .map(|x| Complex64::new(x, 0.0));
    let e = spec.coefficients().to_vec();
    transform_components(state, move |amp| {
        let mut acc = amp * Complex64::new(e[0], 0.0);
        let mut powered = amp.clone();
        for &coeff in &e[1..] {
            powered = &single * powered * single.transpose();
            acc += &powered * Complex64::new(coeff, 0.0);
        }
        acc
    })
}

fn transform_components<F>(state: &FockState, f: F) -> Result<(FockState, f64)>
where
    F: Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>,
{
    let mut components = Vec::with_capacity(state.components.len());
    let mut total = 0.0;
    for comp in &state.components {
        let out = f(&comp.amp);
        let nsq = out.iter().map(|z| z.norm_sqr()).sum::<f64>();
        total += comp.weight * nsq;
        if comp.weight * nsq > 1e-18 {
            components.push(Component {
                weight: comp.weight * nsq,
                amp: out / Complex64::new(nsq.sqrt(), 0.0),
            });
        }
    }
    if total < 1e-12 {
        return Err(Error::VanishingNorm { norm: total });
    }
    for c in &mut components {
        c.weight /= total;
    }
    Ok((
        FockState {
            modes: state.modes,
            dim: state.dim,
            components,
        },
        total,
    ))
}

// ---------------------------------------------------------------------------
// Characteristic function and loss
// ---------------------------------------------------------------------------

/// `tr{rho D(xi_1) (x) D(xi_2)}` (or the single-mode version).
///
/// Component amplitude matrices of the states built here are typically
/// supported on a few diagonals (ladder powers shift the TMSV band), so the
/// expectation is taken over the nonzero entries directly,
/// `<v| D1 (x) D2 |v> = sum_{ij,kl} conj(v_ij) D1[i,k] D2[j,l] v_kl`,
/// at cost O(nnz^2) instead of dense matrix products.
pub fn oracle_cf(state: &FockState, xi: &[Complex64]) -> Complex64 {
    assert_eq!(xi.len(), state.modes, "argument/mode mismatch");
    let ops = FockOperatorSet::new(state.dim);
    let d1 = ops.displacement(xi[0]);
    let d2 = (state.modes == 2).then(|| ops.displacement(xi[1]));
    let mut acc = Complex64::ZERO;
    for comp in &state.components {
        let nnz: Vec<(usize, usize, Complex64)> = comp
            .amp
            .row_iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, z)| **z != Complex64::ZERO)
                    .map(|(j, z)| (i, j, *z))
                    .collect::<Vec<_>>()
            })
            .collect();
        let sparse_cost = nnz.len() * nnz.len();
        let dense_cost = state.dim * state.dim * state.dim;
        let overlap = if sparse_cost < dense_cost {
            let mut o = Complex64::ZERO;
            match &d2 {
                Some(d2) => {
                    for &(i, j, vij) in &nnz {
                        for &(k, l, vkl) in &nnz {
                            o += vij.conj() * d1[(i, k)] * d2[(j, l)] * vkl;
                        }
                    }
                }
                None => {
                    for &(i, _, vij) in &nnz {
                        for &(k, _, vkl) in &nnz {
                            o += vij.conj() * d1[(i, k)] * vkl;
                        }
                    }
                }
            }
            o
        } else {
            let transformed = match &d2 {
                Some(d2) => &d1 * &comp.amp * d2.transpose(),
                None => &d1 * &comp.amp,
            };
            let mut o = Complex64::ZERO;
            for (a, b) in comp.amp.iter().zip(transformed.iter()) {
                o += a.conj() * b;
            }
            o
        };
        acc += comp.weight * overlap;
    }
    acc
}

/// Response function `tr{rho D(xi) (x) D(xi*)}`.
pub fn oracle_response(state: &FockState, xi: Complex64) -> Complex64 {
    oracle_cf(state, &[xi, xi.conj()])
}

/// Per-mode pure-loss channel by Kraus branching:
/// `E_k = sqrt((1-T)^k / k!) T^{n/2} a^k`.
pub fn oracle_loss(state: &FockState, ch: ChannelParams) -> Result<FockState> {
    if state.modes != 2 {
        return Err(Error::InvalidParameter(
            "oracle loss is defined for two-mode states".into(),
        ));
    }
    let mut components = state.components.clone();
    for (mode, t) in [(0usize, ch.t1), (1usize, ch.t2)] {
        if t >= 1.0 {
            continue;
        }
        let mut next = Vec::new();
        for comp in &components {
            for k in 0..state.dim {
                let branch = loss_branch(&comp.amp, mode, t, k, state.dim);
                let nsq: f64 = branch.iter().map(|z| z.norm_sqr()).sum();
                let w = comp.weight * nsq;
                if w > 1e-16 {
                    next.push(Component {
                        weight: w,
                        amp: branch / Complex64::new(nsq.sqrt(), 0.0),
                    });
                }
            }
        }
        components = next;
    }
    let state = FockState {
        modes: 2,
        dim: state.dim,
        components,
    };
    let tr = state.trace();
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "loss channel lost probability: trace {tr}"
        )));
    }
    Ok(state)
}

/// `E_k` applied to one mode: `|n> -> sqrt(C(n,k) (1-T)^k T^{n-k}) |n-k>`.
fn loss_branch(
    amp: &DMatrix<Complex64>,
    mode: usize,
    t: f64,
    k: usize,
    dim: usize,
) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(amp.nrows(), amp.ncols(), Complex64::ZERO);
    for n in k..dim {
        let mut fac = (1.0 - t).powi(k as i32) * t.powi((n - k) as i32);
        for j in 0..k {
            fac *= (n - j) as f64 / (j + 1) as f64;
        }
        let f = Complex64::new(fac.sqrt(), 0.0);
        match mode {
            0 => {
                for c in 0..amp.ncols() {
                    out[(n - k, c)] += f * amp[(n, c)];
                }
            }
            _ => {
                for rr in 0..amp.nrows() {
                    out[(rr, n - k)] += f * amp[(rr, n)];
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Fidelity (radial integrands)
// ---------------------------------------------------------------------------

/// Teleportation fidelity by composite-Simpson radial integration of
/// `2 int_0^R rho chi_in(-xi) R(xi) chi_in(xi) d rho`, valid when the
/// integrand is a function of |xi| (coherent and Fock inputs over symmetric
/// resources). Deliberately independent of the Gauss-Legendre machinery used
/// by the analytic path.
pub fn oracle_fidelity_radial<F>(resource: &FockState, input_cf: F, rmax: f64, steps: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    let n = if steps.is_multiple_of(2) {
        steps
    } else {
        steps + 1
    };
    let h = rmax / n as f64;
    let integrand = |rho: f64| -> f64 {
        let xi = Complex64::new(rho, 0.0);
        let v = input_cf(-xi) * oracle_response(resource, xi) * input_cf(xi);
        2.0 * rho * v.re
    };
    let mut acc = integrand(0.0) + integrand(rmax);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_states::{gaussian_cf, tmst, tmsv};
    use crate::hermite::stirling2;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn r8() -> SqueezingParam {
        SqueezingParam::from_db(8.0).unwrap()
    }

    #[test]
    fn displacement_vacuum_element() {
        let ops = FockOperatorSet::new(25);
        for &xi in &[c(0.4, 0.0), c(0.8, -1.1), c(2.0, 2.0)] {
            let d = ops.displacement(xi);
            let expect = (-xi.norm_sqr() / 2.0).exp();
            assert_relative_eq!(d[(0, 0)].re, expect, max_relative = 1e-13);
            assert_relative_eq!(d[(0, 0)].im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn displacement_is_unitary_on_retained_block() {
        let ops = FockOperatorSet::new(40);
        let xi = c(0.7, -0.4);
        let d = ops.displacement(xi);
        let prod = d.adjoint() * &d;
        for i in 0..20 {
            for j in 0..20 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (prod[(i, j)] - c(expect, 0.0)).norm() < 1e-10,
                    "({i},{j}) = {}",
                    prod[(i, j)]
                );
            }
        }
    }

    #[test]
    fn displacement_matches_coherent_expansion() {
        // D[m][0] = e^{-|xi|^2/2} xi^m / sqrt(m!).
        let ops = FockOperatorSet::new(30);
        let xi = c(0.9, 0.5);
        let d = ops.displacement(xi);
        let mut expect = Complex64::new((-xi.norm_sqr() / 2.0).exp(), 0.0);
        for m in 0..10 {
            assert!((d[(m, 0)] - expect).norm() < 1e-12, "m={m}");
            expect *= xi / ((m + 1) as f64).sqrt();
        }
    }

    #[test]
    fn ladder_matrices_act_on_fock_levels() {
        let ops = FockOperatorSet::new(5);
        let a = ops.annihilation();
        assert_eq!(a[(0, 1)], 1.0);
        assert_relative_eq!(a[(1, 2)], 2f64.sqrt());
        let num = ops.creation() * ops.annihilation();
        for n in 0..5 {
            assert_relative_eq!(num[(n, n)], n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn tmsv_amplitudes_are_geometric() {
        let r = SqueezingParam::from_lambda(0.5).unwrap();
        let st = oracle_tmsv(r, 60, DEFAULT_TAIL_TOL).unwrap();
        let amp = &st.components[0].amp;
        let scale = (1.0f64 - 0.25).sqrt();
        for n in 0..8 {
            assert_relative_eq!(
                amp[(n, n)].re,
                scale * 0.5f64.powi(n as i32),
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(st.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn descriptor_dispatch_builds_each_family() {
        use crate::gaussian_states::{ComplexDef, StateDescriptor, StateFamily};
        let mut d = StateDescriptor::tmsv_db(6.0);
        let tmsv_state = oracle_state(&d, 40, 1e-8).unwrap();
        d.family = StateFamily::Tmsc;
        d.z1 = Some(ComplexDef::Real(0.4));
        d.z2 = Some(ComplexDef::Real(0.4));
        let tmsc_state = oracle_state(&d, 40, 1e-8).unwrap();
        let mut t = StateDescriptor::tmsv_db(6.0);
        t.family = StateFamily::Tmst;
        t.nbar = Some(0.3);
        let tmst_state = oracle_state(&t, 40, 1e-8).unwrap();
        let xi = [c(0.5, -0.2), c(0.3, 0.4)];
        for (st, reference) in [
            (
                &tmsv_state,
                gaussian_cf(&tmsv(SqueezingParam::from_db(6.0).unwrap()), &xi),
            ),
            (
                &tmsc_state,
                gaussian_cf(
                    &crate::gaussian_states::tmsc(
                        SqueezingParam::from_db(6.0).unwrap(),
                        c(0.4, 0.0),
                        c(0.4, 0.0),
                    ),
                    &xi,
                ),
            ),
            (
                &tmst_state,
                gaussian_cf(
                    &tmst(SqueezingParam::from_db(6.0).unwrap(), 0.3).unwrap(),
                    &xi,
                ),
            ),
        ] {
            assert!((oracle_cf(st, &xi) - reference).norm() < 1e-8);
        }
    }

    #[test]
    fn tmsv_zero_squeezing_is_double_vacuum() {
        let st = oracle_tmsv(SqueezingParam::from_r(0.0).unwrap(), 20, DEFAULT_TAIL_TOL).unwrap();
        let amp = &st.components[0].amp;
        assert_eq!(amp[(0, 0)], c(1.0, 0.0));
        assert!(amp.iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn oracle_cf_vacuum_and_fock_one() {
        let vac = oracle_fock(0, 30).unwrap();
        let one = oracle_fock(1, 30).unwrap();
        for &xi in &[c(0.5, 0.0), c(-0.8, 1.2)] {
            let x = xi.norm_sqr();
            let got_v = oracle_cf(&vac, &[xi]);
            assert!((got_v - c((-x / 2.0).exp(), 0.0)).norm() < 1e-12);
            let got_1 = oracle_cf(&one, &[xi]);
            let expect = (-x / 2.0).exp() * (1.0 - x);
            assert!((got_1 - c(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn oracle_tmsv_cf_matches_analytic() {
        let r = r8();
        let st = oracle_tmsv(r, 60, 1e-8).unwrap();
        let gauss = tmsv(r);
        for (x1, x2) in [
            (c(0.6, -0.3), c(0.2, 0.9)),
            (c(1.5, 0.8), c(-1.1, 0.4)),
            (c(2.5, 0.0), c(2.5, 0.0)),
        ] {
            let got = oracle_cf(&st, &[x1, x2]);
            let expect = gaussian_cf(&gauss, &[x1, x2]);
            assert!(
                (got - expect).norm() < 1e-9,
                "({x1},{x2}): {got} vs {expect}"
            );
        }
    }

    #[test]
    fn oracle_tmst_cf_matches_analytic() {
        let r = SqueezingParam::from_db(6.0).unwrap();
        let st = oracle_tmst(r, 0.4, 60, 1e-8).unwrap();
        let gauss = tmst(r, 0.4).unwrap();
        for (x1, x2) in [(c(0.5, -0.2), c(0.3, 0.6)), (c(1.0, 0.4), c(-0.8, 0.2))] {
            let got = oracle_cf(&st, &[x1, x2]);
            let expect = gaussian_cf(&gauss, &[x1, x2]);
            assert!(
                (got - expect).norm() < 1e-8,
                "({x1},{x2}): {got} vs {expect}"
            );
        }
    }

    #[test]
    fn tmst_zero_temperature_reduces_to_tmsv() {
        let r = SqueezingParam::from_db(5.0).unwrap();
        let a = oracle_tmst(r, 0.0, 40, DEFAULT_TAIL_TOL).unwrap();
        let b = oracle_tmsv(r, 40, DEFAULT_TAIL_TOL).unwrap();
        for &xi in &[c(0.4, 0.1), c(1.2, -0.6)] {
            let ca = oracle_cf(&a, &[xi, xi.conj()]);
            let cb = oracle_cf(&b, &[xi, xi.conj()]);
            assert!((ca - cb).norm() < 1e-12);
        }
    }

    #[test]
    fn subtraction_from_vacuum_errors() {
        let vac = oracle_fock(0, 20).unwrap();
        let spec = PVSpec::new(vec![crate::pv_ops::ModeOp::subtract(1)]).unwrap();
        assert!(matches!(
            oracle_apply(&vac, &spec),
            Err(Error::VanishingNorm { .. })
        ));
    }

    #[test]
    fn addition_to_vacuum_gives_fock_one() {
        let vac = oracle_fock(0, 20).unwrap();
        let spec = PVSpec::new(vec![crate::pv_ops::ModeOp::add(1)]).unwrap();
        let (out, weight) = oracle_apply(&vac, &spec).unwrap();
        assert_relative_eq!(weight, 1.0, max_relative = 1e-12);
        assert_relative_eq!(out.mean_photons(0), 1.0, max_relative = 1e-12);
        let one = oracle_fock(1, 20).unwrap();
        for &xi in &[c(0.5, 0.3), c(1.4, -0.7)] {
            assert!((oracle_cf(&out, &[xi]) - oracle_cf(&one, &[xi])).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_subtraction_weight_is_v_sinh_sq() {
        let r = r8();
        let st = oracle_tmsv(r, 60, 1e-8).unwrap();
        let spec = PVSpec::symmetric(-1, 1).unwrap();
        let (_, weight) = oracle_apply(&st, &spec).unwrap();
        let expect = r.v_scalar() * r.r().sinh().powi(2);
        assert_relative_eq!(weight, expect, max_relative = 1e-8);
    }

    #[test]
    fn transfer_identity_on_tmsv() {
        // a2+ |TMSV> / sqrt(V+1) equals a1 |TMSV> / sqrt(V-1).
        let r = r8();
        let st = oracle_tmsv(r, 60, 1e-8).unwrap();
        let amp = &st.components[0].amp;
        let ops = FockOperatorSet::new(60);
        let a = ops.annihilation().map(|x| Complex64::new(x, 0.0));
        let adag = ops.creation().map(|x| Complex64::new(x, 0.0));
        let v = r.v_scalar();
        let lhs = amp * adag.transpose() / Complex64::new((v + 1.0).sqrt(), 0.0);
        let rhs = &a * amp / Complex64::new((v - 1.0).sqrt(), 0.0);
        let diff: f64 = (&lhs - &rhs)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-9, "transfer identity violated: {diff}");
    }

    #[test]
    fn number_operator_power_expands_in_normal_order() {
        // (a+ a)^n = sum_m S(n, m) (a+)^m a^m on the retained block.
        let dim = 30;
        let ops = FockOperatorSet::new(dim);
        let a = ops.annihilation();
        let adag = ops.creation();
        let num = &adag * &a;
        for n in 1..=6u32 {
            let mut lhs = DMatrix::<f64>::identity(dim, dim);
            for _ in 0..n {
                lhs = &lhs * &num;
            }
            let mut rhs = DMatrix::<f64>::zeros(dim, dim);
            let mut adag_m = DMatrix::<f64>::identity(dim, dim);
            let mut a_m = DMatrix::<f64>::identity(dim, dim);
            for m in 0..=n {
                if m > 0 {
                    adag_m = &adag_m * &adag;
                    a_m = &a * &a_m;
                }
                let s: f64 = stirling2(n, m).unwrap().to_string().parse().unwrap();
                rhs += s * (&adag_m * &a_m);
            }
            let block = dim - n as usize;
            let mut max_diff = 0.0f64;
            for i in 0..block {
                for j in 0..block {
                    max_diff = max_diff.max((lhs[(i, j)] - rhs[(i, j)]).abs());
                }
            }
            assert!(max_diff <= 1e-6 * lhs.amax(), "n={n}: {max_diff}");
        }
    }

    #[test]
    fn loss_identity_channel() {
        let r = SqueezingParam::from_r(0.5).unwrap();
        let st = oracle_tmsv(r, 30, DEFAULT_TAIL_TOL).unwrap();
        let out = oracle_loss(&st, ChannelParams::new(1.0, 1.0).unwrap()).unwrap();
        for &xi in &[c(0.4, 0.2), c(1.0, -0.5)] {
            let a = oracle_cf(&st, &[xi, xi.conj()]);
            let b = oracle_cf(&out, &[xi, xi.conj()]);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn loss_scales_mean_photon_number() {
        let mut amp = DMatrix::from_element(20, 20, Complex64::ZERO);
        amp[(1, 1)] = Complex64::new(1.0, 0.0);
        let st = FockState::pure(2, 20, amp);
        let out = oracle_loss(&st, ChannelParams::new(0.6, 0.3).unwrap()).unwrap();
        assert_relative_eq!(out.mean_photons(0), 0.6, max_relative = 1e-12);
        assert_relative_eq!(out.mean_photons(1), 0.3, max_relative = 1e-12);
    }

    #[test]
    fn loss_cf_matches_gaussian_loss_map() {
        let r = SqueezingParam::from_r(0.5).unwrap();
        let ch = ChannelParams::new(0.7, 0.7).unwrap();
        let st = oracle_loss(&oracle_tmsv(r, 30, DEFAULT_TAIL_TOL).unwrap(), ch).unwrap();
        let gauss = crate::gaussian_states::apply_loss(&tmsv(r), ch).unwrap();
        for (x1, x2) in [(c(0.5, -0.3), c(0.2, 0.8)), (c(1.1, 0.6), c(-0.9, 0.1))] {
            let got = oracle_cf(&st, &[x1, x2]);
            let expect = gaussian_cf(&gauss, &[x1, x2]);
            assert!(
                (got - expect).norm() < 1e-8,
                "({x1},{x2}): {got} vs {expect}"
            );
        }
    }

    #[test]
    fn generalized_branches_differ_on_tmst() {
        // On thermal-seeded states the dagger and plain generalized
        // operations produce different response ratios.
        let r = SqueezingParam::from_db(6.0).unwrap();
        let base = oracle_tmst(r, 0.5, 40, 1e-6).unwrap();
        let e = vec![0.8, 0.6];
        let dag = GeneralizedPVSpec::new(e.clone(), true).unwrap();
        let plain = GeneralizedPVSpec::new(e, false).unwrap();
        let (st_dag, _) = oracle_apply_generalized(&base, &dag).unwrap();
        let (st_plain, _) = oracle_apply_generalized(&base, &plain).unwrap();
        let xi = c(1.0, 0.0);
        let r_base = oracle_response(&base, xi);
        let h_dag = (oracle_response(&st_dag, xi) / r_base).re;
        let h_plain = (oracle_response(&st_plain, xi) / r_base).re;
        assert!(
            (h_dag - h_plain).abs() > 1e-3,
            "branches coincide: {h_dag} vs {h_plain}"
        );
    }

    #[test]
    fn truncation_tail_is_detected() {
        let r = SqueezingParam::from_db(12.0).unwrap();
        let err = oracle_tmsv(r, 20, DEFAULT_TAIL_TOL).unwrap_err();
        assert!(matches!(err, Error::TruncationTail { .. }));
    }

    #[test]
    fn fidelity_oracle_matches_coherent_closed_form() {
        let st = oracle_tmsv(r8(), 60, 1e-8).unwrap();
        let f = oracle_fidelity_radial(
            &st,
            |xi| Complex64::new((-xi.norm_sqr() / 2.0).exp(), 0.0),
            6.0,
            1500,
        );
        let expect = 1.0 / (1.0 + 10f64.powf(-0.8));
        assert_relative_eq!(f, expect, max_relative = 1e-7);
    }
}
