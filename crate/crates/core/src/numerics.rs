//! Shared numerical utilities: compensated summation, Gauss-Legendre nodes,
//! factorial tables, and a minimal arbitrary-precision complex type used by
//! the extended-precision Hermite path.

use dashu_float::{round::mode::HalfEven, FBig};
use num_complex::Complex64;

/// Neumaier-compensated accumulator (Kahan with magnitude-ordered correction).
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Sum complex terms smallest-magnitude first with per-component compensation.
///
/// The input order is the enumeration order; the sort is stable so the result
/// is a pure function of the term values, independent of thread count.
pub fn compensated_complex_sum(terms: &mut [Complex64]) -> Complex64 {
    terms.sort_by(|a, b| {
        a.norm_sqr()
            .partial_cmp(&b.norm_sqr())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for t in terms.iter() {
        re.add(t.re);
        im.add(t.im);
    }
    Complex64::new(re.value(), im.value())
}

/// Factorials 0!..=170! as f64 (171! overflows).
pub fn factorial_f64(n: u32) -> f64 {
    debug_assert!(n <= 170);
    FACTORIALS[n as usize]
}

const FACTORIAL_TABLE_LEN: usize = 171;

static FACTORIALS: std::sync::LazyLock<[f64; FACTORIAL_TABLE_LEN]> =
    std::sync::LazyLock::new(|| {
        let mut t = [1.0f64; FACTORIAL_TABLE_LEN];
        for i in 1..FACTORIAL_TABLE_LEN {
            t[i] = t[i - 1] * i as f64;
        }
        t
    });

/// Associated Laguerre polynomial `L_n^{(alpha)}(x)` by the three-term
/// recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = ((2 * k + 1) as f64 + alpha - x) * cur - (k as f64 + alpha) * prev;
        prev = cur;
        cur = next / (k + 1) as f64;
    }
    cur
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
///
/// Nodes are computed by Newton iteration on the Legendre recurrence starting
/// from the Chebyshev angle estimate; accurate to ~1e-15 for n up to several
/// hundred.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// ---------------------------------------------------------------------------
// Extended-precision complex arithmetic
// ---------------------------------------------------------------------------

pub type Big = FBig<HalfEven, 2>;

pub fn big_from_f64(x: f64, bits: usize) -> Big {
    Big::try_from(x)
        .expect("finite f64")
        .with_precision(bits)
        .value()
}

/// Complex number over arbitrary-precision binary floats.
///
/// Only the operations needed by the Hermite term sums are provided.
#[derive(Debug, Clone)]
pub struct BigComplex {
    pub re: Big,
    pub im: Big,
}

impl BigComplex {
    pub fn from_c64(z: Complex64, bits: usize) -> Self {
        Self {
            re: big_from_f64(z.re, bits),
            im: big_from_f64(z.im, bits),
        }
    }

    pub fn from_real(x: Big) -> Self {
        let zero = Big::ZERO.with_precision(x.precision()).value();
        Self { re: x, im: zero }
    }

    pub fn zero(bits: usize) -> Self {
        Self {
            re: Big::ZERO.with_precision(bits).value(),
            im: Big::ZERO.with_precision(bits).value(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }

    pub fn scale(&self, rhs: &Big) -> Self {
        Self {
            re: &self.re * rhs,
            im: &self.im * rhs,
        }
    }

    pub fn powu(&self, mut e: u32) -> Self {
        let bits = self.re.precision().max(self.im.precision());
        let mut base = self.clone();
        let mut acc = Self {
            re: big_from_f64(1.0, bits),
            im: Big::ZERO.with_precision(bits).value(),
        };
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64().value(), self.im.to_f64().value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn neumaier_recovers_cancelled_tail() {
        let mut s = NeumaierSum::new();
        for x in [1e100, 0.1, 0.2, 0.3, -1e100] {
            s.add(x);
        }
        assert_relative_eq!(s.value(), 0.6, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_five_point_matches_reference() {
        let (x, w) = gauss_legendre(5, -1.0, 1.0);
        // Abramowitz & Stegun 25.4.30
        assert_relative_eq!(x[4], 0.906_179_845_938_664, epsilon = 1e-13);
        assert_relative_eq!(x[3], 0.538_469_310_105_683, epsilon = 1e-13);
        assert_relative_eq!(x[2], 0.0, epsilon = 1e-14);
        assert_relative_eq!(w[2], 0.568_888_888_888_889, epsilon = 1e-13);
        assert_relative_eq!(w[3], 0.478_628_670_499_366, epsilon = 1e-13);
        assert_relative_eq!(w[4], 0.236_926_885_056_189, epsilon = 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n-point rule is exact through degree 2n-1.
        let (x, w) = gauss_legendre(8, 0.0, 2.0);
        for k in 0..=15u32 {
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(k as i32))
                .sum();
            let exact = 2.0f64.powi(k as i32 + 1) / (k as f64 + 1.0);
            assert_relative_eq!(got, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_gaussian_tail() {
        let (x, w) = gauss_legendre(64, 0.0, 6.0);
        let got: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * (-xi * xi).exp() * xi)
            .sum();
        assert_relative_eq!(got, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn big_complex_roundtrip_and_product() {
        let a = BigComplex::from_c64(Complex64::new(1.5, -2.25), 256);
        let b = BigComplex::from_c64(Complex64::new(-0.5, 3.0), 256);
        let p = a.mul(&b).to_c64();
        let q = Complex64::new(1.5, -2.25) * Complex64::new(-0.5, 3.0);
        assert_relative_eq!(p.re, q.re, max_relative = 1e-15);
        assert_relative_eq!(p.im, q.im, max_relative = 1e-15);
        let w = a.powu(7).to_c64();
        let v = Complex64::new(1.5, -2.25).powu(7);
        assert_relative_eq!(w.re, v.re, max_relative = 1e-13);
        assert_relative_eq!(w.im, v.im, max_relative = 1e-13);
    }

    #[test]
    fn factorial_table_spot_values() {
        assert_eq!(factorial_f64(0), 1.0);
        assert_eq!(factorial_f64(5), 120.0);
        assert_relative_eq!(factorial_f64(20), 2.43290200817664e18, max_relative = 1e-15);
    }
}
