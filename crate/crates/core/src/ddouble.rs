//! Double-double real arithmetic (roughly 32 significant decimal digits) and
//! the small real-scalar abstraction shared with `f64`.
//!
//! Only what the characteristic-determinant evaluation needs is provided:
//! the four field operations, square root, exponential and sine/cosine.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{Num, One, Zero};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const PI_DD: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};
const HALF_PI_DD: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::FRAC_PI_2,
    lo: 6.123_233_995_736_766e-17,
};
const LN2_DD: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    /// Builds a normalized value from an unnormalized pair.
    pub fn from_parts(hi: f64, lo: f64) -> Self {
        let (h, l) = two_sum(hi, lo);
        DoubleDouble { hi: h, lo: l }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn pi() -> Self {
        PI_DD
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        let (s, e) = quick_two_sum(p1, p2 + self.lo * b);
        DoubleDouble { hi: s, lo: e }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        DoubleDouble {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    fn sqr_f64(a: f64) -> Self {
        let (p, e) = two_prod(a, a);
        DoubleDouble { hi: p, lo: e }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            if self.hi == 0.0 {
                return Self::ZERO;
            }
            return DoubleDouble::from_f64(f64::NAN);
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let corr = (self - Self::sqr_f64(ax)).hi * (x * 0.5);
        let (s, e) = two_sum(ax, corr);
        DoubleDouble { hi: s, lo: e }
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.7 {
            return DoubleDouble::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ONE;
        }
        let k = (self.hi / LN2_DD.hi).round();
        let r = (self - LN2_DD.mul_f64(k)).scale_pow2(-10);
        // expm1 of the reduced argument by Taylor series
        let mut term = r;
        let mut sum = r;
        let mut j = 2.0;
        loop {
            term = term * r / DoubleDouble::from_f64(j);
            sum += term;
            if term.hi.abs() < 1e-36 || j > 40.0 {
                break;
            }
            j += 1.0;
        }
        // undo the 2^-10 scaling: expm1(2x) = 2 expm1(x) + expm1(x)^2
        for _ in 0..10 {
            sum = sum.scale_pow2(1) + sum * sum;
        }
        (sum + Self::ONE).scale_pow2(k as i32)
    }

    /// Simultaneous sine and cosine.
    pub fn sin_cos(self) -> (Self, Self) {
        if self.hi == 0.0 {
            return (Self::ZERO, Self::ONE);
        }
        let k = (self.hi / HALF_PI_DD.hi).round();
        let r = self - HALF_PI_DD.mul_f64(k);
        let r2 = r * r;
        // sin series
        let mut term = r;
        let mut s = r;
        let mut j = 1.0;
        loop {
            term = -(term * r2) / DoubleDouble::from_f64((j + 1.0) * (j + 2.0));
            s += term;
            j += 2.0;
            if term.hi.abs() < 1e-36 || j > 60.0 {
                break;
            }
        }
        // cos series
        let mut term = Self::ONE;
        let mut c = Self::ONE;
        let mut j = 0.0;
        loop {
            term = -(term * r2) / DoubleDouble::from_f64((j + 1.0) * (j + 2.0));
            c += term;
            j += 2.0;
            if term.hi.abs() < 1e-36 || j > 60.0 {
                break;
            }
        }
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}{:+e}", self.hi, self.lo)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        let q = (self / b).to_f64().trunc();
        self - b.mul_f64(q)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::ONE
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = std::num::ParseFloatError;
    fn from_str_radix(s: &str, _radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        s.parse::<f64>().map(DoubleDouble::from_f64)
    }
}

/// Real scalar used by the characteristic-determinant kernels.
pub trait Real:
    Copy + Num + Neg<Output = Self> + PartialOrd + Send + Sync + fmt::Debug + 'static
{
    fn of(x: f64) -> Self;
    fn approx(self) -> f64;
    fn pi() -> Self;
    fn rsqrt(self) -> Self;
    fn rexp(self) -> Self;
    fn rsin_cos(self) -> (Self, Self);
    fn rabs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn approx(self) -> f64 {
        self
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn rsqrt(self) -> Self {
        self.sqrt()
    }
    fn rexp(self) -> Self {
        self.exp()
    }
    fn rsin_cos(self) -> (Self, Self) {
        self.sin_cos()
    }
}

impl Real for DoubleDouble {
    fn of(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
    fn approx(self) -> f64 {
        self.to_f64()
    }
    fn pi() -> Self {
        PI_DD
    }
    fn rsqrt(self) -> Self {
        self.sqrt()
    }
    fn rexp(self) -> Self {
        self.exp()
    }
    fn rsin_cos(self) -> (Self, Self) {
        self.sin_cos()
    }
}

/// Complex double-double number.
pub type ComplexDD = Complex<DoubleDouble>;

pub fn lift(z: Complex<f64>) -> ComplexDD {
    Complex::new(DoubleDouble::from_f64(z.re), DoubleDouble::from_f64(z.im))
}

pub fn lower(z: ComplexDD) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

/// Complex helpers generic over the real scalar.
pub mod cx {
    use super::Real;
    use num_complex::Complex;

    pub fn of<R: Real>(z: Complex<f64>) -> Complex<R> {
        Complex::new(R::of(z.re), R::of(z.im))
    }

    pub fn approx<R: Real>(z: Complex<R>) -> Complex<f64> {
        Complex::new(z.re.approx(), z.im.approx())
    }

    pub fn real<R: Real>(x: R) -> Complex<R> {
        Complex::new(x, R::zero())
    }

    pub fn imag<R: Real>(x: R) -> Complex<R> {
        Complex::new(R::zero(), x)
    }

    pub fn abs<R: Real>(z: Complex<R>) -> R {
        (z.re * z.re + z.im * z.im).rsqrt()
    }

    /// Principal square root (nonnegative real part, branch cut on the
    /// negative real axis, where the root with positive imaginary part is
    /// returned).
    pub fn sqrt<R: Real>(z: Complex<R>) -> Complex<R> {
        let zero = R::zero();
        if z.re == zero && z.im == zero {
            return z;
        }
        let half = R::of(0.5);
        let m = abs(z);
        let t = ((m + z.re.rabs()) * half).rsqrt();
        if z.re >= zero {
            Complex::new(t, z.im / (t + t))
        } else {
            let im = if z.im < zero { -t } else { t };
            Complex::new(z.im.rabs() / (t + t), im)
        }
    }

    pub fn exp<R: Real>(z: Complex<R>) -> Complex<R> {
        let e = z.re.rexp();
        let (s, c) = z.im.rsin_cos();
        Complex::new(e * c, e * s)
    }

    /// `(cosh z, sinh z)`.
    pub fn cosh_sinh<R: Real>(z: Complex<R>) -> (Complex<R>, Complex<R>) {
        let half = R::of(0.5);
        let e = z.re.rexp();
        let ei = R::one() / e;
        let ch = (e + ei) * half;
        let sh = (e - ei) * half;
        let (s, c) = z.im.rsin_cos();
        (Complex::new(ch * c, sh * s), Complex::new(sh * c, ch * s))
    }

    /// `(cosh z, sinh z)` multiplied by `exp(-|Re z|)`; bounded for every z.
    pub fn cosh_sinh_scaled<R: Real>(z: Complex<R>) -> (Complex<R>, Complex<R>) {
        let half = R::of(0.5);
        let a = z.re.rabs();
        let e2 = (-(a + a)).rexp();
        let ch = (R::one() + e2) * half;
        let mut sh = (R::one() - e2) * half;
        if z.re < R::zero() {
            sh = -sh;
        }
        let (s, c) = z.im.rsin_cos();
        (Complex::new(ch * c, sh * s), Complex::new(sh * c, ch * s))
    }

    pub fn cos<R: Real>(x: R) -> R {
        x.rsin_cos().1
    }

    pub fn sin<R: Real>(x: R) -> R {
        x.rsin_cos().0
    }
}
