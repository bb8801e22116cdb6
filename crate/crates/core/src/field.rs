//! Exact arithmetic in a prime field `F_q`.
//!
//! Moduli up to 64 bits are supported. Products go through 128-bit
//! intermediates; the Mersenne prime `2^61 - 1` (the default) takes a
//! shift-and-add reduction path instead of a division.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

/// `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus must be at least 3, got {0}")]
    ModulusTooSmall(u64),
    #[error("operands live in different fields (q = {0} vs q = {1})")]
    ModulusMismatch(u64, u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error("duplicate evaluation point x = {0}")]
    DuplicatePoint(u64),
    #[error("evaluation point x = 0 is reserved for the secret")]
    ZeroPoint,
}

/// Modulus context for a prime field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldConfig {
    q: u64,
    bit_length: u32,
}

impl FieldConfig {
    /// Builds a field context, rejecting composite or tiny moduli.
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if q < 3 {
            return Err(FieldError::ModulusTooSmall(q));
        }
        if !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(Self {
            q,
            bit_length: 64 - (q - 1).leading_zeros(),
        })
    }

    pub fn mersenne61() -> Self {
        Self::new(MERSENNE_61).expect("2^61-1 is prime")
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Bit length of `q - 1` (the exponent used by the zero indicator).
    #[inline]
    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.q,
            modulus: self.q,
        }
    }

    /// Maps a signed integer into the field (`-1` becomes `q - 1`).
    pub fn elem_i64(&self, value: i64) -> FieldElement {
        let r = (value as i128).rem_euclid(self.q as i128) as u64;
        FieldElement {
            value: r,
            modulus: self.q,
        }
    }

    #[inline]
    pub fn zero(&self) -> FieldElement {
        self.elem(0)
    }

    #[inline]
    pub fn one(&self) -> FieldElement {
        self.elem(1)
    }

    /// Uniform element of `[0, q)`. `gen_range` rejects out-of-zone draws,
    /// so there is no modulo bias.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement {
            value: rng.gen_range(0..self.q),
            modulus: self.q,
        }
    }

    /// Uniform element of `[1, q)`.
    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement {
            value: rng.gen_range(1..self.q),
            modulus: self.q,
        }
    }

    #[inline]
    pub(crate) fn reduce_wide(&self, x: u128) -> u64 {
        if self.q == MERSENNE_61 {
            // x < 2^122, so two folds bring it below 2^62.
            let lo = (x as u64) & MERSENNE_61;
            let hi = (x >> 61) as u64;
            let mut r = lo + (hi & MERSENNE_61) + (hi >> 61);
            if r >= MERSENNE_61 {
                r -= MERSENNE_61;
            }
            if r >= MERSENNE_61 {
                r -= MERSENNE_61;
            }
            r
        } else {
            (x % self.q as u128) as u64
        }
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self::mersenne61()
    }
}

/// A residue modulo `q`. Carries its modulus so mixed-field arithmetic is
/// caught instead of silently producing garbage.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn field(&self) -> FieldConfig {
        FieldConfig {
            q: self.modulus,
            bit_length: 64 - (self.modulus - 1).leading_zeros(),
        }
    }

    fn check(&self, other: &Self) -> Result<(), FieldError> {
        if self.modulus == other.modulus {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch(self.modulus, other.modulus))
        }
    }

    pub fn try_add(self, other: Self) -> Result<Self, FieldError> {
        self.check(&other)?;
        let q = self.modulus as u128;
        let s = (self.value as u128 + other.value as u128) % q;
        Ok(Self {
            value: s as u64,
            modulus: self.modulus,
        })
    }

    pub fn try_sub(self, other: Self) -> Result<Self, FieldError> {
        self.check(&other)?;
        let v = if self.value >= other.value {
            self.value - other.value
        } else {
            self.modulus - (other.value - self.value)
        };
        Ok(Self {
            value: v,
            modulus: self.modulus,
        })
    }

    pub fn try_mul(self, other: Self) -> Result<Self, FieldError> {
        self.check(&other)?;
        let wide = self.value as u128 * other.value as u128;
        Ok(Self {
            value: self.field().reduce_wide(wide),
            modulus: self.modulus,
        })
    }

    /// Square-and-multiply. `pow(0, 0) = 1` by convention.
    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = Self {
            value: 1,
            modulus: self.modulus,
        };
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat: `a^(q-2)`.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.value == 0 {
            return Err(FieldError::DivisionByZero);
        }
        Ok(self.pow(self.modulus - 2))
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.value)
    }
}

// The operator impls panic on mixed moduli; that is always a programming
// error inside this crate. Callers holding untrusted operands use `try_*`.
impl Add for FieldElement {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.try_add(rhs).expect("field modulus mismatch")
    }
}

impl Sub for FieldElement {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.try_sub(rhs).expect("field modulus mismatch")
    }
}

impl Mul for FieldElement {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.try_mul(rhs).expect("field modulus mismatch")
    }
}

impl Neg for FieldElement {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let value = if self.value == 0 {
            0
        } else {
            self.modulus - self.value
        };
        Self {
            value,
            modulus: self.modulus,
        }
    }
}

/// Polynomial over `F_q`, constant term first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensePolynomial {
    coefficients: Vec<FieldElement>,
}

impl DensePolynomial {
    pub fn new(coefficients: Vec<FieldElement>) -> Self {
        assert!(!coefficients.is_empty(), "polynomial needs a constant term");
        Self { coefficients }
    }

    /// `constant + r_1 x + ... + r_degree x^degree` with uniform `r_j`.
    pub fn random_with_constant<R: Rng + ?Sized>(
        constant: FieldElement,
        degree: usize,
        rng: &mut R,
    ) -> Self {
        let field = constant.field();
        let mut coefficients = Vec::with_capacity(degree + 1);
        coefficients.push(constant);
        for _ in 0..degree {
            coefficients.push(field.sample_uniform(rng));
        }
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, x: FieldElement) -> Result<FieldElement, FieldError> {
        let mut acc = *self.coefficients.last().expect("non-empty");
        for c in self.coefficients.iter().rev().skip(1) {
            acc = acc.try_mul(x)?.try_add(*c)?;
        }
        Ok(acc)
    }
}

/// Weights `lambda_i` with `f(0) = sum_i lambda_i f(x_i)` for every
/// polynomial of degree below `xs.len()`.
pub fn lagrange_weights_at_zero(xs: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
    if xs.is_empty() {
        return Err(FieldError::NoPoints);
    }
    for (i, x) in xs.iter().enumerate() {
        if x.is_zero() {
            return Err(FieldError::ZeroPoint);
        }
        for y in &xs[..i] {
            x.check(y)?;
            if x == y {
                return Err(FieldError::DuplicatePoint(x.value()));
            }
        }
    }
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut num = xi.field().one();
            let mut den = xi.field().one();
            for (j, &xj) in xs.iter().enumerate() {
                if i != j {
                    // lambda_i = prod_{j != i} x_j / (x_j - x_i)
                    num = num * xj;
                    den = den * (xj - xi);
                }
            }
            Ok(num * den.inv()?)
        })
        .collect()
}

/// Value at zero of the unique interpolant through `points`.
pub fn interpolate_at_zero(
    points: &[(FieldElement, FieldElement)],
) -> Result<FieldElement, FieldError> {
    let xs: Vec<FieldElement> = points.iter().map(|p| p.0).collect();
    let weights = lagrange_weights_at_zero(&xs)?;
    let mut acc = points[0].1.field().zero();
    for (w, (_, y)) in weights.iter().zip(points) {
        acc = acc.try_add(w.try_mul(*y)?)?;
    }
    Ok(acc)
}

/// Deterministic Miller-Rabin; the witness set is exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in WITNESSES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
