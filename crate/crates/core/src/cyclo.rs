//! Exact arithmetic in cyclotomic fields Q(zeta_n).
//!
//! Every character value, operator entry and trace in this crate lives in
//! some Q(zeta_n): the additive character psi takes values in Q(zeta_p),
//! rotation-group characters in Q(zeta_{q+1}), torus characters in
//! Q(zeta_{q^2+1}), and mixed inner products in a compositum. Elements are
//! stored on the power basis zeta^0..zeta^{phi(n)-1} reduced modulo the n-th
//! cyclotomic polynomial, so equality is coefficient-wise and decidable.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::gftower::FieldTower;

/// Exact rational scalar: numerator/denominator in lowest terms, denominator positive.
pub type Rat = BigRational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CycloError {
    #[error("conductor mismatch: {0} vs {1}")]
    ConductorMismatch(u32, u32),
    #[error("division by zero in Q(zeta_{0})")]
    DivisionByZero(u32),
    #[error("value is not rational")]
    NotRational,
    #[error("exponent {0} is not invertible modulo {1}")]
    BadGaloisExponent(u32, u32),
    #[error("{0} does not divide target conductor {1}")]
    BadEmbedding(u32, u32),
}

fn rat_i64(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// Euler totient by trial division; conductors here are tiny.
pub fn euler_phi(n: u32) -> u32 {
    let mut n = n;
    let mut result = n;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            while n % d == 0 {
                n /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

fn divisors(n: u32) -> Vec<u32> {
    let mut divs = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n % i == 0 {
            divs.push(i);
            if i != n / i {
                divs.push(n / i);
            }
        }
        i += 1;
    }
    divs.sort_unstable();
    divs
}

/// Integer coefficients of the n-th cyclotomic polynomial, ascending degree,
/// monic of degree phi(n). Computed by dividing x^n - 1 by Phi_d for the
/// proper divisors d of n; results are cached per conductor.
pub fn cyclotomic_poly(n: u32) -> Vec<BigInt> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Vec<BigInt>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&n) {
        return p.clone();
    }
    assert!(n >= 1, "conductor must be positive");
    let poly = if n == 1 {
        vec![BigInt::from(-1), BigInt::from(1)]
    } else {
        // x^n - 1
        let mut num = vec![BigInt::zero(); (n + 1) as usize];
        num[0] = BigInt::from(-1);
        num[n as usize] = BigInt::from(1);
        for d in divisors(n) {
            if d == n {
                continue;
            }
            num = exact_div_monic(&num, &cyclotomic_poly(d));
        }
        num
    };
    assert_eq!(poly.len() as u32, euler_phi(n) + 1);
    cache.lock().unwrap().insert(n, poly.clone());
    poly
}

/// Exact division of integer polynomials, divisor monic.
fn exact_div_monic(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    assert!(den.last().map(|c| c.is_one()).unwrap_or(false));
    let mut rem: Vec<BigInt> = num.to_vec();
    let dn = den.len() - 1;
    let qn = rem.len() - 1 - dn;
    let mut quot = vec![BigInt::zero(); qn + 1];
    for i in (0..=qn).rev() {
        let c = std::mem::take(&mut rem[i + dn]);
        if !c.is_zero() {
            for (j, dj) in den.iter().enumerate().take(dn) {
                let t = &c * dj;
                rem[i + j] -= t;
            }
        }
        quot[i] = c;
    }
    assert!(rem.iter().all(|c| c.is_zero()), "division was not exact");
    quot
}

/// An element of Q(zeta_n) in canonical form: coefficients of
/// zeta^0..zeta^{phi(n)-1} after reduction modulo the n-th cyclotomic
/// polynomial. The primary conductors are odd primes p (values of the
/// additive character); composite conductors carry rotation- and
/// torus-character values.
#[derive(Clone, PartialEq, Eq)]
pub struct CycNum {
    n: u32,
    coeffs: Vec<Rat>,
}

impl CycNum {
    pub fn zero(n: u32) -> Self {
        CycNum {
            n,
            coeffs: vec![Rat::zero(); euler_phi(n) as usize],
        }
    }

    pub fn one(n: u32) -> Self {
        Self::from_rat(n, Rat::one())
    }

    pub fn from_rat(n: u32, r: Rat) -> Self {
        let mut c = Self::zero(n);
        c.coeffs[0] = r;
        c
    }

    pub fn from_i64(n: u32, v: i64) -> Self {
        Self::from_rat(n, rat_i64(v))
    }

    /// zeta_n^k, any integer k.
    pub fn root_of_unity(n: u32, k: i64) -> Self {
        let k = k.rem_euclid(n as i64) as usize;
        let mut poly = vec![Rat::zero(); k + 1];
        poly[k] = Rat::one();
        Self::reduce(n, poly)
    }

    fn reduce(n: u32, mut poly: Vec<Rat>) -> Self {
        let phi = euler_phi(n) as usize;
        if poly.len() > phi {
            let modpoly = cyclotomic_poly(n);
            for i in (phi..poly.len()).rev() {
                let c = std::mem::replace(&mut poly[i], Rat::zero());
                if !c.is_zero() {
                    for (j, mj) in modpoly.iter().enumerate().take(phi) {
                        if !mj.is_zero() {
                            let t = &c * mj;
                            poly[i - phi + j] -= t;
                        }
                    }
                }
            }
        }
        poly.resize(phi, Rat::zero());
        CycNum { n, coeffs: poly }
    }

    pub fn conductor(&self) -> u32 {
        self.n
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_rational(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    /// The rational value, if the element lies in Q.
    pub fn as_rat(&self) -> Result<Rat, CycloError> {
        if self.is_rational() {
            Ok(self.coeffs[0].clone())
        } else {
            Err(CycloError::NotRational)
        }
    }

    pub fn as_i64(&self) -> Result<i64, CycloError> {
        let r = self.as_rat()?;
        if !r.is_integer() {
            return Err(CycloError::NotRational);
        }
        use num::ToPrimitive;
        r.to_integer().to_i64().ok_or(CycloError::NotRational)
    }

    fn check_same(&self, other: &Self) -> Result<(), CycloError> {
        if self.n != other.n {
            Err(CycloError::ConductorMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, CycloError> {
        self.check_same(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CycNum { n: self.n, coeffs })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, CycloError> {
        self.check_same(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CycNum { n: self.n, coeffs })
    }

    /// Canonical-form product; errors on mismatched conductors.
    pub fn checked_mul(&self, other: &Self) -> Result<Self, CycloError> {
        self.check_same(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.n));
        }
        let la = self.coeffs.len();
        let lb = other.coeffs.len();
        let mut prod = vec![Rat::zero(); la + lb - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] += a * b;
                }
            }
        }
        Ok(Self::reduce(self.n, prod))
    }

    /// Multiplicative inverse, by solving the phi(n)-dimensional linear
    /// system a*x = 1 over Q.
    pub fn checked_inv(&self) -> Result<Self, CycloError> {
        if self.is_zero() {
            return Err(CycloError::DivisionByZero(self.n));
        }
        if self.is_rational() {
            return Ok(Self::from_rat(self.n, self.coeffs[0].recip()));
        }
        let phi = self.coeffs.len();
        // Columns: a * zeta^j reduced.
        let mut cols: Vec<Vec<Rat>> = Vec::with_capacity(phi);
        let mut cur = self.clone();
        for _ in 0..phi {
            cols.push(cur.coeffs.clone());
            let mut shifted = vec![Rat::zero(); cur.coeffs.len() + 1];
            for (i, c) in cur.coeffs.iter().enumerate() {
                shifted[i + 1] = c.clone();
            }
            cur = Self::reduce(self.n, shifted);
        }
        // Augmented system M x = e0, Gaussian elimination.
        let mut m = vec![vec![Rat::zero(); phi + 1]; phi];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..phi {
                m[i][j] = col[i].clone();
            }
        }
        m[0][phi] = Rat::one();
        for col in 0..phi {
            let pivot = (col..phi)
                .find(|&r| !m[r][col].is_zero())
                .expect("element of a field is invertible");
            m.swap(col, pivot);
            let inv = m[col][col].recip();
            for j in col..=phi {
                let v = &m[col][j] * &inv;
                m[col][j] = v;
            }
            for r in 0..phi {
                if r != col && !m[r][col].is_zero() {
                    let f = std::mem::replace(&mut m[r][col], Rat::zero());
                    for j in (col + 1)..=phi {
                        let t = &f * &m[col][j];
                        m[r][j] -= t;
                    }
                }
            }
        }
        let coeffs = (0..phi).map(|i| m[i][phi].clone()).collect();
        Ok(CycNum { n: self.n, coeffs })
    }

    pub fn neg(&self) -> Self {
        CycNum {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        CycNum {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    /// Galois automorphism zeta -> zeta^k, gcd(k, n) = 1.
    pub fn galois(&self, k: u32) -> Result<Self, CycloError> {
        let k = k % self.n;
        if num::integer::gcd(k as u64, self.n as u64) != 1 {
            return Err(CycloError::BadGaloisExponent(k, self.n));
        }
        let mut poly = vec![Rat::zero(); ((self.coeffs.len() - 1) * k as usize) + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                let e = (i as u64 * k as u64 % self.n as u64) as usize;
                if poly.len() <= e {
                    poly.resize(e + 1, Rat::zero());
                }
                poly[e] += c;
            }
        }
        Ok(Self::reduce(self.n, poly))
    }

    /// Complex conjugation zeta -> zeta^{-1}.
    pub fn conj(&self) -> Self {
        if self.n == 1 {
            return self.clone();
        }
        self.galois(self.n - 1).expect("n-1 is coprime to n")
    }

    /// Reinterpret in Q(zeta_m) for n | m, via zeta_n = zeta_m^{m/n}.
    pub fn embed(&self, m: u32) -> Result<Self, CycloError> {
        if m % self.n != 0 {
            return Err(CycloError::BadEmbedding(self.n, m));
        }
        if m == self.n {
            return Ok(self.clone());
        }
        let step = (m / self.n) as usize;
        let mut poly = vec![Rat::zero(); (self.coeffs.len() - 1) * step + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                poly[i * step] = c.clone();
            }
        }
        Ok(Self::reduce(m, poly))
    }

    /// Floating-point image under zeta_n -> exp(2*pi*i/n), for reports only.
    pub fn approx(&self) -> (f64, f64) {
        use num::ToPrimitive;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                let v = c.to_f64().unwrap_or(f64::NAN);
                let ang = 2.0 * std::f64::consts::PI * (i as f64) / (self.n as f64);
                re += v * ang.cos();
                im += v * ang.sin();
            }
        }
        (re, im)
    }

    pub fn approx_string(&self) -> String {
        let (re, im) = self.approx();
        if im.abs() < 1e-9 {
            format!("{re:.9}")
        } else {
            format!("{re:.9}{im:+.9}i")
        }
    }

    /// Report form: {"p": n, "coeffs": [[num, den], ...], "approx": "..."}.
    /// Numerator/denominator are decimal strings so arbitrary-precision
    /// integers survive JSON round-trips.
    pub fn to_report_json(&self) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = self
            .coeffs
            .iter()
            .map(|c| {
                serde_json::json!([c.numer().to_string(), c.denom().to_string()])
            })
            .collect();
        serde_json::json!({
            "p": self.n,
            "coeffs": coeffs,
            "approx": self.approx_string(),
        })
    }

    pub fn from_report_json(v: &serde_json::Value) -> Option<Self> {
        let n = v.get("p")?.as_u64()? as u32;
        let arr = v.get("coeffs")?.as_array()?;
        let mut coeffs = Vec::with_capacity(arr.len());
        for c in arr {
            let pair = c.as_array()?;
            let num: BigInt = pair[0].as_str()?.parse().ok()?;
            let den: BigInt = pair[1].as_str()?.parse().ok()?;
            coeffs.push(Rat::new(num, den));
        }
        if coeffs.len() != euler_phi(n) as usize {
            return None;
        }
        Some(CycNum { n, coeffs })
    }
}

impl fmt::Debug for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
            } else if c.is_negative() {
                write!(f, "-")?;
            }
            let a = c.abs();
            if i == 0 {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "z{}^{}", self.n, i)?;
            } else {
                write!(f, "{a}*z{}^{}", self.n, i)?;
            }
            first = false;
        }
        Ok(())
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl std::ops::$trait<&CycNum> for &CycNum {
            type Output = CycNum;
            fn $method(self, rhs: &CycNum) -> CycNum {
                self.$checked(rhs).expect("conductor mismatch")
            }
        }
    };
}
impl_binop!(Add, add, checked_add);
impl_binop!(Sub, sub, checked_sub);
impl_binop!(Mul, mul, checked_mul);

/// The fixed additive character psi of F_p: psi(x) = zeta_p^x under the
/// identification F_p = Z/p. Any nontrivial choice gives the same isotypic
/// dimensions; this one is pinned for reproducibility.
pub fn additive_character(p: u32, x: u32) -> CycNum {
    CycNum::root_of_unity(p, (x % p) as i64)
}

/// Quadratic Gauss sum over F_q: sum over x in F_q of psi(Tr(x^2)).
/// Satisfies g * conj(g) = q; normalization cross-check for Fourier-type
/// operators.
pub fn gauss_sum(tower: &FieldTower) -> CycNum {
    let p = tower.p();
    let mut acc = CycNum::zero(p);
    for &x in tower.level1_elements() {
        let sq = tower.mul(x, x);
        let t = tower.trace_to_fp(sq);
        acc = &acc + &additive_character(p, t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn z(n: u32, k: i64) -> CycNum {
        CycNum::root_of_unity(n, k)
    }

    #[test]
    fn cyclotomic_polys_match_hand_values() {
        // Phi_3 = x^2 + x + 1, Phi_4 = x^2 + 1, Phi_12 = x^4 - x^2 + 1
        let to_i64 = |v: Vec<BigInt>| -> Vec<i64> {
            v.into_iter().map(|c| i64::try_from(c).unwrap()).collect()
        };
        assert_eq!(to_i64(cyclotomic_poly(3)), vec![1, 1, 1]);
        assert_eq!(to_i64(cyclotomic_poly(4)), vec![1, 0, 1]);
        assert_eq!(to_i64(cyclotomic_poly(12)), vec![1, 0, -1, 0, 1]);
        assert_eq!(cyclotomic_poly(50).len(), 21);
    }

    #[test]
    fn zeta3_times_zeta3_squared_is_one() {
        assert_eq!(z(3, 1).checked_mul(&z(3, 2)).unwrap(), CycNum::one(3));
    }

    #[test]
    fn product_of_conjugate_gauss_factors_is_three() {
        // (1+2*zeta3)(1+2*zeta3^2) = 3, expanded by hand and reduced mod Phi_3:
        // 1 + 2z + 2z^2 + 4z^3 = 1 + 2(z + z^2) + 4 = 1 - 2 + 4 = 3.
        let a = &CycNum::one(3) + &z(3, 1).scale(&rat_i64(2));
        let b = &CycNum::one(3) + &z(3, 2).scale(&rat_i64(2));
        assert_eq!(&a * &b, CycNum::from_i64(3, 3));
    }

    #[test]
    fn multiplying_by_one_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = random_cyc(&mut rng, 7);
            assert_eq!(&a * &CycNum::one(7), a);
        }
    }

    #[test]
    fn inverse_of_zeta3_is_zeta3_squared() {
        assert_eq!(z(3, 1).checked_inv().unwrap(), z(3, 2));
    }

    #[test]
    fn inverse_of_rational_is_rational() {
        let three = CycNum::from_i64(5, 3);
        assert_eq!(
            three.checked_inv().unwrap(),
            CycNum::from_rat(5, Rat::new(BigInt::from(1), BigInt::from(3)))
        );
    }

    #[test]
    fn inverse_of_one_plus_two_zeta3() {
        // From the product identity above: inv(1+2z) = (1+2z^2)/3.
        let a = &CycNum::one(3) + &z(3, 1).scale(&rat_i64(2));
        let expect = (&CycNum::one(3) + &z(3, 2).scale(&rat_i64(2)))
            .scale(&Rat::new(BigInt::from(1), BigInt::from(3)));
        assert_eq!(a.checked_inv().unwrap(), expect);
    }

    #[test]
    fn inverse_of_zero_errors() {
        assert_eq!(
            CycNum::zero(3).checked_inv(),
            Err(CycloError::DivisionByZero(3))
        );
    }

    #[test]
    fn conductor_mismatch_is_an_error() {
        assert!(matches!(
            z(3, 1).checked_mul(&z(5, 1)),
            Err(CycloError::ConductorMismatch(3, 5))
        ));
    }

    #[test]
    fn additive_character_identities() {
        assert_eq!(additive_character(3, 0), CycNum::one(3));
        let lhs = &additive_character(3, 1) * &additive_character(3, 2);
        assert_eq!(lhs, CycNum::one(3));
        let mut sum = CycNum::zero(3);
        for x in 0..3 {
            sum = &sum + &additive_character(3, x);
        }
        assert!(sum.is_zero());
    }

    fn random_cyc(rng: &mut impl Rng, n: u32) -> CycNum {
        let phi = euler_phi(n) as usize;
        let coeffs = (0..phi)
            .map(|_| {
                Rat::new(
                    BigInt::from(rng.gen_range(-6i64..=6)),
                    BigInt::from(rng.gen_range(1i64..=4)),
                )
            })
            .collect();
        CycNum { n, coeffs }
    }

    #[test]
    fn field_axioms_on_random_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for n in [3u32, 5, 7, 12] {
            for _ in 0..25 {
                let a = random_cyc(&mut rng, n);
                let b = random_cyc(&mut rng, n);
                let c = random_cyc(&mut rng, n);
                let ab_c = &(&a * &b) * &c;
                let a_bc = &a * &(&b * &c);
                assert_eq!(ab_c, a_bc, "associativity at n={n}");
                let lhs = &a * &(&b + &c);
                let rhs = &(&a * &b) + &(&a * &c);
                assert_eq!(lhs, rhs, "distributivity at n={n}");
                if !a.is_zero() {
                    let inv = a.checked_inv().unwrap();
                    assert_eq!(&a * &inv, CycNum::one(n), "inverse at n={n}");
                }
            }
        }
    }

    #[test]
    fn galois_maps_are_field_automorphisms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [5u32, 7, 12] {
            for k in 1..n {
                if num::integer::gcd(k as u64, n as u64) != 1 {
                    continue;
                }
                for _ in 0..8 {
                    let a = random_cyc(&mut rng, n);
                    let b = random_cyc(&mut rng, n);
                    let lhs = (&a * &b).galois(k).unwrap();
                    let rhs = &a.galois(k).unwrap() * &b.galois(k).unwrap();
                    assert_eq!(lhs, rhs);
                    let lhs = (&a + &b).galois(k).unwrap();
                    let rhs = &a.galois(k).unwrap() + &b.galois(k).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn report_json_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = random_cyc(&mut rng, 7);
            let j = a.to_report_json();
            let back = CycNum::from_report_json(&j).unwrap();
            assert_eq!(a, back);
        }
    }

    #[test]
    fn embedding_is_multiplicative() {
        let a = z(3, 1);
        let b = z(3, 2);
        let lhs = (&a * &b).embed(12).unwrap();
        let rhs = &a.embed(12).unwrap() * &b.embed(12).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(z(3, 1).embed(12).unwrap(), z(12, 4));
    }

    #[test]
    fn conjugation_inverts_roots_of_unity() {
        for n in [3u32, 4, 5, 12] {
            assert_eq!(z(n, 1).conj(), z(n, -1));
        }
    }
}
