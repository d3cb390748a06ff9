//! Finite fields GF(p^k).
//!
//! Elements are the integers `0..p^k`, read as base-`p` digit vectors of
//! polynomial coefficients (least significant digit = constant term).
//! Multiplication goes through discrete log / antilog tables built from a
//! primitive element, so every operation is a table lookup or a short digit
//! loop.

use crate::error::{Error, Result};

/// Largest field order [`make_field`] will build tables for.
pub const MAX_ORDER: u64 = 1 << 24;

/// Field order fits in a `u32` and the log tables stay small.
pub type Element = u32;

#[derive(Clone, Debug)]
pub struct FiniteField {
    order: u32,
    characteristic: u32,
    degree: u32,
    /// Monic reduction polynomial, low degree first, length `degree + 1`.
    modulus: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
    inv: Vec<u32>,
    /// Dense addition table for small fields; digit-wise otherwise.
    add: Option<Vec<u32>>,
}

/// Factors `n` as `p^k`, or returns `None` when it has two distinct prime factors.
pub fn prime_power(n: u64) -> Option<(u64, u32)> {
    if n < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            break;
        }
        p += 1;
    }
    if p * p > n {
        return Some((n, 1));
    }
    let (mut m, mut k) = (n, 0);
    while m % p == 0 {
        m /= p;
        k += 1;
    }
    (m == 1).then_some((p, k))
}

pub fn make_field(n: u64) -> Result<FiniteField> {
    if n < 2 {
        return Err(Error::invalid(format!("field order must be >= 2, got {n}")));
    }
    let (p, k) = prime_power(n).ok_or(Error::NotPrimePower(n))?;
    if n > MAX_ORDER {
        return Err(Error::DomainTooLarge {
            what: "field order",
            size: n,
            limit: MAX_ORDER,
        });
    }
    let p = p as u32;
    let modulus = if k == 1 {
        vec![0, 1]
    } else {
        find_irreducible(p, k)
    };
    Ok(FiniteField::with_modulus(p, k, modulus))
}

/// Smallest monic irreducible polynomial of degree `k` over Z_p, ordered by
/// the base-`p` integer encoding of its lower coefficients. Coefficients are
/// returned low degree first, including the leading 1.
pub fn find_irreducible(p: u32, k: u32) -> Vec<u32> {
    assert!(k >= 1 && p >= 2);
    let count = (p as u64).pow(k);
    for code in 0..count {
        let mut poly = digits(code, p, k as usize);
        poly.push(1);
        if is_irreducible(&poly, p) {
            return poly;
        }
    }
    unreachable!("an irreducible polynomial of every degree exists")
}

/// Trial division by every monic polynomial of degree `1..=deg/2`.
fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let deg = poly.len() - 1;
    if deg <= 1 {
        return true;
    }
    if poly[0] == 0 {
        return false;
    }
    for d in 1..=deg / 2 {
        for code in 0..(p as u64).pow(d as u32) {
            let mut divisor = digits(code, p, d);
            divisor.push(1);
            if poly_rem(poly, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn digits(mut code: u64, p: u32, len: usize) -> Vec<u32> {
    let mut out = vec![0; len];
    for d in out.iter_mut() {
        *d = (code % p as u64) as u32;
        code /= p as u64;
    }
    out
}

/// Remainder of `a` modulo a monic `m`, length `deg(m)`.
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let dm = m.len() - 1;
    let mut r = a.to_vec();
    for top in (dm..r.len()).rev() {
        let c = r[top];
        if c == 0 {
            continue;
        }
        for (j, &mj) in m.iter().enumerate() {
            let idx = top - dm + j;
            r[idx] = (r[idx] + p - (c * mj) % p) % p;
        }
    }
    r.truncate(dm);
    r.resize(dm, 0);
    r
}

impl FiniteField {
    fn with_modulus(p: u32, k: u32, modulus: Vec<u32>) -> Self {
        let order = p.pow(k);
        let mut field = FiniteField {
            order,
            characteristic: p,
            degree: k,
            modulus,
            exp: Vec::new(),
            log: Vec::new(),
            inv: Vec::new(),
            add: None,
        };
        if order <= 256 {
            let n = order as usize;
            let mut table = vec![0; n * n];
            for a in 0..order {
                for b in 0..order {
                    table[a as usize * n + b as usize] = field.add_digits(a, b);
                }
            }
            field.add = Some(table);
        }
        field.build_log_tables();
        field
    }

    fn build_log_tables(&mut self) {
        let n = self.order;
        let group = n - 1;
        for g in 2..n.max(3) {
            let g = if n == 2 { 1 } else { g };
            let mut exp = Vec::with_capacity(group as usize);
            let mut x = 1;
            loop {
                exp.push(x);
                x = self.mul_slow(x, g);
                if x == 1 {
                    break;
                }
            }
            if exp.len() == group as usize {
                let mut log = vec![0; n as usize];
                for (e, &v) in exp.iter().enumerate() {
                    log[v as usize] = e as u32;
                }
                let mut inv = vec![0; n as usize];
                for v in 1..n {
                    let e = log[v as usize];
                    inv[v as usize] = exp[((group - e) % group) as usize];
                }
                self.exp = exp;
                self.log = log;
                self.inv = inv;
                return;
            }
        }
        unreachable!("the multiplicative group of a finite field is cyclic")
    }

    fn add_digits(&self, mut a: u32, mut b: u32) -> u32 {
        let p = self.characteristic;
        if p == 2 {
            return a ^ b;
        }
        let (mut out, mut place) = (0, 1);
        while a > 0 || b > 0 {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    /// Schoolbook multiplication modulo the reduction polynomial; only used
    /// while building the log tables.
    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.characteristic;
        let k = self.degree as usize;
        let da = digits(a as u64, p, k);
        let db = digits(b as u64, p, k);
        let mut prod = vec![0u32; 2 * k];
        for (i, &x) in da.iter().enumerate() {
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        let rem = if k == 1 {
            vec![prod[0] % p]
        } else {
            poly_rem(&prod, &self.modulus, p)
        };
        rem.iter().rev().fold(0, |acc, &d| acc * p + d)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn characteristic(&self) -> u32 {
        self.characteristic
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn reduction_polynomial(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> {
        0..self.order
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        debug_assert!(a < self.order && b < self.order);
        match &self.add {
            Some(t) => t[(a * self.order + b) as usize],
            None => self.add_digits(a, b),
        }
    }

    pub fn neg(&self, a: Element) -> Element {
        let p = self.characteristic;
        let (mut a, mut out, mut place) = (a, 0, 1);
        while a > 0 {
            out += ((p - a % p) % p) * place;
            a /= p;
            place *= p;
        }
        out
    }

    pub fn sub(&self, a: Element, b: Element) -> Element {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Element, b: Element) -> Element {
        debug_assert!(a < self.order && b < self.order);
        if a == 0 || b == 0 {
            return 0;
        }
        let group = self.order - 1;
        let e = (self.log[a as usize] as u64 + self.log[b as usize] as u64) % group as u64;
        self.exp[e as usize]
    }

    pub fn inv(&self, a: Element) -> Result<Element> {
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(self.inv[a as usize])
    }
}

/// Free-function form of [`FiniteField::inv`].
pub fn field_inv(field: &FiniteField, x: Element) -> Result<Element> {
    field.inv(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let f2 = make_field(2).unwrap();
        assert_eq!(f2.add(1, 1), 0);
        let f3 = make_field(3).unwrap();
        assert_eq!(f3.mul(2, 2), 1);
        let f4 = make_field(4).unwrap();
        assert_eq!(f4.reduction_polynomial(), &[1, 1, 1]);
        // x * x = x + 1
        assert_eq!(f4.mul(2, 2), 3);
        assert!(matches!(make_field(6), Err(Error::NotPrimePower(6))));
        assert!(matches!(make_field(1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn irreducible_choices() {
        assert_eq!(find_irreducible(2, 2), vec![1, 1, 1]);
        assert_eq!(find_irreducible(3, 2), vec![1, 0, 1]);
        assert_eq!(find_irreducible(2, 3), vec![1, 1, 0, 1]);
    }

    #[test]
    fn inverses() {
        assert_eq!(make_field(5).unwrap().inv(2).unwrap(), 3);
        assert_eq!(make_field(4).unwrap().inv(2).unwrap(), 3);
        assert_eq!(field_inv(&make_field(7).unwrap(), 1).unwrap(), 1);
        assert!(matches!(make_field(7).unwrap().inv(0), Err(Error::ZeroInverse)));
    }

    #[test]
    fn prime_power_detection() {
        assert_eq!(prime_power(9), Some((3, 2)));
        assert_eq!(prime_power(64), Some((2, 6)));
        assert_eq!(prime_power(97), Some((97, 1)));
        assert_eq!(prime_power(12), None);
        assert_eq!(prime_power(1), None);
    }

    #[test]
    fn large_order_uses_digit_addition() {
        let f = make_field(3u64.pow(6)).unwrap();
        assert!(f.add.is_none());
        for a in (0..f.order()).step_by(37) {
            assert_eq!(f.add(a, f.neg(a)), 0);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
    }
}
