//! Finite field tower F_p < F_q < F_{q^2} < F_{q^4}.
//!
//! All arithmetic happens inside one fixed model F_{q^4} = F_p[x]/(f) with f
//! the lexicographically least irreducible polynomial of degree 4r; the
//! subfields are cut out by Frobenius-power equations and cached as sorted
//! code lists. E = F_{q^2} is the quadratic space carrying the norm form and
//! the conjugation sigma; the norm-one subgroup SO(E) is cyclic of order q+1.

use crate::cyclo::{additive_character, CycNum};

/// Element of the tower: a code into the fixed F_{q^4} model plus the
/// smallest level k in {1,2,4} with x^{q^k} = x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GFElem {
    pub code: u16,
    pub level: u8,
}

/// Element of E = F_{q^2} as an F_q-coordinate pair over the fixed basis
/// (e1, e2) = (1, e2); coordinates are indices into the sorted F_q list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EVec {
    pub c1: u8,
    pub c2: u8,
}

/// Element of the orthogonal group O(E): x -> t*x (rotation) or
/// x -> t*sigma(x) (reflection), with t of norm 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OElem {
    pub t: u16,
    pub refl: bool,
}

pub struct FieldTower {
    p: u32,
    r: u32,
    q: u32,
    size: usize,
    modulus: Vec<u8>,
    exp: Vec<u16>,
    log: Vec<u32>,
    kappa: u16,
    level1: Vec<u16>,
    level2: Vec<u16>,
    /// code -> index into level1, or -1
    level1_index: Vec<i32>,
    level2_mask: Vec<bool>,
    // F_q arithmetic on small indices
    add_q: Vec<u8>,
    mul_q: Vec<u8>,
    neg_q: Vec<u8>,
    inv_q: Vec<u8>,
    trace_q: Vec<u8>,
    chi_q: Vec<i8>,
    half: u8,
    e2: u16,
    evec_of: Vec<EVec>,
    code_of_evec: Vec<u16>,
    so_elems: Vec<u16>,
    t0: u16,
    zeta: u16,
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// --- dense polynomial arithmetic over F_p for tower construction ---

fn poly_trim(a: &mut Vec<u8>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
}

fn poly_mul_mod(a: &[u8], b: &[u8], m: &[u8], p: u32) -> Vec<u8> {
    let mut prod = vec![0u32; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai as u32 * bj as u32) % p;
        }
    }
    // reduce mod monic m
    let d = m.len() - 1;
    for i in (d..prod.len()).rev() {
        let c = prod[i];
        if c != 0 {
            prod[i] = 0;
            for j in 0..d {
                let sub = c * m[j] as u32 % p;
                prod[i - d + j] = (prod[i - d + j] + p - sub) % p;
            }
        }
    }
    prod.truncate(d.max(1));
    let mut out: Vec<u8> = prod.iter().map(|&c| c as u8).collect();
    poly_trim(&mut out);
    out
}

fn poly_pow_mod(base: &[u8], mut e: u64, m: &[u8], p: u32) -> Vec<u8> {
    let mut result = vec![1u8];
    let mut b = base.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = poly_mul_mod(&result, &b, m, p);
        }
        b = poly_mul_mod(&b, &b, m, p);
        e >>= 1;
    }
    result
}

fn poly_gcd(a: &[u8], b: &[u8], p: u32) -> Vec<u8> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !(b.len() == 1 && b[0] == 0) {
        let r = poly_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

fn poly_rem(a: &[u8], b: &[u8], p: u32) -> Vec<u8> {
    let db = b.len() - 1;
    if db == 0 {
        return vec![0];
    }
    let mut rem: Vec<u32> = a.iter().map(|&c| c as u32).collect();
    let lead_inv = mod_inv(b[db] as u32, p);
    while rem.len() > db && !(rem.len() == 1 && rem[0] == 0) {
        let da = rem.len() - 1;
        let c = rem[da] * lead_inv % p;
        if c != 0 {
            for j in 0..=db {
                let sub = c * b[j] as u32 % p;
                rem[da - db + j] = (rem[da - db + j] + p - sub) % p;
            }
        }
        rem.pop();
        while rem.len() > 1 && *rem.last().unwrap() == 0 {
            rem.pop();
        }
    }
    let mut out: Vec<u8> = rem.iter().map(|&c| c as u8).collect();
    poly_trim(&mut out);
    out
}

fn mod_inv(a: u32, p: u32) -> u32 {
    // p prime, a != 0
    let mut result = 1u64;
    let mut base = a as u64 % p as u64;
    let mut e = p as u64 - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p as u64;
        }
        base = base * base % p as u64;
        e >>= 1;
    }
    result as u32
}

fn is_irreducible(f: &[u8], p: u32) -> bool {
    let d = (f.len() - 1) as u32;
    let x = vec![0u8, 1u8];
    // x^{p^d} == x mod f
    let mut y = x.clone();
    for _ in 0..d {
        y = poly_pow_mod(&y, p as u64, f, p);
    }
    let mut diff = y.clone();
    if diff.len() < 2 {
        diff.resize(2, 0);
    }
    diff[1] = ((diff[1] as u32 + p - 1) % p) as u8;
    let mut diff_t = diff.clone();
    poly_trim(&mut diff_t);
    if !(diff_t.len() == 1 && diff_t[0] == 0) {
        return false;
    }
    // gcd(x^{p^{d/l}} - x, f) == 1 for prime l | d
    for l in prime_factors(d as u64) {
        let k = d as u64 / l;
        let mut y = x.clone();
        for _ in 0..k {
            y = poly_pow_mod(&y, p as u64, f, p);
        }
        let mut diff = y;
        if diff.len() < 2 {
            diff.resize(2, 0);
        }
        diff[1] = ((diff[1] as u32 + p - 1) % p) as u8;
        poly_trim(&mut diff);
        let g = poly_gcd(f, &diff, p);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

impl FieldTower {
    /// Builds the tower for q = p^r. Requires odd prime p and q^4 small
    /// enough for 16-bit element codes (q <= 13).
    pub fn new(p: u32, r: u32) -> Self {
        assert!(is_prime(p) && p % 2 == 1, "p must be an odd prime");
        assert!(r >= 1);
        let q = p.pow(r);
        let deg = (4 * r) as usize;
        let size = (q as usize).pow(4);
        assert!(size <= u16::MAX as usize + 1, "q too large for 16-bit codes");

        // lexicographically least monic irreducible of degree 4r
        let modulus = Self::find_modulus(p, deg);

        // multiplicative generator kappa and exp/log tables
        let group_order = (size - 1) as u64;
        let factors = prime_factors(group_order);
        let mut kappa_code = 0u16;
        'cand: for cand in 2..size as u32 {
            let candidate = Self::code_to_poly(cand as u16, p, deg);
            for &l in &factors {
                let pow = poly_pow_mod(&candidate, group_order / l, &modulus, p);
                if pow.len() == 1 && pow[0] == 1 {
                    continue 'cand;
                }
            }
            kappa_code = cand as u16;
            break;
        }
        assert_ne!(kappa_code, 0, "no generator found");

        let mut exp = vec![0u16; size];
        let mut log = vec![0u32; size];
        let mut cur = vec![1u8];
        let kappa_poly = Self::code_to_poly(kappa_code, p, deg);
        for i in 0..size - 1 {
            let code = Self::poly_to_code(&cur, p);
            exp[i] = code;
            log[code as usize] = i as u32;
            cur = poly_mul_mod(&cur, &kappa_poly, &modulus, p);
        }
        assert_eq!(cur, vec![1u8], "kappa order is not q^4 - 1");

        let mut tower = FieldTower {
            p,
            r,
            q,
            size,
            modulus,
            exp,
            log,
            kappa: kappa_code,
            level1: Vec::new(),
            level2: Vec::new(),
            level1_index: vec![-1; size],
            level2_mask: vec![false; size],
            add_q: Vec::new(),
            mul_q: Vec::new(),
            neg_q: Vec::new(),
            inv_q: Vec::new(),
            trace_q: Vec::new(),
            chi_q: Vec::new(),
            half: 0,
            e2: 0,
            evec_of: Vec::new(),
            code_of_evec: Vec::new(),
            so_elems: Vec::new(),
            t0: 0,
            zeta: 0,
        };
        tower.build_subfields();
        tower.build_fq_tables();
        tower.build_e_structures();
        tower
    }

    fn find_modulus(p: u32, deg: usize) -> Vec<u8> {
        let total = (p as u64).pow(deg as u32);
        for code in 0..total {
            let mut f = Vec::with_capacity(deg + 1);
            let mut c = code;
            for _ in 0..deg {
                f.push((c % p as u64) as u8);
                c /= p as u64;
            }
            f.push(1);
            if is_irreducible(&f, p) {
                return f;
            }
        }
        unreachable!("an irreducible polynomial of every degree exists")
    }

    fn code_to_poly(code: u16, p: u32, deg: usize) -> Vec<u8> {
        let mut c = code as u32;
        let mut out = Vec::with_capacity(deg);
        for _ in 0..deg {
            out.push((c % p) as u8);
            c /= p;
        }
        poly_trim(&mut out);
        out
    }

    fn poly_to_code(poly: &[u8], p: u32) -> u16 {
        let mut code = 0u32;
        for &c in poly.iter().rev() {
            code = code * p + c as u32;
        }
        code as u16
    }

    fn build_subfields(&mut self) {
        for k in [1u32, 2] {
            let qk = (self.q as u64).pow(k) - 1;
            let step = ((self.size as u64 - 1) / qk) as usize;
            let mut codes = vec![0u16];
            for j in 0..qk as usize {
                codes.push(self.exp[j * step]);
            }
            codes.sort_unstable();
            match k {
                1 => self.level1 = codes,
                2 => self.level2 = codes,
                _ => unreachable!(),
            }
        }
        for (i, &c) in self.level1.clone().iter().enumerate() {
            self.level1_index[c as usize] = i as i32;
        }
        for &c in &self.level2 {
            self.level2_mask[c as usize] = true;
        }
    }

    fn build_fq_tables(&mut self) {
        let q = self.q as usize;
        self.add_q = vec![0; q * q];
        self.mul_q = vec![0; q * q];
        self.neg_q = vec![0; q];
        self.inv_q = vec![0; q];
        self.trace_q = vec![0; q];
        self.chi_q = vec![0; q];
        for i in 0..q {
            let a = self.level1[i];
            for j in 0..q {
                let b = self.level1[j];
                self.add_q[i * q + j] = self.fq_index(self.add(a, b));
                self.mul_q[i * q + j] = self.fq_index(self.mul(a, b));
            }
            self.neg_q[i] = self.fq_index(self.neg(a));
            if i != 0 {
                self.inv_q[i] = self.fq_index(self.inv(a));
            }
            // Tr_{F_q/F_p}
            let mut t = 0u16;
            let mut x = a;
            for _ in 0..self.r {
                t = self.add(t, x);
                x = self.pow_code(x, self.p as u64);
            }
            assert!((t as u32) < self.p, "trace must be a prime-field constant");
            self.trace_q[i] = t as u8;
        }
        for i in 1..q {
            let sq = self.mul_q[i * q + i] as usize;
            self.chi_q[sq] = 1;
        }
        for i in 1..q {
            if self.chi_q[i] == 0 {
                self.chi_q[i] = -1;
            }
        }
        let two = self.fq_add(self.fq_one(), self.fq_one());
        self.half = self.fq_inv(two);
    }

    fn build_e_structures(&mut self) {
        // e2: least level-2 code outside F_q with e2^2 in F_q
        let mut e2 = 0u16;
        for &c in &self.level2 {
            if c != 0 && self.level1_index[c as usize] < 0 {
                let sq = self.mul(c, c);
                if self.level1_index[sq as usize] >= 0 {
                    e2 = c;
                    break;
                }
            }
        }
        assert_ne!(e2, 0, "E always contains a square root of a non-square");
        self.e2 = e2;

        let q = self.q as usize;
        self.code_of_evec = vec![0; q * q];
        self.evec_of = vec![EVec { c1: 0, c2: 0 }; self.size];
        for i in 0..q {
            for j in 0..q {
                let code = self.add(self.level1[i], self.mul(self.level1[j], e2));
                self.code_of_evec[i * q + j] = code;
                self.evec_of[code as usize] = EVec {
                    c1: i as u8,
                    c2: j as u8,
                };
            }
        }

        // SO(E): kernel of the norm E* -> F_q*, cyclic of order q+1
        let step = (self.size - 1) / (self.q as usize + 1);
        let mut so: Vec<u16> = (0..=self.q as usize).map(|j| self.exp[j * step]).collect();
        so.sort_unstable();
        self.so_elems = so;
        // distinguished generator: kappa^{(q^2+1)(q-1)} has order q+1
        self.t0 = self.pow_of_kappa((self.q as u64 * self.q as u64 + 1) * (self.q as u64 - 1));
        self.zeta = self.pow_of_kappa(self.q as u64 * self.q as u64 - 1);
    }

    fn pow_of_kappa(&self, e: u64) -> u16 {
        self.exp[(e % (self.size as u64 - 1)) as usize]
    }

    // --- raw F_{q^4} arithmetic on codes ---

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn r(&self) -> u32 {
        self.r
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn kappa(&self) -> GFElem {
        self.elem(self.kappa)
    }
    pub fn modulus_poly(&self) -> &[u8] {
        &self.modulus
    }

    pub fn add(&self, a: u16, b: u16) -> u16 {
        let p = self.p;
        let mut out = 0u32;
        let mut mult = 1u32;
        let (mut a, mut b) = (a as u32, b as u32);
        for _ in 0..4 * self.r {
            let d = (a % p + b % p) % p;
            out += d * mult;
            mult *= p;
            a /= p;
            b /= p;
        }
        out as u16
    }

    pub fn neg(&self, a: u16) -> u16 {
        let p = self.p;
        let mut out = 0u32;
        let mut mult = 1u32;
        let mut a = a as u32;
        for _ in 0..4 * self.r {
            let d = (p - a % p) % p;
            out += d * mult;
            mult *= p;
            a /= p;
        }
        out as u16
    }

    pub fn sub(&self, a: u16, b: u16) -> u16 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        let n = self.size as u64 - 1;
        let e = (self.log[a as usize] as u64 + self.log[b as usize] as u64) % n;
        self.exp[e as usize]
    }

    pub fn inv(&self, a: u16) -> u16 {
        assert_ne!(a, 0, "inverse of zero");
        let n = self.size as u64 - 1;
        let e = (n - self.log[a as usize] as u64) % n;
        self.exp[e as usize]
    }

    pub fn pow_code(&self, a: u16, e: u64) -> u16 {
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        let n = self.size as u64 - 1;
        let ee = (self.log[a as usize] as u64).wrapping_mul(e % n) % n;
        self.exp[ee as usize]
    }

    /// Frobenius x -> x^{q^k}.
    pub fn frobenius_q(&self, a: u16, k: u32) -> u16 {
        self.pow_code(a, (self.q as u64).pow(k))
    }

    pub fn mult_order(&self, a: u16) -> u64 {
        assert_ne!(a, 0);
        let n = self.size as u64 - 1;
        let mut ord = n / num::integer::gcd(n, self.log[a as usize] as u64);
        // log-based order: kappa^m has order n/gcd(n, m)
        if a == 1 {
            ord = 1;
        }
        ord
    }

    /// Smallest level k in {1,2,4} with x^{q^k} = x.
    pub fn elem(&self, code: u16) -> GFElem {
        let level = if self.level1_index[code as usize] >= 0 {
            1
        } else if self.level2_mask[code as usize] {
            2
        } else {
            4
        };
        GFElem { code, level }
    }

    pub fn level1_elements(&self) -> &[u16] {
        &self.level1
    }
    pub fn level2_elements(&self) -> &[u16] {
        &self.level2
    }

    // --- F_q small-index arithmetic ---

    pub fn fq_index(&self, code: u16) -> u8 {
        let i = self.level1_index[code as usize];
        assert!(i >= 0, "element is not in F_q");
        i as u8
    }
    pub fn fq_code(&self, i: u8) -> u16 {
        self.level1[i as usize]
    }
    pub fn fq_zero(&self) -> u8 {
        0
    }
    pub fn fq_one(&self) -> u8 {
        self.fq_index(1)
    }
    pub fn fq_add(&self, a: u8, b: u8) -> u8 {
        self.add_q[a as usize * self.q as usize + b as usize]
    }
    pub fn fq_mul(&self, a: u8, b: u8) -> u8 {
        self.mul_q[a as usize * self.q as usize + b as usize]
    }
    pub fn fq_neg(&self, a: u8) -> u8 {
        self.neg_q[a as usize]
    }
    pub fn fq_sub(&self, a: u8, b: u8) -> u8 {
        self.fq_add(a, self.fq_neg(b))
    }
    pub fn fq_inv(&self, a: u8) -> u8 {
        assert_ne!(a, 0, "inverse of zero in F_q");
        self.inv_q[a as usize]
    }
    pub fn fq_half(&self) -> u8 {
        self.half
    }
    /// Quadratic character of F_q^*: +1 on squares, -1 on non-squares;
    /// undefined (0) at zero.
    pub fn chi(&self, a: u8) -> i8 {
        self.chi_q[a as usize]
    }
    /// Tr_{F_q/F_p} as an integer in 0..p.
    pub fn trace_to_fp(&self, code: u16) -> u32 {
        self.trace_q[self.fq_index(code) as usize] as u32
    }
    /// psi(x) = zeta_p^{Tr(x)} for x in F_q (index form).
    pub fn psi(&self, a: u8) -> CycNum {
        additive_character(self.p, self.trace_q[a as usize] as u32)
    }
    /// Exponent of psi at x, in 0..p.
    pub fn psi_exponent(&self, a: u8) -> u32 {
        self.trace_q[a as usize] as u32
    }

    // --- E = F_{q^2} structures ---

    pub fn e2(&self) -> u16 {
        self.e2
    }

    pub fn evec(&self, code: u16) -> EVec {
        assert!(self.level2_mask[code as usize], "element is not in E");
        self.evec_of[code as usize]
    }

    pub fn evec_code(&self, v: EVec) -> u16 {
        self.code_of_evec[v.c1 as usize * self.q as usize + v.c2 as usize]
    }

    /// sigma(x) = x^q, the nontrivial automorphism of E over F_q.
    pub fn sigma(&self, a: u16) -> u16 {
        debug_assert!(self.level2_mask[a as usize]);
        self.frobenius_q(a, 1)
    }

    /// Norm form on E: <x,y> = (x*y^q + x^q*y)/2, values in F_q (index form).
    pub fn norm_form(&self, x: u16, y: u16) -> u8 {
        assert!(self.level2_mask[x as usize] && self.level2_mask[y as usize]);
        let s = self.add(
            self.mul(x, self.sigma(y)),
            self.mul(self.sigma(x), y),
        );
        self.fq_mul(self.fq_index(s), self.half)
    }

    /// Gram matrix of the norm form in the basis (e1, e2).
    pub fn norm_gram(&self) -> [[u8; 2]; 2] {
        let b = [1u16, self.e2];
        let mut g = [[0u8; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] = self.norm_form(b[i], b[j]);
            }
        }
        g
    }

    /// The norm-one elements of E^*, sorted by code, plus a distinguished
    /// generator of the cyclic group they form.
    pub fn so_e_elements(&self) -> (&[u16], u16) {
        (&self.so_elems, self.t0)
    }

    pub fn so_generator(&self) -> u16 {
        self.t0
    }

    /// All 2(q+1) elements of O(E): rotations then reflections, each sorted
    /// by the twist element t.
    pub fn oe_elements(&self) -> Vec<OElem> {
        let mut out: Vec<OElem> = self
            .so_elems
            .iter()
            .map(|&t| OElem { t, refl: false })
            .collect();
        out.extend(self.so_elems.iter().map(|&t| OElem { t, refl: true }));
        out
    }

    pub fn oe_apply(&self, g: OElem, x: u16) -> u16 {
        let x = if g.refl { self.sigma(x) } else { x };
        self.mul(g.t, x)
    }

    pub fn oe_compose(&self, a: OElem, b: OElem) -> OElem {
        // (a o b)(x) = a(b(x))
        let t = self.mul(a.t, if a.refl { self.sigma(b.t) } else { b.t });
        OElem {
            t,
            refl: a.refl ^ b.refl,
        }
    }

    pub fn oe_inverse(&self, a: OElem) -> OElem {
        if a.refl {
            // (t*sigma)^-1 = sigma^-1 * t^-1 = sigma(t^-1) * sigma
            OElem {
                t: self.sigma(self.inv(a.t)),
                refl: true,
            }
        } else {
            OElem {
                t: self.inv(a.t),
                refl: false,
            }
        }
    }

    pub fn oe_identity(&self) -> OElem {
        OElem { t: 1, refl: false }
    }

    pub fn oe_sigma(&self) -> OElem {
        OElem { t: 1, refl: true }
    }

    /// Matrix of the O(E)-element as an F_q-linear map in the basis (e1, e2),
    /// columns = images of basis vectors (index form).
    pub fn oe_matrix(&self, g: OElem) -> [[u8; 2]; 2] {
        let im1 = self.evec(self.oe_apply(g, 1));
        let im2 = self.evec(self.oe_apply(g, self.e2));
        [[im1.c1, im2.c1], [im1.c2, im2.c2]]
    }

    /// Determinant of the O(E)-element, always +1 or -1 in F_q.
    pub fn oe_det(&self, g: OElem) -> i8 {
        let m = self.oe_matrix(g);
        let d = self.fq_sub(
            self.fq_mul(m[0][0], m[1][1]),
            self.fq_mul(m[0][1], m[1][0]),
        );
        if d == self.fq_one() {
            1
        } else {
            assert_eq!(d, self.fq_neg(self.fq_one()));
            -1
        }
    }

    /// zeta = kappa^{q^2-1}, the eigenvalue generator of the anisotropic
    /// torus; has multiplicative order q^2 + 1.
    pub fn torus_eigenvalue(&self) -> GFElem {
        self.elem(self.zeta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower3() -> FieldTower {
        FieldTower::new(3, 1)
    }

    #[test]
    fn subfield_orders_are_exact() {
        for (p, r) in [(3u32, 1u32), (5, 1), (7, 1), (3, 2)] {
            let t = FieldTower::new(p, r);
            let q = t.q();
            assert_eq!(t.level1_elements().len(), q as usize);
            assert_eq!(t.level2_elements().len(), (q * q) as usize);
            assert_eq!(t.kappa().level, 4);
            assert_eq!(t.mult_order(t.kappa().code), (q as u64).pow(4) - 1);
        }
    }

    #[test]
    fn subfield_membership_via_frobenius() {
        for (p, r) in [(3u32, 1u32), (5, 1), (3, 2)] {
            let t = FieldTower::new(p, r);
            for &c in t.level1_elements() {
                assert_eq!(t.frobenius_q(c, 1), c);
            }
            for &c in t.level2_elements() {
                assert_eq!(t.frobenius_q(c, 2), c);
                let e = t.elem(c);
                assert!(e.level <= 2);
            }
            // every code is fixed by Frobenius^4
            for code in 0..((t.q() as u32).pow(4) as usize) {
                assert_eq!(t.frobenius_q(code as u16, 4), code as u16);
            }
        }
    }

    #[test]
    fn norm_form_is_anisotropic_at_q3() {
        let t = tower3();
        for &x in t.level2_elements() {
            let n = t.norm_form(x, x);
            assert_eq!(n == 0, x == 0, "norm vanishes only at zero");
        }
    }

    #[test]
    fn norm_form_is_symmetric() {
        let t = FieldTower::new(5, 1);
        for &x in t.level2_elements().iter().step_by(3) {
            for &y in t.level2_elements().iter().step_by(5) {
                assert_eq!(t.norm_form(x, y), t.norm_form(y, x));
            }
        }
    }

    #[test]
    fn norm_of_one_is_one() {
        let t = tower3();
        assert_eq!(t.norm_form(1, 1), t.fq_one());
    }

    #[test]
    fn norm_gram_is_symmetric_nondegenerate() {
        for p in [3u32, 5, 7] {
            let t = FieldTower::new(p, 1);
            let g = t.norm_gram();
            assert_eq!(g[0][1], g[1][0]);
            let det = t.fq_sub(t.fq_mul(g[0][0], g[1][1]), t.fq_mul(g[0][1], g[1][0]));
            assert_ne!(det, 0);
        }
    }

    #[test]
    fn so_e_has_q_plus_one_elements() {
        for p in [3u32, 5] {
            let t = FieldTower::new(p, 1);
            let (so, t0) = t.so_e_elements();
            assert_eq!(so.len(), p as usize + 1);
            assert!(so.contains(&1));
            let minus_one = t.neg(1);
            assert!(so.contains(&minus_one));
            // closed under multiplication, generated by t0
            for &a in so {
                for &b in so {
                    assert!(so.contains(&t.mul(a, b)));
                }
            }
            assert_eq!(t.mult_order(t0), p as u64 + 1);
        }
    }

    #[test]
    fn sigma_is_an_involution_fixing_fq() {
        let t = tower3();
        let mut fixed = 0;
        for &x in t.level2_elements() {
            assert_eq!(t.sigma(t.sigma(x)), x);
            if t.sigma(x) == x {
                fixed += 1;
            }
        }
        assert_eq!(fixed, t.q());
    }

    #[test]
    fn sigma_preserves_norm_and_has_det_minus_one() {
        let t = tower3();
        for &x in t.level2_elements() {
            for &y in t.level2_elements() {
                assert_eq!(
                    t.norm_form(t.sigma(x), t.sigma(y)),
                    t.norm_form(x, y)
                );
            }
        }
        // det of sigma as an F_q-linear map, in the basis (e1, e2):
        // sigma(e1) = e1, sigma(e2) = -e2, so det = -1 by 2x2 cofactor.
        let m = t.oe_matrix(t.oe_sigma());
        let det = t.fq_sub(t.fq_mul(m[0][0], m[1][1]), t.fq_mul(m[0][1], m[1][0]));
        assert_eq!(det, t.fq_neg(t.fq_one()));
        assert_eq!(t.oe_det(t.oe_sigma()), -1);
    }

    #[test]
    fn torus_eigenvalue_order() {
        assert_eq!(tower3().mult_order(tower3().torus_eigenvalue().code), 10);
        let t5 = FieldTower::new(5, 1);
        assert_eq!(t5.mult_order(t5.torus_eigenvalue().code), 26);
        let t3 = tower3();
        let z = t3.torus_eigenvalue().code;
        // zeta^{q^2} = zeta^{-1}
        assert_eq!(t3.frobenius_q(z, 2), t3.inv(z));
    }

    #[test]
    fn oe_group_structure() {
        for p in [3u32, 5] {
            let t = FieldTower::new(p, 1);
            let oe = t.oe_elements();
            assert_eq!(oe.len(), 2 * (p as usize + 1));
            // every element preserves the norm form
            for &g in &oe {
                for &x in t.level2_elements().iter().step_by(2) {
                    for &y in t.level2_elements().iter().step_by(3) {
                        assert_eq!(
                            t.norm_form(t.oe_apply(g, x), t.oe_apply(g, y)),
                            t.norm_form(x, y)
                        );
                    }
                }
                let ginv = t.oe_inverse(g);
                assert_eq!(t.oe_compose(g, ginv), t.oe_identity());
            }
            // rotations have det +1, reflections det -1
            for &g in &oe {
                assert_eq!(t.oe_det(g), if g.refl { -1 } else { 1 });
            }
        }
    }

    #[test]
    fn evec_round_trip() {
        let t = FieldTower::new(5, 1);
        for &c in t.level2_elements() {
            let v = t.evec(c);
            assert_eq!(t.evec_code(v), c);
        }
    }

    #[test]
    fn gauss_sum_values() {
        use crate::cyclo::{gauss_sum, CycNum};
        // q=3: psi(0)+2*psi(1) = 1+2*zeta3 by direct 3-term summation
        let t3 = tower3();
        let g3 = gauss_sum(&t3);
        let expect = {
            let one = CycNum::one(3);
            let z = CycNum::root_of_unity(3, 1);
            &one + &(&z + &z)
        };
        assert_eq!(g3, expect);
        // q=5: 1 + 2*zeta5 + 2*zeta5^4 by direct 5-term summation
        let t5 = FieldTower::new(5, 1);
        let g5 = gauss_sum(&t5);
        let z = |k| CycNum::root_of_unity(5, k);
        let expect = &(&CycNum::one(5) + &(&z(1) + &z(1))) + &(&z(4) + &z(4));
        assert_eq!(g5, expect);
    }

    #[test]
    fn gauss_sum_modulus_squared_is_q() {
        use crate::cyclo::{gauss_sum, CycNum};
        for (p, r) in [(3u32, 1u32), (5, 1), (7, 1), (3, 2)] {
            let t = FieldTower::new(p, r);
            let g = gauss_sum(&t);
            let m2 = &g * &g.conj();
            assert_eq!(m2, CycNum::from_i64(p, t.q() as i64));
        }
    }
}
