//! The symplectic group Sp(4, F_q): the fixed Gram matrix, root subgroups,
//! the parabolic/unipotent subgroup lattice, the anisotropic torus of order
//! q^2+1, BFS group enumeration with generator words, conjugacy classes, and
//! orbit counting on V tensor E.
//!
//! Matrices are 4x4 arrays of F_q indices in the basis (v1, v2, v3, v4);
//! v1 spans L_1, (v1, v2) span the Lagrangian L, (v3, v4) span the
//! complementary Lagrangian L'.

use std::collections::HashMap;

use crate::gftower::FieldTower;

/// Plain 4x4 matrix over F_q (index entries, row-major).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mat4(pub [u8; 16]);

/// An element of Sp(4, F_q): a Mat4 validated against g^T J g = J.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpMat(Mat4);

/// Symmetric bilinear form on L' in the basis (v3, v4): Gram
/// [[lam, beta], [beta, mu]]. Addition mirrors multiplication in U_1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BilForm3 {
    pub lam: u8,
    pub beta: u8,
    pub mu: u8,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("matrix does not preserve the symplectic form")]
    NotSymplectic,
    #[error("element is not in the required subgroup")]
    NotInSubgroup,
    #[error("unknown subgroup label")]
    UnknownLabel,
}

impl std::fmt::Debug for Mat4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..4 {
            write!(f, "[{} {} {} {}]", self.0[4 * r], self.0[4 * r + 1], self.0[4 * r + 2], self.0[4 * r + 3])?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for SpMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Sp{:?}", self.0)
    }
}

impl Mat4 {
    pub fn zero() -> Self {
        Mat4([0; 16])
    }

    pub fn identity(tw: &FieldTower) -> Self {
        let one = tw.fq_one();
        let mut m = [0u8; 16];
        for i in 0..4 {
            m[4 * i + i] = one;
        }
        Mat4(m)
    }

    pub fn at(&self, r: usize, c: usize) -> u8 {
        self.0[4 * r + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.0[4 * r + c] = v;
    }

    pub fn mul(&self, tw: &FieldTower, other: &Mat4) -> Mat4 {
        let mut out = [0u8; 16];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0u8;
                for k in 0..4 {
                    acc = tw.fq_add(acc, tw.fq_mul(self.at(i, k), other.at(k, j)));
                }
                out[4 * i + j] = acc;
            }
        }
        Mat4(out)
    }

    pub fn transpose(&self) -> Mat4 {
        let mut out = [0u8; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[4 * i + j] = self.at(j, i);
            }
        }
        Mat4(out)
    }

    pub fn neg(&self, tw: &FieldTower) -> Mat4 {
        let mut out = self.0;
        for e in &mut out {
            *e = tw.fq_neg(*e);
        }
        Mat4(out)
    }

    pub fn apply(&self, tw: &FieldTower, v: [u8; 4]) -> [u8; 4] {
        let mut out = [0u8; 4];
        for i in 0..4 {
            let mut acc = 0u8;
            for k in 0..4 {
                acc = tw.fq_add(acc, tw.fq_mul(self.at(i, k), v[k]));
            }
            out[i] = acc;
        }
        out
    }

    pub fn det(&self, tw: &FieldTower) -> u8 {
        det_fq(tw, 4, &self.0.map(|x| x))
    }

    pub fn inverse(&self, tw: &FieldTower) -> Option<Mat4> {
        let inv = invert_fq(tw, 4, &self.0)?;
        let mut out = [0u8; 16];
        out.copy_from_slice(&inv);
        Some(Mat4(out))
    }

    /// Stable 64-bit code: 4 bits per entry, row-major (q <= 13).
    pub fn encode(&self) -> u64 {
        let mut code = 0u64;
        for (i, &e) in self.0.iter().enumerate() {
            code |= (e as u64) << (4 * i);
        }
        code
    }

    /// Characteristic polynomial det(xI - A), ascending coefficients,
    /// monic of degree 4, by Leibniz expansion over S_4.
    pub fn char_poly(&self, tw: &FieldTower) -> [u8; 5] {
        // permutations of 0..3 with signs
        const PERMS: [([usize; 4], bool); 24] = perms4();
        let one = tw.fq_one();
        let mut acc = [0u8; 5];
        for (perm, even) in PERMS {
            // product over i of entry(i, perm[i]) where entry = x*[i==j] - a_ij
            let mut prod = [0u8; 5];
            prod[0] = one;
            let mut deg = 0usize;
            for i in 0..4 {
                let j = perm[i];
                let lin0 = tw.fq_neg(self.at(i, j)); // constant term
                let lin1 = if i == j { one } else { 0 }; // x-coefficient
                let mut next = [0u8; 5];
                for d in 0..=deg {
                    next[d] = tw.fq_add(next[d], tw.fq_mul(prod[d], lin0));
                    next[d + 1] = tw.fq_add(next[d + 1], tw.fq_mul(prod[d], lin1));
                }
                prod = next;
                deg += 1;
            }
            for d in 0..5 {
                let term = if even { prod[d] } else { tw.fq_neg(prod[d]) };
                acc[d] = tw.fq_add(acc[d], term);
            }
        }
        acc
    }
}

const fn perms4() -> [([usize; 4], bool); 24] {
    let mut out = [([0usize; 4], true); 24];
    let mut idx = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            let mut c = 0;
            while c < 4 {
                let mut d = 0;
                while d < 4 {
                    if a != b && a != c && a != d && b != c && b != d && c != d {
                        let p = [a, b, c, d];
                        // parity by counting inversions
                        let mut inv = 0;
                        let mut i = 0;
                        while i < 4 {
                            let mut j = i + 1;
                            while j < 4 {
                                if p[i] > p[j] {
                                    inv += 1;
                                }
                                j += 1;
                            }
                            i += 1;
                        }
                        out[idx] = (p, inv % 2 == 0);
                        idx += 1;
                    }
                    d += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

/// Determinant of an n x n matrix of F_q indices by Gaussian elimination.
pub fn det_fq(tw: &FieldTower, n: usize, data: &[u8]) -> u8 {
    let mut m: Vec<u8> = data.to_vec();
    let mut det = tw.fq_one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| m[r * n + col] != 0);
        let pivot = match pivot {
            Some(p) => p,
            None => return 0,
        };
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            det = tw.fq_neg(det);
        }
        let pv = m[col * n + col];
        det = tw.fq_mul(det, pv);
        let pv_inv = tw.fq_inv(pv);
        for r in (col + 1)..n {
            let f = tw.fq_mul(m[r * n + col], pv_inv);
            if f != 0 {
                for j in col..n {
                    let sub = tw.fq_mul(f, m[col * n + j]);
                    m[r * n + j] = tw.fq_sub(m[r * n + j], sub);
                }
            }
        }
    }
    det
}

/// Inverse of an n x n matrix of F_q indices, if nonsingular.
pub fn invert_fq(tw: &FieldTower, n: usize, data: &[u8]) -> Option<Vec<u8>> {
    let mut m: Vec<u8> = vec![0; n * 2 * n];
    for r in 0..n {
        m[r * 2 * n..r * 2 * n + n].copy_from_slice(&data[r * n..r * n + n]);
        m[r * 2 * n + n + r] = tw.fq_one();
    }
    let w = 2 * n;
    for col in 0..n {
        let pivot = (col..n).find(|&r| m[r * w + col] != 0)?;
        if pivot != col {
            for j in 0..w {
                m.swap(col * w + j, pivot * w + j);
            }
        }
        let pv_inv = tw.fq_inv(m[col * w + col]);
        for j in 0..w {
            m[col * w + j] = tw.fq_mul(m[col * w + j], pv_inv);
        }
        for r in 0..n {
            if r != col && m[r * w + col] != 0 {
                let f = m[r * w + col];
                for j in 0..w {
                    let sub = tw.fq_mul(f, m[col * w + j]);
                    m[r * w + j] = tw.fq_sub(m[r * w + j], sub);
                }
            }
        }
    }
    let mut out = vec![0u8; n * n];
    for r in 0..n {
        out[r * n..r * n + n].copy_from_slice(&m[r * w + n..r * w + 2 * n]);
    }
    Some(out)
}

/// The fixed Gram matrix J of the symplectic form in the basis
/// (v1, v2, v3, v4): antidiagonal (1, 1, -1, -1).
pub fn gram_matrix(tw: &FieldTower) -> Mat4 {
    let one = tw.fq_one();
    let neg = tw.fq_neg(one);
    let mut j = Mat4::zero();
    j.set(0, 3, one);
    j.set(1, 2, one);
    j.set(2, 1, neg);
    j.set(3, 0, neg);
    j
}

pub fn is_symplectic(tw: &FieldTower, m: &Mat4) -> bool {
    let j = gram_matrix(tw);
    m.transpose().mul(tw, &j).mul(tw, m) == j
}

impl SpMat {
    /// Validates the symplectic condition g^T J g = J.
    pub fn new(tw: &FieldTower, m: Mat4) -> Result<SpMat, GroupError> {
        if is_symplectic(tw, &m) {
            Ok(SpMat(m))
        } else {
            Err(GroupError::NotSymplectic)
        }
    }

    pub fn identity(tw: &FieldTower) -> SpMat {
        SpMat(Mat4::identity(tw))
    }

    pub fn mat(&self) -> &Mat4 {
        &self.0
    }

    pub fn at(&self, r: usize, c: usize) -> u8 {
        self.0.at(r, c)
    }

    pub fn mul(&self, tw: &FieldTower, other: &SpMat) -> SpMat {
        let m = self.0.mul(tw, &other.0);
        debug_assert!(is_symplectic(tw, &m));
        SpMat(m)
    }

    pub fn inverse(&self, tw: &FieldTower) -> SpMat {
        let m = self.0.inverse(tw).expect("symplectic matrices are invertible");
        debug_assert!(is_symplectic(tw, &m));
        SpMat(m)
    }

    pub fn neg(&self, tw: &FieldTower) -> SpMat {
        let m = self.0.neg(tw);
        debug_assert!(is_symplectic(tw, &m));
        SpMat(m)
    }

    pub fn encode(&self) -> u64 {
        self.0.encode()
    }

    /// True if g stabilizes L and L' (block upper-left/lower-right).
    pub fn in_levi_m1(&self) -> bool {
        let z = |r: usize, c: usize| self.at(r, c) == 0;
        z(2, 0) && z(2, 1) && z(3, 0) && z(3, 1) && z(0, 2) && z(0, 3) && z(1, 2) && z(1, 3)
    }

    /// True if g stabilizes L (block lower-left zero), i.e. g in P_1.
    pub fn in_p1(&self) -> bool {
        self.at(2, 0) == 0 && self.at(2, 1) == 0 && self.at(3, 0) == 0 && self.at(3, 1) == 0
    }

    /// True if g has the U_1 shape (identity on L and on V/L).
    pub fn in_u1(&self, tw: &FieldTower) -> bool {
        let one = tw.fq_one();
        let m = &self.0;
        m.at(0, 0) == one
            && m.at(1, 1) == one
            && m.at(2, 2) == one
            && m.at(3, 3) == one
            && m.at(0, 1) == 0
            && m.at(1, 0) == 0
            && m.at(2, 3) == 0
            && m.at(3, 2) == 0
            && !(0..2).any(|r| (0..2).any(|c| m.at(2 + r, c) != 0))
            && m.at(0, 2) == m.at(1, 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Root {
    R1,
    R2,
    R3,
    R4,
    NegR1,
    NegR2,
    NegR3,
    NegR4,
}

impl Root {
    pub const ALL: [Root; 8] = [
        Root::R1,
        Root::R2,
        Root::R3,
        Root::R4,
        Root::NegR1,
        Root::NegR2,
        Root::NegR3,
        Root::NegR4,
    ];
}

/// One-parameter root subgroup element. The positive-root matrices are the
/// displayed upper-triangular ones; negative roots are their transposes.
pub fn root_subgroup(tw: &FieldTower, root: Root, param: u8) -> SpMat {
    let one = tw.fq_one();
    let a = param;
    let na = tw.fq_neg(a);
    let mut m = Mat4::identity(tw);
    let positive = match root {
        Root::R1 | Root::NegR1 => {
            m.set(0, 1, na);
            m.set(2, 3, a);
            matches!(root, Root::R1)
        }
        Root::R2 | Root::NegR2 => {
            m.set(1, 2, a);
            matches!(root, Root::R2)
        }
        Root::R3 | Root::NegR3 => {
            m.set(0, 2, a);
            m.set(1, 3, a);
            matches!(root, Root::R3)
        }
        Root::R4 | Root::NegR4 => {
            m.set(0, 3, a);
            matches!(root, Root::R4)
        }
    };
    let m = if positive { m } else { m.transpose() };
    let _ = one;
    SpMat::new(tw, m).expect("root subgroup matrices are symplectic")
}

/// Torus element diag(a, b, b^-1, a^-1).
pub fn torus_elem(tw: &FieldTower, a: u8, b: u8) -> SpMat {
    let mut m = Mat4::zero();
    m.set(0, 0, a);
    m.set(1, 1, b);
    m.set(2, 2, tw.fq_inv(b));
    m.set(3, 3, tw.fq_inv(a));
    SpMat::new(tw, m).expect("torus matrices are symplectic")
}

/// Simple reflection s1 (swaps v1, v2 and v3, v4).
pub fn s1(tw: &FieldTower) -> SpMat {
    let one = tw.fq_one();
    let mut m = Mat4::zero();
    m.set(0, 1, one);
    m.set(1, 0, one);
    m.set(2, 3, one);
    m.set(3, 2, one);
    SpMat::new(tw, m).expect("s1 is symplectic")
}

/// Simple reflection s2 (v2 -> -v3, v3 -> v2).
pub fn s2(tw: &FieldTower) -> SpMat {
    let one = tw.fq_one();
    let mut m = Mat4::zero();
    m.set(0, 0, one);
    m.set(1, 2, one);
    m.set(2, 1, tw.fq_neg(one));
    m.set(3, 3, one);
    SpMat::new(tw, m).expect("s2 is symplectic")
}

/// Element of U_0 with the displayed (lambda, alpha, mu, beta) shape.
pub fn u0_elem(tw: &FieldTower, lam: u8, alpha: u8, mu: u8, beta: u8) -> SpMat {
    let one = tw.fq_one();
    let mut m = Mat4::identity(tw);
    m.set(0, 1, tw.fq_neg(alpha));
    m.set(0, 2, beta);
    m.set(0, 3, mu);
    m.set(1, 2, lam);
    m.set(1, 3, tw.fq_add(tw.fq_mul(lam, alpha), beta));
    m.set(2, 3, alpha);
    let _ = one;
    SpMat::new(tw, m).expect("U_0 matrices are symplectic")
}

/// Levi element diag(A, K (A^-1)^T K) for A in GL(2, q), K antidiagonal.
pub fn m1_elem(tw: &FieldTower, a: [u8; 4]) -> SpMat {
    let det = tw.fq_sub(tw.fq_mul(a[0], a[3]), tw.fq_mul(a[1], a[2]));
    assert_ne!(det, 0, "M_1 block must be invertible");
    let dinv = tw.fq_inv(det);
    // A^-1 = dinv * [[d, -b], [-c, a]]
    let ai = [
        tw.fq_mul(dinv, a[3]),
        tw.fq_mul(dinv, tw.fq_neg(a[1])),
        tw.fq_mul(dinv, tw.fq_neg(a[2])),
        tw.fq_mul(dinv, a[0]),
    ];
    // B = K (A^-1)^T K with K = [[0,1],[1,0]]: B[i][j] = (A^-1)[1-j][1-i]
    let b = [ai[3], ai[1], ai[2], ai[0]];
    let mut m = Mat4::zero();
    m.set(0, 0, a[0]);
    m.set(0, 1, a[1]);
    m.set(1, 0, a[2]);
    m.set(1, 1, a[3]);
    m.set(2, 2, b[0]);
    m.set(2, 3, b[1]);
    m.set(3, 2, b[2]);
    m.set(3, 3, b[3]);
    SpMat::new(tw, m).expect("M_1 matrices are symplectic")
}

/// Bridge from U_1 to symmetric bilinear forms on L':
/// (1+A'_1)(1+A'_2) = 1+(A_1+A_2)', so the map is additive.
pub fn u1_bilinear_bridge(tw: &FieldTower, g: &SpMat) -> Result<BilForm3, GroupError> {
    if !g.in_u1(tw) {
        return Err(GroupError::NotInSubgroup);
    }
    Ok(BilForm3 {
        lam: g.at(1, 2),
        beta: g.at(0, 2),
        mu: g.at(0, 3),
    })
}

pub fn u1_from_bridge(tw: &FieldTower, f: BilForm3) -> SpMat {
    let mut m = Mat4::identity(tw);
    m.set(0, 2, f.beta);
    m.set(0, 3, f.mu);
    m.set(1, 2, f.lam);
    m.set(1, 3, f.beta);
    SpMat::new(tw, m).expect("U_1 matrices are symplectic")
}

impl BilForm3 {
    pub fn add(&self, tw: &FieldTower, other: &BilForm3) -> BilForm3 {
        BilForm3 {
            lam: tw.fq_add(self.lam, other.lam),
            beta: tw.fq_add(self.beta, other.beta),
            mu: tw.fq_add(self.mu, other.mu),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.lam == 0 && self.beta == 0 && self.mu == 0
    }

    /// Value of the form on pairs from L'; arguments are (v3, v4)-coordinates.
    pub fn eval(&self, tw: &FieldTower, x: [u8; 2], y: [u8; 2]) -> u8 {
        let g = [[self.lam, self.beta], [self.beta, self.mu]];
        let mut acc = 0u8;
        for i in 0..2 {
            for j in 0..2 {
                acc = tw.fq_add(acc, tw.fq_mul(tw.fq_mul(x[i], g[i][j]), y[j]));
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubgroupLabel {
    B0,
    U0,
    P1,
    U1,
    M1,
    P2,
    U2,
    U0Prime,
    U0DoublePrime,
    T0,
    RootGroup(Root),
    TAniso,
}

/// Exact element list of a named subgroup, sorted by matrix code.
pub fn subgroup_elements(tw: &FieldTower, label: SubgroupLabel) -> Vec<SpMat> {
    let q = tw.q() as usize;
    let fq: Vec<u8> = (0..q as u8).collect();
    let fq_star: Vec<u8> = (1..q as u8).collect();
    let mut out: Vec<SpMat> = match label {
        SubgroupLabel::U0 => {
            let mut v = Vec::with_capacity(q * q * q * q);
            for &lam in &fq {
                for &alpha in &fq {
                    for &mu in &fq {
                        for &beta in &fq {
                            v.push(u0_elem(tw, lam, alpha, mu, beta));
                        }
                    }
                }
            }
            v
        }
        SubgroupLabel::U1 => {
            let mut v = Vec::with_capacity(q * q * q);
            for &beta in &fq {
                for &lam in &fq {
                    for &mu in &fq {
                        v.push(u1_from_bridge(tw, BilForm3 { lam, beta, mu }));
                    }
                }
            }
            v
        }
        SubgroupLabel::U2 => {
            // alpha, beta, mu with the displayed shape
            let mut v = Vec::with_capacity(q * q * q);
            for &alpha in &fq {
                for &beta in &fq {
                    for &mu in &fq {
                        v.push(u0_elem(tw, 0, alpha, mu, beta));
                    }
                }
            }
            v
        }
        SubgroupLabel::U0Prime => {
            let mut v = Vec::with_capacity(q * q);
            for &beta in &fq {
                for &mu in &fq {
                    v.push(u1_from_bridge(tw, BilForm3 { lam: 0, beta, mu }));
                }
            }
            v
        }
        SubgroupLabel::U0DoublePrime => fq
            .iter()
            .map(|&mu| root_subgroup(tw, Root::R4, mu))
            .collect(),
        SubgroupLabel::T0 => {
            let mut v = Vec::with_capacity((q - 1) * (q - 1));
            for &a in &fq_star {
                for &b in &fq_star {
                    v.push(torus_elem(tw, a, b));
                }
            }
            v
        }
        SubgroupLabel::B0 => {
            let t0 = subgroup_elements(tw, SubgroupLabel::T0);
            let u0 = subgroup_elements(tw, SubgroupLabel::U0);
            let mut v = Vec::with_capacity(t0.len() * u0.len());
            for t in &t0 {
                for u in &u0 {
                    v.push(t.mul(tw, u));
                }
            }
            v
        }
        SubgroupLabel::M1 => {
            let mut v = Vec::new();
            for a in 0..q as u8 {
                for b in 0..q as u8 {
                    for c in 0..q as u8 {
                        for d in 0..q as u8 {
                            let det = tw.fq_sub(tw.fq_mul(a, d), tw.fq_mul(b, c));
                            if det != 0 {
                                v.push(m1_elem(tw, [a, b, c, d]));
                            }
                        }
                    }
                }
            }
            v
        }
        SubgroupLabel::P1 => {
            let m1 = subgroup_elements(tw, SubgroupLabel::M1);
            let u1 = subgroup_elements(tw, SubgroupLabel::U1);
            let mut v = Vec::with_capacity(m1.len() * u1.len());
            for m in &m1 {
                for u in &u1 {
                    v.push(m.mul(tw, u));
                }
            }
            v
        }
        SubgroupLabel::P2 => {
            let mut gens = subgroup_generators(tw, SubgroupLabel::B0);
            gens.push(s2(tw));
            generate_group(tw, &gens).elements().to_vec()
        }
        SubgroupLabel::RootGroup(r) => fq
            .iter()
            .map(|&c| root_subgroup(tw, r, c))
            .collect(),
        SubgroupLabel::TAniso => anisotropic_torus(tw).elements,
    };
    out.sort_unstable_by_key(|g| g.encode());
    out.dedup();
    out
}

/// A small generating set for a named subgroup.
pub fn subgroup_generators(tw: &FieldTower, label: SubgroupLabel) -> Vec<SpMat> {
    let q = tw.q() as u8;
    let fq_star: Vec<u8> = (1..q).collect();
    match label {
        SubgroupLabel::U0 => {
            let mut v = Vec::new();
            for r in [Root::R1, Root::R2, Root::R3, Root::R4] {
                for &c in &fq_star {
                    v.push(root_subgroup(tw, r, c));
                }
            }
            v
        }
        SubgroupLabel::U1 => {
            let mut v = Vec::new();
            for r in [Root::R2, Root::R3, Root::R4] {
                for &c in &fq_star {
                    v.push(root_subgroup(tw, r, c));
                }
            }
            v
        }
        SubgroupLabel::U2 => {
            let mut v = Vec::new();
            for r in [Root::R1, Root::R3, Root::R4] {
                for &c in &fq_star {
                    v.push(root_subgroup(tw, r, c));
                }
            }
            v
        }
        SubgroupLabel::U0Prime => {
            let mut v = Vec::new();
            for r in [Root::R3, Root::R4] {
                for &c in &fq_star {
                    v.push(root_subgroup(tw, r, c));
                }
            }
            v
        }
        SubgroupLabel::U0DoublePrime => fq_star
            .iter()
            .map(|&c| root_subgroup(tw, Root::R4, c))
            .collect(),
        SubgroupLabel::T0 => {
            let g0 = primitive_fq_root(tw);
            vec![
                torus_elem(tw, g0, tw.fq_one()),
                torus_elem(tw, tw.fq_one(), g0),
            ]
        }
        SubgroupLabel::B0 => {
            let mut v = subgroup_generators(tw, SubgroupLabel::T0);
            v.extend(subgroup_generators(tw, SubgroupLabel::U0));
            v
        }
        SubgroupLabel::M1 => {
            let g0 = primitive_fq_root(tw);
            let one = tw.fq_one();
            vec![
                m1_elem(tw, [g0, 0, 0, one]),
                m1_elem(tw, [one, one, 0, one]),
                m1_elem(tw, [0, one, one, 0]),
            ]
        }
        SubgroupLabel::P1 => {
            let mut v = subgroup_generators(tw, SubgroupLabel::M1);
            v.extend(subgroup_generators(tw, SubgroupLabel::U1));
            v
        }
        SubgroupLabel::P2 => {
            let mut v = subgroup_generators(tw, SubgroupLabel::B0);
            v.push(s2(tw));
            v
        }
        SubgroupLabel::RootGroup(r) => fq_star
            .iter()
            .map(|&c| root_subgroup(tw, r, c))
            .collect(),
        SubgroupLabel::TAniso => vec![anisotropic_torus(tw).generator],
    }
}

/// A generator of F_q^* (index form), least by index.
pub fn primitive_fq_root(tw: &FieldTower) -> u8 {
    let q = tw.q();
    'outer: for cand in 1..q as u8 {
        let mut x = cand;
        for k in 1..q - 1 {
            if x == tw.fq_one() {
                let _ = k;
                continue 'outer;
            }
            x = tw.fq_mul(x, cand);
        }
        if x == tw.fq_one() {
            return cand;
        }
    }
    unreachable!("F_q^* is cyclic")
}

/// The spec generating set for the whole group: all eight root subgroups,
/// the diagonal torus, and the two simple reflections.
pub fn sp4_generators(tw: &FieldTower) -> Vec<SpMat> {
    let mut v = Vec::new();
    for r in Root::ALL {
        for c in 1..tw.q() as u8 {
            v.push(root_subgroup(tw, r, c));
        }
    }
    v.extend(subgroup_generators(tw, SubgroupLabel::T0));
    v.push(s1(tw));
    v.push(s2(tw));
    v
}

pub fn sp4_order(q: u64) -> u64 {
    q.pow(4) * (q * q - 1) * (q.pow(4) - 1)
}

/// BFS-enumerated group with parent-pointer words in the generators.
pub struct GroupTable {
    gens: Vec<SpMat>,
    elems: Vec<SpMat>,
    index: HashMap<u64, u32>,
    parent: Vec<u32>,
    gen_of: Vec<u8>,
}

impl GroupTable {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elements(&self) -> &[SpMat] {
        &self.elems
    }

    pub fn generators(&self) -> &[SpMat] {
        &self.gens
    }

    pub fn index_of(&self, g: &SpMat) -> Option<u32> {
        self.index.get(&g.encode()).copied()
    }

    pub fn contains(&self, g: &SpMat) -> bool {
        self.index_of(g).is_some()
    }

    pub fn element(&self, idx: u32) -> &SpMat {
        &self.elems[idx as usize]
    }

    /// Generator word for the element: g = gens[w0] * gens[w1] * ...
    pub fn word(&self, idx: u32) -> Vec<u8> {
        let mut w = Vec::new();
        let mut cur = idx;
        while cur != 0 {
            w.push(self.gen_of[cur as usize]);
            cur = self.parent[cur as usize];
        }
        w.reverse();
        w
    }
}

/// Closure of the generating set under multiplication, BFS order, with a
/// parent chain per element. Memory grows with the group order; the full
/// Sp(4, q) table is practical for q = 3 (51840) and q = 5 (9.4M, gated)
/// but not q = 7.
pub fn generate_group(tw: &FieldTower, gens: &[SpMat]) -> GroupTable {
    let id = SpMat::identity(tw);
    let mut table = GroupTable {
        gens: gens.to_vec(),
        elems: vec![id],
        index: HashMap::new(),
        parent: vec![0],
        gen_of: vec![0],
    };
    table.index.insert(id.encode(), 0);
    let mut head = 0usize;
    while head < table.elems.len() {
        let cur = table.elems[head];
        for (gi, gen) in gens.iter().enumerate() {
            let next = cur.mul(tw, gen);
            let code = next.encode();
            if !table.index.contains_key(&code) {
                let idx = table.elems.len() as u32;
                table.index.insert(code, idx);
                table.elems.push(next);
                table.parent.push(head as u32);
                table.gen_of.push(gi as u8);
            }
        }
        head += 1;
    }
    table
}

/// Conjugacy class: representative (least matrix code in the class), class
/// size, and a generator word reaching the representative.
#[derive(Clone)]
pub struct ClassRecord {
    pub rep: SpMat,
    pub rep_index: u32,
    pub size: usize,
    pub word: Vec<u8>,
}

pub struct ClassTable {
    pub classes: Vec<ClassRecord>,
    /// element index (in the GroupTable) -> class number
    pub class_of: Vec<u32>,
}

/// Partition of the enumerated group into conjugation orbits under its own
/// generator set.
pub fn conjugacy_classes(tw: &FieldTower, table: &GroupTable) -> ClassTable {
    let n = table.len();
    let gens = table.generators().to_vec();
    let gen_invs: Vec<SpMat> = gens.iter().map(|g| g.inverse(tw)).collect();
    let mut class_of = vec![u32::MAX; n];
    let mut classes: Vec<ClassRecord> = Vec::new();
    for start in 0..n {
        if class_of[start] != u32::MAX {
            continue;
        }
        let cid = classes.len() as u32;
        let mut members = vec![start as u32];
        class_of[start] = cid;
        let mut head = 0;
        while head < members.len() {
            let x = *table.element(members[head]);
            for (g, ginv) in gens.iter().zip(&gen_invs) {
                let y = ginv.mul(tw, &x).mul(tw, g);
                let yi = table.index_of(&y).expect("conjugate stays in the group");
                if class_of[yi as usize] == u32::MAX {
                    class_of[yi as usize] = cid;
                    members.push(yi);
                }
            }
            head += 1;
        }
        let rep_index = members
            .iter()
            .copied()
            .min_by_key(|&i| table.element(i).encode())
            .unwrap();
        classes.push(ClassRecord {
            rep: *table.element(rep_index),
            rep_index,
            size: members.len(),
            word: table.word(rep_index),
        });
    }
    ClassTable { classes, class_of }
}

/// The anisotropic maximal torus of Sp(4, q): cyclic of order q^2+1, with
/// eigenvalues {zeta, zeta^q, zeta^-1, zeta^-q} over F_{q^4}.
pub struct AnisotropicTorus {
    pub generator: SpMat,
    pub elements: Vec<SpMat>,
    /// minimal polynomial of zeta over F_q (ascending, monic degree 4)
    pub min_poly: [u8; 5],
}

/// Rational-form construction: companion matrix C of the minimal polynomial
/// of zeta, a C-invariant nondegenerate alternating form M, and a basis
/// change P with P^T M P = J; the generator is P^-1 C P.
pub fn anisotropic_torus(tw: &FieldTower) -> AnisotropicTorus {
    let zeta = tw.torus_eigenvalue().code;
    // minimal polynomial: product of (x - zeta^{q^i}), i = 0..3
    let mut poly: Vec<u16> = vec![1];
    for i in 0..4 {
        let root = tw.frobenius_q(zeta, i);
        // multiply by (x - root)
        let mut next = vec![0u16; poly.len() + 1];
        for (d, &c) in poly.iter().enumerate() {
            next[d + 1] = tw.add(next[d + 1], c);
            next[d] = tw.add(next[d], tw.mul(tw.neg(root), c));
        }
        poly = next;
    }
    let mut min_poly = [0u8; 5];
    for (d, &c) in poly.iter().enumerate() {
        min_poly[d] = tw.fq_index(c); // asserts rationality over F_q
    }

    // companion matrix: C e_i = e_{i+1}, C e_4 = -(m0 e_1 + ... + m3 e_4)
    let mut c = Mat4::zero();
    for i in 0..3 {
        c.set(i + 1, i, tw.fq_one());
    }
    for i in 0..4 {
        c.set(i, 3, tw.fq_neg(min_poly[i]));
    }

    // alternating forms M with C^T M C = M: 6 unknowns, scan kernel for a
    // nondegenerate solution (deterministic order)
    let m = find_invariant_alternating_form(tw, &c);

    // symplectic basis for M with Gram J
    let p = symplectic_basis_change(tw, &m);
    let p_inv = p.inverse(tw).expect("basis change is invertible");
    let t_mat = p_inv.mul(tw, &c).mul(tw, &p);
    let generator =
        SpMat::new(tw, t_mat).expect("transported companion matrix preserves J");

    let order = tw.q() as u64 * tw.q() as u64 + 1;
    let mut elements = Vec::with_capacity(order as usize);
    let mut cur = SpMat::identity(tw);
    for _ in 0..order {
        elements.push(cur);
        cur = cur.mul(tw, &generator);
    }
    assert_eq!(cur, SpMat::identity(tw), "generator must have order q^2+1");
    assert_eq!(
        elements.iter().map(|g| g.encode()).collect::<std::collections::HashSet<_>>().len(),
        order as usize
    );
    AnisotropicTorus {
        generator,
        elements,
        min_poly,
    }
}

fn find_invariant_alternating_form(tw: &FieldTower, c: &Mat4) -> Mat4 {
    // unknowns: m01, m02, m03, m12, m13, m23
    let slots = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let build = |coeff: &[u8; 6]| -> Mat4 {
        let mut m = Mat4::zero();
        for (k, &(i, j)) in slots.iter().enumerate() {
            m.set(i, j, coeff[k]);
            m.set(j, i, tw.fq_neg(coeff[k]));
        }
        m
    };
    // linear condition rows: entries (i<j) of C^T M C - M as functions of the unknowns
    let mut rows: Vec<[u8; 6]> = Vec::new();
    for (i, j) in slots {
        let mut row = [0u8; 6];
        for (k, _) in slots.iter().enumerate() {
            let mut basis = [0u8; 6];
            basis[k] = tw.fq_one();
            let m = build(&basis);
            let d = c.transpose().mul(tw, &m).mul(tw, c);
            row[k] = tw.fq_sub(d.at(i, j), m.at(i, j));
        }
        rows.push(row);
    }
    // kernel basis by elimination over F_q
    let kernel = kernel_fq(tw, &rows, 6);
    assert!(!kernel.is_empty(), "invariant form space is nonzero");
    // scan kernel combinations in lexicographic order for det != 0
    let q = tw.q() as u64;
    let total = q.pow(kernel.len() as u32);
    for sel in 1..total {
        let mut coeff = [0u8; 6];
        let mut s = sel;
        for basis_vec in &kernel {
            let scalar = (s % q) as u8;
            s /= q;
            if scalar != 0 {
                for k in 0..6 {
                    coeff[k] = tw.fq_add(coeff[k], tw.fq_mul(scalar, basis_vec[k]));
                }
            }
        }
        let m = build(&coeff);
        if m.det(tw) != 0 {
            return m;
        }
    }
    unreachable!("a nondegenerate invariant alternating form exists")
}

/// Kernel basis of a small linear system over F_q (rows of length `ncols`).
fn kernel_fq(tw: &FieldTower, rows: &[[u8; 6]], ncols: usize) -> Vec<[u8; 6]> {
    let mut m: Vec<[u8; 6]> = rows.to_vec();
    let nrows = m.len();
    let mut pivot_col = vec![usize::MAX; nrows];
    let mut rank = 0;
    for col in 0..ncols {
        let pr = (rank..nrows).find(|&r| m[r][col] != 0);
        if let Some(pr) = pr {
            m.swap(rank, pr);
            let inv = tw.fq_inv(m[rank][col]);
            for j in 0..ncols {
                m[rank][j] = tw.fq_mul(m[rank][j], inv);
            }
            for r in 0..nrows {
                if r != rank && m[r][col] != 0 {
                    let f = m[r][col];
                    for j in 0..ncols {
                        let sub = tw.fq_mul(f, m[rank][j]);
                        m[r][j] = tw.fq_sub(m[r][j], sub);
                    }
                }
            }
            pivot_col[rank] = col;
            rank += 1;
        }
    }
    let pivots: Vec<usize> = pivot_col[..rank].to_vec();
    let mut kernel = Vec::new();
    for free in 0..ncols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = [0u8; 6];
        v[free] = tw.fq_one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = tw.fq_neg(m[r][free]);
        }
        kernel.push(v);
    }
    kernel
}

/// Basis u1..u4 with u_i^T M u_j = J, returned as the column matrix P.
fn symplectic_basis_change(tw: &FieldTower, m: &Mat4) -> Mat4 {
    let form = |x: [u8; 4], y: [u8; 4]| -> u8 {
        let mut acc = 0u8;
        for i in 0..4 {
            for j in 0..4 {
                acc = tw.fq_add(acc, tw.fq_mul(tw.fq_mul(x[i], m.at(i, j)), y[j]));
            }
        }
        acc
    };
    let one = tw.fq_one();
    let std_basis = [
        [one, 0, 0, 0],
        [0, one, 0, 0],
        [0, 0, one, 0],
        [0, 0, 0, one],
    ];
    let u1 = std_basis[0];
    let w = std_basis
        .iter()
        .find(|&&v| form(u1, v) != 0)
        .expect("M is nondegenerate");
    let scale = tw.fq_inv(form(u1, *w));
    let u4: [u8; 4] = w.map(|c| tw.fq_mul(c, scale));
    // project the standard basis onto the M-orthogonal complement of (u1, u4)
    let mut comp: Vec<[u8; 4]> = Vec::new();
    for &v in &std_basis {
        // v' = v + a u1 + b u4 with a = form(u4, v), b = -form(u1, v)
        let a = form(u4, v);
        let b = tw.fq_neg(form(u1, v));
        let mut vp = [0u8; 4];
        for i in 0..4 {
            vp[i] = tw.fq_add(v[i], tw.fq_add(tw.fq_mul(a, u1[i]), tw.fq_mul(b, u4[i])));
        }
        debug_assert_eq!(form(u1, vp), 0);
        debug_assert_eq!(form(u4, vp), 0);
        if vp != [0, 0, 0, 0] {
            // keep only vectors independent from what we have
            let dependent = comp.iter().any(|&c| {
                // 2-dim check: c and vp proportional?
                let mut ratio = None;
                let mut prop = true;
                for i in 0..4 {
                    match (c[i] != 0, vp[i] != 0) {
                        (false, false) => {}
                        (true, true) => {
                            let r = tw.fq_mul(vp[i], tw.fq_inv(c[i]));
                            if let Some(r0) = ratio {
                                if r0 != r {
                                    prop = false;
                                }
                            } else {
                                ratio = Some(r);
                            }
                        }
                        _ => prop = false,
                    }
                }
                prop
            });
            if !dependent {
                comp.push(vp);
            }
        }
        if comp.len() == 2 {
            break;
        }
    }
    assert_eq!(comp.len(), 2, "complement of a hyperbolic pair is 2-dim");
    let u2 = comp[0];
    let pairing = form(u2, comp[1]);
    assert_ne!(pairing, 0, "restriction to the complement is nondegenerate");
    let scale = tw.fq_inv(pairing);
    let u3: [u8; 4] = comp[1].map(|c| tw.fq_mul(c, scale));

    let mut p = Mat4::zero();
    for (col, u) in [u1, u2, u3, u4].iter().enumerate() {
        for row in 0..4 {
            p.set(row, col, u[row]);
        }
    }
    // verify P^T M P = J
    let check = p.transpose().mul(tw, m).mul(tw, &p);
    assert_eq!(check, gram_matrix(tw), "Gram transport must land on J");
    p
}

// --- points of L' tensor E and V tensor E ---

/// Indexing of L' tensor E as pairs (x3, x4) in E^2: index = r3 * q^2 + r4
/// where r is the rank of the E-code in the sorted level-2 list.
pub struct LPrimePoints {
    q2: usize,
    rank: Vec<i32>,
    codes: Vec<u16>,
}

impl LPrimePoints {
    pub fn new(tw: &FieldTower) -> Self {
        let codes = tw.level2_elements().to_vec();
        let mut rank = vec![-1i32; (tw.q() as usize).pow(4)];
        for (i, &c) in codes.iter().enumerate() {
            rank[c as usize] = i as i32;
        }
        LPrimePoints {
            q2: codes.len(),
            rank,
            codes,
        }
    }

    pub fn len(&self) -> usize {
        self.q2 * self.q2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, x3: u16, x4: u16) -> usize {
        let r3 = self.rank[x3 as usize];
        let r4 = self.rank[x4 as usize];
        assert!(r3 >= 0 && r4 >= 0, "coordinates must lie in E");
        r3 as usize * self.q2 + r4 as usize
    }

    pub fn point(&self, idx: usize) -> (u16, u16) {
        (self.codes[idx / self.q2], self.codes[idx % self.q2])
    }
}

/// Census of the decomposable locus in L' tensor E: sizes of S (decomposables
/// including 0) and S' (indecomposables), rotation-orbit counts, and the
/// sigma-pairing of the non-self-conjugate orbits.
pub struct Census {
    pub n_decomposable_nonzero: usize,
    pub n_indecomposable: usize,
    pub orbits_on_s: usize,
    pub orbits_on_sprime: usize,
    /// ordered pairs (O_i, O'_i) of point-index lists, O'_i = (1 x sigma) O_i
    pub pairs: Vec<(Vec<u32>, Vec<u32>)>,
}

pub fn decomposable_census(tw: &FieldTower, pts: &LPrimePoints) -> Census {
    let n = pts.len();
    let is_decomposable = |x3: u16, x4: u16| -> bool {
        if x3 == 0 || x4 == 0 {
            return true;
        }
        // dependent over F_q <=> x4/x3 in F_q
        let ratio = tw.mul(x4, tw.inv(x3));
        tw.elem(ratio).level == 1
    };
    // rotation orbits
    let (_, t0) = tw.so_e_elements();
    let mut orbit_of = vec![u32::MAX; n];
    let mut orbit_reps: Vec<u32> = Vec::new();
    let mut orbit_members: Vec<Vec<u32>> = Vec::new();
    for idx in 0..n {
        if orbit_of[idx] != u32::MAX {
            continue;
        }
        let oid = orbit_reps.len() as u32;
        orbit_reps.push(idx as u32);
        let mut members = Vec::new();
        let (mut x3, mut x4) = pts.point(idx);
        loop {
            let cur = pts.index(x3, x4);
            if orbit_of[cur] != u32::MAX {
                break;
            }
            orbit_of[cur] = oid;
            members.push(cur as u32);
            x3 = tw.mul(t0, x3);
            x4 = tw.mul(t0, x4);
        }
        members.sort_unstable();
        orbit_members.push(members);
    }

    let mut n_dec = 0usize;
    let mut n_indec = 0usize;
    for idx in 0..n {
        let (x3, x4) = pts.point(idx);
        if (x3, x4) == (0, 0) {
            continue;
        }
        if is_decomposable(x3, x4) {
            n_dec += 1;
        } else {
            n_indec += 1;
        }
    }

    // classify orbits and pair the non-self-conjugate ones
    let sigma_orbit = |oid: usize| -> u32 {
        let rep = orbit_reps[oid] as usize;
        let (x3, x4) = pts.point(rep);
        orbit_of[pts.index(tw.sigma(x3), tw.sigma(x4))]
    };
    let mut orbits_on_s = 0usize;
    let mut orbits_on_sprime = 0usize;
    let mut pairs = Vec::new();
    let mut paired = vec![false; orbit_reps.len()];
    for oid in 0..orbit_reps.len() {
        let rep = orbit_reps[oid] as usize;
        let (x3, x4) = pts.point(rep);
        let dec = (x3, x4) == (0, 0) || is_decomposable(x3, x4);
        let image = sigma_orbit(oid) as usize;
        if dec {
            orbits_on_s += 1;
            assert_eq!(image, oid, "decomposable orbits are self-conjugate");
        } else {
            orbits_on_sprime += 1;
            assert_ne!(image, oid, "indecomposable orbits pair up under sigma");
            if !paired[oid] {
                paired[oid] = true;
                paired[image] = true;
                pairs.push((orbit_members[oid].clone(), orbit_members[image].clone()));
            }
        }
    }
    Census {
        n_decomposable_nonzero: n_dec,
        n_indecomposable: n_indec,
        orbits_on_s,
        orbits_on_sprime,
        pairs,
    }
}

/// Number of Sp(V)-orbits on V tensor E, by union-find over generator moves.
/// Points are 4-tuples of E-coordinates in the basis (v1..v4).
pub fn orbit_count_tensor(tw: &FieldTower, gens: &[SpMat]) -> usize {
    let q2 = tw.level2_elements().len();
    let n = q2 * q2 * q2 * q2;
    let codes = tw.level2_elements();
    let mut rank = vec![0u16; (tw.q() as usize).pow(4)];
    for (i, &c) in codes.iter().enumerate() {
        rank[c as usize] = i as u16;
    }
    // per-generator scalar action tables: scalar index x E-rank -> E-rank
    let q = tw.q() as usize;
    let mut scal = vec![0u16; q * q2];
    for s in 0..q {
        let sc = tw.fq_code(s as u8);
        for (e, &c) in codes.iter().enumerate() {
            scal[s * q2 + e] = rank[tw.mul(sc, c) as usize];
        }
    }
    let mut uf: Vec<u32> = (0..n as u32).collect();
    fn find(uf: &mut [u32], mut x: u32) -> u32 {
        while uf[x as usize] != x {
            uf[x as usize] = uf[uf[x as usize] as usize];
            x = uf[x as usize];
        }
        x
    }
    // E-vector addition on ranks
    let mut addr = vec![0u16; q2 * q2];
    for (i, &a) in codes.iter().enumerate() {
        for (j, &b) in codes.iter().enumerate() {
            addr[i * q2 + j] = rank[tw.add(a, b) as usize];
        }
    }
    for g in gens {
        for idx in 0..n {
            // decode
            let mut rem = idx;
            let mut y = [0usize; 4];
            for k in (0..4).rev() {
                y[k] = rem % q2;
                rem /= q2;
            }
            // y' = g . y
            let mut yp = [0usize; 4];
            for i in 0..4 {
                let mut acc = 0usize; // rank of 0 is 0 since code 0 is least
                for k in 0..4 {
                    let gik = g.at(i, k) as usize;
                    if gik != 0 {
                        let term = scal[gik * q2 + y[k]] as usize;
                        acc = addr[acc * q2 + term] as usize;
                    }
                }
                yp[i] = acc;
            }
            let mut jdx = 0usize;
            for k in 0..4 {
                jdx = jdx * q2 + yp[k];
            }
            let a = find(&mut uf, idx as u32);
            let b = find(&mut uf, jdx as u32);
            if a != b {
                uf[a.max(b) as usize] = a.min(b);
            }
        }
    }
    let mut roots = 0usize;
    for i in 0..n {
        if find(&mut uf, i as u32) == i as u32 {
            roots += 1;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn t3() -> FieldTower {
        FieldTower::new(3, 1)
    }

    /// Independent cofactor-expansion determinant for 4x4 oracles.
    fn det4_cofactor(tw: &FieldTower, m: &Mat4) -> u8 {
        fn det3(tw: &FieldTower, e: [[u8; 3]; 3]) -> u8 {
            let mut acc = 0u8;
            let terms: [(usize, usize, usize, bool); 6] = [
                (0, 1, 2, true),
                (1, 2, 0, true),
                (2, 0, 1, true),
                (2, 1, 0, false),
                (0, 2, 1, false),
                (1, 0, 2, false),
            ];
            for (a, b, c, pos) in terms {
                let prod = tw.fq_mul(tw.fq_mul(e[0][a], e[1][b]), e[2][c]);
                acc = tw.fq_add(acc, if pos { prod } else { tw.fq_neg(prod) });
            }
            acc
        }
        let mut acc = 0u8;
        for col in 0..4 {
            let mut minor = [[0u8; 3]; 3];
            for r in 1..4 {
                let mut cc = 0;
                for c in 0..4 {
                    if c != col {
                        minor[r - 1][cc] = m.at(r, c);
                        cc += 1;
                    }
                }
            }
            let term = tw.fq_mul(m.at(0, col), det3(tw, minor));
            acc = tw.fq_add(acc, if col % 2 == 0 { term } else { tw.fq_neg(term) });
        }
        acc
    }

    #[test]
    fn gram_matrix_entries_and_skew_symmetry() {
        let tw = t3();
        let j = gram_matrix(&tw);
        assert_eq!(j.at(0, 3), tw.fq_one());
        assert_eq!(j.at(3, 0), tw.fq_neg(tw.fq_one()));
        assert_eq!(j.transpose(), j.neg(&tw));
    }

    #[test]
    fn gram_determinant_is_one_by_cofactor_oracle() {
        for p in [3u32, 5, 7] {
            let tw = FieldTower::new(p, 1);
            let j = gram_matrix(&tw);
            assert_eq!(det4_cofactor(&tw, &j), tw.fq_one());
            assert_eq!(j.det(&tw), tw.fq_one());
        }
    }

    #[test]
    fn root_r4_has_single_offdiagonal_entry() {
        let tw = t3();
        let mu = 2u8;
        let g = root_subgroup(&tw, Root::R4, mu);
        assert_eq!(g.at(0, 3), mu);
        let mut expect = Mat4::identity(&tw);
        expect.set(0, 3, mu);
        assert_eq!(*g.mat(), expect);
    }

    #[test]
    fn root_subgroups_are_one_parameter() {
        let tw = t3();
        for r in Root::ALL {
            for a in 0..3u8 {
                for b in 0..3u8 {
                    let lhs = root_subgroup(&tw, r, a).mul(&tw, &root_subgroup(&tw, r, b));
                    let rhs = root_subgroup(&tw, r, tw.fq_add(a, b));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn all_root_matrices_preserve_the_form() {
        let tw = t3();
        for r in Root::ALL {
            for c in 0..3u8 {
                let g = root_subgroup(&tw, r, c);
                assert!(is_symplectic(&tw, g.mat()));
            }
        }
    }

    #[test]
    fn u0_has_order_q4_and_center_u0pp() {
        let tw = t3();
        let u0 = subgroup_elements(&tw, SubgroupLabel::U0);
        assert_eq!(u0.len(), 81);
        let u0pp = subgroup_elements(&tw, SubgroupLabel::U0DoublePrime);
        assert_eq!(u0pp.len(), 3);
        for z in &u0pp {
            for g in &u0 {
                assert_eq!(z.mul(&tw, g), g.mul(&tw, z));
            }
        }
        // and U_0'' is exactly the center
        let mut central = 0;
        for z in &u0 {
            if u0.iter().all(|g| z.mul(&tw, g) == g.mul(&tw, z)) {
                central += 1;
            }
        }
        assert_eq!(central, 3);
    }

    #[test]
    fn u0prime_is_intersection_of_u1_and_u2() {
        let tw = t3();
        let u1: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::U1)
            .iter()
            .map(|g| g.encode())
            .collect();
        let u2: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::U2)
            .iter()
            .map(|g| g.encode())
            .collect();
        let inter: HashSet<u64> = u1.intersection(&u2).copied().collect();
        let u0p: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::U0Prime)
            .iter()
            .map(|g| g.encode())
            .collect();
        assert_eq!(inter, u0p);
        assert_eq!(u0p.len(), 9);
        assert_eq!(u1.len(), 27);
        assert_eq!(u2.len(), 27);
    }

    #[test]
    fn bridge_is_additive_and_detects_u0prime() {
        let tw = t3();
        let u1 = subgroup_elements(&tw, SubgroupLabel::U1);
        let u0p: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::U0Prime)
            .iter()
            .map(|g| g.encode())
            .collect();
        assert!(u1_bilinear_bridge(&tw, &SpMat::identity(&tw))
            .unwrap()
            .is_zero());
        for g in &u1 {
            let fg = u1_bilinear_bridge(&tw, g).unwrap();
            // form vanishes on (L_1-perp / L) x (L_1-perp / L), i.e. on v3, iff lam = 0
            let vanish = fg.eval(&tw, [tw.fq_one(), 0], [tw.fq_one(), 0]) == 0;
            assert_eq!(vanish, u0p.contains(&g.encode()));
            for h in &u1 {
                let fh = u1_bilinear_bridge(&tw, h).unwrap();
                let sum = u1_bilinear_bridge(&tw, &g.mul(&tw, h)).unwrap();
                assert_eq!(sum, fg.add(&tw, &fh));
            }
        }
        // round trip
        for g in &u1 {
            let f = u1_bilinear_bridge(&tw, g).unwrap();
            assert_eq!(u1_from_bridge(&tw, f), *g);
        }
        // error path
        assert_eq!(
            u1_bilinear_bridge(&tw, &s1(&tw)),
            Err(GroupError::NotInSubgroup)
        );
    }

    #[test]
    fn full_group_order_matches_closed_form() {
        let tw = t3();
        let table = generate_group(&tw, &sp4_generators(&tw));
        assert_eq!(table.len() as u64, sp4_order(3));
        // every element's word reproduces it
        for idx in [0u32, 1, 100, 5000, 51839] {
            let w = table.word(idx);
            let mut acc = SpMat::identity(&tw);
            for gi in w {
                acc = acc.mul(&tw, &table.generators()[gi as usize]);
            }
            assert_eq!(acc, *table.element(idx));
        }
    }

    #[test]
    fn p1_order_matches_gl2_times_q_cubed() {
        let tw = t3();
        let table = generate_group(&tw, &subgroup_generators(&tw, SubgroupLabel::P1));
        let q = 3u64;
        let gl2 = (q * q - 1) * (q * q - q);
        assert_eq!(table.len() as u64, gl2 * q.pow(3));
        let p1 = subgroup_elements(&tw, SubgroupLabel::P1);
        assert_eq!(p1.len(), table.len());
    }

    #[test]
    fn b0_index_matches_flag_count_oracle() {
        let tw = t3();
        let b0 = generate_group(&tw, &subgroup_generators(&tw, SubgroupLabel::B0));
        assert_eq!(b0.len(), subgroup_elements(&tw, SubgroupLabel::B0).len());
        // oracle: enumerate complete isotropic flags (line, Lagrangian plane)
        let q = 3usize;
        let j = gram_matrix(&tw);
        let form = |x: [u8; 4], y: [u8; 4]| -> u8 {
            let mut acc = 0u8;
            for a in 0..4 {
                for b in 0..4 {
                    acc = tw.fq_add(acc, tw.fq_mul(tw.fq_mul(x[a], j.at(a, b)), y[b]));
                }
            }
            acc
        };
        let vecs: Vec<[u8; 4]> = (0..q.pow(4))
            .map(|i| {
                let mut v = [0u8; 4];
                let mut rem = i;
                for k in 0..4 {
                    v[k] = (rem % q) as u8;
                    rem /= q;
                }
                v
            })
            .collect();
        let canonical = |v: [u8; 4]| -> [u8; 4] {
            let lead = (0..4).find(|&k| v[k] != 0).unwrap();
            let inv = tw.fq_inv(v[lead]);
            v.map(|c| tw.fq_mul(c, inv))
        };
        let mut lines = HashSet::new();
        for &v in &vecs[1..] {
            lines.insert(canonical(v));
        }
        let mut flag_count = 0usize;
        for &l1 in &lines {
            // Lagrangian planes containing l1: planes spanned by l1 and w
            // with <l1, w> = 0, w independent
            let mut planes = HashSet::new();
            for &w in &vecs[1..] {
                if form(l1, w) != 0 {
                    continue;
                }
                // plane = span(l1, w); skip if w in span(l1)
                let mut members: Vec<[u8; 4]> = Vec::new();
                for a in 0..q as u8 {
                    for b in 0..q as u8 {
                        let mut x = [0u8; 4];
                        for k in 0..4 {
                            x[k] = tw.fq_add(tw.fq_mul(a, l1[k]), tw.fq_mul(b, w[k]));
                        }
                        members.push(x);
                    }
                }
                let set: HashSet<[u8; 4]> = members.into_iter().collect();
                if set.len() == q * q {
                    let mut sorted: Vec<[u8; 4]> = set.into_iter().collect();
                    sorted.sort_unstable();
                    planes.insert(sorted);
                }
            }
            flag_count += planes.len();
        }
        assert_eq!(sp4_order(3) as usize / b0.len(), flag_count);
        assert_eq!(flag_count, (9 + 1) * (3 + 1) * (3 + 1));
    }

    #[test]
    fn bruhat_decomposition_of_p1_and_p2() {
        let tw = t3();
        let b0 = subgroup_elements(&tw, SubgroupLabel::B0);
        let union_with = |s: &SpMat| -> HashSet<u64> {
            let mut set: HashSet<u64> = b0.iter().map(|g| g.encode()).collect();
            for x in &b0 {
                for y in &b0 {
                    set.insert(x.mul(&tw, s).mul(&tw, y).encode());
                }
            }
            set
        };
        let p1: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::P1)
            .iter()
            .map(|g| g.encode())
            .collect();
        assert_eq!(union_with(&s1(&tw)), p1);
        let p2: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::P2)
            .iter()
            .map(|g| g.encode())
            .collect();
        assert_eq!(union_with(&s2(&tw)), p2);
        assert_eq!(p1.len(), 1296);
        assert_eq!(p2.len(), 1296);
    }

    #[test]
    fn u0_is_product_of_root_groups_uniquely() {
        let tw = t3();
        let mut seen = HashSet::new();
        for a in 0..3u8 {
            for b in 0..3u8 {
                for c in 0..3u8 {
                    for d in 0..3u8 {
                        let g = root_subgroup(&tw, Root::R1, a)
                            .mul(&tw, &root_subgroup(&tw, Root::R2, b))
                            .mul(&tw, &root_subgroup(&tw, Root::R3, c))
                            .mul(&tw, &root_subgroup(&tw, Root::R4, d));
                        assert!(seen.insert(g.encode()), "factorization must be unique");
                    }
                }
            }
        }
        let u0: HashSet<u64> = subgroup_elements(&tw, SubgroupLabel::U0)
            .iter()
            .map(|g| g.encode())
            .collect();
        assert_eq!(seen, u0);
    }

    #[test]
    fn conjugacy_classes_partition_the_group() {
        let tw = t3();
        let table = generate_group(&tw, &sp4_generators(&tw));
        let ct = conjugacy_classes(&tw, &table);
        let total: usize = ct.classes.iter().map(|c| c.size).sum();
        assert_eq!(total, 51840);
        // identity and -identity are singletons
        let id = SpMat::identity(&tw);
        let neg_id = id.neg(&tw);
        for g in [id, neg_id] {
            let idx = table.index_of(&g).unwrap();
            let cid = ct.class_of[idx as usize] as usize;
            assert_eq!(ct.classes[cid].size, 1);
        }
        // representatives pairwise non-conjugate, by fresh orbit search
        let gens = table.generators().to_vec();
        let gen_invs: Vec<SpMat> = gens.iter().map(|g| g.inverse(&tw)).collect();
        for (i, ci) in ct.classes.iter().enumerate() {
            let mut orbit = HashSet::new();
            let mut queue = vec![ci.rep];
            orbit.insert(ci.rep.encode());
            while let Some(x) = queue.pop() {
                for (g, ginv) in gens.iter().zip(&gen_invs) {
                    let y = ginv.mul(&tw, &x).mul(&tw, g);
                    if orbit.insert(y.encode()) {
                        queue.push(y);
                    }
                }
            }
            assert_eq!(orbit.len(), ci.size);
            for (j, cj) in ct.classes.iter().enumerate() {
                if i != j {
                    assert!(!orbit.contains(&cj.rep.encode()));
                }
            }
        }
    }

    #[test]
    fn anisotropic_torus_structure() {
        let tw = t3();
        let torus = anisotropic_torus(&tw);
        assert_eq!(torus.elements.len(), 10);
        // characteristic polynomial of the generator equals the minimal
        // polynomial of zeta
        assert_eq!(torus.generator.mat().char_poly(&tw), torus.min_poly);
        // only +-identity have eigenvalue +-1: evaluate char poly at +-1
        let id = SpMat::identity(&tw);
        let neg_id = id.neg(&tw);
        for t in &torus.elements {
            let cp = t.mat().char_poly(&tw);
            let eval = |x: u8| -> u8 {
                let mut acc = 0u8;
                let mut pw = tw.fq_one();
                for &c in &cp {
                    acc = tw.fq_add(acc, tw.fq_mul(c, pw));
                    pw = tw.fq_mul(pw, x);
                }
                acc
            };
            let has_one = eval(tw.fq_one()) == 0;
            let has_neg_one = eval(tw.fq_neg(tw.fq_one())) == 0;
            if *t == id || *t == neg_id {
                assert!(has_one || has_neg_one);
            } else {
                assert!(!has_one && !has_neg_one);
            }
        }
        // eigenvalues of the generator over F_{q^4}: evaluate min poly at
        // zeta^{+-1}, zeta^{+-q}
        let zeta = tw.torus_eigenvalue().code;
        for e in [1i64, 3, -1, -3] {
            let lam = tw.pow_code(zeta, e.rem_euclid(10) as u64);
            let mut acc = 0u16;
            let mut pw = 1u16;
            for &c in &torus.min_poly {
                acc = tw.add(acc, tw.mul(tw.fq_code(c), pw));
                pw = tw.mul(pw, lam);
            }
            assert_eq!(acc, 0);
        }
    }

    #[test]
    fn torus_order_at_q5() {
        let tw = FieldTower::new(5, 1);
        let torus = anisotropic_torus(&tw);
        assert_eq!(torus.elements.len(), 26);
    }

    #[test]
    fn orbit_count_on_tensor_space() {
        let tw = t3();
        assert_eq!(orbit_count_tensor(&tw, &sp4_generators(&tw)), 8);
    }

    #[test]
    fn orbit_count_on_tensor_space_q5() {
        let tw = FieldTower::new(5, 1);
        assert_eq!(orbit_count_tensor(&tw, &sp4_generators(&tw)), 12);
    }

    #[test]
    fn census_counts_at_q3() {
        let tw = t3();
        let pts = LPrimePoints::new(&tw);
        let census = decomposable_census(&tw, &pts);
        assert_eq!(census.n_decomposable_nonzero, 32); // (q^2-1)^2/(q-1)
        assert_eq!(census.orbits_on_s, 9); // q^2
        assert_eq!(census.pairs.len(), 6); // q(q-1)^2/2
        assert_eq!(census.orbits_on_sprime, 12);
        assert_eq!(census.n_indecomposable, 48);
        // pair lists are genuinely sigma-images
        for (o, op) in &census.pairs {
            assert_eq!(o.len(), op.len());
            let im: HashSet<u32> = o
                .iter()
                .map(|&i| {
                    let (x3, x4) = pts.point(i as usize);
                    pts.index(tw.sigma(x3), tw.sigma(x4)) as u32
                })
                .collect();
            let expect: HashSet<u32> = op.iter().copied().collect();
            assert_eq!(im, expect);
        }
    }

    #[test]
    fn m1_acts_simply_transitively_on_indecomposables() {
        for p in [3u32, 5] {
            let tw = FieldTower::new(p, 1);
            let pts = LPrimePoints::new(&tw);
            let m1 = subgroup_elements(&tw, SubgroupLabel::M1);
            // indecomposable points
            let mut sprime = Vec::new();
            for idx in 0..pts.len() {
                let (x3, x4) = pts.point(idx);
                if x3 != 0 && x4 != 0 && tw.elem(tw.mul(x4, tw.inv(x3))).level > 1 {
                    sprime.push(idx);
                }
            }
            assert_eq!(m1.len(), sprime.len());
            // orbit of the first indecomposable point under M_1 is everything,
            // with trivial stabilizer
            let (x3, x4) = pts.point(sprime[0]);
            let mut seen = HashSet::new();
            for m in &m1 {
                // action of m on L' via the lower-right block; point moves by m
                let b = [m.at(2, 2), m.at(2, 3), m.at(3, 2), m.at(3, 3)];
                let y3 = tw.add(
                    tw.mul(tw.fq_code(b[0]), x3),
                    tw.mul(tw.fq_code(b[1]), x4),
                );
                let y4 = tw.add(
                    tw.mul(tw.fq_code(b[2]), x3),
                    tw.mul(tw.fq_code(b[3]), x4),
                );
                assert!(seen.insert(pts.index(y3, y4)), "stabilizer must be trivial");
            }
            let expect: HashSet<usize> = sprime.into_iter().collect();
            assert_eq!(seen, expect);
        }
    }

    #[test]
    fn unknown_subgroup_membership_errors() {
        let tw = t3();
        let not_symplectic = {
            let mut m = Mat4::identity(&tw);
            m.set(0, 0, 2);
            m
        };
        assert_eq!(
            SpMat::new(&tw, not_symplectic).unwrap_err(),
            GroupError::NotSymplectic
        );
    }
}
