//! Representation-theoretic verdicts on the minus part of the invariants:
//! cuspidality (no fixed vectors under any unipotent radical), degeneracy
//! (no one-dimensional constituents of the restriction to the maximal
//! unipotent subgroup at all), irreducibility, the decomposition of the
//! restriction to the Siegel unipotent radical into distinct characters,
//! and the induced-character identity over the Siegel parabolic.

use std::collections::HashMap;

use num::{BigInt, One, Signed, Zero};

use crate::cyclo::{CycNum, Rat};
use crate::howe::char_inner_product;
use crate::sympgrp::{
    conjugacy_classes, generate_group, subgroup_elements, subgroup_generators,
    u1_bilinear_bridge, Census, SpMat, SubgroupLabel,
};
use crate::weil::{MonomialOp, WeilModel, WeilOp};

/// Character values on a fixed list of classes (or subgroup elements).
#[derive(Clone)]
pub struct CharRow {
    pub values: Vec<CycNum>,
}

/// Dimension of the joint fixed space of a set of monomial operators on the
/// whole function space, by weighted union-find over points.
pub fn fixed_subspace_full(model: &WeilModel, ops: &[MonomialOp]) -> usize {
    let dim = model.dim();
    let p = model.tower().p();
    let mut parent: Vec<u32> = (0..dim as u32).collect();
    let mut weight: Vec<CycNum> = vec![CycNum::one(p); dim];
    let mut dead = vec![false; dim];

    fn find(parent: &mut [u32], weight: &mut [CycNum], x: u32) -> (u32, CycNum) {
        if parent[x as usize] == x {
            return (x, weight[x as usize].clone());
        }
        let (r, wp) = find(parent, weight, parent[x as usize]);
        let w = &weight[x as usize] * &wp;
        parent[x as usize] = r;
        weight[x as usize] = w.clone();
        (r, w)
    }

    // constraint per op: f(sigma x) = d(x)^{-1} f(x)
    for m in ops {
        for x in 0..dim {
            let y = m.perm[x] as usize;
            let f = m.diag[x].checked_inv().expect("invertible diagonal");
            let (rx, wx) = find(&mut parent, &mut weight, x as u32);
            let (ry, wy) = find(&mut parent, &mut weight, y as u32);
            if rx == ry {
                if wy != &f * &wx {
                    dead[rx as usize] = true;
                }
            } else {
                let w = &(&wy.checked_inv().expect("invertible") * &f) * &wx;
                parent[ry as usize] = rx;
                weight[ry as usize] = w;
                let d = dead[ry as usize];
                dead[rx as usize] |= d;
            }
        }
    }
    let mut live = std::collections::HashSet::new();
    let mut dead_roots = std::collections::HashSet::new();
    for x in 0..dim as u32 {
        let (r, _) = find(&mut parent, &mut weight, x);
        if dead[r as usize] {
            dead_roots.insert(r);
        } else {
            live.insert(r);
        }
    }
    live.retain(|r| !dead_roots.contains(r));
    live.len()
}

/// Dimension of the joint fixed space of monomial operators inside the span
/// of the given basis vectors, by exact rank computation of the constraint
/// system sum_i c_i (M b_i - b_i) = 0.
pub fn fixed_subspace_in_span(
    model: &WeilModel,
    basis: &[Vec<CycNum>],
    ops: &[MonomialOp],
) -> usize {
    let d = basis.len();
    if d == 0 {
        return 0;
    }
    let p = model.tower().p();
    let dim = model.dim();
    let mut rows: Vec<Vec<CycNum>> = Vec::new();
    for m in ops {
        let images: Vec<Vec<CycNum>> = basis.iter().map(|b| m.apply(b)).collect();
        for x in 0..dim {
            let mut row = Vec::with_capacity(d);
            let mut nonzero = false;
            for i in 0..d {
                let v = &images[i][x] - &basis[i][x];
                if !v.is_zero() {
                    nonzero = true;
                }
                row.push(v);
            }
            if nonzero {
                row.resize(d, CycNum::zero(p));
                rows.push(row);
            }
        }
    }
    let rank = crate::howe::rank_of(rows);
    d - rank
}

/// Per-subgroup fixed-space dimensions of the component spanned by `basis`,
/// for the unipotent lattice members; all of them act monomially.
pub fn cuspidality_report(
    model: &WeilModel,
    basis: &[Vec<CycNum>],
) -> Vec<(String, usize)> {
    let tw = model.tower();
    let labels = [
        ("U0''", SubgroupLabel::U0DoublePrime),
        ("U0'", SubgroupLabel::U0Prime),
        ("U1", SubgroupLabel::U1),
        ("U2", SubgroupLabel::U2),
        ("U0", SubgroupLabel::U0),
    ];
    labels
        .iter()
        .map(|(name, label)| {
            let ops: Vec<MonomialOp> = subgroup_generators(tw, *label)
                .iter()
                .map(|g| model.p1_op(g).expect("unipotent lattice is parabolic"))
                .collect();
            (name.to_string(), fixed_subspace_in_span(model, basis, &ops))
        })
        .collect()
}

/// One-dimensional character of U_0 through the abelianization coordinates:
/// xi_{a,b}(u) = psi(a*alpha + b*lambda); nondegenerate when a, b both
/// nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct U0Char {
    pub a: u8,
    pub b: u8,
}

impl U0Char {
    pub fn is_nondegenerate(&self) -> bool {
        self.a != 0 && self.b != 0
    }

    pub fn eval(&self, model: &WeilModel, g: &SpMat) -> CycNum {
        let tw = model.tower();
        let alpha = tw.fq_neg(g.at(0, 1));
        let lam = g.at(1, 2);
        let e = tw.fq_add(tw.fq_mul(self.a, alpha), tw.fq_mul(self.b, lam));
        tw.psi(e)
    }

    /// Homomorphism check over the whole subgroup; the spec treats a
    /// non-homomorphism as a caller error.
    pub fn validate(&self, model: &WeilModel, u0: &[SpMat]) -> bool {
        let tw = model.tower();
        u0.iter().all(|g| {
            u0.iter().all(|h| {
                let gh = g.mul(tw, h);
                self.eval(model, &gh) == &self.eval(model, g) * &self.eval(model, h)
            })
        })
    }
}

/// trace of a monomial operator on the span of mutually orthogonal,
/// disjointly supported basis vectors.
pub fn trace_on_span_mono(
    model: &WeilModel,
    op: &MonomialOp,
    basis: &[Vec<CycNum>],
    supports: &[Vec<u32>],
) -> CycNum {
    let p = model.tower().p();
    let mut acc = CycNum::zero(p);
    for (b, supp) in basis.iter().zip(supports) {
        let mut num = CycNum::zero(p);
        let mut den = Rat::zero();
        for &x in supp {
            let x = x as usize;
            let bx = &b[x];
            den += bx.as_rat().expect("real basis").pow(2);
            // (M b)(x) * b(x)
            let img = &op.diag[x] * &b[op.perm[x] as usize];
            let t = &img * bx;
            num = &num + &t;
        }
        acc = &acc + &num.scale(&den.recip());
    }
    acc
}

/// trace of a general operator on the span (same orthogonality assumption).
pub fn trace_on_span(
    model: &WeilModel,
    op: &WeilOp,
    basis: &[Vec<CycNum>],
) -> CycNum {
    let p = model.tower().p();
    let mut acc = CycNum::zero(p);
    for b in basis {
        let img = op.apply(b);
        let mut num = CycNum::zero(p);
        let mut den = Rat::zero();
        for (x, bx) in b.iter().enumerate() {
            if !bx.is_zero() {
                let r = bx.as_rat().expect("real basis");
                den += r.clone() * r.clone();
                let t = &img[x] * bx;
                num = &num + &t;
            }
        }
        acc = &acc + &num.scale(&den.recip());
    }
    acc
}

fn delta_supports(basis: &[Vec<CycNum>]) -> Vec<Vec<u32>> {
    basis
        .iter()
        .map(|b| {
            b.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect()
}

/// Multiplicities of every one-dimensional character of U_0 in the
/// restriction of the component spanned by the (delta) basis. Returns
/// ((a, b), multiplicity) in lexicographic order.
pub fn u0_character_multiplicities(
    model: &WeilModel,
    basis: &[Vec<CycNum>],
) -> Vec<((u8, u8), i64)> {
    let tw = model.tower();
    let q = tw.q() as u8;
    let u0 = subgroup_elements(tw, SubgroupLabel::U0);
    let supports = delta_supports(basis);
    // one trace per subgroup element, reused across characters
    let traces: Vec<CycNum> = u0
        .iter()
        .map(|u| {
            let op = model.p1_op(u).expect("U_0 is parabolic");
            trace_on_span_mono(model, &op, basis, &supports)
        })
        .collect();
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            let xi = U0Char { a, b };
            let mut acc = CycNum::zero(tw.p());
            for (u, tr) in u0.iter().zip(&traces) {
                let t = &xi.eval(model, u).conj() * tr;
                acc = &acc + &t;
            }
            let m = acc.scale(&Rat::new(BigInt::one(), BigInt::from(u0.len() as i64)));
            let m = m
                .as_rat()
                .expect("multiplicity is rational");
            assert!(m.is_integer() && !m.is_negative(), "multiplicity sanity");
            use num::ToPrimitive;
            out.push(((a, b), m.to_integer().to_i64().unwrap()));
        }
    }
    out
}

/// theta10 values over classes from the eta table, by the averaged formula
/// theta10(g) = (2q+2)^{-1} (sum over rotations - sum over reflections).
pub fn theta10_from_eta_rows(model: &WeilModel, eta_rows: &[Vec<CycNum>]) -> CharRow {
    let tw = model.tower();
    let p = tw.p();
    let oe = tw.oe_elements();
    let n = 2 * (tw.q() + 1) as i64;
    let values = eta_rows
        .iter()
        .map(|row| {
            let mut acc = CycNum::zero(p);
            for (t, v) in oe.iter().zip(row) {
                acc = if t.refl { &acc - v } else { &acc + v };
            }
            acc.scale(&Rat::new(BigInt::one(), BigInt::from(n)))
        })
        .collect();
    CharRow { values }
}

/// <chi, chi> over the given classes.
pub fn norm_squared(values: &[CycNum], sizes: &[usize], order: u64) -> Rat {
    char_inner_product(values, values, sizes, order)
        .as_rat()
        .expect("norm of a character is rational")
}

/// The restriction of the minus-invariants to the Siegel unipotent radical:
/// each delta line is invariant with character determined by the E-norm
/// triple of any point of its orbit pair.
#[derive(Debug, Clone, serde::Serialize)]
pub struct U1Decomposition {
    /// per delta line: (n33, n34, n44) with the character
    /// g -> psi((lam*n33 + 2*beta*n34 + mu*n44)/2)
    pub triples: Vec<(u8, u8, u8)>,
    pub distinct: bool,
    pub orbit_separation: bool,
    pub m1_transitive: bool,
}

fn point_triple(model: &WeilModel, idx: usize) -> (u8, u8, u8) {
    let tw = model.tower();
    let (x3, x4) = model.space().pts.point(idx);
    (
        tw.norm_form(x3, x3),
        tw.norm_form(x3, x4),
        tw.norm_form(x4, x4),
    )
}

pub fn u1_char_value(model: &WeilModel, triple: (u8, u8, u8), g: &SpMat) -> CycNum {
    let tw = model.tower();
    let f = u1_bilinear_bridge(tw, g).expect("character domain is U_1");
    let two = tw.fq_add(tw.fq_one(), tw.fq_one());
    let mut v = tw.fq_mul(f.lam, triple.0);
    v = tw.fq_add(v, tw.fq_mul(tw.fq_mul(two, f.beta), triple.1));
    v = tw.fq_add(v, tw.fq_mul(f.mu, triple.2));
    tw.psi(tw.fq_mul(tw.fq_half(), v))
}

pub fn u1_decomposition(model: &WeilModel, census: &Census) -> U1Decomposition {
    let tw = model.tower();
    let deltas = crate::howe::delta_basis(model, census);
    let triples: Vec<(u8, u8, u8)> = census
        .pairs
        .iter()
        .map(|(o, _)| point_triple(model, o[0] as usize))
        .collect();
    // distinctness of the characters = distinctness of the triples
    let mut sorted = triples.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let distinct = sorted.len() == triples.len();

    // the triple of a point separates exactly the O(E)-orbit pairs: every
    // indecomposable point's triple matches its pair's triple and no other
    let mut orbit_separation = true;
    for (i, (o, op)) in census.pairs.iter().enumerate() {
        for &x in o.iter().chain(op.iter()) {
            if point_triple(model, x as usize) != triples[i] {
                orbit_separation = false;
            }
        }
    }

    // each delta line is an eigenvector with the predicted character
    for (i, d) in deltas.iter().enumerate() {
        for g in subgroup_generators(tw, SubgroupLabel::U1) {
            let img = model.unip_op(&g).expect("U_1").apply(d);
            let scalar = u1_char_value(model, triples[i], &g);
            let expect: Vec<CycNum> = d.iter().map(|c| &scalar * c).collect();
            assert_eq!(img, expect, "delta line {i} must transform by its character");
        }
    }

    // the Levi permutes the lines transitively
    let pair_of_point: HashMap<u32, usize> = census
        .pairs
        .iter()
        .enumerate()
        .flat_map(|(i, (o, op))| {
            o.iter().chain(op.iter()).map(move |&x| (x, i))
        })
        .collect();
    let m1_gens = subgroup_generators(tw, SubgroupLabel::M1);
    let mut reached = vec![false; deltas.len()];
    let mut queue = vec![0usize];
    reached[0] = true;
    while let Some(i) = queue.pop() {
        let rep = census.pairs[i].0[0] as usize;
        let (x3, x4) = model.space().pts.point(rep);
        for m in &m1_gens {
            // support of rho(m) delta_i is the image of the support under m
            let b = [m.at(2, 2), m.at(2, 3), m.at(3, 2), m.at(3, 3)];
            let y3 = tw.add(tw.mul(tw.fq_code(b[0]), x3), tw.mul(tw.fq_code(b[1]), x4));
            let y4 = tw.add(tw.mul(tw.fq_code(b[2]), x3), tw.mul(tw.fq_code(b[3]), x4));
            let j = pair_of_point[&(model.space().pts.index(y3, y4) as u32)];
            if !reached[j] {
                reached[j] = true;
                queue.push(j);
            }
        }
    }
    let m1_transitive = reached.iter().all(|&r| r);

    U1Decomposition {
        triples,
        distinct,
        orbit_separation,
        m1_transitive,
    }
}

/// Result of the induced-character identity over the Siegel parabolic.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LittleGroupsReport {
    pub stabilizer_order: usize,
    pub stabilizer_is_dihedral: bool,
    pub sign_character_consistent: bool,
    pub subgroup_order: usize,
    pub index: usize,
    pub class_count: usize,
    pub induced_matches_pointwise: bool,
    pub norm_is_one: bool,
}

/// Builds the line stabilizer O inside the Levi, the character
/// phi'(h u) = eps(h) phi(u) of O U_1, induces it up to P_1 and compares
/// with the restriction of theta10, class by class.
pub fn little_groups_check(
    model: &WeilModel,
    census: &Census,
) -> Result<LittleGroupsReport, String> {
    let tw = model.tower();
    let q = tw.q() as usize;
    let deltas = crate::howe::delta_basis(model, census);
    let delta1 = &deltas[0];
    let neg_delta1: Vec<CycNum> = delta1.iter().map(|c| c.neg()).collect();

    // stabilizer of the line spanned by delta_1 in M_1, with its sign
    let m1 = subgroup_elements(tw, SubgroupLabel::M1);
    let mut stab: Vec<(SpMat, i8)> = Vec::new();
    for m in &m1 {
        let img = model.p1_op(m).expect("Levi").apply(delta1);
        if &img == delta1 {
            stab.push((*m, 1));
        } else if img == neg_delta1 {
            stab.push((*m, -1));
        }
    }
    if stab.len() != 2 * (q + 1) {
        return Err(format!(
            "stabilizer has order {}, expected {}",
            stab.len(),
            2 * (q + 1)
        ));
    }
    // structure: kernel of the sign is cyclic of order q+1, and every
    // outside element inverts it
    let eps: HashMap<u64, i8> = stab.iter().map(|(m, e)| (m.encode(), *e)).collect();
    let kernel: Vec<SpMat> = stab.iter().filter(|(_, e)| *e == 1).map(|(m, _)| *m).collect();
    let outside: Vec<SpMat> = stab.iter().filter(|(_, e)| *e == -1).map(|(m, _)| *m).collect();
    let mut dihedral = kernel.len() == q + 1 && outside.len() == q + 1;
    // cyclic: some kernel element has order q+1
    let ord = |m: &SpMat| -> usize {
        let id = SpMat::identity(tw);
        let mut x = *m;
        let mut k = 1;
        while x != id {
            x = x.mul(tw, m);
            k += 1;
        }
        k
    };
    dihedral &= kernel.iter().any(|m| ord(m) == q + 1);
    for h in &outside {
        let hinv = h.inverse(tw);
        for r in &kernel {
            let conj = h.mul(tw, r).mul(tw, &hinv);
            if conj != r.inverse(tw) {
                dihedral = false;
            }
        }
    }
    // the sign is a homomorphism
    let mut sign_hom = true;
    for (a, ea) in &stab {
        for (b, eb) in &stab {
            let ab = a.mul(tw, b);
            if eps[&ab.encode()] != ea * eb {
                sign_hom = false;
            }
        }
    }

    // the character phi of U_1 attached to the first orbit pair
    let triple = point_triple(model, census.pairs[0].0[0] as usize);
    let u1 = subgroup_elements(tw, SubgroupLabel::U1);

    // O U_1 with phi'(h u) = eps(h) phi(u)
    let mut phi_prime: HashMap<u64, CycNum> = HashMap::new();
    for (h, e) in &stab {
        for u in &u1 {
            let g = h.mul(tw, u);
            let v = u1_char_value(model, triple, u);
            let v = if *e < 0 { v.neg() } else { v };
            let prev = phi_prime.insert(g.encode(), v);
            assert!(prev.is_none(), "O and U_1 intersect trivially");
        }
    }
    let subgroup_order = phi_prime.len();
    // homomorphism property of phi' on the subgroup
    let ou1: Vec<SpMat> = stab
        .iter()
        .flat_map(|(h, _)| u1.iter().map(move |u| h.mul(tw, u)))
        .collect();
    let mut phi_hom = true;
    for a in &ou1 {
        for b in &ou1 {
            let ab = a.mul(tw, b);
            let lhs = &phi_prime[&a.encode()] * &phi_prime[&b.encode()];
            if phi_prime[&ab.encode()] != lhs {
                phi_hom = false;
            }
        }
    }
    if !phi_hom {
        return Err("phi' is not a homomorphism on O U_1".into());
    }

    // classes of P_1 and both characters on them
    let p1_table = generate_group(tw, &subgroup_generators(tw, SubgroupLabel::P1));
    let classes = conjugacy_classes(tw, &p1_table);
    let supports = delta_supports(&deltas);
    let p1_elems = p1_table.elements();
    let inv_order = Rat::new(BigInt::one(), BigInt::from(subgroup_order as i64));
    let mut matches = true;
    let mut induced_values = Vec::with_capacity(classes.classes.len());
    let mut restricted_values = Vec::with_capacity(classes.classes.len());
    for c in &classes.classes {
        let x = c.rep;
        // induced character value
        let mut acc = CycNum::zero(tw.p());
        for y in p1_elems {
            let yxyi = y.inverse(tw).mul(tw, &x).mul(tw, y);
            if let Some(v) = phi_prime.get(&yxyi.encode()) {
                acc = &acc + v;
            }
        }
        let ind = acc.scale(&inv_order);
        // restriction of theta10: trace on the delta span
        let op = model.p1_op(&x).expect("P_1 element");
        let tr = trace_on_span_mono(model, &op, &deltas, &supports);
        if ind != tr {
            matches = false;
        }
        induced_values.push(ind);
        restricted_values.push(tr);
    }
    let sizes: Vec<usize> = classes.classes.iter().map(|c| c.size).collect();
    let norm = norm_squared(&restricted_values, &sizes, p1_elems.len() as u64);
    Ok(LittleGroupsReport {
        stabilizer_order: stab.len(),
        stabilizer_is_dihedral: dihedral,
        sign_character_consistent: sign_hom,
        subgroup_order,
        index: p1_elems.len() / subgroup_order,
        class_count: classes.classes.len(),
        induced_matches_pointwise: matches,
        norm_is_one: norm == Rat::one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gftower::FieldTower;
    use crate::howe::delta_basis;
    use crate::sympgrp::{decomposable_census, LPrimePoints};
    use std::sync::{Arc, OnceLock};

    fn model3() -> &'static WeilModel {
        static MODEL: OnceLock<WeilModel> = OnceLock::new();
        MODEL.get_or_init(|| WeilModel::new(Arc::new(FieldTower::new(3, 1))))
    }

    fn census3() -> Census {
        let tw = model3().tower();
        decomposable_census(tw, &LPrimePoints::new(tw))
    }

    #[test]
    fn full_space_fixed_by_nothing_is_everything() {
        let m = model3();
        assert_eq!(fixed_subspace_full(m, &[]), 81);
    }

    #[test]
    fn cuspidality_fixed_spaces_vanish_at_q3() {
        let m = model3();
        let deltas = delta_basis(m, &census3());
        for (name, dim) in cuspidality_report(m, &deltas) {
            assert_eq!(dim, 0, "{name} must have no fixed vectors");
        }
    }

    #[test]
    fn full_w_has_unipotent_fixed_vectors_but_w1minus_does_not() {
        // sanity contrast: U_0'' does fix plenty of W
        let m = model3();
        let tw = m.tower();
        let ops: Vec<MonomialOp> = subgroup_generators(tw, SubgroupLabel::U0DoublePrime)
            .iter()
            .map(|g| m.p1_op(g).unwrap())
            .collect();
        let fixed_in_w = fixed_subspace_full(m, &ops);
        assert!(fixed_in_w > 0);
    }

    #[test]
    fn u0_characters_are_homomorphisms() {
        let m = model3();
        let u0 = subgroup_elements(m.tower(), SubgroupLabel::U0);
        for (a, b) in [(0u8, 0u8), (1, 0), (1, 2), (2, 2)] {
            assert!(U0Char { a, b }.validate(m, &u0));
        }
    }

    #[test]
    fn whittaker_multiplicities_all_vanish_at_q3() {
        let m = model3();
        let deltas = delta_basis(m, &census3());
        let mults = u0_character_multiplicities(m, &deltas);
        assert_eq!(mults.len(), 9);
        let mut nondeg = 0;
        let mut total = 0;
        for ((a, b), mult) in mults {
            assert_eq!(mult, 0, "xi_({a},{b})");
            if a != 0 && b != 0 {
                nondeg += 1;
            }
            total += mult;
        }
        assert_eq!(nondeg, 4); // (q-1)^2
        assert_eq!(total, 0);
    }

    #[test]
    fn u1_decomposition_at_q3() {
        let m = model3();
        let r = u1_decomposition(m, &census3());
        assert_eq!(r.triples.len(), 6);
        assert!(r.distinct);
        assert!(r.orbit_separation);
        assert!(r.m1_transitive);
    }

    #[test]
    fn little_groups_identity_at_q3() {
        let m = model3();
        let r = little_groups_check(m, &census3()).unwrap();
        assert_eq!(r.stabilizer_order, 8);
        assert!(r.stabilizer_is_dihedral);
        assert!(r.sign_character_consistent);
        assert_eq!(r.subgroup_order, 216);
        assert_eq!(r.index, 6);
        assert!(r.induced_matches_pointwise);
        assert!(r.norm_is_one);
    }

    #[test]
    fn theta10_at_identity_is_the_dimension() {
        let m = model3();
        // eta row of the identity alone
        let id = SpMat::identity(m.tower());
        let row = m.eta_row(&id);
        let theta = theta10_from_eta_rows(m, &[row]);
        assert_eq!(theta.values[0], CycNum::from_i64(3, 6));
    }
}
