//! Decomposition of W under the rotation group SO(E) and the conjugation
//! operator: isotypic projectors, plus/minus eigenspace splits, the delta
//! basis of the minus part of the invariants, and the multiplicity Gram
//! matrix over the full group.
//!
//! Rotation characters take values in Q(zeta_{q+1}); projector bookkeeping
//! stays in that conductor (dimensions come out of fixed-point traces and
//! are rational integers), while explicit bases are extracted only for the
//! rational components, the invariants and the quadratic-character part.

use num::{BigInt, One, Zero};

use crate::cyclo::{CycNum, Rat};
use crate::gftower::OElem;
use crate::sympgrp::{ClassTable, Census};
use crate::weil::{CycMat, MonomialOp, WeilModel};

/// Character of SO(E) = Z/(q+1): exponent k, value zeta_{q+1}^{kj} at the
/// j-th power of the distinguished generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SOChar {
    pub order: u32,
    pub k: u32,
}

impl SOChar {
    pub fn new(q: u32, k: u32) -> Self {
        SOChar {
            order: q + 1,
            k: k % (q + 1),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.k == 0
    }

    /// The quadratic character: exponent (q+1)/2 (q odd makes q+1 even).
    pub fn is_nu(&self) -> bool {
        self.k == self.order / 2
    }

    pub fn value(&self, j: i64) -> CycNum {
        CycNum::root_of_unity(self.order, self.k as i64 * j)
    }

    pub fn inverse(&self) -> SOChar {
        SOChar {
            order: self.order,
            k: (self.order - self.k) % self.order,
        }
    }
}

/// Element of the group algebra of O(E) with cyclotomic coefficients,
/// indexed by the `oe_elements` order. Projectors live here; convolution
/// identities at this level are exact operator identities because the
/// representation restricted to O(E) is a homomorphism.
#[derive(Clone, PartialEq, Eq)]
pub struct OEWeights {
    pub conductor: u32,
    pub w: Vec<CycNum>,
}

impl OEWeights {
    pub fn zero(model: &WeilModel, conductor: u32) -> Self {
        let n = model.tower().oe_elements().len();
        OEWeights {
            conductor,
            w: vec![CycNum::zero(conductor); n],
        }
    }

    pub fn identity(model: &WeilModel, conductor: u32) -> Self {
        let mut out = Self::zero(model, conductor);
        let idx = oe_index(model, model.tower().oe_identity());
        out.w[idx] = CycNum::one(conductor);
        out
    }

    pub fn add(&self, other: &OEWeights) -> OEWeights {
        OEWeights {
            conductor: self.conductor,
            w: self.w.iter().zip(&other.w).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: &Rat) -> OEWeights {
        OEWeights {
            conductor: self.conductor,
            w: self.w.iter().map(|a| a.scale(s)).collect(),
        }
    }

    pub fn convolve(&self, model: &WeilModel, other: &OEWeights) -> OEWeights {
        let tw = model.tower();
        let oe = tw.oe_elements();
        let mut out = Self::zero(model, self.conductor);
        for (i, a) in self.w.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.w.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let s = tw.oe_compose(oe[i], oe[j]);
                let t = a * b;
                let si = oe_index(model, s);
                out.w[si] = &out.w[si] + &t;
            }
        }
        out
    }

    /// Left-translation by sigma: weights of Lambda * self.
    pub fn left_sigma(&self, model: &WeilModel) -> OEWeights {
        let tw = model.tower();
        let oe = tw.oe_elements();
        let sigma = tw.oe_sigma();
        let mut out = Self::zero(model, self.conductor);
        for (i, a) in self.w.iter().enumerate() {
            if !a.is_zero() {
                let s = tw.oe_compose(sigma, oe[i]);
                out.w[oe_index(model, s)] = a.clone();
            }
        }
        out
    }

    /// Right-translation by sigma: weights of self * Lambda.
    pub fn right_sigma(&self, model: &WeilModel) -> OEWeights {
        let tw = model.tower();
        let oe = tw.oe_elements();
        let sigma = tw.oe_sigma();
        let mut out = Self::zero(model, self.conductor);
        for (i, a) in self.w.iter().enumerate() {
            if !a.is_zero() {
                let s = tw.oe_compose(oe[i], sigma);
                out.w[oe_index(model, s)] = a.clone();
            }
        }
        out
    }

    /// Rational coefficient vector, when every weight lies in Q.
    pub fn rational(&self) -> Option<Vec<Rat>> {
        self.w.iter().map(|c| c.as_rat().ok()).collect()
    }

    /// Dense matrix at the weights' conductor (entries are weight values
    /// placed along the permutations of the O(E)-operators).
    pub fn to_dense(&self, model: &WeilModel) -> CycMat {
        let dim = model.dim();
        let mut m = CycMat::zero(dim, self.conductor);
        for (i, a) in self.w.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let op = model.oe_op(model.tower().oe_elements()[i]);
            for x in 0..dim {
                m.add_assign_at(x, op.perm[x] as usize, a);
            }
        }
        m
    }
}

pub fn oe_index(model: &WeilModel, t: OElem) -> usize {
    model
        .tower()
        .oe_elements()
        .iter()
        .position(|&s| s == t)
        .expect("element of O(E)")
}

/// An isotypic summand of W: rotation character exponent, optional
/// conjugation eigenvalue, exact dimension, projector weights, and an
/// explicit basis for the rational components.
pub struct IsoComponent {
    pub theta: SOChar,
    pub sign: Option<i8>,
    pub dim: usize,
    pub weights: OEWeights,
    pub basis: Option<Vec<Vec<CycNum>>>,
}

/// Fixed points of the point permutation of 1 tensor t, for t = t0^j and
/// the same composed with sigma. These traces drive every dimension.
fn fixed_counts(model: &WeilModel) -> (Vec<i64>, Vec<i64>) {
    let tw = model.tower();
    let qp1 = tw.q() as usize + 1;
    let mut rot_fix = Vec::with_capacity(qp1);
    let mut refl_fix = Vec::with_capacity(qp1);
    let t0 = tw.so_generator();
    let mut t = 1u16;
    for _ in 0..qp1 {
        let rot = OElem { t, refl: false };
        let refl = tw.oe_compose(tw.oe_sigma(), rot);
        rot_fix.push(count_fixed(&model.oe_op(rot)) as i64);
        refl_fix.push(count_fixed(&model.oe_op(refl)) as i64);
        t = tw.mul(t0, t);
    }
    (rot_fix, refl_fix)
}

fn count_fixed(op: &MonomialOp) -> usize {
    op.perm
        .iter()
        .enumerate()
        .filter(|&(i, &y)| i as u32 == y)
        .count()
}

/// dim W_theta as the exact trace of the isotypic projector.
pub fn dim_w_theta(model: &WeilModel, theta: SOChar) -> u64 {
    let (rot_fix, _) = fixed_counts(model);
    weighted_integer_average(model, theta, &rot_fix)
}

/// trace of Lambda restricted to W_theta (theta must be conjugation-stable
/// for this to be an eigenspace statement; the trace itself is defined for
/// every theta).
pub fn trace_lambda_on_w_theta(model: &WeilModel, theta: SOChar) -> i64 {
    let (_, refl_fix) = fixed_counts(model);
    let n = theta.order;
    let mut acc = CycNum::zero(n);
    for (j, &f) in refl_fix.iter().enumerate() {
        let t = theta.value(-(j as i64)).scale(&Rat::from_integer(BigInt::from(f)));
        acc = &acc + &t;
    }
    let avg = acc.scale(&Rat::new(BigInt::one(), BigInt::from(n)));
    avg.as_i64().expect("trace of an operator on a rational space")
}

fn weighted_integer_average(model: &WeilModel, theta: SOChar, fix: &[i64]) -> u64 {
    let _ = model;
    let n = theta.order;
    let mut acc = CycNum::zero(n);
    for (j, &f) in fix.iter().enumerate() {
        let t = theta.value(-(j as i64)).scale(&Rat::from_integer(BigInt::from(f)));
        acc = &acc + &t;
    }
    let avg = acc.scale(&Rat::new(BigInt::one(), BigInt::from(n)));
    let v = avg.as_i64().expect("projector trace is an integer");
    assert!(v >= 0);
    v as u64
}

/// The isotypic projector P_theta = (q+1)^{-1} sum theta(t)^{-1} rho(1 x t),
/// as group-algebra weights; dimension from the trace; basis extracted by
/// exact row reduction for the rational characters.
pub fn isotypic_projector(model: &WeilModel, theta: SOChar, with_basis: bool) -> IsoComponent {
    let tw = model.tower();
    let n = theta.order;
    let mut weights = OEWeights::zero(model, n);
    let t0 = tw.so_generator();
    let mut t = 1u16;
    let inv_order = Rat::new(BigInt::one(), BigInt::from(n));
    for j in 0..n {
        let idx = oe_index(model, OElem { t, refl: false });
        weights.w[idx] = theta.value(-(j as i64)).scale(&inv_order);
        t = tw.mul(t0, t);
    }
    let dim = dim_w_theta(model, theta) as usize;
    let basis = if with_basis && (theta.is_trivial() || theta.is_nu()) {
        Some(projector_image_basis(model, &weights, dim))
    } else {
        None
    };
    IsoComponent {
        theta,
        sign: None,
        dim,
        weights,
        basis,
    }
}

/// Eigenspace split of Lambda on W_theta for the conjugation-stable
/// characters (trivial and quadratic); errors otherwise, since Lambda maps
/// W_theta to the inverse character's component.
pub fn split_pm(
    model: &WeilModel,
    comp: &IsoComponent,
) -> Result<(IsoComponent, IsoComponent), String> {
    if !(comp.theta.is_trivial() || comp.theta.is_nu()) {
        return Err(format!(
            "conjugation maps the k={} component to k={}, no eigenspace split",
            comp.theta.k,
            comp.theta.inverse().k
        ));
    }
    let tr_lambda = trace_lambda_on_w_theta(model, comp.theta);
    let dim = comp.dim as i64;
    assert_eq!((dim + tr_lambda) % 2, 0);
    let half = Rat::new(BigInt::one(), BigInt::from(2));
    let sigma_w = comp.weights.left_sigma(model);
    let w_plus = comp.weights.add(&sigma_w).scale(&half);
    let w_minus = comp
        .weights
        .add(&sigma_w.scale(&Rat::from_integer(BigInt::from(-1))))
        .scale(&half);
    let dim_plus = ((dim + tr_lambda) / 2) as usize;
    let dim_minus = ((dim - tr_lambda) / 2) as usize;
    let basis_plus = comp
        .basis
        .as_ref()
        .map(|_| projector_image_basis(model, &w_plus, dim_plus));
    let basis_minus = comp
        .basis
        .as_ref()
        .map(|_| projector_image_basis(model, &w_minus, dim_minus));
    Ok((
        IsoComponent {
            theta: comp.theta,
            sign: Some(1),
            dim: dim_plus,
            weights: w_plus,
            basis: basis_plus,
        },
        IsoComponent {
            theta: comp.theta,
            sign: Some(-1),
            dim: dim_minus,
            weights: w_minus,
            basis: basis_minus,
        },
    ))
}

/// Image basis of a rational projector: apply to the standard basis and
/// row-reduce with lexicographic pivoting.
fn projector_image_basis(
    model: &WeilModel,
    weights: &OEWeights,
    expected_dim: usize,
) -> Vec<Vec<CycNum>> {
    let p = model.tower().p();
    let rat = weights
        .rational()
        .expect("basis extraction is for rational projectors");
    let dim = model.dim();
    // columns of the projector: P e_x = sum_t w_t perm-image
    let mut cols: Vec<Vec<CycNum>> = vec![vec![CycNum::zero(p); dim]; dim];
    for (i, w) in rat.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let op = model.oe_op(model.tower().oe_elements()[i]);
        // (P e_x)(y) = sum_t w_t [perm_t(y) = x]
        for y in 0..dim {
            let x = op.perm[y] as usize;
            let cur = &cols[x][y] + &CycNum::from_rat(p, w.clone());
            cols[x][y] = cur;
        }
    }
    let basis = column_space_basis(cols);
    assert_eq!(basis.len(), expected_dim, "projector rank equals its trace");
    basis
}

/// Row-reduced basis of the span of the given vectors, exact arithmetic,
/// first-nonzero pivoting.
pub fn column_space_basis(mut vecs: Vec<Vec<CycNum>>) -> Vec<Vec<CycNum>> {
    let mut basis: Vec<(usize, Vec<CycNum>)> = Vec::new(); // (pivot, vector)
    for mut v in vecs.drain(..) {
        for (piv, b) in &basis {
            if !v[*piv].is_zero() {
                let f = v[*piv].clone();
                for (x, bx) in b.iter().enumerate() {
                    if !bx.is_zero() {
                        let t = &f * bx;
                        v[x] = &v[x] - &t;
                    }
                }
            }
        }
        if let Some(piv) = v.iter().position(|c| !c.is_zero()) {
            let inv = v[piv].checked_inv().expect("pivot");
            let vn: Vec<CycNum> = v.iter().map(|c| c * &inv).collect();
            basis.push((piv, vn));
        }
    }
    basis.sort_by_key(|(piv, _)| *piv);
    basis.into_iter().map(|(_, v)| v).collect()
}

/// Rank of a span without keeping the basis.
pub fn rank_of(vecs: Vec<Vec<CycNum>>) -> usize {
    column_space_basis(vecs).len()
}

/// The delta basis of the minus part of the invariants: one difference of
/// indicator functions per sigma-conjugate orbit pair.
pub fn delta_basis(model: &WeilModel, census: &Census) -> Vec<Vec<CycNum>> {
    let p = model.tower().p();
    let dim = model.dim();
    let one = CycNum::one(p);
    let neg_one = CycNum::from_i64(p, -1);
    census
        .pairs
        .iter()
        .map(|(o, op)| {
            let mut f = vec![CycNum::zero(p); dim];
            for &x in o {
                f[x as usize] = one.clone();
            }
            for &x in op {
                f[x as usize] = neg_one.clone();
            }
            f
        })
        .collect()
}

/// Exponent representatives of the non-stable character pairs {k, q+1-k}.
pub fn nontrivial_pair_reps(q: u32) -> Vec<u32> {
    (1..(q + 1) / 2).collect()
}

/// Summary of the isotypic dimension bookkeeping at one q.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DimReport {
    pub q: u32,
    pub dim_w: u64,
    pub w1: u64,
    pub w1_plus: u64,
    pub w1_minus: u64,
    pub wnu_plus: u64,
    pub wnu_minus: u64,
    pub w_theta_nontrivial: Vec<u64>,
    pub sum_over_components: u64,
    pub trace_lambda_w: i64,
    pub trace_lambda_w1: i64,
    pub trace_lambda_wnu: i64,
}

pub fn dims_report(model: &WeilModel) -> DimReport {
    let q = model.tower().q();
    let trivial = SOChar::new(q, 0);
    let nu = SOChar::new(q, (q + 1) / 2);
    let w1 = dim_w_theta(model, trivial);
    let wnu = dim_w_theta(model, nu);
    let tr_l_w1 = trace_lambda_on_w_theta(model, trivial);
    let tr_l_wnu = trace_lambda_on_w_theta(model, nu);
    let mut w_theta = Vec::new();
    let mut total = w1 + wnu;
    for k in 1..=q {
        if k == (q + 1) / 2 {
            continue;
        }
        let d = dim_w_theta(model, SOChar::new(q, k));
        total += d;
        if k < (q + 1) / 2 {
            w_theta.push(d);
        }
    }
    let tr_l_w = count_fixed(&model.lambda_op()) as i64;
    DimReport {
        q,
        dim_w: model.dim() as u64,
        w1,
        w1_plus: ((w1 as i64 + tr_l_w1) / 2) as u64,
        w1_minus: ((w1 as i64 - tr_l_w1) / 2) as u64,
        wnu_plus: ((wnu as i64 + tr_l_wnu) / 2) as u64,
        wnu_minus: ((wnu as i64 - tr_l_wnu) / 2) as u64,
        w_theta_nontrivial: w_theta,
        sum_over_components: total,
        trace_lambda_w: tr_l_w,
        trace_lambda_w1: tr_l_w1,
        trace_lambda_wnu: tr_l_wnu,
    }
}

/// The eta table over class representatives: row c = values eta(g_c x t)
/// for t in `oe_elements` order.
pub fn eta_table(model: &WeilModel, classes: &ClassTable) -> Vec<Vec<CycNum>> {
    use rayon::prelude::*;
    model.prepare_dense();
    classes
        .classes
        .par_iter()
        .map(|c| model.eta_row(&c.rep))
        .collect()
}

/// Character table rows of the five irreducible components plus the full
/// character, from the eta table, in a common conductor.
pub struct ComponentChars {
    pub conductor: u32,
    pub labels: Vec<String>,
    /// rows[i][c] = character of component i at class c
    pub rows: Vec<Vec<CycNum>>,
    pub chi_w: Vec<CycNum>,
}

pub fn component_characters(
    model: &WeilModel,
    eta_rows: &[Vec<CycNum>],
) -> ComponentChars {
    let q = model.tower().q();
    let p = model.tower().p();
    let big = p * (q + 1);
    let trivial = isotypic_projector(model, SOChar::new(q, 0), false);
    let (w1p, w1m) = split_pm(model, &trivial).expect("trivial splits");
    let nu = isotypic_projector(model, SOChar::new(q, (q + 1) / 2), false);
    let (wnp, wnm) = split_pm(model, &nu).expect("nu splits");
    let mut comps: Vec<(String, OEWeights)> = vec![
        ("W1+".into(), w1p.weights),
        ("W1-".into(), w1m.weights),
        ("Wnu+".into(), wnp.weights),
        ("Wnu-".into(), wnm.weights),
    ];
    for k in nontrivial_pair_reps(q) {
        let c = isotypic_projector(model, SOChar::new(q, k), false);
        comps.push((format!("Wtheta{k}"), c.weights));
    }
    let mut rows = Vec::with_capacity(comps.len());
    for (_, w) in &comps {
        let wbig: Vec<CycNum> = w.w.iter().map(|c| c.embed(big).expect("embeds")).collect();
        let row: Vec<CycNum> = eta_rows
            .iter()
            .map(|etas| {
                let mut acc = CycNum::zero(big);
                for (t_idx, weight) in wbig.iter().enumerate() {
                    if !weight.is_zero() {
                        let e = etas[t_idx].embed(big).expect("embeds");
                        let term = weight * &e;
                        acc = &acc + &term;
                    }
                }
                acc
            })
            .collect();
        rows.push(row);
    }
    let chi_w: Vec<CycNum> = eta_rows
        .iter()
        .map(|etas| etas[oe_index(model, model.tower().oe_identity())].embed(big).expect("embeds"))
        .collect();
    ComponentChars {
        conductor: big,
        labels: comps.into_iter().map(|(l, _)| l).collect(),
        rows,
        chi_w,
    }
}

/// Exact inner product of two class functions given the class sizes.
pub fn char_inner_product(
    a: &[CycNum],
    b: &[CycNum],
    class_sizes: &[usize],
    group_order: u64,
) -> CycNum {
    let n = a[0].conductor();
    let mut acc = CycNum::zero(n);
    for ((x, y), &s) in a.iter().zip(b).zip(class_sizes) {
        let t = (x * &y.conj()).scale(&Rat::from_integer(BigInt::from(s)));
        acc = &acc + &t;
    }
    acc.scale(&Rat::new(BigInt::one(), BigInt::from(group_order)))
}

/// Gram matrix of the component characters; the components are irreducible
/// and distinct exactly when this is the identity.
pub struct GramReport {
    pub labels: Vec<String>,
    pub gram: Vec<Vec<Rat>>,
    pub is_identity: bool,
    pub w_norm: Rat,
    pub decomposition_consistent: bool,
}

pub fn multiplicity_gram(
    model: &WeilModel,
    classes: &ClassTable,
    eta_rows: &[Vec<CycNum>],
) -> GramReport {
    let chars = component_characters(model, eta_rows);
    let sizes: Vec<usize> = classes.classes.iter().map(|c| c.size).collect();
    let order: u64 = sizes.iter().map(|&s| s as u64).sum();
    let m = chars.rows.len();
    let mut gram = vec![vec![Rat::zero(); m]; m];
    let mut is_identity = true;
    for i in 0..m {
        for j in 0..m {
            let v = char_inner_product(&chars.rows[i], &chars.rows[j], &sizes, order)
                .as_rat()
                .expect("inner products of characters are rational here");
            let expect = if i == j { Rat::one() } else { Rat::zero() };
            if v != expect {
                is_identity = false;
            }
            gram[i][j] = v;
        }
    }
    let w_norm = char_inner_product(&chars.chi_w, &chars.chi_w, &sizes, order)
        .as_rat()
        .expect("rational");
    // chi_W = 2 * sum of nontrivial-pair characters + the four sign pieces
    let two = CycNum::from_i64(chars.conductor, 2);
    let decomposition_consistent = (0..sizes.len()).all(|c| {
        let mut acc = CycNum::zero(chars.conductor);
        for (i, row) in chars.rows.iter().enumerate() {
            let term = if i < 4 { row[c].clone() } else { &two * &row[c] };
            acc = &acc + &term;
        }
        acc == chars.chi_w[c]
    });
    GramReport {
        labels: chars.labels,
        gram,
        is_identity,
        w_norm,
        decomposition_consistent,
    }
}

/// Apply projector weights to a function vector over Q(zeta_p); the weights
/// must be rational.
pub fn apply_rational_weights(
    model: &WeilModel,
    weights: &OEWeights,
    v: &[CycNum],
) -> Vec<CycNum> {
    let p = model.tower().p();
    let rat = weights.rational().expect("rational weights");
    let mut acc = vec![CycNum::zero(p); v.len()];
    for (i, w) in rat.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let op = model.oe_op(model.tower().oe_elements()[i]);
        let img = op.apply(v);
        for (a, x) in acc.iter_mut().zip(img) {
            let t = x.scale(w);
            *a = &*a + &t;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gftower::FieldTower;
    use crate::sympgrp::{decomposable_census, LPrimePoints};
    use std::sync::{Arc, OnceLock};

    fn model3() -> &'static WeilModel {
        static MODEL: OnceLock<WeilModel> = OnceLock::new();
        MODEL.get_or_init(|| WeilModel::new(Arc::new(FieldTower::new(3, 1))))
    }

    #[test]
    fn dimension_table_at_q3() {
        let r = dims_report(model3());
        assert_eq!(r.w1, 21);
        assert_eq!(r.w1_plus, 15);
        assert_eq!(r.w1_minus, 6);
        assert_eq!(r.wnu_plus, 10);
        assert_eq!(r.wnu_minus, 10);
        assert_eq!(r.w_theta_nontrivial, vec![20]);
        assert_eq!(r.sum_over_components, 81);
        assert_eq!(r.trace_lambda_w, 9);
        assert_eq!(r.trace_lambda_w1, 9);
        assert_eq!(r.trace_lambda_wnu, 0);
    }

    #[test]
    fn projector_weights_are_idempotent_and_orthogonal() {
        let m = model3();
        let q = 3;
        let comps: Vec<IsoComponent> = (0..=q)
            .map(|k| isotypic_projector(m, SOChar::new(q, k), false))
            .collect();
        let mut total = OEWeights::zero(m, q + 1);
        for c in &comps {
            total = total.add(&c.weights);
            let sq = c.weights.convolve(m, &c.weights);
            assert!(sq == c.weights, "P^2 = P for k={}", c.theta.k);
        }
        assert!(total == OEWeights::identity(m, q + 1), "sum of projectors is 1");
        for a in &comps {
            for b in &comps {
                if a.theta.k != b.theta.k {
                    let prod = a.weights.convolve(m, &b.weights);
                    assert!(prod == OEWeights::zero(m, q + 1));
                }
            }
        }
        // dense spot check for the trivial character
        let dense = comps[0].weights.to_dense(m);
        assert!(dense.matmul(&dense) == dense);
    }

    #[test]
    fn lambda_swaps_theta_and_theta_inverse() {
        let m = model3();
        for k in 0..=3u32 {
            let theta = SOChar::new(3, k);
            let p_theta = isotypic_projector(m, theta, false);
            let p_inv = isotypic_projector(m, theta.inverse(), false);
            // Lambda . P_theta = P_{theta^{-1}} . Lambda as weights
            let lambda_p = p_theta.weights.left_sigma(m);
            let p_lambda = p_inv.weights.right_sigma(m);
            assert!(lambda_p == p_lambda, "k={k}");
        }
    }

    #[test]
    fn split_errors_for_unstable_characters() {
        let m = model3();
        let c = isotypic_projector(m, SOChar::new(3, 1), false);
        assert!(split_pm(m, &c).is_err());
    }

    #[test]
    fn explicit_bases_match_dimensions() {
        let m = model3();
        let trivial = isotypic_projector(m, SOChar::new(3, 0), true);
        assert_eq!(trivial.basis.as_ref().unwrap().len(), 21);
        let (p, mi) = split_pm(m, &trivial).unwrap();
        assert_eq!(p.basis.as_ref().unwrap().len(), 15);
        assert_eq!(mi.basis.as_ref().unwrap().len(), 6);
        let nu = isotypic_projector(m, SOChar::new(3, 2), true);
        assert_eq!(nu.basis.as_ref().unwrap().len(), 20);
    }

    #[test]
    fn delta_functions_span_the_minus_invariants() {
        let m = model3();
        let tw = m.tower();
        let pts = LPrimePoints::new(tw);
        let census = decomposable_census(tw, &pts);
        let deltas = delta_basis(m, &census);
        assert_eq!(deltas.len(), 6);
        let lam = m.lambda_op();
        for d in &deltas {
            // Lambda delta = -delta
            let img = lam.apply(d);
            let neg: Vec<CycNum> = d.iter().map(|c| c.neg()).collect();
            assert_eq!(img, neg);
            // the minus projector fixes delta
            let trivial = isotypic_projector(m, SOChar::new(3, 0), false);
            let (_, minus) = split_pm(m, &trivial).unwrap();
            let proj = apply_rational_weights(m, &minus.weights, d);
            assert_eq!(&proj, d);
            // delta vanishes on decomposable points
            for idx in 0..m.dim() {
                let (x3, x4) = m.space().pts.point(idx);
                let dec = x3 == 0
                    || x4 == 0
                    || tw.elem(tw.mul(x4, tw.inv(x3))).level == 1;
                if dec {
                    assert!(d[idx].is_zero());
                }
            }
        }
        // spans exactly the projector image
        let trivial = isotypic_projector(m, SOChar::new(3, 0), true);
        let (_, minus) = split_pm(m, &trivial).unwrap();
        let mut all = minus.basis.unwrap();
        let rank_basis = all.len();
        all.extend(deltas.clone());
        assert_eq!(rank_of(all), rank_basis);
        assert_eq!(rank_of(deltas), rank_basis);
    }

    #[test]
    fn dims_at_q9_match_closed_forms() {
        // r = 2 sanity: q = 9, dims from fixed-point traces only
        let m = WeilModel::new(Arc::new(FieldTower::new(3, 2)));
        let r = dims_report(&m);
        let q = 9u64;
        assert_eq!(r.w1, q * (q * q - q + 1));
        assert_eq!(r.w1_minus, q * (q - 1) * (q - 1) / 2);
        assert_eq!(r.trace_lambda_w, (q * q) as i64);
        assert_eq!(r.sum_over_components, q.pow(4));
    }
}
