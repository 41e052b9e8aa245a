//! Exact-arithmetic engine for the oscillator (Weil) representation of
//! Sp(8, F_q) restricted to the dual pair Sp(4, F_q) x O(2^-, F_q).
//!
//! The crate builds the Schrodinger model on functions over a Lagrangian
//! half, decomposes it under the rotation group of the anisotropic plane,
//! and verifies — in exact cyclotomic arithmetic, with no tolerances — the
//! dimension bookkeeping, irreducibility, cuspidality, degeneracy,
//! anisotropic-torus character values and the unipotence deduction for the
//! small sign-isotypic constituent at desk scale q in {3, 5, 7}.

pub mod cyclo;
pub mod gftower;
pub mod sympgrp;
pub mod weil;
pub mod howe;
pub mod analysis;
pub mod dlledger;
