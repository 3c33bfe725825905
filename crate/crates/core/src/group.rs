//! Finitely generated abelian character groups and their elements.
//!
//! A `CharacterGroup` is the multiplicative group of nonzero elements of the
//! fraction field of a quasi-integral algebra, presented by Smith invariants:
//! a free rank plus a divisibility-chained torsion list. All exponent vectors
//! (logs of monomials) live here. Cones only ever see the free quotient; the
//! torsion part is stored and respected by group arithmetic but killed when
//! passing to the rational dual.

use crate::arith::{self, Int, IntMat};
use num_integer::Integer;
use num_traits::Zero;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CharacterGroup {
    rank: usize,
    torsion: Vec<Int>,
}

impl CharacterGroup {
    pub fn free(rank: usize) -> Self {
        CharacterGroup { rank, torsion: Vec::new() }
    }

    /// Invariants: every d >= 2 and d_i | d_{i+1}.
    pub fn new(rank: usize, torsion: Vec<Int>) -> Result<Self, String> {
        for d in &torsion {
            if *d < Int::from(2) {
                return Err(format!("torsion invariant {} is < 2", d));
            }
        }
        for w in torsion.windows(2) {
            if !(&w[1] % &w[0]).is_zero() {
                return Err(format!("torsion list not divisibility-chained: {} ∤ {}", w[0], w[1]));
            }
        }
        Ok(CharacterGroup { rank, torsion })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn torsion(&self) -> &[Int] {
        &self.torsion
    }

    pub fn is_free(&self) -> bool {
        self.torsion.is_empty()
    }

    pub fn zero_elem(&self) -> GroupElem {
        GroupElem {
            free: arith::zeros(self.rank),
            torsion: arith::zeros(self.torsion.len()),
        }
    }

    pub fn elem(&self, free: Vec<Int>, torsion: Vec<Int>) -> Result<GroupElem, String> {
        if free.len() != self.rank || torsion.len() != self.torsion.len() {
            return Err("element shape does not match group".into());
        }
        let mut e = GroupElem { free, torsion };
        self.reduce(&mut e);
        Ok(e)
    }

    pub fn elem_free(&self, free: Vec<Int>) -> GroupElem {
        assert!(self.torsion.is_empty(), "group has torsion; residues required");
        assert_eq!(free.len(), self.rank);
        GroupElem { free, torsion: Vec::new() }
    }

    fn reduce(&self, e: &mut GroupElem) {
        for (x, d) in e.torsion.iter_mut().zip(self.torsion.iter()) {
            *x = x.mod_floor(d);
        }
    }

    pub fn add(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        let mut e = GroupElem {
            free: arith::add_vec(&a.free, &b.free),
            torsion: arith::add_vec(&a.torsion, &b.torsion),
        };
        self.reduce(&mut e);
        e
    }

    pub fn neg(&self, a: &GroupElem) -> GroupElem {
        let mut e = GroupElem {
            free: arith::neg_vec(&a.free),
            torsion: arith::neg_vec(&a.torsion),
        };
        self.reduce(&mut e);
        e
    }

    pub fn sub(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        self.add(a, &self.neg(b))
    }

    pub fn scale(&self, c: &Int, a: &GroupElem) -> GroupElem {
        let mut e = GroupElem {
            free: arith::scale_vec(c, &a.free),
            torsion: arith::scale_vec(c, &a.torsion),
        };
        self.reduce(&mut e);
        e
    }

    /// The subgroup of `self` generated by `gens`, re-coordinatized by its own
    /// Smith invariants. Returns the new group together with the images of
    /// the generators in the new coordinates.
    ///
    /// This is how embedded algebras acquire a character group that the
    /// generators actually generate.
    pub fn subgroup_generated(&self, gens: &[GroupElem]) -> (CharacterGroup, Vec<GroupElem>) {
        let k = gens.len();
        let s = self.torsion.len();
        // relations among the generators: a ∈ Z^k with Σ a_i g_i = 0 in the
        // ambient group, i.e. Σ a_i free_i = 0 and Σ a_i tors_i ≡ 0 mod d.
        // Kernel of the (rank + s) x (k + s) block matrix [G | 0; T | D]
        // projected to the first k coordinates.
        let mut rows: Vec<Vec<Int>> = Vec::new();
        for r in 0..self.rank {
            let mut row: Vec<Int> = gens.iter().map(|g| g.free[r].clone()).collect();
            row.extend(arith::zeros(s));
            rows.push(row);
        }
        for t in 0..s {
            let mut row: Vec<Int> = gens.iter().map(|g| g.torsion[t].clone()).collect();
            row.extend((0..s).map(|j| if j == t { self.torsion[t].clone() } else { Int::zero() }));
            rows.push(row);
        }
        let m = IntMat::from_rows(rows);
        let kern = arith::kernel_basis(&m);
        let rel_cols: Vec<Vec<Int>> = kern.iter().map(|v| v[..k].to_vec()).collect();
        // subgroup ≅ Z^k / span(rel_cols)
        let rel = if rel_cols.is_empty() {
            IntMat::zero(k, 0)
        } else {
            let mut mm = IntMat::zero(k, rel_cols.len());
            for (c, col) in rel_cols.iter().enumerate() {
                for r in 0..k {
                    mm[(r, c)] = col[r].clone();
                }
            }
            mm
        };
        quotient_presentation(&rel)
    }

    /// Quotient of this group by the subgroup generated by `gens`, with the
    /// projection expressed on standard basis elements. Torsion groups only
    /// arise with free `self`; that is the only case needed by cones.
    pub fn quotient_by(&self, gens: &[GroupElem]) -> (CharacterGroup, Vec<GroupElem>) {
        assert!(self.is_free(), "quotient_by implemented for free groups");
        let n = self.rank;
        let mut m = IntMat::zero(n, gens.len());
        for (c, g) in gens.iter().enumerate() {
            for r in 0..n {
                m[(r, c)] = g.free[r].clone();
            }
        }
        quotient_presentation(&m)
    }
}

/// Z^n modulo the column span of `rel`: Smith normal form gives the invariant
/// factors and the images of the standard basis vectors.
fn quotient_presentation(rel: &IntMat) -> (CharacterGroup, Vec<GroupElem>) {
    let n = rel.rows;
    let (u, d, _v) = arith::smith_normal_form(rel);
    let rmin = rel.rows.min(rel.cols);
    let mut torsion_idx = Vec::new();
    let mut free_idx = Vec::new();
    for i in 0..n {
        let di = if i < rmin { d[(i, i)].clone() } else { Int::zero() };
        if di.is_zero() {
            free_idx.push(i);
        } else if di > Int::from(1) {
            torsion_idx.push((i, di));
        } // di == 1: coordinate dies
    }
    let group = CharacterGroup {
        rank: free_idx.len(),
        torsion: torsion_idx.iter().map(|(_, d)| d.clone()).collect(),
    };
    let mut images = Vec::with_capacity(n);
    for g in 0..n {
        let z = u.col(g); // u * e_g, i.e. coordinates of e_g in the new basis
        let free: Vec<Int> = free_idx.iter().map(|&i| z[i].clone()).collect();
        let torsion: Vec<Int> = torsion_idx
            .iter()
            .map(|(i, di)| z[*i].mod_floor(di))
            .collect();
        images.push(GroupElem { free, torsion });
    }
    (group, images)
}

/// An element of a character group: integer exponents on the free part plus
/// residues on each torsion factor.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElem {
    pub free: Vec<Int>,
    pub torsion: Vec<Int>,
}

impl GroupElem {
    pub fn is_zero(&self) -> bool {
        arith::is_zero_vec(&self.free) && arith::is_zero_vec(&self.torsion)
    }

    /// Image in the free quotient: the exponent vector seen by all cones.
    pub fn log(&self) -> &[Int] {
        &self.free
    }
}

impl fmt::Debug for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.torsion.is_empty() {
            write!(f, "{:?}", DisplayVec(&self.free))
        } else {
            write!(f, "{:?}+t{:?}", DisplayVec(&self.free), DisplayVec(&self.torsion))
        }
    }
}

struct DisplayVec<'a>(&'a [Int]);
impl fmt::Debug for DisplayVec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", x)?;
        }
        write!(f, ")")
    }
}

/// A homomorphism of character groups given by an integer matrix on the free
/// parts (torsion is handled only where it is provably killed).
pub fn hom_apply(mat: &IntMat, e: &GroupElem) -> Vec<Int> {
    mat.apply(&e.free)
}

pub fn elem_from_i64(v: &[i64]) -> GroupElem {
    GroupElem { free: arith::vec_from_i64(v), torsion: Vec::new() }
}

impl CharacterGroup {
    /// True when |self| admits negative elements, i.e. always except rank 0
    /// torsion-free. Convenience used by validation messages.
    pub fn is_trivial(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for CharacterGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z^{}", self.rank)?;
        for d in &self.torsion {
            write!(f, " x Z/{}", d)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::vec_from_i64;

    #[test]
    fn subgroup_of_index_two() {
        let ambient = CharacterGroup::free(2);
        let gens = vec![
            elem_from_i64(&[2, 0]),
            elem_from_i64(&[1, 1]),
            elem_from_i64(&[0, 2]),
        ];
        let (sub, images) = ambient.subgroup_generated(&gens);
        assert_eq!(sub.rank(), 2);
        assert!(sub.is_free());
        // the images must generate Z^2
        let m = IntMat::from_rows(images.iter().map(|g| g.free.clone()).collect()).transpose();
        let (_, d, _) = arith::smith_normal_form(&m);
        assert_eq!(d[(0, 0)], Int::from(1));
        assert_eq!(d[(1, 1)], Int::from(1));
    }

    #[test]
    fn subgroup_with_torsion_relation() {
        // subgroup of Z x Z/2 generated by (1, 1̄): isomorphic to Z
        let ambient = CharacterGroup::new(1, vec![Int::from(2)]).unwrap();
        let g = ambient.elem(vec_from_i64(&[1]), vec_from_i64(&[1])).unwrap();
        let (sub, images) = ambient.subgroup_generated(&[g]);
        assert_eq!(sub.rank(), 1);
        assert!(sub.is_free());
        assert_eq!(images.len(), 1);
        assert!(!images[0].is_zero());
    }

    #[test]
    fn quotient_with_torsion() {
        // Z^2 / <(2,0)> = Z/2 x Z
        let g = CharacterGroup::free(2);
        let (q, images) = g.quotient_by(&[elem_from_i64(&[2, 0])]);
        assert_eq!(q.rank(), 1);
        assert_eq!(q.torsion().len(), 1);
        assert_eq!(q.torsion()[0], Int::from(2));
        assert!(!images[0].is_zero());
    }

    #[test]
    fn torsion_arithmetic_reduces() {
        let g = CharacterGroup::new(1, vec![Int::from(3)]).unwrap();
        let a = g.elem(vec_from_i64(&[0]), vec_from_i64(&[2])).unwrap();
        let b = g.add(&a, &a);
        assert_eq!(b.torsion, vec_from_i64(&[1]));
        let c = g.add(&b, &a);
        assert!(c.is_zero());
    }
}
