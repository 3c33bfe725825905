//! Finitely generated monoids with zero and their spectra.
//!
//! An `F1Algebra` is a commutative monoid with an absorbing zero, given
//! either by a finite presentation (generators and monomial relations) or as
//! an embedded submonoid of its character group. Everything the geometry
//! needs — primes, localizations, quotients, saturation, completion data,
//! blow-up charts — is derived from the exponent picture.
//!
//! Embedded algebras keep the invariant that their generators generate the
//! character group; constructors re-coordinatize through the generated
//! subgroup to maintain it.

use crate::arith::{self, Int, IntMat};
use crate::cone::{self, Cone, Face};
use crate::error::{Error, Result};
use crate::group::{CharacterGroup, GroupElem};
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub const DEFAULT_DEGREE_BOUND: u32 = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Embedded,
    Presented { relations: Vec<(Vec<u64>, Vec<u64>)> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct F1Algebra {
    characters: CharacterGroup,
    generators: Vec<GroupElem>,
    mode: Mode,
}

impl F1Algebra {
    /// The initial algebra F1 = {0, 1}.
    pub fn f1() -> F1Algebra {
        F1Algebra {
            characters: CharacterGroup::free(0),
            generators: Vec::new(),
            mode: Mode::Embedded,
        }
    }

    /// Free algebra on n variables.
    pub fn free(n: usize) -> F1Algebra {
        let g = CharacterGroup::free(n);
        let gens = (0..n)
            .map(|i| {
                let mut v = arith::zeros(n);
                v[i] = Int::one();
                g.elem_free(v)
            })
            .collect();
        F1Algebra { characters: g, generators: gens, mode: Mode::Embedded }
    }

    /// The F1-field on a character group: every nonzero element invertible.
    pub fn field(group: CharacterGroup) -> F1Algebra {
        let mut gens = Vec::new();
        for i in 0..group.rank() {
            let mut v = arith::zeros(group.rank());
            v[i] = Int::one();
            let e = group.elem(v, arith::zeros(group.torsion().len())).unwrap();
            gens.push(group.neg(&e));
            gens.push(e);
        }
        for t in 0..group.torsion().len() {
            let mut tv = arith::zeros(group.torsion().len());
            tv[t] = Int::one();
            gens.push(group.elem(arith::zeros(group.rank()), tv).unwrap());
        }
        F1Algebra { characters: group, generators: gens, mode: Mode::Embedded }
    }

    /// Embedded algebra on given exponent vectors. The character group is
    /// re-coordinatized to the subgroup the generators actually generate.
    pub fn embedded(ambient: &CharacterGroup, gens: Vec<GroupElem>) -> F1Algebra {
        let (sub, images) = ambient.subgroup_generated(&gens);
        F1Algebra { characters: sub, generators: images, mode: Mode::Embedded }
    }

    /// Embedded algebra whose generators are already known to generate the
    /// group (localizations, Rees charts, saturations).
    pub(crate) fn embedded_unchecked(characters: CharacterGroup, generators: Vec<GroupElem>) -> F1Algebra {
        debug_assert!(generators_generate(&characters, &generators));
        F1Algebra { characters, generators, mode: Mode::Embedded }
    }

    /// Presented algebra: the character group is the cokernel of the lattice
    /// spanned by the relation differences, computed by Smith normal form.
    pub fn from_presentation(n: usize, relations: Vec<(Vec<u64>, Vec<u64>)>) -> Result<F1Algebra> {
        if n == 0 {
            if relations.is_empty() {
                return Ok(F1Algebra::f1());
            }
            return Err(Error::EmptyPresentation);
        }
        for (a, b) in &relations {
            if a.len() != n || b.len() != n {
                return Err(Error::InvariantError(format!(
                    "relation exponent vectors must have length {}",
                    n
                )));
            }
        }
        let diffs: Vec<Vec<Int>> = relations
            .iter()
            .map(|(a, b)| {
                (0..n)
                    .map(|i| Int::from(a[i] as i64) - Int::from(b[i] as i64))
                    .collect()
            })
            .collect();
        let mut rel = IntMat::zero(n, diffs.len());
        for (c, d) in diffs.iter().enumerate() {
            for r in 0..n {
                rel[(r, c)] = d[r].clone();
            }
        }
        let ambient = CharacterGroup::free(n);
        let cols: Vec<GroupElem> = (0..rel.cols).map(|c| ambient.elem_free(rel.col(c))).collect();
        let (quot, images) = ambient.quotient_by(&cols);
        Ok(F1Algebra {
            characters: quot,
            generators: images,
            mode: Mode::Presented { relations },
        })
    }

    pub fn characters(&self) -> &CharacterGroup {
        &self.characters
    }

    pub fn generators(&self) -> &[GroupElem] {
        &self.generators
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn is_embedded(&self) -> bool {
        matches!(self.mode, Mode::Embedded)
    }

    /// Every finitely generated algebra here has enough jets: the rational
    /// span of a finitely generated monoid is polyhedral, hence reflexive,
    /// so Q-jets detect effectivity automatically. Provided for symmetry.
    pub fn has_enough_jets(&self) -> bool {
        true
    }

    /// The polar cone σ_A = { v : v(a) ≤ 0 } in the rational dual of K^×.
    /// Strongly convex because the generators generate the group.
    pub fn polar_cone(&self) -> Cone {
        Cone::from_inequalities(self.characters.clone(), self.generators.clone())
            .expect("generators generate the character group, so the polar is pointed")
    }

    /// Image of the algebra in its groupification: the embedded algebra on
    /// the log images of the generators. Idempotent.
    pub fn underlying_integral(&self) -> F1Algebra {
        F1Algebra {
            characters: self.characters.clone(),
            generators: self.generators.clone(),
            mode: Mode::Embedded,
        }
    }

    /// Cancellativity. Embedded algebras are integral by construction. For
    /// presentations we check, on all monomial pairs up to the degree bound,
    /// that equality in the groupification implies congruence under the
    /// relations. Inconclusive rewriting searches are reported, never
    /// silently resolved.
    pub fn is_integral(&self, degree_bound: u32) -> Result<bool> {
        let Mode::Presented { relations } = &self.mode else {
            return Ok(true);
        };
        if relations.is_empty() {
            return Ok(true);
        }
        let n = self.generators.len();
        let mut classes: BTreeMap<GroupElem, Vec<Vec<u64>>> = BTreeMap::new();
        for v in enumerate_exponents(n, degree_bound as u64) {
            let img = self.exponent_image(&v);
            classes.entry(img).or_default().push(v);
        }
        let mut undecided = false;
        for members in classes.values() {
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    match congruent(relations, &members[i], &members[j], degree_bound) {
                        Congruence::Yes => {}
                        Congruence::No => return Ok(false),
                        Congruence::Capped => undecided = true,
                    }
                }
            }
        }
        if undecided {
            Err(Error::UndecidedWithinBound { bound: degree_bound })
        } else {
            Ok(true)
        }
    }

    /// Image in K^× of a monomial in the original generators.
    pub fn exponent_image(&self, exps: &[u64]) -> GroupElem {
        let mut acc = self.characters.zero_elem();
        for (e, g) in exps.iter().zip(self.generators.iter()) {
            acc = self.characters.add(&acc, &self.characters.scale(&Int::from(*e), g));
        }
        acc
    }

    /// Monoid membership of a group element, decided exactly.
    pub fn monoid_contains(&self, x: &GroupElem) -> bool {
        monoid_membership(&self.characters, &self.generators, x)
    }

    /// Two embedded algebras present the same submonoid of the same group.
    pub fn monoid_equals(&self, other: &F1Algebra) -> bool {
        self.characters == other.characters
            && self.generators.iter().all(|g| other.monoid_contains(g))
            && other.generators.iter().all(|g| self.monoid_contains(g))
    }

    /// Saturation in the groupification: the monoid of all lattice points of
    /// the rational span cone, generated by a Hilbert basis (plus units and
    /// torsion). Returns the normalization and whether the input was already
    /// normal.
    pub fn normalize(&self, dim_bound: usize) -> Result<(F1Algebra, bool)> {
        if !self.is_embedded() {
            return Err(Error::NotIntegral);
        }
        let sigma = Cone::from_inequalities(self.characters.clone(), self.generators.clone())
            .map_err(|_| Error::NotFinitelyGeneratedSaturation)?;
        let sat_gens = sigma.polar_monoid_generators(dim_bound)?;
        let normalized = F1Algebra::embedded_unchecked(self.characters.clone(), sat_gens);
        let was_normal = normalized
            .generators
            .iter()
            .all(|g| self.monoid_contains(g));
        debug_assert!(self.generators.iter().all(|g| normalized.monoid_contains(g)));
        Ok((normalized, was_normal))
    }

    /// The unit group A^× = { a : a and a^{-1} both in the monoid }, as a
    /// character group together with its monoid generators. A generator is a
    /// unit exactly when its inverse passes membership.
    pub fn units(&self) -> (CharacterGroup, Vec<GroupElem>) {
        let unit_gens: Vec<GroupElem> = self
            .generators
            .iter()
            .filter(|g| self.monoid_contains(&self.characters.neg(g)))
            .cloned()
            .collect();
        let (group, _) = self.characters.subgroup_generated(&unit_gens);
        (group, unit_gens)
    }

    /// Localization at a nonzero element: adjoin the inverse. The character
    /// group is unchanged.
    pub fn localize(&self, f: &GroupElem) -> Result<F1Algebra> {
        if !self.monoid_contains(f) {
            return Err(Error::NotElement(format!("{:?}", f)));
        }
        let mut gens = self.generators.clone();
        gens.push(self.characters.neg(f));
        Ok(F1Algebra::embedded_unchecked(self.characters.clone(), gens))
    }

    /// Faces of the polar cone that are cut by an element of the monoid.
    /// The candidate cutter for a face is the sum of the generators that
    /// vanish identically on it, validated against the face.
    pub fn faces_restricted(&self, sigma: &Cone) -> Vec<Face> {
        let mut out = Vec::new();
        for face in sigma.faces() {
            if face.mask == sigma.improper_mask() {
                out.push(face.clone());
                continue;
            }
            let vanishing = self.generators_vanishing_on(sigma, face);
            if vanishing.is_empty() {
                continue;
            }
            let mut cutter = self.characters.zero_elem();
            for &i in &vanishing {
                cutter = self.characters.add(&cutter, &self.generators[i]);
            }
            match sigma.face_cut_by(&cutter) {
                Some(f) if f.mask == face.mask => out.push(face.clone()),
                _ => {}
            }
        }
        out
    }

    fn generators_vanishing_on(&self, sigma: &Cone, face: &Face) -> Vec<usize> {
        let rays: Vec<&Vec<Int>> = cone::mask_indices(face.mask)
            .into_iter()
            .filter(|&i| i < sigma.rays().len())
            .map(|i| &sigma.rays()[i])
            .collect();
        (0..self.generators.len())
            .filter(|&gi| {
                rays.iter().all(|r| arith::dot(&self.generators[gi].free, r).is_zero())
            })
            .collect()
    }

    /// Primes of the algebra: one per face of σ_A cut by a monoid element,
    /// recorded with the generators of the complement submonoid.
    pub fn primes(&self) -> Vec<PrimeRecord> {
        let sigma = self.polar_cone();
        self.faces_restricted(&sigma)
            .into_iter()
            .map(|face| {
                let complement = self.generators_vanishing_on(&sigma, &face);
                PrimeRecord { face, complement_generators: complement }
            })
            .collect()
    }

    /// Quotient by a prime: the algebra on the complement submonoid, with
    /// characters the subgroup it generates. The polar cone of the result is
    /// the linear quotient of σ_A by the prime's face.
    pub fn quotient_by_prime(&self, p: &PrimeRecord) -> F1Algebra {
        let gens: Vec<GroupElem> = p
            .complement_generators
            .iter()
            .map(|&i| self.generators[i].clone())
            .collect();
        F1Algebra::embedded(&self.characters, gens)
    }

    /// Degree-zero localized Rees chart O{T/s}: adjoin t_i / s for every
    /// generator of the ideal. `s` must be one of the ideal's generators.
    pub fn rees_chart(&self, ideal: &MonomialIdeal, s: &GroupElem) -> Result<F1Algebra> {
        if !ideal.generators.contains(s) {
            return Err(Error::SNotInIdeal(format!("{:?}", s)));
        }
        let mut gens = self.generators.clone();
        for t in &ideal.generators {
            gens.push(self.characters.sub(t, s));
        }
        Ok(F1Algebra::embedded_unchecked(self.characters.clone(), gens))
    }

    /// Puncture data of the formal completion along an ideal: the faces of
    /// σ_A on which some ideal generator vanishes identically. Downward
    /// closed by construction; the improper face is never included (its
    /// degeneration is reported by `krull_injective` instead).
    pub fn completion_punctures(&self, ideal: &MonomialIdeal) -> Result<Vec<u128>> {
        if ideal.generators.is_empty() {
            return Err(Error::ZeroIdeal);
        }
        let sigma = self.polar_cone();
        let zero_faces: Vec<u128> = ideal
            .generators
            .iter()
            .filter_map(|t| sigma.face_cut_by(t).map(|f| f.mask))
            .collect();
        let mut out = Vec::new();
        for face in sigma.faces() {
            if face.mask == sigma.improper_mask() {
                continue;
            }
            if zero_faces.iter().any(|&z| face.mask & z == face.mask) {
                out.push(face.mask);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Krull intersection: completion along T is injective unless some
    /// nonzero element of T is identically zero on σ_A. Checking the ideal
    /// generators suffices: log(t + m) vanishes on σ only if both parts do.
    pub fn krull_injective(&self, ideal: &MonomialIdeal) -> bool {
        let sigma = self.polar_cone();
        let full = sigma.improper_mask();
        !ideal
            .generators
            .iter()
            .any(|t| matches!(sigma.face_cut_by(t), Some(f) if f.mask == full))
    }
}

/// A prime ideal, recorded through its face of σ_A.
#[derive(Clone, Debug)]
pub struct PrimeRecord {
    pub face: Face,
    /// Indices of the generators whose log vanishes identically on the face:
    /// they generate the complement submonoid A \ p.
    pub complement_generators: Vec<usize>,
}

/// A monomial ideal T = ∪ (t_i + A\0), given by finitely many nonzero
/// monoid elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialIdeal {
    pub generators: Vec<GroupElem>,
}

impl MonomialIdeal {
    pub fn new(owner: &F1Algebra, generators: Vec<GroupElem>) -> Result<MonomialIdeal> {
        for g in &generators {
            if !owner.monoid_contains(g) {
                return Err(Error::NotElement(format!("{:?}", g)));
            }
        }
        Ok(MonomialIdeal { generators })
    }

    /// Membership f ∈ T: f - t_i lies in the monoid for some generator.
    pub fn contains(&self, owner: &F1Algebra, f: &GroupElem) -> bool {
        self.generators
            .iter()
            .any(|t| owner.monoid_contains(&owner.characters().sub(f, t)))
    }
}

fn generators_generate(group: &CharacterGroup, gens: &[GroupElem]) -> bool {
    let (sub, _) = group.subgroup_generated(gens);
    sub.rank() == group.rank() && sub.torsion() == group.torsion()
}

/// Exact monoid membership: does x lie in the submonoid of `group`
/// generated by `gens`?
///
/// Generators with log in the lineality space of the span cone are units and
/// contribute a subgroup; the rest carry positive weight under a functional
/// strictly positive on the pointed quotient, which bounds the search.
pub fn monoid_membership(group: &CharacterGroup, gens: &[GroupElem], x: &GroupElem) -> bool {
    if x.is_zero() {
        return true;
    }
    if gens.is_empty() {
        return false;
    }
    let rank = group.rank();
    let frees: Vec<Vec<Int>> = gens.iter().map(|g| g.free.clone()).collect();
    let (equations, facets) = cone::dual_description(rank, &frees);
    let in_cone = |v: &[Int]| {
        equations.iter().all(|e| arith::dot(e, v).is_zero())
            && facets.iter().all(|f| !arith::dot(f, v).is_positive())
    };
    if !in_cone(&x.free) {
        return false;
    }
    // strictly positive functional on the pointed quotient
    let mut w = arith::zeros(rank);
    for f in &facets {
        w = arith::sub_vec(&w, f);
    }
    let weight = |v: &[Int]| arith::dot(&w, v);
    let mut unit_gens: Vec<&GroupElem> = Vec::new();
    let mut pointed_gens: Vec<&GroupElem> = Vec::new();
    for g in gens {
        if weight(&g.free).is_zero() {
            unit_gens.push(g);
        } else {
            pointed_gens.push(g);
        }
    }
    // the unit subgroup test: solve Σ c_i u_i = r over Z with torsion moduli
    let unit_solve = |r: &GroupElem| -> bool {
        let s = group.torsion().len();
        let mut rows: Vec<Vec<Int>> = Vec::new();
        for k in 0..rank {
            let mut row: Vec<Int> = unit_gens.iter().map(|g| g.free[k].clone()).collect();
            row.extend(arith::zeros(s));
            rows.push(row);
        }
        for t in 0..s {
            let mut row: Vec<Int> = unit_gens.iter().map(|g| g.torsion[t].clone()).collect();
            row.extend((0..s).map(|j| if j == t { group.torsion()[t].clone() } else { Int::zero() }));
            rows.push(row);
        }
        let m = IntMat::from_rows(rows);
        let mut rhs = r.free.clone();
        rhs.extend(r.torsion.clone());
        arith::solve_integer(&m, &rhs).is_some()
    };
    // depth-first search over exponents of the pointed generators
    fn dfs(
        group: &CharacterGroup,
        pointed: &[&GroupElem],
        idx: usize,
        remaining: GroupElem,
        in_cone: &dyn Fn(&[Int]) -> bool,
        weight: &dyn Fn(&[Int]) -> Int,
        unit_solve: &dyn Fn(&GroupElem) -> bool,
    ) -> bool {
        if weight(&remaining.free).is_zero() {
            // all pointed weight consumed: the rest must be a unit-group element
            return unit_solve(&remaining);
        }
        if idx == pointed.len() {
            return false;
        }
        let g = pointed[idx];
        let mut current = remaining.clone();
        loop {
            if dfs(group, pointed, idx + 1, current.clone(), in_cone, weight, unit_solve) {
                return true;
            }
            let next = group.sub(&current, g);
            if weight(&next.free).is_negative() || !in_cone(&next.free) {
                return false;
            }
            current = next;
        }
    }
    dfs(group, &pointed_gens, 0, x.clone(), &in_cone, &weight, &unit_solve)
}

fn enumerate_exponents(n: usize, bound: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; n];
    fn rec(out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, pos: usize, left: u64) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(out, cur, pos + 1, left - v);
        }
        cur[pos] = 0;
    }
    rec(&mut out, &mut cur, 0, bound);
    out
}

enum Congruence {
    Yes,
    No,
    Capped,
}

/// Bounded congruence closure: explore the rewriting graph from `a`, moves
/// replace an occurrence of one relation side by the other. Returns `No`
/// only when the component was explored completely below the cap.
fn congruent(relations: &[(Vec<u64>, Vec<u64>)], a: &[u64], b: &[u64], degree_bound: u32) -> Congruence {
    if a == b {
        return Congruence::Yes;
    }
    let max_rel: u64 = relations
        .iter()
        .map(|(u, v)| u.iter().sum::<u64>().max(v.iter().sum()))
        .max()
        .unwrap_or(0);
    let cap = degree_bound as u64 + max_rel;
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut queue: VecDeque<Vec<u64>> = VecDeque::new();
    seen.insert(a.to_vec());
    queue.push_back(a.to_vec());
    let mut capped = false;
    while let Some(cur) = queue.pop_front() {
        for (u, v) in relations {
            for (from, to) in [(u, v), (v, u)] {
                if cur.iter().zip(from.iter()).all(|(c, f)| c >= f) {
                    let next: Vec<u64> = cur
                        .iter()
                        .zip(from.iter().zip(to.iter()))
                        .map(|(c, (f, t))| c - f + t)
                        .collect();
                    if next.iter().sum::<u64>() > cap {
                        capped = true;
                        continue;
                    }
                    if next == b {
                        return Congruence::Yes;
                    }
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    if capped {
        Congruence::Capped
    } else {
        Congruence::No
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::vec_from_i64 as v64;
    use crate::cone::DEFAULT_HILBERT_DIM_BOUND;
    use crate::group::elem_from_i64 as e64;

    fn cusp() -> F1Algebra {
        // x^2 = y^3
        F1Algebra::from_presentation(2, vec![(vec![2, 0], vec![0, 3])]).unwrap()
    }

    fn xw_eq_w() -> F1Algebra {
        // x w = w
        F1Algebra::from_presentation(2, vec![(vec![1, 1], vec![0, 1])]).unwrap()
    }

    #[test]
    fn presentation_free_case() {
        let a = F1Algebra::from_presentation(1, vec![]).unwrap();
        assert_eq!(a.characters().rank(), 1);
        assert_eq!(a.generators().len(), 1);
        assert!(!a.generators()[0].is_zero());
    }

    #[test]
    fn presentation_xw_kills_x() {
        let a = xw_eq_w();
        assert_eq!(a.characters().rank(), 1);
        assert!(a.generators()[0].is_zero()); // x ↦ 0
        assert!(!a.generators()[1].is_zero()); // w ↦ ±1
    }

    #[test]
    fn presentation_cusp_maps_to_3_and_2() {
        let a = cusp();
        assert_eq!(a.characters().rank(), 1);
        let gx = a.generators()[0].free[0].clone().abs();
        let gy = a.generators()[1].free[0].clone().abs();
        assert_eq!((gx.clone(), gy.clone()), (Int::from(3), Int::from(2)));
        // both map to the same side of Z
        assert_eq!(
            a.generators()[0].free[0].is_negative(),
            a.generators()[1].free[0].is_negative()
        );
    }

    #[test]
    fn presentation_torsion() {
        // x^2 = 1: character group Z/2
        let a = F1Algebra::from_presentation(1, vec![(vec![2], vec![0])]).unwrap();
        assert_eq!(a.characters().rank(), 0);
        assert_eq!(a.characters().torsion(), &[Int::from(2)]);
    }

    #[test]
    fn empty_presentation_rules() {
        assert!(F1Algebra::from_presentation(0, vec![]).is_ok());
        assert!(matches!(
            F1Algebra::from_presentation(0, vec![(vec![], vec![])]),
            Err(Error::EmptyPresentation)
        ));
    }

    #[test]
    fn underlying_integral_idempotent() {
        let a = xw_eq_w();
        let i = a.underlying_integral();
        assert!(i.is_embedded());
        assert_eq!(i.underlying_integral(), i);
        assert!(i.is_integral(DEFAULT_DEGREE_BOUND).unwrap());
        // cusp: embedded submonoid {0, 2, 3, ...} of Z
        let c = cusp().underlying_integral();
        let one = c.characters().elem_free(v64(&[1]));
        let s = c.generators()[1].free[0].is_negative();
        let sign = |k: i64| if s { c.characters().elem_free(v64(&[-k])) } else { c.characters().elem_free(v64(&[k])) };
        assert!(!c.monoid_contains(&sign(1)));
        assert!(c.monoid_contains(&sign(2)));
        assert!(c.monoid_contains(&sign(5)));
        let _ = one;
    }

    #[test]
    fn is_integral_verdicts() {
        assert!(F1Algebra::free(2).is_integral(DEFAULT_DEGREE_BOUND).unwrap());
        assert!(!xw_eq_w().is_integral(DEFAULT_DEGREE_BOUND).unwrap());
        assert!(cusp().is_integral(DEFAULT_DEGREE_BOUND).unwrap());
    }

    #[test]
    fn membership_in_cusp_monoid() {
        let g = CharacterGroup::free(1);
        let a = F1Algebra::embedded(&g, vec![e64(&[2]), e64(&[3])]);
        assert!(a.monoid_contains(&e64(&[5])));
        assert!(a.monoid_contains(&e64(&[0])));
        assert!(!a.monoid_contains(&e64(&[1])));
        assert!(!a.monoid_contains(&e64(&[-2])));
    }

    #[test]
    fn membership_with_units() {
        let g = CharacterGroup::free(2);
        // x invertible, y not
        let a = F1Algebra::embedded(&g, vec![e64(&[1, 0]), e64(&[-1, 0]), e64(&[0, 1])]);
        assert!(a.monoid_contains(&e64(&[-5, 2])));
        assert!(!a.monoid_contains(&e64(&[3, -1])));
    }

    #[test]
    fn normalize_cusp_to_line() {
        let g = CharacterGroup::free(1);
        let a = F1Algebra::embedded(&g, vec![e64(&[2]), e64(&[3])]);
        let (n, was_normal) = a.normalize(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert!(!was_normal);
        assert!(n.monoid_contains(&e64(&[1])));
        assert!(n.monoid_equals(&F1Algebra::free(1)));
        // idempotent
        let (n2, again) = n.normalize(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert!(again);
        assert!(n2.monoid_equals(&n));
    }

    #[test]
    fn normalize_free_is_normal() {
        let (n, was_normal) = F1Algebra::free(2).normalize(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert!(was_normal);
        assert!(n.monoid_equals(&F1Algebra::free(2)));
    }

    #[test]
    fn normalize_even_quadrant_monoid() {
        // ⟨(2,0),(1,1),(0,2)⟩ in the group it generates: already normal
        let g = CharacterGroup::free(2);
        let a = F1Algebra::embedded(&g, vec![e64(&[2, 0]), e64(&[1, 1]), e64(&[0, 2])]);
        let (n, was_normal) = a.normalize(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert!(was_normal);
        assert!(n.monoid_equals(&a));
    }

    #[test]
    fn units_of_field_and_line() {
        let (u, gens) = F1Algebra::free(1).units();
        assert_eq!(u.rank(), 0);
        assert!(gens.is_empty());
        let k = F1Algebra::field(CharacterGroup::free(1));
        let (u2, _) = k.units();
        assert_eq!(u2.rank(), 1);
        // F1[x,w]/(xw=w): x maps to a unit of the groupification, but the
        // underlying integral monoid N has trivial units
        let integral = xw_eq_w().underlying_integral();
        let (u3, gens3) = integral.units();
        assert_eq!(u3.rank(), 0);
        assert_eq!(gens3.len(), 1); // the image of x, which is 0 = the unit 1
        assert!(gens3[0].is_zero());
    }

    #[test]
    fn localize_line_at_t() {
        let a = F1Algebra::free(1);
        let l = a.localize(&e64(&[1])).unwrap();
        assert!(l.monoid_equals(&F1Algebra::field(CharacterGroup::free(1))));
        assert_eq!(l.characters(), a.characters());
        // localization drops the polar cone to a face
        assert!(l.polar_cone().is_zero_cone());
    }

    #[test]
    fn localize_plane_at_xy_gives_field() {
        let a = F1Algebra::free(2);
        let l = a.localize(&e64(&[1, 1])).unwrap();
        assert!(l.polar_cone().is_zero_cone());
        assert!(l.monoid_contains(&e64(&[-1, -1])));
        // localize(localize(A, f), g) = localize(A, f g)
        let l2 = a.localize(&e64(&[1, 0])).unwrap().localize(&e64(&[0, 1])).unwrap();
        assert!(l2.monoid_equals(&l.localize(&e64(&[1, 0])).unwrap()));
    }

    #[test]
    fn localize_rejects_non_elements() {
        let a = F1Algebra::free(2);
        assert!(matches!(a.localize(&e64(&[-1, 0])), Err(Error::NotElement(_))));
    }

    #[test]
    fn primes_counts() {
        assert_eq!(F1Algebra::free(1).primes().len(), 2);
        assert_eq!(F1Algebra::free(2).primes().len(), 4);
        assert_eq!(F1Algebra::field(CharacterGroup::free(1)).primes().len(), 1);
    }

    #[test]
    fn primes_anti_isomorphic_to_faces() {
        let a = F1Algebra::free(2);
        let ps = a.primes();
        for p in &ps {
            for q in &ps {
                let face_le = p.face.mask & q.face.mask == p.face.mask;
                if face_le {
                    // smaller face ⟹ larger vanishing set ⟹ larger complement
                    assert!(q
                        .complement_generators
                        .iter()
                        .all(|i| p.complement_generators.contains(i)));
                }
            }
        }
    }

    #[test]
    fn quotient_by_prime_cases() {
        let a = F1Algebra::free(2);
        let ps = a.primes();
        // face {v1 = 0} is the ray spanned by (0,-1): complement = powers of x
        let ray_prime = ps
            .iter()
            .find(|p| p.face.dim == 1 && p.complement_generators == vec![0])
            .expect("prime of the x-axis face");
        let q = a.quotient_by_prime(ray_prime);
        assert!(q.monoid_equals(&F1Algebra::free(1)));
        // the maximal ideal: complement = units only, face = σ itself
        let max_prime = ps.iter().find(|p| p.complement_generators.is_empty()).unwrap();
        assert_eq!(max_prime.face.dim, 2);
        let k = a.quotient_by_prime(max_prime);
        assert_eq!(k.characters().rank(), 0);
        // the zero prime: complement = all of A, face = {0}
        let zero_prime = ps.iter().find(|p| p.face.dim == 0).unwrap();
        assert_eq!(zero_prime.complement_generators.len(), 2);
        let back = a.quotient_by_prime(zero_prime);
        assert!(back.monoid_equals(&a));
    }

    #[test]
    fn ideal_membership_examples() {
        let a = F1Algebra::free(2);
        let t = MonomialIdeal::new(&a, vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap();
        assert!(t.contains(&a, &e64(&[1, 1])));
        let t2 = MonomialIdeal::new(&a, vec![e64(&[2, 0])]).unwrap();
        assert!(!t2.contains(&a, &e64(&[1, 0])));
        let line = F1Algebra::free(1);
        let t3 = MonomialIdeal::new(&line, vec![e64(&[2]), e64(&[3])]).unwrap();
        assert!(t3.contains(&line, &e64(&[5])));
        assert!(!t3.contains(&line, &e64(&[1])));
    }

    #[test]
    fn rees_chart_examples() {
        let a = F1Algebra::free(2);
        let t = MonomialIdeal::new(&a, vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap();
        let chart = a.rees_chart(&t, &e64(&[1, 0])).unwrap();
        let expected = F1Algebra::embedded_unchecked(
            CharacterGroup::free(2),
            vec![e64(&[1, 0]), e64(&[-1, 1])],
        );
        assert!(chart.monoid_equals(&expected));
        // principal ideal: chart is A itself
        let principal = MonomialIdeal::new(&a, vec![e64(&[1, 0])]).unwrap();
        let same = a.rees_chart(&principal, &e64(&[1, 0])).unwrap();
        assert!(same.monoid_equals(&a));
        // T = (x, y^2), s = y^2
        let t3 = MonomialIdeal::new(&a, vec![e64(&[1, 0]), e64(&[0, 2])]).unwrap();
        let chart3 = a.rees_chart(&t3, &e64(&[0, 2])).unwrap();
        let expected3 = F1Algebra::embedded_unchecked(
            CharacterGroup::free(2),
            vec![e64(&[0, 1]), e64(&[1, -2])],
        );
        assert!(chart3.monoid_equals(&expected3));
        assert!(matches!(
            a.rees_chart(&t, &e64(&[1, 1])),
            Err(Error::SNotInIdeal(_))
        ));
    }

    #[test]
    fn completion_punctures_examples() {
        let a = F1Algebra::free(2);
        let sigma = a.polar_cone();
        // along (x, y): all three proper faces
        let t = MonomialIdeal::new(&a, vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap();
        let z = a.completion_punctures(&t).unwrap();
        assert_eq!(z.len(), 3);
        // along (x): origin and the ray v1 = 0
        let tx = MonomialIdeal::new(&a, vec![e64(&[1, 0])]).unwrap();
        let zx = a.completion_punctures(&tx).unwrap();
        assert_eq!(zx.len(), 2);
        let ray_face = sigma.face_cut_by(&e64(&[1, 0])).unwrap();
        assert!(zx.contains(&ray_face.mask));
        assert!(zx.contains(&0));
        // the formal disc
        let line = F1Algebra::free(1);
        let tt = MonomialIdeal::new(&line, vec![e64(&[1])]).unwrap();
        assert_eq!(line.completion_punctures(&tt).unwrap(), vec![0]);
    }

    #[test]
    fn krull_injectivity() {
        let a = F1Algebra::free(2);
        let tx = MonomialIdeal::new(&a, vec![e64(&[1, 0])]).unwrap();
        assert!(a.krull_injective(&tx));
        // F1[x,w]/(xw=w) along (x): x groupifies to a unit, log x ≡ 0
        let b = xw_eq_w();
        let x_img = b.generators()[0].clone();
        let ideal = MonomialIdeal { generators: vec![x_img] };
        assert!(!b.krull_injective(&ideal));
    }
}
