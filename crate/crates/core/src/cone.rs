//! Exact rational polyhedral cone kernel.
//!
//! Cones live in the rational dual N(Q) of a character group; the free part
//! of an exponent vector f acts on N(Q) as the linear functional `log f`.
//! Sign convention, fixed once for the whole crate: a cone collects the
//! valuations that are NONPOSITIVE on the monoid,
//!
//! ```text
//! σ_A = { v : v(a) ≤ 0 for all a ∈ A \ 0 }
//! ```
//!
//! so the "effective" quadrant is the nonpositive one. Most toric software
//! uses the opposite sign; conversions happen at the boundary of this crate,
//! nowhere inside.
//!
//! All descriptions are exact: primitive integer rays in a deterministic
//! (lexicographic) order, irredundant facet normals, and explicit span
//! equations for lower-dimensional cones. Rays and inequalities are mutually
//! dual; `polar` applied twice reproduces the cone on the nose.

use crate::arith::{self, Int, IntMat, Rat};
use crate::error::{Error, Result};
use crate::group::{CharacterGroup, GroupElem};
use num_traits::{Signed, Zero};

pub const DEFAULT_HILBERT_DIM_BOUND: usize = 4;

/// Extreme rays of { x : a·x ≤ 0 } for a pointed cone (rank of `ineqs` = dim).
fn pointed_extreme_rays(dim: usize, ineqs: &[Vec<Int>]) -> Vec<Vec<Int>> {
    if dim == 0 {
        return Vec::new();
    }
    // initial simplicial basis: dim independent inequalities
    let mut basis_idx: Vec<usize> = Vec::new();
    {
        let mut picked: Vec<Vec<Int>> = Vec::new();
        for (i, a) in ineqs.iter().enumerate() {
            let mut rows = picked.clone();
            rows.push(a.clone());
            if IntMat::from_rows(rows).rank() > picked.len() {
                picked.push(a.clone());
                basis_idx.push(i);
                if picked.len() == dim {
                    break;
                }
            }
        }
        assert_eq!(basis_idx.len(), dim, "pointed_extreme_rays needs full rank");
    }
    let b = IntMat::from_rows(basis_idx.iter().map(|&i| ineqs[i].clone()).collect());
    // rays of {Bx ≤ 0}: scaled columns of -B^{-1}
    let det = arith::determinant(&b).abs();
    let mut rays: Vec<Vec<Int>> = Vec::new();
    for j in 0..dim {
        // solve B x = -|det| * e_j over the integers (always solvable)
        let mut rhs = arith::zeros(dim);
        rhs[j] = -det.clone();
        let x = arith::solve_integer(&b, &rhs).expect("simplicial solve");
        rays.push(arith::primitive(&x));
    }
    // incremental insertion of the remaining inequalities
    let mut processed: Vec<usize> = basis_idx.clone();
    let tight_set = |r: &[Int], processed: &[usize]| -> Vec<usize> {
        processed
            .iter()
            .copied()
            .filter(|&i| arith::dot(&ineqs[i], r).is_zero())
            .collect()
    };
    for (i, a) in ineqs.iter().enumerate() {
        if basis_idx.contains(&i) {
            continue;
        }
        let vals: Vec<Int> = rays.iter().map(|r| arith::dot(a, r)).collect();
        let keep: Vec<usize> = (0..rays.len()).filter(|&k| !vals[k].is_positive()).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].is_negative()).collect();
        let mut new_rays: Vec<Vec<Int>> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                // adjacency: common tight constraints have rank dim - 2
                let tp = tight_set(&rays[p], &processed);
                let tn = tight_set(&rays[n], &processed);
                let common: Vec<usize> = tp.iter().copied().filter(|x| tn.contains(x)).collect();
                if dim >= 2 {
                    let m = IntMat::from_rows(common.iter().map(|&c| ineqs[c].clone()).collect());
                    let rk = if common.is_empty() { 0 } else { m.rank() };
                    if rk != dim - 2 {
                        continue;
                    }
                }
                let w = arith::comb_vec(&vals[p], &rays[n], &-vals[n].clone(), &rays[p]);
                let w = arith::primitive(&w);
                if !arith::is_zero_vec(&w) {
                    new_rays.push(w);
                }
            }
        }
        let mut next: Vec<Vec<Int>> = keep.into_iter().map(|k| rays[k].clone()).collect();
        for w in new_rays {
            if !next.contains(&w) {
                next.push(w);
            }
        }
        rays = next;
        processed.push(i);
    }
    rays.sort();
    rays.dedup();
    rays
}

/// Extreme rays allowing lineality: returns (basis of the lineality space,
/// extreme rays of the pointed quotient, lifted back). Both saturated and
/// primitive.
pub(crate) fn extreme_rays_with_lineality(
    dim: usize,
    ineqs: &[Vec<Int>],
) -> (Vec<Vec<Int>>, Vec<Vec<Int>>) {
    if dim == 0 {
        return (Vec::new(), Vec::new());
    }
    let m = IntMat::from_rows(ineqs.to_vec());
    let lineality = if ineqs.is_empty() {
        (0..dim)
            .map(|i| {
                let mut e = arith::zeros(dim);
                e[i] = Int::from(1);
                e
            })
            .collect::<Vec<_>>()
    } else {
        arith::kernel_basis(&m)
    };
    if lineality.is_empty() {
        return (Vec::new(), pointed_extreme_rays(dim, ineqs));
    }
    let l = lineality.len();
    if l == dim {
        return (lineality, Vec::new());
    }
    // coordinates: y = U x puts the lineality lattice on the first l axes
    let lmat = IntMat::from_rows(lineality.clone()).transpose();
    let (u, _d, _v) = arith::smith_normal_form(&lmat);
    let uinv = arith::unimodular_inverse(&u).expect("snf transform unimodular");
    let proj = |x: &[Int]| -> Vec<Int> { u.apply(x)[l..].to_vec() };
    let lift = |y: &[Int]| -> Vec<Int> {
        let mut full = arith::zeros(dim);
        full[l..].clone_from_slice(y);
        uinv.apply(&full)
    };
    // inequalities vanish on the lineality space, so they descend through the
    // section x = U^{-1} (0, y)
    let proj_ineqs: Vec<Vec<Int>> = ineqs
        .iter()
        .map(|a| {
            let arow = IntMat::from_rows(vec![a.clone()]);
            let au = arow.mul(&uinv);
            au.row(0)[l..].to_vec()
        })
        .collect();
    let quotient_rays = pointed_extreme_rays(dim - l, &proj_ineqs);
    let mut rays: Vec<Vec<Int>> = quotient_rays.iter().map(|y| arith::primitive(&lift(y))).collect();
    rays.sort();
    rays.dedup();
    let _ = proj;
    (lineality, rays)
}

/// H-description of the cone generated by `rays`: (span equations, facets).
/// Equations vanish on the cone; facets are nonpositive on it, irredundant.
pub(crate) fn dual_description(dim: usize, rays: &[Vec<Int>]) -> (Vec<Vec<Int>>, Vec<Vec<Int>>) {
    let (lin, facet_normals) = extreme_rays_with_lineality(dim, rays);
    let equations: Vec<Vec<Int>> = lin.iter().map(|e| arith::primitive_signed(e)).collect();
    let mut facets: Vec<Vec<Int>> = facet_normals.iter().map(|f| arith::primitive(f)).collect();
    facets.sort();
    facets.dedup();
    let mut eqs = equations;
    eqs.sort();
    eqs.dedup();
    (eqs, facets)
}

/// A face of a cone, identified by the set of extreme rays it contains.
/// The cutter is the canonical nonpositive functional vanishing exactly on
/// the face: the sum of all facet normals tight on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub mask: u128,
    pub dim: usize,
    pub cutter: Vec<Int>,
}

impl Face {
    pub fn cutter_elem(&self, group: &CharacterGroup) -> GroupElem {
        group.elem_free(self.cutter.clone())
    }
}

/// A strongly convex rational polyhedral cone in N(Q), with cached dual data.
#[derive(Clone)]
pub struct Cone {
    group: CharacterGroup,
    inequalities: Vec<GroupElem>,
    equations: Vec<Vec<Int>>,
    facets: Vec<Vec<Int>>,
    rays: Vec<Vec<Int>>,
    faces: Vec<Face>,
    dim: usize,
}

impl PartialEq for Cone {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group && self.rays == other.rays
    }
}
impl Eq for Cone {}

impl std::fmt::Debug for Cone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cone(dim {} rays {:?})", self.dim, self.rays)
    }
}

impl Cone {
    /// Build from inequalities v(f) ≤ 0. Errors with `NotPointed` when the
    /// inequalities leave a lineality space.
    pub fn from_inequalities(group: CharacterGroup, inequalities: Vec<GroupElem>) -> Result<Cone> {
        let dim = group.rank();
        let free: Vec<Vec<Int>> = inequalities.iter().map(|e| e.free.clone()).collect();
        let (lin, rays) = extreme_rays_with_lineality(dim, &free);
        if !lin.is_empty() {
            return Err(Error::NotPointed);
        }
        Ok(Self::assemble(group, inequalities, rays))
    }

    pub(crate) fn from_free_inequalities(group: CharacterGroup, ineqs: Vec<Vec<Int>>) -> Result<Cone> {
        let elems: Vec<GroupElem> = ineqs
            .into_iter()
            .map(|f| GroupElem { free: f, torsion: arith::zeros(group.torsion().len()) })
            .collect();
        Cone::from_inequalities(group, elems)
    }

    /// Cone generated by integer rays (must be pointed).
    pub fn from_rays(group: CharacterGroup, rays: Vec<Vec<Int>>) -> Result<Cone> {
        let dim = group.rank();
        let mut prim: Vec<Vec<Int>> = rays
            .iter()
            .filter(|r| !arith::is_zero_vec(r))
            .map(|r| arith::primitive(r))
            .collect();
        prim.sort();
        prim.dedup();
        let (eqs, facets) = dual_description(dim, &prim);
        // pointedness: rays of the regenerated cone
        let mut all_ineqs: Vec<Vec<Int>> = facets.clone();
        for e in &eqs {
            all_ineqs.push(e.clone());
            all_ineqs.push(arith::neg_vec(e));
        }
        let (lin, regen) = extreme_rays_with_lineality(dim, &all_ineqs);
        if !lin.is_empty() {
            return Err(Error::NotPointed);
        }
        let inequalities: Vec<GroupElem> = all_ineqs
            .iter()
            .map(|f| GroupElem { free: f.clone(), torsion: arith::zeros(group.torsion().len()) })
            .collect();
        Ok(Self::assemble(group, inequalities, regen))
    }

    fn assemble(group: CharacterGroup, inequalities: Vec<GroupElem>, mut rays: Vec<Vec<Int>>) -> Cone {
        rays.sort();
        rays.dedup();
        let dim_space = group.rank();
        let (equations, facets) = dual_description(dim_space, &rays);
        let dim = if rays.is_empty() {
            0
        } else {
            IntMat::from_rows(rays.clone()).rank()
        };
        let faces = enumerate_faces(&rays, &facets);
        Cone { group, inequalities, equations, facets, rays, faces, dim }
    }

    pub fn group(&self) -> &CharacterGroup {
        &self.group
    }

    pub fn inequalities(&self) -> &[GroupElem] {
        &self.inequalities
    }

    /// Minimal V-description: primitive integer rays, lexicographic order.
    pub fn rays(&self) -> &[Vec<Int>] {
        &self.rays
    }

    pub fn facets(&self) -> &[Vec<Int>] {
        &self.facets
    }

    pub fn equations(&self) -> &[Vec<Int>] {
        &self.equations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero_cone(&self) -> bool {
        self.rays.is_empty()
    }

    /// All faces (including the improper one), ordered by (dim, ray mask).
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn improper_mask(&self) -> u128 {
        full_mask(self.rays.len())
    }

    pub fn face_by_mask(&self, mask: u128) -> Option<&Face> {
        self.faces.iter().find(|f| f.mask == mask)
    }

    pub fn proper_faces(&self) -> impl Iterator<Item = &Face> {
        let full = self.improper_mask();
        self.faces.iter().filter(move |f| f.mask != full)
    }

    /// The face cut out by an element: {v ∈ σ : v(f) = 0}, provided f is
    /// nonpositive on σ. None when f takes a positive value on some ray.
    pub fn face_cut_by(&self, f: &GroupElem) -> Option<&Face> {
        let mut mask: u128 = 0;
        for (i, r) in self.rays.iter().enumerate() {
            let v = arith::dot(&f.free, r);
            if v.is_positive() {
                return None;
            }
            if v.is_zero() {
                mask |= 1 << i;
            }
        }
        self.face_by_mask(mask)
    }

    pub fn contains_int(&self, v: &[Int]) -> bool {
        self.equations.iter().all(|e| arith::dot(e, v).is_zero())
            && self.facets.iter().all(|f| !arith::dot(f, v).is_positive())
    }

    pub fn contains_rat(&self, v: &[Rat]) -> bool {
        self.equations.iter().all(|e| arith::dot_rat(e, v).is_zero())
            && self.facets.iter().all(|f| !arith::dot_rat(f, v).is_positive())
    }

    /// Ray mask of the minimal face containing v, when v lies in the cone.
    pub fn min_face_int(&self, v: &[Int]) -> Option<u128> {
        if !self.contains_int(v) {
            return None;
        }
        let tight: Vec<usize> = (0..self.facets.len())
            .filter(|&i| arith::dot(&self.facets[i], v).is_zero())
            .collect();
        Some(self.mask_of_tight_facets(&tight))
    }

    pub fn min_face_rat(&self, v: &[Rat]) -> Option<u128> {
        if !self.contains_rat(v) {
            return None;
        }
        let tight: Vec<usize> = (0..self.facets.len())
            .filter(|&i| arith::dot_rat(&self.facets[i], v).is_zero())
            .collect();
        Some(self.mask_of_tight_facets(&tight))
    }

    fn mask_of_tight_facets(&self, tight: &[usize]) -> u128 {
        let mut mask = self.improper_mask();
        for &t in tight {
            let fm = facet_ray_mask(&self.rays, &self.facets[t]);
            mask &= fm;
        }
        mask
    }

    /// Intersection inside a common N(Q).
    pub fn intersect(&self, other: &Cone) -> Result<Cone> {
        if self.group != other.group {
            return Err(Error::CharacterMismatch(
                self.group.to_string(),
                other.group.to_string(),
            ));
        }
        let mut ineqs = self.inequalities.clone();
        ineqs.extend(other.inequalities.iter().cloned());
        Cone::from_inequalities(self.group.clone(), ineqs)
    }

    /// Full-dimensional domains of linearity of max_i v(f_i) (with the
    /// constant 0 prepended when `include_zero`), intersected with the cone.
    /// The pieces cover the cone and have pairwise disjoint interiors.
    pub fn refine_by_function(&self, fs: &[GroupElem], include_zero: bool) -> Vec<Cone> {
        assert!(!fs.is_empty(), "refine_by_function needs at least one function");
        let mut cands: Vec<Vec<Int>> = Vec::new();
        if include_zero {
            cands.push(arith::zeros(self.group.rank()));
        }
        cands.extend(fs.iter().map(|f| f.free.clone()));
        let mut pieces: Vec<Cone> = Vec::new();
        for i in 0..cands.len() {
            let mut ineqs: Vec<Vec<Int>> = self.facets.clone();
            for e in &self.equations {
                ineqs.push(e.clone());
                ineqs.push(arith::neg_vec(e));
            }
            for j in 0..cands.len() {
                if i != j {
                    ineqs.push(arith::sub_vec(&cands[j], &cands[i]));
                }
            }
            let piece = Cone::from_free_inequalities(self.group.clone(), ineqs)
                .expect("piece of a pointed cone is pointed");
            if piece.dim == self.dim && !pieces.contains(&piece) {
                pieces.push(piece);
            }
        }
        pieces
    }

    /// Lattice quotient by the saturated span of a face. Returns the
    /// projection matrix N -> N/⟨face⟩ and the image cone.
    pub fn quotient_by_face(&self, face: &Face) -> (IntMat, Cone) {
        let dim = self.group.rank();
        let face_rays: Vec<Vec<Int>> = mask_indices(face.mask)
            .into_iter()
            .filter(|&i| i < self.rays.len())
            .map(|i| self.rays[i].clone())
            .collect();
        if face_rays.is_empty() {
            return (IntMat::identity(dim), self.clone());
        }
        let m = IntMat::from_rows(face_rays.clone()).transpose();
        let (u, d, _v) = arith::smith_normal_form(&m);
        let rmin = m.rows.min(m.cols);
        let l = (0..rmin).filter(|&i| !d[(i, i)].is_zero()).count();
        // projection = last dim - l rows of u
        let mut proj = IntMat::zero(dim - l, dim);
        for r in l..dim {
            for c in 0..dim {
                proj[(r - l, c)] = u[(r, c)].clone();
            }
        }
        let imaged: Vec<Vec<Int>> = self.rays.iter().map(|r| proj.apply(r)).collect();
        let image = Cone::from_rays(CharacterGroup::free(dim - l), imaged)
            .expect("quotient of a cone by a face is pointed");
        (proj, image)
    }

    /// Generators of the polar monoid σ° ∩ K^×: a Hilbert basis for the
    /// pointed part, unit generators for the lineality directions, and the
    /// torsion generators of the group (always units).
    pub fn polar_monoid_generators(&self, dim_bound: usize) -> Result<Vec<GroupElem>> {
        if self.dim > dim_bound {
            return Err(Error::DimensionBound { dim: self.dim, bound: dim_bound });
        }
        let rank = self.group.rank();
        // dual cone D = {f : ⟨f, r⟩ ≤ 0 ∀ rays}; lineality = σ^⊥
        let (lin, _) = extreme_rays_with_lineality(rank, &self.rays);
        let mut gens: Vec<GroupElem> = Vec::new();
        let tz = self.group.torsion().len();
        let as_elem = |free: Vec<Int>| GroupElem { free, torsion: arith::zeros(tz) };
        for e in &lin {
            gens.push(as_elem(e.clone()));
            gens.push(as_elem(arith::neg_vec(e)));
        }
        for (t, _) in self.group.torsion().iter().enumerate() {
            let mut tv = arith::zeros(tz);
            tv[t] = Int::from(1);
            gens.push(GroupElem { free: arith::zeros(rank), torsion: tv });
        }
        if self.dim > 0 {
            let hb = hilbert_basis_dual_pointed(rank, &self.rays, &lin)?;
            gens.extend(hb.into_iter().map(as_elem));
        }
        Ok(gens)
    }

    /// Spec-facing name: the minimal generating set of the polar monoid.
    pub fn hilbert_basis(&self, dim_bound: usize) -> Result<Vec<GroupElem>> {
        self.polar_monoid_generators(dim_bound)
    }
}

fn full_mask(n: usize) -> u128 {
    if n >= 128 {
        panic!("too many rays");
    }
    if n == 0 {
        0
    } else {
        (1u128 << n) - 1
    }
}

pub(crate) fn mask_indices(mask: u128) -> Vec<usize> {
    (0..128).filter(|i| mask & (1 << i) != 0).collect()
}

fn facet_ray_mask(rays: &[Vec<Int>], facet: &[Int]) -> u128 {
    let mut mask = 0u128;
    for (i, r) in rays.iter().enumerate() {
        if arith::dot(facet, r).is_zero() {
            mask |= 1 << i;
        }
    }
    mask
}

/// Face lattice = closure of facet ray-sets under intersection, plus the
/// improper face. Cutter of a face = sum of all facets containing it.
fn enumerate_faces(rays: &[Vec<Int>], facets: &[Vec<Int>]) -> Vec<Face> {
    let dim_space = rays.first().map_or(0, |r| r.len());
    let full = full_mask(rays.len());
    let facet_masks: Vec<u128> = facets.iter().map(|f| facet_ray_mask(rays, f)).collect();
    let mut masks: Vec<u128> = vec![full];
    let mut frontier = vec![full];
    while let Some(m) = frontier.pop() {
        for fm in &facet_masks {
            let next = m & fm;
            if !masks.contains(&next) {
                masks.push(next);
                frontier.push(next);
            }
        }
    }
    let mut faces: Vec<Face> = masks
        .into_iter()
        .map(|mask| {
            let sel: Vec<Vec<Int>> = mask_indices(mask)
                .into_iter()
                .filter(|&i| i < rays.len())
                .map(|i| rays[i].clone())
                .collect();
            let dim = if sel.is_empty() { 0 } else { IntMat::from_rows(sel).rank() };
            let mut cutter = arith::zeros(dim_space);
            for (fi, fm) in facet_masks.iter().enumerate() {
                if fm & mask == mask {
                    cutter = arith::add_vec(&cutter, &facets[fi]);
                }
            }
            Face { mask, dim, cutter }
        })
        .collect();
    faces.sort_by(|a, b| (a.dim, a.mask).cmp(&(b.dim, b.mask)));
    faces
}

/// Hilbert basis of the pointed part of the dual cone {f : ⟨f, r⟩ ≤ 0},
/// lifted along the lineality quotient. `lin` is the dual's lineality basis.
fn hilbert_basis_dual_pointed(rank: usize, rays: &[Vec<Int>], lin: &[Vec<Int>]) -> Result<Vec<Vec<Int>>> {
    let l = lin.len();
    if l == 0 {
        let dual_rays = pointed_extreme_rays(rank, rays);
        return Ok(hilbert_basis_pointed(rank, &dual_rays));
    }
    // quotient coordinates
    let lmat = IntMat::from_rows(lin.to_vec()).transpose();
    let (u, _d, _v) = arith::smith_normal_form(&lmat);
    let uinv = arith::unimodular_inverse(&u).expect("unimodular");
    let q = rank - l;
    let proj_ineqs: Vec<Vec<Int>> = rays
        .iter()
        .map(|a| {
            let arow = IntMat::from_rows(vec![a.clone()]);
            arow.mul(&uinv).row(0)[l..].to_vec()
        })
        .collect();
    let dual_rays = pointed_extreme_rays(q, &proj_ineqs);
    let hb = hilbert_basis_pointed(q, &dual_rays);
    Ok(hb
        .into_iter()
        .map(|y| {
            let mut fullv = arith::zeros(rank);
            fullv[l..].clone_from_slice(&y);
            uinv.apply(&fullv)
        })
        .collect())
}

/// Hilbert basis of the full-dimensional pointed cone generated by `rays`
/// in Z^q: stellar triangulation, fundamental parallelepiped points per
/// simplex, then global reduction to the minimal generating set.
pub(crate) fn hilbert_basis_pointed(q: usize, rays: &[Vec<Int>]) -> Vec<Vec<Int>> {
    if rays.is_empty() {
        return Vec::new();
    }
    let (_eqs, facets) = dual_description(q, rays);
    let member = |v: &[Int]| facets.iter().all(|f| !arith::dot(f, v).is_positive());
    let all: Vec<usize> = (0..rays.len()).collect();
    let simplices = triangulate(q, rays, &all);
    let mut candidates: Vec<Vec<Int>> = rays.to_vec();
    for s in &simplices {
        let pts = parallelepiped_points(rays, s);
        for p in pts {
            if !candidates.contains(&p) {
                candidates.push(p);
            }
        }
    }
    candidates.sort();
    candidates.dedup();
    // reduce: h is reducible iff h - c lies in the cone for some other candidate
    let mut basis: Vec<Vec<Int>> = Vec::new();
    for h in &candidates {
        let mut reducible = false;
        for c in &candidates {
            if c == h || arith::is_zero_vec(c) {
                continue;
            }
            let diff = arith::sub_vec(h, c);
            if !arith::is_zero_vec(&diff) && member(&diff) {
                reducible = true;
                break;
            }
        }
        if !reducible {
            basis.push(h.clone());
        }
    }
    basis
}

/// Stellar triangulation of cone(rays[subset]) into simplicial index sets.
fn triangulate(space_dim: usize, rays: &[Vec<Int>], subset: &[usize]) -> Vec<Vec<usize>> {
    let sel: Vec<Vec<Int>> = subset.iter().map(|&i| rays[i].clone()).collect();
    let dim = if sel.is_empty() { 0 } else { IntMat::from_rows(sel.clone()).rank() };
    if subset.len() == dim {
        return vec![subset.to_vec()];
    }
    let r0 = subset[0];
    let (_eqs, facets) = dual_description(space_dim, &sel);
    let mut out: Vec<Vec<usize>> = Vec::new();
    for f in &facets {
        if arith::dot(f, &rays[r0]).is_zero() {
            continue; // facet contains the apex
        }
        let tight: Vec<usize> = subset
            .iter()
            .copied()
            .filter(|&i| arith::dot(f, &rays[i]).is_zero())
            .collect();
        for mut s in triangulate(space_dim, rays, &tight) {
            s.push(r0);
            s.sort();
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// Nonzero lattice points in the half-open parallelepiped of a simplicial
/// cone spanned by rays[simplex].
fn parallelepiped_points(rays: &[Vec<Int>], simplex: &[usize]) -> Vec<Vec<Int>> {
    use num_traits::One;
    let cols: Vec<Vec<Int>> = simplex.iter().map(|&i| rays[i].clone()).collect();
    let q = cols.len();
    let space = cols[0].len();
    // work inside the saturated span lattice of the simplex
    let m = IntMat::from_rows(cols.clone()).transpose(); // space x q
    let (u, d, _v) = arith::smith_normal_form(&m);
    let uinv = arith::unimodular_inverse(&u).expect("unimodular");
    // span lattice = image of first q coordinates under uinv (d has q nonzero entries)
    let mut index = Int::one();
    for i in 0..q {
        index *= &d[(i, i)];
    }
    let index = index.abs();
    if index.is_one() {
        return Vec::new();
    }
    // coordinates of the simplex generators inside the span lattice
    let coords: Vec<Vec<Int>> = cols.iter().map(|c| u.apply(c)[..q].to_vec()).collect();
    let smat = IntMat::from_rows(coords).transpose(); // q x q, det = ±index
    let (us, ds, _vs) = arith::smith_normal_form(&smat);
    let usinv = arith::unimodular_inverse(&us).expect("unimodular");
    // enumerate representatives y of Z^q / smat Z^q: x = us^{-1} y, y_i in [0, ds_i)
    let mut reps: Vec<Vec<Int>> = vec![Vec::new()];
    for i in 0..q {
        let di = ds[(i, i)].clone();
        let mut next = Vec::new();
        let mut c = Int::zero();
        while c < di {
            for r in &reps {
                let mut rr = r.clone();
                rr.push(c.clone());
                next.push(rr);
            }
            c += 1;
        }
        reps = next;
    }
    let det = arith::determinant(&smat);
    let mut out = Vec::new();
    for y in reps {
        let x = usinv.apply(&y);
        // lambda = smat^{-1} x as exact rationals (units of det)
        // solve smat * lambda = x over Q via Cramer-free route: integer solve of
        // smat * z = det * x then lambda = z / det
        let rhs: Vec<Int> = x.iter().map(|t| t * &det).collect();
        let z = arith::solve_integer(&smat, &rhs).expect("cramer solve");
        // fractional reduction: lambda_i - floor(lambda_i)
        let mut point = arith::zeros(q);
        let mut nonzero = false;
        for i in 0..q {
            let lam_num = z[i].clone();
            let lam_den = det.clone();
            let fl = num_integer::Integer::div_floor(&lam_num, &lam_den);
            let frac_num = &lam_num - &fl * &lam_den; // in [0, |den|) with sign of den handled by div_floor
            if !frac_num.is_zero() {
                nonzero = true;
            }
            // accumulate frac * coords_i; frac = frac_num / lam_den
            for (pc, cc) in point.iter_mut().zip(smat.col(i)) {
                *pc += &frac_num * &cc;
            }
        }
        if !nonzero {
            continue;
        }
        // point is det * (fractional combination); divide by det (exact)
        let pt: Vec<Int> = point.iter().map(|t| t / &det).collect();
        // back to ambient coordinates
        let mut fullv = arith::zeros(space);
        fullv[..q].clone_from_slice(&pt);
        let amb = uinv.apply(&fullv);
        if !arith::is_zero_vec(&amb) && !out.contains(&amb) {
            out.push(amb);
        }
    }
    out
}

/// A cone with a downward-closed set of proper faces removed: the
/// combinatorial shadow of a formal completion.
#[derive(Clone, Debug, PartialEq)]
pub struct PuncturedCone {
    pub cone: Cone,
    punctures: Vec<u128>,
}

/// Result of classifying an H-point against σ(H) \ ζ(H).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Kept,
    Punctured,
    Outside,
}

impl PuncturedCone {
    pub fn unpunctured(cone: Cone) -> PuncturedCone {
        PuncturedCone { cone, punctures: Vec::new() }
    }

    /// Punctures must be proper faces; the set must be downward closed.
    pub fn new(cone: Cone, punctures: Vec<u128>) -> Result<PuncturedCone> {
        let full = cone.improper_mask();
        let mut ps = punctures;
        ps.sort();
        ps.dedup();
        for &p in &ps {
            if p == full && !cone.is_zero_cone() || cone.face_by_mask(p).is_none() {
                return Err(Error::InvariantError(format!(
                    "puncture {:#x} is not a proper face",
                    p
                )));
            }
            if cone.is_zero_cone() {
                return Err(Error::InvariantError(
                    "the zero cone has no proper faces to puncture".into(),
                ));
            }
        }
        for f in cone.faces() {
            if f.mask == full {
                continue;
            }
            let inside = ps.iter().any(|&p| f.mask & p == f.mask && {
                // f ⊆ p as faces: ray containment implies face containment here
                true
            });
            if inside && !ps.contains(&f.mask) {
                return Err(Error::InvariantError(format!(
                    "punctures not downward closed: face {:#x} missing",
                    f.mask
                )));
            }
        }
        Ok(PuncturedCone { cone, punctures: ps })
    }

    /// Downward closure of a set of faces, as puncture masks.
    pub fn close_downward(cone: &Cone, seeds: &[u128]) -> Vec<u128> {
        let mut ps: Vec<u128> = Vec::new();
        for f in cone.faces() {
            if f.mask == cone.improper_mask() {
                continue;
            }
            if seeds.iter().any(|&s| f.mask & s == f.mask) {
                ps.push(f.mask);
            }
        }
        ps.sort();
        ps.dedup();
        ps
    }

    pub fn punctures(&self) -> &[u128] {
        &self.punctures
    }

    pub fn maximal_punctures(&self) -> Vec<u128> {
        self.punctures
            .iter()
            .copied()
            .filter(|&p| !self.punctures.iter().any(|&q| q != p && p & q == p))
            .collect()
    }

    pub fn is_punctured_mask(&self, mask: u128) -> bool {
        self.punctures.contains(&mask)
    }

    /// Kept faces, improper face included when unpunctured (it always is).
    pub fn kept_faces(&self) -> impl Iterator<Item = &Face> {
        self.cone.faces().iter().filter(move |f| !self.is_punctured_mask(f.mask))
    }

    pub fn membership_int(&self, v: &[Int]) -> Membership {
        match self.cone.min_face_int(v) {
            None => Membership::Outside,
            Some(mask) => {
                if self.is_punctured_mask(mask) {
                    Membership::Punctured
                } else {
                    Membership::Kept
                }
            }
        }
    }

    pub fn membership_rat(&self, v: &[Rat]) -> Membership {
        match self.cone.min_face_rat(v) {
            None => Membership::Outside,
            Some(mask) => {
                if self.is_punctured_mask(mask) {
                    Membership::Punctured
                } else {
                    Membership::Kept
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::vec_from_i64 as v64;
    use crate::group::elem_from_i64 as e64;

    fn quadrant() -> Cone {
        Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap()
    }

    #[test]
    fn quadrant_rays_are_canonical() {
        let c = quadrant();
        assert_eq!(c.rays(), &[v64(&[-1, 0]), v64(&[0, -1])]);
        assert_eq!(c.dim(), 2);
    }

    #[test]
    fn redundant_inequality_pruned() {
        // cut by x, y, xy: same two rays
        let c = Cone::from_inequalities(
            CharacterGroup::free(2),
            vec![e64(&[1, 0]), e64(&[0, 1]), e64(&[1, 1])],
        )
        .unwrap();
        assert_eq!(c.rays(), quadrant().rays());
    }

    #[test]
    fn zero_cone_from_units() {
        let c = Cone::from_inequalities(
            CharacterGroup::free(1),
            vec![e64(&[1]), e64(&[-1])],
        )
        .unwrap();
        assert!(c.is_zero_cone());
        assert_eq!(c.faces().len(), 1);
    }

    #[test]
    fn non_pointed_rejected() {
        let err = Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0])]);
        assert!(matches!(err, Err(Error::NotPointed)));
    }

    #[test]
    fn quadrant_has_four_faces() {
        let c = quadrant();
        assert_eq!(c.faces().len(), 4);
        let dims: Vec<usize> = c.faces().iter().map(|f| f.dim).collect();
        assert_eq!(dims, vec![0, 1, 1, 2]);
    }

    #[test]
    fn ray_cone_faces_and_cutter() {
        // σ of F1[t]: the ray v ≤ 0 in Q
        let c = Cone::from_inequalities(CharacterGroup::free(1), vec![e64(&[1])]).unwrap();
        assert_eq!(c.rays(), &[v64(&[-1])]);
        assert_eq!(c.faces().len(), 2);
        let origin = c.face_by_mask(0).unwrap();
        assert_eq!(origin.cutter, v64(&[1])); // the cutter is t
        let improper = c.face_by_mask(c.improper_mask()).unwrap();
        assert!(arith::is_zero_vec(&improper.cutter));
    }

    #[test]
    fn intersect_quadrants() {
        let c = quadrant();
        let opposite = Cone::from_inequalities(
            CharacterGroup::free(2),
            vec![e64(&[-1, 0]), e64(&[0, -1])],
        )
        .unwrap();
        let z = c.intersect(&opposite).unwrap();
        assert!(z.is_zero_cone());
        let again = c.intersect(&c).unwrap();
        assert_eq!(again, c);
        // quadrant ∩ {v1 ≥ v2}: spanned by (-1,-1), (0,-1)
        let half = Cone::from_free_inequalities(
            CharacterGroup::free(2),
            vec![v64(&[1, 0]), v64(&[0, 1]), v64(&[-1, 1])],
        )
        .unwrap();
        let m = c.intersect(&half).unwrap();
        assert_eq!(m.rays(), &[v64(&[-1, -1]), v64(&[0, -1])]);
    }

    #[test]
    fn refine_blowup_of_plane() {
        let c = quadrant();
        let pieces = c.refine_by_function(&[e64(&[1, 0]), e64(&[0, 1])], false);
        assert_eq!(pieces.len(), 2);
        let mut all_rays: Vec<Vec<Int>> = pieces.iter().flat_map(|p| p.rays().to_vec()).collect();
        all_rays.sort();
        all_rays.dedup();
        assert_eq!(all_rays, vec![v64(&[-1, -1]), v64(&[-1, 0]), v64(&[0, -1])]);
    }

    #[test]
    fn refine_single_function_is_trivial() {
        let c = quadrant();
        let pieces = c.refine_by_function(&[e64(&[1, 0])], false);
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0], c);
    }

    #[test]
    fn refine_with_weights() {
        // quadrant, fs = {x, y^2}: split along v1 = 2 v2
        let c = quadrant();
        let pieces = c.refine_by_function(&[e64(&[1, 0]), e64(&[0, 2])], false);
        assert_eq!(pieces.len(), 2);
        let mut all_rays: Vec<Vec<Int>> = pieces.iter().flat_map(|p| p.rays().to_vec()).collect();
        all_rays.sort();
        all_rays.dedup();
        assert!(all_rays.contains(&v64(&[-2, -1])));
    }

    #[test]
    fn quotient_by_ray_face() {
        let c = quadrant();
        let ray_face = c
            .faces()
            .iter()
            .find(|f| f.dim == 1 && mask_indices(f.mask) == vec![0])
            .unwrap()
            .clone();
        // face spanned by (-1, 0): quotient is the ray v ≤ 0 in Q
        let (proj, image) = c.quotient_by_face(&ray_face);
        assert_eq!(proj.rows, 1);
        assert_eq!(image.rays().len(), 1);
        assert_eq!(image.dim(), 1);
        // quotient by the origin face is the cone itself
        let origin = c.face_by_mask(0).unwrap().clone();
        let (p2, img2) = c.quotient_by_face(&origin);
        assert!(p2.is_identity());
        assert_eq!(img2, c);
        // quotient by the improper face is the zero cone in rank 0
        let improper = c.face_by_mask(c.improper_mask()).unwrap().clone();
        let (_, img3) = c.quotient_by_face(&improper);
        assert_eq!(img3.group().rank(), 0);
    }

    #[test]
    fn hilbert_basis_of_quadrant_polar() {
        let c = quadrant();
        let hb = c.hilbert_basis(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        let mut free: Vec<Vec<Int>> = hb.iter().map(|e| e.free.clone()).collect();
        free.sort();
        assert_eq!(free, vec![v64(&[0, 1]), v64(&[1, 0])]);
    }

    #[test]
    fn hilbert_basis_of_ray() {
        let c = Cone::from_inequalities(CharacterGroup::free(1), vec![e64(&[1])]).unwrap();
        let hb = c.hilbert_basis(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert_eq!(hb.len(), 1);
        assert_eq!(hb[0].free, v64(&[1]));
    }

    #[test]
    fn hilbert_basis_with_lineality_units() {
        // the zero cone in Q: polar monoid is all of Z, generated by ±1
        let c = Cone::from_inequalities(CharacterGroup::free(1), vec![e64(&[1]), e64(&[-1])]).unwrap();
        let hb = c.hilbert_basis(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        let mut free: Vec<Vec<Int>> = hb.iter().map(|e| e.free.clone()).collect();
        free.sort();
        assert_eq!(free, vec![v64(&[-1]), v64(&[1])]);
    }

    #[test]
    fn hilbert_basis_quadratic_cone() {
        // dual of the A1-singularity setting: cone spanned by (-1,0), (-1,-2)
        let c = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[-1, 0]), v64(&[-1, -2])]).unwrap();
        let hb = c.hilbert_basis(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        // polar monoid needs three generators (the parallelepiped point shows up)
        assert_eq!(hb.len(), 3);
    }

    #[test]
    fn punctured_membership_formal_disc() {
        let ray = Cone::from_inequalities(CharacterGroup::free(1), vec![e64(&[1])]).unwrap();
        let pc = PuncturedCone::new(ray, vec![0]).unwrap();
        assert_eq!(pc.membership_int(&v64(&[-3])), Membership::Kept);
        assert_eq!(pc.membership_int(&v64(&[0])), Membership::Punctured);
        assert_eq!(pc.membership_int(&v64(&[2])), Membership::Outside);
    }

    #[test]
    fn punctures_must_be_downward_closed() {
        let c = quadrant();
        let ray_mask = c.faces().iter().find(|f| f.dim == 1).unwrap().mask;
        let err = PuncturedCone::new(c.clone(), vec![ray_mask]);
        assert!(err.is_err());
        let closed = PuncturedCone::close_downward(&c, &[ray_mask]);
        let pc = PuncturedCone::new(c, closed).unwrap();
        assert_eq!(pc.punctures().len(), 2);
    }

    #[test]
    fn face_cut_by_element() {
        let c = quadrant();
        let f = c.face_cut_by(&e64(&[1, 0])).unwrap();
        assert_eq!(f.dim, 1);
        let g = c.face_cut_by(&e64(&[1, 1])).unwrap();
        assert_eq!(g.dim, 0);
        assert!(c.face_cut_by(&e64(&[-1, 0])).is_none());
    }
}
