//! Punctured cone complexes: finite atlases of punctured cones glued along
//! faces, with character-group transition isomorphisms.
//!
//! Validation computes the closure of the gluing data under inversion,
//! restriction to subfaces, and composition — a finite groupoid on pairs
//! (cone, face). Consistency means that any two identifications of the same
//! pair of faces agree on the span of the face; identifications of distinct
//! faces of one cone are rejected outright. Transition matrices between two
//! charts may well differ away from the shared face (that is monodromy, not
//! an error).

use crate::arith::{self, Int, IntMat};
use crate::cone::{Cone, Face, PuncturedCone};
use crate::error::{Error, Result};
use crate::group::GroupElem;
use num_traits::Zero;
use std::collections::{BTreeMap, VecDeque};

/// A stored gluing: the face of cone `i` cut by `cutter_i` is identified
/// with the face of cone `j` cut by `cutter_j`. The character map sends
/// K^×_j to K^×_i (pullback direction); points travel the other way via the
/// transpose N_i -> N_j.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gluing {
    pub i: usize,
    pub cutter_i: GroupElem,
    pub j: usize,
    pub cutter_j: GroupElem,
    pub charmap: IntMat,
}

impl Gluing {
    pub fn point_map(&self) -> IntMat {
        self.charmap.transpose()
    }

    pub fn flipped(&self) -> Gluing {
        Gluing {
            i: self.j,
            cutter_i: self.cutter_j.clone(),
            j: self.i,
            cutter_j: self.cutter_i.clone(),
            charmap: arith::unimodular_inverse(&self.charmap).expect("validated unimodular"),
        }
    }
}

/// A morphism of the derived gluing groupoid: the face `face_i` of cone `i`
/// is identified with `face_j` of cone `j`; `nmap` is one representative
/// point transport N_i -> N_j (well defined on the span of the face).
#[derive(Clone, Debug)]
pub struct DerivedGluing {
    pub i: usize,
    pub face_i: u128,
    pub j: usize,
    pub face_j: u128,
    pub nmap: IntMat,
}

#[derive(Clone, Debug)]
pub struct ConeComplex {
    cones: Vec<PuncturedCone>,
    gluings: Vec<Gluing>,
    derived: Vec<DerivedGluing>,
}

impl PartialEq for ConeComplex {
    fn eq(&self, other: &Self) -> bool {
        self.cones == other.cones && self.gluings == other.gluings
    }
}

fn rays_of_mask(cone: &Cone, mask: u128) -> Vec<&Vec<Int>> {
    crate::cone::mask_indices(mask)
        .into_iter()
        .filter(|&k| k < cone.rays().len())
        .map(|k| &cone.rays()[k])
        .collect()
}

/// Image of a face under a point map, as a ray mask of the target cone;
/// None when some ray does not land on a ray of the target.
fn image_mask(nmap: &IntMat, src: &Cone, mask: u128, dst: &Cone) -> Option<u128> {
    let mut out = 0u128;
    for r in rays_of_mask(src, mask) {
        let img = arith::primitive(&nmap.apply(r));
        let pos = dst.rays().iter().position(|s| *s == img)?;
        out |= 1 << pos;
    }
    Some(out)
}

fn agree_on_face(a: &IntMat, b: &IntMat, src: &Cone, mask: u128) -> bool {
    rays_of_mask(src, mask)
        .into_iter()
        .all(|r| a.apply(r) == b.apply(r))
}

fn identity_on_face(a: &IntMat, src: &Cone, mask: u128) -> bool {
    rays_of_mask(src, mask).into_iter().all(|r| &a.apply(r) == r)
}

impl ConeComplex {
    pub fn single(pc: PuncturedCone) -> ConeComplex {
        ConeComplex::new(vec![pc], Vec::new()).expect("one cone is always a valid atlas")
    }

    /// Validate a raw atlas: per-gluing face isomorphism and puncture
    /// correspondence, then coherence of the closure of the gluing data.
    pub fn new(cones: Vec<PuncturedCone>, gluings: Vec<Gluing>) -> Result<ConeComplex> {
        if cones.len() > 64 {
            return Err(Error::InvariantError("atlas too large".into()));
        }
        for (idx, g) in gluings.iter().enumerate() {
            let reason = |msg: &str| Error::NonIsomorphicGluing { index: idx, reason: msg.into() };
            if g.i >= cones.len() || g.j >= cones.len() {
                return Err(reason("cone index out of range"));
            }
            let ci = &cones[g.i].cone;
            let cj = &cones[g.j].cone;
            if g.charmap.rows != ci.group().rank() || g.charmap.cols != cj.group().rank() {
                return Err(reason("character map has the wrong shape"));
            }
            if g.charmap.rows != g.charmap.cols
                || arith::unimodular_inverse(&g.charmap).is_none()
            {
                return Err(reason("character map is not invertible over Z"));
            }
            let fi = ci
                .face_cut_by(&g.cutter_i)
                .ok_or_else(|| reason("cutter_i does not cut a face"))?
                .clone();
            let fj = cj
                .face_cut_by(&g.cutter_j)
                .ok_or_else(|| reason("cutter_j does not cut a face"))?
                .clone();
            let nmap = g.point_map();
            let img = image_mask(&nmap, ci, fi.mask, cj)
                .ok_or_else(|| reason("face rays do not map to rays"))?;
            if img != fj.mask {
                return Err(reason("point map does not identify the two faces"));
            }
            // punctures must correspond along the glued face
            for f in ci.faces() {
                if f.mask & fi.mask != f.mask {
                    continue;
                }
                let fimg = image_mask(&nmap, ci, f.mask, cj)
                    .ok_or_else(|| reason("subface rays do not map to rays"))?;
                if cones[g.i].is_punctured_mask(f.mask) != cones[g.j].is_punctured_mask(fimg) {
                    return Err(reason("punctures do not correspond along the glued face"));
                }
            }
        }
        let derived = saturate(&cones, &gluings)?;
        Ok(ConeComplex { cones, gluings, derived })
    }

    pub fn cones(&self) -> &[PuncturedCone] {
        &self.cones
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    pub fn derived(&self) -> &[DerivedGluing] {
        &self.derived
    }

    pub fn len(&self) -> usize {
        self.cones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }

    /// Derived identifications from (i, face) to cone j, including the
    /// identity when i == j.
    pub fn morphisms_from(&self, i: usize, face: u128) -> Vec<DerivedGluing> {
        let mut out = vec![DerivedGluing {
            i,
            face_i: face,
            j: i,
            face_j: face,
            nmap: IntMat::identity(self.cones[i].cone.group().rank()),
        }];
        for d in &self.derived {
            if d.i == i && d.face_i == face {
                out.push(d.clone());
            }
        }
        out
    }

    /// Connected components under the gluing graph.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.cones.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            comp[start] = count;
            while let Some(c) = queue.pop_front() {
                for g in &self.gluings {
                    for (a, b) in [(g.i, g.j), (g.j, g.i)] {
                        if a == c && comp[b] == usize::MAX {
                            comp[b] = count;
                            queue.push_back(b);
                        }
                    }
                }
            }
            count += 1;
        }
        let mut out = vec![Vec::new(); count];
        for (i, &c) in comp.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// The shared face of a contiguous pair: the largest face along which
    /// the two cones are glued that survives the puncturing. None when every
    /// identification is punctured away (or none exists).
    pub fn contiguous(&self, i: usize, j: usize) -> Option<Face> {
        if i == j {
            let full = self.cones[i].cone.improper_mask();
            return self.cones[i].cone.face_by_mask(full).cloned();
        }
        let mut best: Option<&Face> = None;
        for d in &self.derived {
            if d.i != i || d.j != j {
                continue;
            }
            if self.cones[i].is_punctured_mask(d.face_i) {
                continue;
            }
            let f = self.cones[i].cone.face_by_mask(d.face_i).expect("derived face");
            best = match best {
                None => Some(f),
                Some(b) if (f.dim, f.mask) > (b.dim, b.mask) => Some(f),
                keep => keep,
            };
        }
        best.cloned()
    }

    /// All maximal glued faces between a pair (used by the separation check
    /// to detect pairs identified along more than one face).
    pub fn maximal_glued_faces(&self, i: usize, j: usize) -> Vec<DerivedGluing> {
        let pairs: Vec<&DerivedGluing> =
            self.derived.iter().filter(|d| d.i == i && d.j == j).collect();
        pairs
            .iter()
            .filter(|d| {
                !pairs
                    .iter()
                    .any(|e| e.face_i != d.face_i && e.face_i & d.face_i == d.face_i)
            })
            .map(|d| (*d).clone())
            .collect()
    }

    /// Big star: puncture the complex along every cone discontiguous with
    /// the basepoint. The result carries a constant local system and hence a
    /// developing map.
    pub fn big_star(&self, basepoint: usize) -> ConeComplex {
        let kept: Vec<usize> = (0..self.cones.len())
            .filter(|&j| j == basepoint || self.contiguous(basepoint, j).is_some())
            .collect();
        self.puncture_discontiguous(&kept)
    }

    fn puncture_discontiguous(&self, kept: &[usize]) -> ConeComplex {
        let reindex: BTreeMap<usize, usize> =
            kept.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let mut new_cones = Vec::new();
        for &k in kept {
            let pc = &self.cones[k];
            let mut seeds: Vec<u128> = pc.punctures().to_vec();
            for d in &self.derived {
                if d.i == k && !reindex.contains_key(&d.j) {
                    seeds.push(d.face_i);
                }
            }
            let closed = PuncturedCone::close_downward(&pc.cone, &seeds);
            new_cones.push(PuncturedCone::new(pc.cone.clone(), closed).expect("closed punctures"));
        }
        let new_gluings: Vec<Gluing> = self
            .gluings
            .iter()
            .filter(|g| reindex.contains_key(&g.i) && reindex.contains_key(&g.j))
            .map(|g| Gluing { i: reindex[&g.i], j: reindex[&g.j], ..g.clone() })
            .collect();
        ConeComplex::new(new_cones, new_gluings).expect("star of a valid complex is valid")
    }

    /// Small star of a face: the cones containing a glued copy of it,
    /// together with the transports N_site -> N_member.
    pub fn small_star(&self, i: usize, face: u128) -> Vec<DerivedGluing> {
        self.morphisms_from(i, face)
    }

    /// Small star at a whole cone, as a subcomplex: the cones that contain
    /// cone `i` as a (glued copy of a) face, with the gluings among them.
    pub fn small_star_subcomplex(&self, i: usize) -> (Vec<usize>, ConeComplex) {
        let full = self.cones[i].cone.improper_mask();
        let mut members: Vec<usize> =
            self.morphisms_from(i, full).into_iter().map(|d| d.j).collect();
        members.sort();
        members.dedup();
        let reindex: BTreeMap<usize, usize> =
            members.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let cones = members.iter().map(|&m| self.cones[m].clone()).collect();
        let gluings = self
            .gluings
            .iter()
            .filter(|g| reindex.contains_key(&g.i) && reindex.contains_key(&g.j))
            .map(|g| Gluing { i: reindex[&g.i], j: reindex[&g.j], ..g.clone() })
            .collect();
        (
            members,
            ConeComplex::new(cones, gluings).expect("subcomplex of a valid complex"),
        )
    }

    /// Monodromy of the character local system on the component of the
    /// basepoint: spanning-tree transports plus one generator per loop edge.
    pub fn monodromy(&self, basepoint: usize) -> LocalSystem {
        let n = self.cones.len();
        let mut transports: Vec<Option<IntMat>> = vec![None; n];
        transports[basepoint] =
            Some(IntMat::identity(self.cones[basepoint].cone.group().rank()));
        let mut tree_edges: Vec<usize> = Vec::new();
        let mut queue = VecDeque::from([basepoint]);
        while let Some(c) = queue.pop_front() {
            for (gi, g) in self.gluings.iter().enumerate() {
                for oriented in [g.clone(), g.flipped()] {
                    if oriented.i != c || transports[oriented.j].is_some() {
                        continue;
                    }
                    // T_j = T_i ∘ ψ^{-1} with ψ: N_i -> N_j
                    let psi_inv = arith::unimodular_inverse(&oriented.point_map())
                        .expect("validated unimodular");
                    let ti = transports[c].clone().unwrap();
                    transports[oriented.j] = Some(ti.mul(&psi_inv));
                    tree_edges.push(gi);
                    queue.push_back(oriented.j);
                }
            }
        }
        let mut loops = Vec::new();
        for (gi, g) in self.gluings.iter().enumerate() {
            if tree_edges.contains(&gi) {
                continue;
            }
            let (Some(ti), Some(tj)) = (&transports[g.i], &transports[g.j]) else {
                continue;
            };
            // μ_N = T_j ∘ ψ ∘ T_i^{-1} : N_base -> N_base
            let psi = g.point_map();
            let ti_inv = arith::unimodular_inverse(ti).expect("unimodular");
            let mu_n = tj.mul(&psi).mul(&ti_inv);
            let mu_k = mu_n.transpose();
            loops.push(LoopGenerator { gluing: gi, monodromy_n: mu_n, monodromy_k: mu_k });
        }
        LocalSystem { base: basepoint, transports, tree_edges, loops }
    }

    /// Developing map on the component of the basepoint: one linear
    /// embedding per cone into N_base, compatible with the tree gluings.
    /// Fails when the local system is not constant.
    pub fn develop(&self, basepoint: usize) -> Result<Vec<Option<IntMat>>> {
        let sys = self.monodromy(basepoint);
        if let Some(l) = sys.loops.iter().find(|l| !l.monodromy_n.is_identity()) {
            return Err(Error::NonConstantSystem { witness: l.monodromy_k.clone() });
        }
        Ok(sys.transports)
    }

    /// Puncture along an open subcomplex, given per cone as a downward
    /// closed set of face masks. Idempotent.
    pub fn puncture_along(&self, sub: &[Vec<u128>]) -> Result<ConeComplex> {
        if sub.len() != self.cones.len() {
            return Err(Error::NotASubcomplex("per-cone face lists required".into()));
        }
        for (i, faces) in sub.iter().enumerate() {
            let cone = &self.cones[i].cone;
            for &m in faces {
                if cone.face_by_mask(m).is_none() {
                    return Err(Error::NotASubcomplex(format!(
                        "mask {:#x} is not a face of cone {}",
                        m, i
                    )));
                }
                if m == cone.improper_mask() {
                    return Err(Error::NotASubcomplex(format!(
                        "complement empty on cone {}",
                        i
                    )));
                }
            }
            for f in cone.faces() {
                if f.mask == cone.improper_mask() {
                    continue;
                }
                let inside = faces.iter().any(|&m| f.mask & m == f.mask);
                if inside && !faces.contains(&f.mask) {
                    return Err(Error::NotASubcomplex(format!(
                        "face set of cone {} not downward closed",
                        i
                    )));
                }
            }
        }
        // gluing compatibility: glued faces agree about membership
        for d in &self.derived {
            let in_i = sub[d.i].contains(&d.face_i);
            let in_j = sub[d.j].contains(&d.face_j);
            if in_i != in_j {
                return Err(Error::NotASubcomplex(format!(
                    "face {:#x} of cone {} is glued across the boundary",
                    d.face_i, d.i
                )));
            }
        }
        let cones: Vec<PuncturedCone> = self
            .cones
            .iter()
            .enumerate()
            .map(|(i, pc)| {
                let mut seeds = pc.punctures().to_vec();
                seeds.extend(sub[i].iter().copied());
                let closed = PuncturedCone::close_downward(&pc.cone, &seeds);
                PuncturedCone::new(pc.cone.clone(), closed).expect("closed punctures")
            })
            .collect();
        ConeComplex::new(cones, self.gluings.clone())
    }

    /// Canonical relabeling: cones sorted by shape, gluings oriented and
    /// sorted. Two complexes built in different orders compare equal after
    /// canonicalization.
    pub fn canonical(&self) -> ConeComplex {
        let mut order: Vec<usize> = (0..self.cones.len()).collect();
        let key = |k: usize| {
            let pc = &self.cones[k];
            (
                pc.cone.dim(),
                pc.cone.rays().to_vec(),
                pc.punctures().to_vec(),
                k,
            )
        };
        order.sort_by_key(|&k| key(k));
        let reindex: BTreeMap<usize, usize> =
            order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let cones: Vec<PuncturedCone> = order.iter().map(|&k| self.cones[k].clone()).collect();
        let mut gluings: Vec<Gluing> = self
            .gluings
            .iter()
            .map(|g| {
                let mut ng = Gluing { i: reindex[&g.i], j: reindex[&g.j], ..g.clone() };
                if ng.i > ng.j {
                    ng = ng.flipped();
                }
                ng
            })
            .collect();
        gluings.sort_by_key(|g| {
            (
                g.i,
                g.j,
                g.cutter_i.free.clone(),
                g.cutter_j.free.clone(),
            )
        });
        gluings.dedup();
        ConeComplex::new(cones, gluings).expect("relabeling preserves validity")
    }
}

/// The character local system over one connected component.
#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub base: usize,
    /// Transport N_i -> N_base for each cone in the component.
    pub transports: Vec<Option<IntMat>>,
    pub tree_edges: Vec<usize>,
    pub loops: Vec<LoopGenerator>,
}

#[derive(Clone, Debug)]
pub struct LoopGenerator {
    pub gluing: usize,
    /// Automorphism of K^×_base carried by the loop.
    pub monodromy_k: IntMat,
    pub monodromy_n: IntMat,
}

impl LocalSystem {
    pub fn is_constant(&self) -> bool {
        self.loops.iter().all(|l| l.monodromy_n.is_identity())
    }
}

/// Closure of the gluing data under inversion, restriction and composition.
fn saturate(cones: &[PuncturedCone], gluings: &[Gluing]) -> Result<Vec<DerivedGluing>> {
    type Key = (usize, u128, usize, u128);
    let mut stored: BTreeMap<Key, IntMat> = BTreeMap::new();
    let mut queue: VecDeque<DerivedGluing> = VecDeque::new();

    let push = |m: DerivedGluing,
                stored: &mut BTreeMap<Key, IntMat>,
                queue: &mut VecDeque<DerivedGluing>|
     -> Result<()> {
        // trivial self-identification
        if m.i == m.j && m.face_i == m.face_j && identity_on_face(&m.nmap, &cones[m.i].cone, m.face_i)
        {
            return Ok(());
        }
        if m.i == m.j && m.face_i != m.face_j {
            return Err(Error::SelfGluedFaces { cone: m.i, a: m.face_i, b: m.face_j });
        }
        if m.i == m.j && !identity_on_face(&m.nmap, &cones[m.i].cone, m.face_i) {
            return Err(Error::SelfGluedFaces { cone: m.i, a: m.face_i, b: m.face_j });
        }
        // conflicting target face for the same source face
        for ((si, sfi, sj, sfj), _) in stored.iter() {
            if *si == m.i && *sfi == m.face_i && *sj == m.j && *sfj != m.face_j {
                return Err(Error::SelfGluedFaces { cone: m.j, a: *sfj, b: m.face_j });
            }
        }
        let key = (m.i, m.face_i, m.j, m.face_j);
        match stored.get(&key) {
            Some(existing) => {
                if !agree_on_face(existing, &m.nmap, &cones[m.i].cone, m.face_i) {
                    return Err(Error::IncoherentTransition { i: m.i, j: m.j });
                }
            }
            None => {
                stored.insert(key, m.nmap.clone());
                queue.push_back(m);
            }
        }
        Ok(())
    };

    for g in gluings {
        for oriented in [g.clone(), g.flipped()] {
            let ci = &cones[oriented.i].cone;
            let cj = &cones[oriented.j].cone;
            let fi = ci.face_cut_by(&oriented.cutter_i).expect("validated cutter").mask;
            let nmap = oriented.point_map();
            // the base morphism and all its restrictions to subfaces
            for f in ci.faces() {
                if f.mask & fi != f.mask {
                    continue;
                }
                let img = image_mask(&nmap, ci, f.mask, cj).expect("validated face map");
                push(
                    DerivedGluing {
                        i: oriented.i,
                        face_i: f.mask,
                        j: oriented.j,
                        face_j: img,
                        nmap: nmap.clone(),
                    },
                    &mut stored,
                    &mut queue,
                )?;
            }
        }
    }

    let mut all: Vec<DerivedGluing> = queue.iter().cloned().collect();
    let mut head = 0;
    while head < all.len() {
        let m1 = all[head].clone();
        head += 1;
        let snapshot = all.clone();
        for m2 in &snapshot {
            // compose m1 then m2 on the common part of m1.face_j and m2.face_i
            if m2.i != m1.j {
                continue;
            }
            let common = m1.face_j & m2.face_i;
            let cj = &cones[m1.j].cone;
            if cj.face_by_mask(common).is_none() {
                continue;
            }
            // restrict m1 to the preimage of the common face
            let ci = &cones[m1.i].cone;
            let nmap1_inv = arith::unimodular_inverse(&m1.nmap).expect("unimodular");
            let Some(src) = image_mask(&nmap1_inv, cj, common, ci) else { continue };
            let Some(dst) = image_mask(&m2.nmap, cj, common, &cones[m2.j].cone) else {
                continue;
            };
            let comp = DerivedGluing {
                i: m1.i,
                face_i: src,
                j: m2.j,
                face_j: dst,
                nmap: m2.nmap.mul(&m1.nmap),
            };
            let before = stored.len();
            push(comp.clone(), &mut stored, &mut queue)?;
            if stored.len() > before {
                all.push(comp);
            }
        }
    }
    let mut out: Vec<DerivedGluing> = stored
        .into_iter()
        .map(|((i, face_i, j, face_j), nmap)| DerivedGluing { i, face_i, j, face_j, nmap })
        .collect();
    out.sort_by_key(|d| (d.i, d.j, d.face_i, d.face_j));
    // puncture correspondence must persist through the closure
    for d in &out {
        debug_assert_eq!(
            cones[d.i].is_punctured_mask(d.face_i),
            cones[d.j].is_punctured_mask(d.face_j),
            "derived gluing breaks puncture correspondence"
        );
    }
    Ok(out)
}

/// A morphism of complexes: a per-cone target assignment with a character
/// homomorphism K^×_target -> K^×_source (functions pull back; points push
/// forward through the transpose).
#[derive(Clone, Debug)]
pub struct Assignment {
    pub target: usize,
    pub charmap: IntMat,
}

#[derive(Clone, Debug)]
pub struct ComplexMorphism {
    pub source: ConeComplex,
    pub target: ConeComplex,
    pub assignments: Vec<Assignment>,
}

impl ComplexMorphism {
    pub fn new(
        source: ConeComplex,
        target: ConeComplex,
        assignments: Vec<Assignment>,
    ) -> Result<ComplexMorphism> {
        if assignments.len() != source.len() {
            return Err(Error::InvariantError(
                "morphism needs one assignment per source cone".into(),
            ));
        }
        let m = ComplexMorphism { source, target, assignments };
        m.validate()?;
        Ok(m)
    }

    /// Point map N_i -> N_{t(i)} of one source cone.
    pub fn point_map(&self, i: usize) -> IntMat {
        self.assignments[i].charmap.transpose()
    }

    fn validate(&self) -> Result<()> {
        for (i, a) in self.assignments.iter().enumerate() {
            if a.target >= self.target.len() {
                return Err(Error::InvariantError("target cone out of range".into()));
            }
            let src = &self.source.cones()[i];
            let dst = &self.target.cones()[a.target];
            if a.charmap.rows != src.cone.group().rank()
                || a.charmap.cols != dst.cone.group().rank()
            {
                return Err(Error::InvariantError(format!(
                    "character map of cone {} has the wrong shape",
                    i
                )));
            }
            let f = self.point_map(i);
            for r in src.cone.rays() {
                if !dst.cone.contains_int(&f.apply(r)) {
                    return Err(Error::InvariantError(format!(
                        "cone {} does not map into its target cone",
                        i
                    )));
                }
            }
            // kept points must map to kept points
            for face in src.kept_faces() {
                let rel = relint_point(&src.cone, face.mask);
                let img = f.apply(&rel);
                let Some(m) = dst.cone.min_face_int(&img) else {
                    return Err(Error::InvariantError(format!(
                        "cone {} maps outside its target cone",
                        i
                    )));
                };
                if dst.is_punctured_mask(m) {
                    return Err(Error::InvariantError(format!(
                        "kept face {:#x} of cone {} maps into a puncture",
                        face.mask, i
                    )));
                }
            }
        }
        // compatibility with the gluings on both sides
        for (gi, g) in self.source.gluings().iter().enumerate() {
            let ci = &self.source.cones()[g.i].cone;
            let fi = ci.face_cut_by(&g.cutter_i).expect("validated").mask;
            let psi = g.point_map();
            let f_i = self.point_map(g.i);
            let f_j = self.point_map(g.j);
            let ti = self.assignments[g.i].target;
            let tj = self.assignments[g.j].target;
            let rays: Vec<Vec<Int>> =
                rays_of_mask(ci, fi).into_iter().cloned().collect();
            let ok = self
                .target
                .morphisms_from(ti, self.target.cones()[ti].cone.improper_mask())
                .into_iter()
                .chain(self.target.derived().iter().filter(|d| d.i == ti).cloned())
                .filter(|d| d.j == tj)
                .any(|d| {
                    rays.iter().all(|r| {
                        let lhs = d.nmap.apply(&f_i.apply(r));
                        let rhs = f_j.apply(&psi.apply(r));
                        lhs == rhs
                    })
                });
            let trivially_ok = rays.is_empty()
                && (ti == tj || self.target.derived().iter().any(|d| d.i == ti && d.j == tj));
            if !(ok || trivially_ok) {
                return Err(Error::InvariantError(format!(
                    "morphism incompatible with gluing {}",
                    gi
                )));
            }
        }
        Ok(())
    }

    /// Preimage of a target cone: the subcones mapping into (a glued copy
    /// of) it, with induced punctures and gluings.
    pub fn preimage(&self, target_j: usize) -> Result<ConeComplex> {
        let mut piece_of: Vec<Option<usize>> = vec![None; self.source.len()];
        let mut pieces: Vec<PuncturedCone> = Vec::new();
        for (i, a) in self.assignments.iter().enumerate() {
            let src = &self.source.cones()[i];
            let piece_cone = if a.target == target_j {
                Some(src.cone.clone())
            } else {
                // restrict through the largest face glued between t(i) and j
                let mut best: Option<Cone> = None;
                for d in self.target.maximal_glued_faces(a.target, target_j) {
                    let tcone = &self.target.cones()[a.target].cone;
                    let tface = tcone.face_by_mask(d.face_i).expect("derived face");
                    let mut ineqs: Vec<Vec<Int>> = src.cone.facets().to_vec();
                    for e in src.cone.equations() {
                        ineqs.push(e.clone());
                        ineqs.push(arith::neg_vec(e));
                    }
                    // pull back the target cone and the face cutter through f_i
                    for t in tcone.facets() {
                        ineqs.push(self.assignments[i].charmap.apply(t));
                    }
                    for e in tcone.equations() {
                        ineqs.push(self.assignments[i].charmap.apply(e));
                        ineqs.push(arith::neg_vec(&self.assignments[i].charmap.apply(e)));
                    }
                    let pc = self.assignments[i].charmap.apply(&tface.cutter);
                    ineqs.push(pc.clone());
                    ineqs.push(arith::neg_vec(&pc));
                    let cone =
                        Cone::from_free_inequalities(src.cone.group().clone(), ineqs)
                            .expect("subcone of a pointed cone");
                    best = match best {
                        None => Some(cone),
                        Some(b) if cone.dim() > b.dim() => Some(cone),
                        keep => keep,
                    };
                }
                best
            };
            let Some(pcone) = piece_cone else { continue };
            // induced punctures: faces of the piece whose relative interiors
            // are punctured in the ambient cone
            let mut seeds = Vec::new();
            for f in pcone.faces() {
                if f.mask == pcone.improper_mask() && !pcone.is_zero_cone() {
                    continue;
                }
                let rel = relint_point(&pcone, f.mask);
                if let Some(m) = src.cone.min_face_int(&rel) {
                    if src.is_punctured_mask(m) {
                        seeds.push(f.mask);
                    }
                }
            }
            let closed = PuncturedCone::close_downward(&pcone, &seeds);
            let pc = PuncturedCone::new(pcone, closed).expect("closed punctures");
            piece_of[i] = Some(pieces.len());
            pieces.push(pc);
        }
        let mut gluings = Vec::new();
        for g in self.source.gluings() {
            let (Some(pi), Some(pj)) = (piece_of[g.i], piece_of[g.j]) else { continue };
            // restrict the gluing to the pieces when the faces still match
            let ci = &pieces[pi].cone;
            let cj = &pieces[pj].cone;
            let (Some(fi), Some(fj)) = (ci.face_cut_by(&g.cutter_i), cj.face_cut_by(&g.cutter_j))
            else {
                continue;
            };
            let nmap = g.point_map();
            if image_mask(&nmap, ci, fi.mask, cj) == Some(fj.mask) {
                gluings.push(Gluing { i: pi, j: pj, ..g.clone() });
            }
        }
        ConeComplex::new(pieces, gluings)
    }
}

/// An integer point in the relative interior of a face: the sum of its rays
/// (the origin for the zero face).
pub(crate) fn relint_point(cone: &Cone, mask: u128) -> Vec<Int> {
    let rank = cone.group().rank();
    let mut p = arith::zeros(rank);
    for r in rays_of_mask(cone, mask) {
        p = arith::add_vec(&p, r);
    }
    let _ = Int::zero();
    p
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::arith::vec_from_i64 as v64;
    use crate::cone::Membership;
    use crate::group::{elem_from_i64 as e64, CharacterGroup};

    fn ray_cone() -> Cone {
        Cone::from_inequalities(CharacterGroup::free(1), vec![e64(&[1])]).unwrap()
    }

    /// Two affine lines glued along their origin faces; `charmap` ±1.
    fn line_pair(charmap: i64, punctured: bool) -> ConeComplex {
        let mk = || {
            let c = ray_cone();
            if punctured {
                PuncturedCone::new(c, vec![0]).unwrap()
            } else {
                PuncturedCone::unpunctured(c)
            }
        };
        ConeComplex::new(
            vec![mk(), mk()],
            vec![Gluing {
                i: 0,
                cutter_i: e64(&[1]),
                j: 1,
                cutter_j: e64(&[1]),
                charmap: IntMat::from_i64(&[&[charmap]]),
            }],
        )
        .unwrap()
    }

    pub(crate) fn p1() -> ConeComplex {
        line_pair(-1, false)
    }

    pub(crate) fn doubled_line() -> ConeComplex {
        line_pair(1, false)
    }

    fn quadrant() -> Cone {
        Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap()
    }

    /// Fan of the blow-up of the plane: two cones sharing the diagonal ray.
    fn blowup_fan() -> ConeComplex {
        let a = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[0, -1]), v64(&[-1, -1])]).unwrap();
        let b = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[-1, -1]), v64(&[-1, 0])]).unwrap();
        // shared face: the diagonal ray; cut in a by y/x = (-1,1), in b by x/y
        ConeComplex::new(
            vec![PuncturedCone::unpunctured(a), PuncturedCone::unpunctured(b)],
            vec![Gluing {
                i: 0,
                cutter_i: e64(&[-1, 1]),
                j: 1,
                cutter_j: e64(&[1, -1]),
                charmap: IntMat::identity(2),
            }],
        )
        .unwrap()
    }

    /// Two copies of the standard cone glued into a loop with a shear.
    pub(crate) fn tate_loop() -> ConeComplex {
        let c = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[0, -1]), v64(&[-1, -1])]).unwrap();
        let punct = |c: &Cone| PuncturedCone::new(c.clone(), vec![0]).unwrap();
        ConeComplex::new(
            vec![punct(&c), punct(&c)],
            vec![
                Gluing {
                    i: 0,
                    cutter_i: e64(&[-1, 1]),
                    j: 1,
                    cutter_j: e64(&[-1, 1]),
                    charmap: IntMat::identity(2),
                },
                Gluing {
                    i: 1,
                    cutter_i: e64(&[1, 0]),
                    j: 0,
                    cutter_j: e64(&[1, 0]),
                    charmap: IntMat::from_i64(&[&[1, 1], &[0, 1]]),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn p1_pattern_is_valid_and_contiguous() {
        let c = p1();
        let shared = c.contiguous(0, 1).expect("contiguous at the origin");
        assert_eq!(shared.dim, 0);
        let self_face = c.contiguous(0, 0).unwrap();
        assert_eq!(self_face.dim, 1);
    }

    #[test]
    fn self_glued_faces_rejected() {
        // one 2-cone with its two boundary rays identified
        let q = quadrant();
        let err = ConeComplex::new(
            vec![PuncturedCone::unpunctured(q)],
            vec![Gluing {
                i: 0,
                cutter_i: e64(&[1, 0]),
                j: 0,
                cutter_j: e64(&[0, 1]),
                // swap coordinates: maps the face v1=0 onto v2=0
                charmap: IntMat::from_i64(&[&[0, 1], &[1, 0]]),
            }],
        );
        assert!(matches!(err, Err(Error::SelfGluedFaces { .. })));
    }

    #[test]
    fn tate_loop_monodromy() {
        let c = tate_loop();
        let sys = c.monodromy(0);
        assert_eq!(sys.loops.len(), 1);
        assert!(!sys.is_constant());
        assert_eq!(sys.loops[0].monodromy_k, IntMat::from_i64(&[&[1, 1], &[0, 1]]));
        assert!(matches!(c.develop(0), Err(Error::NonConstantSystem { .. })));
    }

    #[test]
    fn loop_with_trivial_product_is_constant() {
        let c = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[0, -1]), v64(&[-1, -1])]).unwrap();
        let punct = |c: &Cone| PuncturedCone::new(c.clone(), vec![0]).unwrap();
        let complex = ConeComplex::new(
            vec![punct(&c), punct(&c)],
            vec![
                Gluing {
                    i: 0,
                    cutter_i: e64(&[-1, 1]),
                    j: 1,
                    cutter_j: e64(&[-1, 1]),
                    charmap: IntMat::identity(2),
                },
                Gluing {
                    i: 1,
                    cutter_i: e64(&[1, 0]),
                    j: 0,
                    cutter_j: e64(&[1, 0]),
                    charmap: IntMat::identity(2),
                },
            ],
        )
        .unwrap();
        let sys = complex.monodromy(0);
        assert_eq!(sys.loops.len(), 1);
        assert!(sys.is_constant());
        assert!(complex.develop(0).is_ok());
    }

    #[test]
    fn develop_p1_gives_opposite_rays() {
        let c = p1();
        let t = c.develop(0).unwrap();
        let t1 = t[1].as_ref().unwrap();
        assert_eq!(t1.apply(&v64(&[-1])), v64(&[1]));
        // doubled line: both rays land on the same side
        let d = doubled_line();
        let td = d.develop(0).unwrap();
        assert_eq!(td[1].as_ref().unwrap().apply(&v64(&[-1])), v64(&[-1]));
    }

    #[test]
    fn big_star_of_unpunctured_fan_is_everything() {
        let c = blowup_fan();
        let star = c.big_star(0);
        assert_eq!(star.len(), 2);
        assert_eq!(star.cones()[0].punctures().len(), 0);
    }

    #[test]
    fn big_star_punctures_discontiguous_chain_end() {
        // chain of three 2-cones sharing rays, origins punctured: the ends
        // are related only through the punctured origin, hence discontiguous
        let cs: Vec<Cone> = (0..3)
            .map(|k: i64| {
                Cone::from_rays(
                    CharacterGroup::free(2),
                    vec![v64(&[-k, -1]), v64(&[-k - 1, -1])],
                )
                .unwrap()
            })
            .collect();
        let punct = |c: &Cone| PuncturedCone::new(c.clone(), vec![0]).unwrap();
        let chain = ConeComplex::new(
            vec![punct(&cs[0]), punct(&cs[1]), punct(&cs[2])],
            vec![
                // shared ray (-1,-1): cut by y/x on c0 and x/y on c1
                Gluing {
                    i: 0,
                    cutter_i: e64(&[-1, 1]),
                    j: 1,
                    cutter_j: e64(&[1, -1]),
                    charmap: IntMat::identity(2),
                },
                // shared ray (-2,-1): cut by y/x^2 on c1 and x^2/y on c2
                Gluing {
                    i: 1,
                    cutter_i: e64(&[-1, 2]),
                    j: 2,
                    cutter_j: e64(&[1, -2]),
                    charmap: IntMat::identity(2),
                },
            ],
        )
        .unwrap();
        assert!(chain.contiguous(0, 1).is_some());
        assert!(chain.contiguous(0, 2).is_none());
        let star = chain.big_star(0);
        assert_eq!(star.len(), 2);
        // the remaining neighbour is additionally punctured along the face
        // it shared with the removed cone
        assert!(star.cones()[1].punctures().len() > star.cones()[0].punctures().len());
    }

    #[test]
    fn small_star_members() {
        let c = blowup_fan();
        // at the shared diagonal ray of cone 0
        let shared = c.contiguous(0, 1).unwrap();
        let star = c.small_star(0, shared.mask);
        let members: Vec<usize> = star.iter().map(|d| d.j).collect();
        assert_eq!(members, vec![0, 1]);
        // at a maximal cone: only itself
        let (members2, _) = c.small_star_subcomplex(0);
        assert_eq!(members2, vec![0]);
    }

    #[test]
    fn puncture_along_boundary_of_plane() {
        let q = quadrant();
        let masks: Vec<u128> = q.proper_faces().map(|f| f.mask).collect();
        let complex = ConeComplex::single(PuncturedCone::unpunctured(q));
        let punctured = complex.puncture_along(&[masks.clone()]).unwrap();
        assert_eq!(punctured.cones()[0].punctures().len(), 3);
        // idempotent
        let again = punctured.puncture_along(&[masks]).unwrap();
        assert_eq!(again, punctured);
        // puncturing along everything is rejected
        let all: Vec<u128> = complex.cones()[0].cone.faces().iter().map(|f| f.mask).collect();
        assert!(matches!(
            complex.puncture_along(&[all]),
            Err(Error::NotASubcomplex(_))
        ));
        // empty subcomplex is the identity
        let same = complex.puncture_along(&[vec![]]).unwrap();
        assert_eq!(same, complex);
    }

    #[test]
    fn preimage_of_identity_is_star_closure() {
        let c = blowup_fan();
        let id = ComplexMorphism::new(
            c.clone(),
            c.clone(),
            vec![
                Assignment { target: 0, charmap: IntMat::identity(2) },
                Assignment { target: 1, charmap: IntMat::identity(2) },
            ],
        )
        .unwrap();
        let pre = id.preimage(0).unwrap();
        assert_eq!(pre.len(), 2);
        assert_eq!(pre.cones()[0].cone.dim(), 2);
        assert_eq!(pre.cones()[1].cone.dim(), 1); // the glued diagonal ray
    }

    #[test]
    fn preimage_of_blowdown_is_whole_fan() {
        let bl = blowup_fan();
        let a2 = ConeComplex::single(PuncturedCone::unpunctured(quadrant()));
        let m = ComplexMorphism::new(
            bl,
            a2,
            vec![
                Assignment { target: 0, charmap: IntMat::identity(2) },
                Assignment { target: 0, charmap: IntMat::identity(2) },
            ],
        )
        .unwrap();
        let pre = m.preimage(0).unwrap();
        assert_eq!(pre.len(), 2);
        assert!(pre.cones().iter().all(|p| p.cone.dim() == 2));
    }

    #[test]
    fn morphism_must_respect_punctures() {
        // formal disc mapping to the unpunctured line is fine;
        // the unpunctured line mapping to the formal disc is not.
        let disc = ConeComplex::single(PuncturedCone::new(ray_cone(), vec![0]).unwrap());
        let line = ConeComplex::single(PuncturedCone::unpunctured(ray_cone()));
        assert!(ComplexMorphism::new(
            disc.clone(),
            line.clone(),
            vec![Assignment { target: 0, charmap: IntMat::identity(1) }],
        )
        .is_ok());
        assert!(ComplexMorphism::new(
            line,
            disc,
            vec![Assignment { target: 0, charmap: IntMat::identity(1) }],
        )
        .is_err());
    }

    #[test]
    fn canonical_relabeling_is_stable() {
        let c = p1();
        assert_eq!(c.canonical(), c.canonical().canonical());
    }

    #[test]
    fn realization_count_matches_gluing_classes() {
        // for the blow-up fan, each grid point of the quadrant is kept by
        // exactly the pieces containing it; shared boundary points form one
        // atlas class
        let c = blowup_fan();
        for x in -5..=5i64 {
            for y in -5..=5i64 {
                let v = v64(&[x, y]);
                let holders: Vec<usize> = (0..2)
                    .filter(|&k| c.cones()[k].membership_int(&v) == Membership::Kept)
                    .collect();
                let classes = if holders.len() == 2 {
                    // identified iff the point lies on the shared ray
                    let shared = c.contiguous(0, 1).unwrap();
                    let on_shared = c.cones()[0]
                        .cone
                        .face_by_mask(shared.mask)
                        .map(|f| {
                            rays_of_mask(&c.cones()[0].cone, f.mask)
                                .iter()
                                .any(|r| arith::primitive(&v) == **r || v == v64(&[0, 0]))
                        })
                        .unwrap_or(false);
                    if on_shared || v == v64(&[0, 0]) {
                        1
                    } else {
                        2
                    }
                } else {
                    holders.len()
                };
                if x <= 0 && y <= 0 {
                    assert!(classes >= 1, "point ({},{}) uncovered", x, y);
                } else {
                    assert_eq!(holders.len(), 0);
                }
            }
        }
    }
}
