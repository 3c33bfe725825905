//! The scheme ↔ complex dictionary and the geometric constructions riding
//! on it: sigma and its adjoint, chart-wise normalization, blow-ups along
//! monomial ideals, formal completion, algebraisation, and the staged
//! expansion constructions.

use crate::algebra::{F1Algebra, MonomialIdeal};
use crate::arith::{self, Int, IntMat};
use crate::complex::{Assignment, ComplexMorphism, ConeComplex, Gluing};
use crate::cone::{Cone, PuncturedCone};
use crate::error::{Error, Result};
use crate::group::GroupElem;
use num_traits::Zero;

/// How many multiples of a generator are tried when checking that ideals
/// agree up to radical across a gluing.
const RADICAL_CHECK_BOUND: u32 = 12;

/// A gluing of charts: localize(A_i, f_i) and localize(A_j, f_j) are
/// identified through a character isomorphism K^×_j -> K^×_i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtlasGluing {
    pub i: usize,
    pub f_i: GroupElem,
    pub j: usize,
    pub f_j: GroupElem,
    pub charmap: IntMat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeAtlas {
    charts: Vec<F1Algebra>,
    gluings: Vec<AtlasGluing>,
}

impl SchemeAtlas {
    pub fn single(chart: F1Algebra) -> SchemeAtlas {
        SchemeAtlas { charts: vec![chart], gluings: Vec::new() }
    }

    pub fn new(charts: Vec<F1Algebra>, gluings: Vec<AtlasGluing>) -> Result<SchemeAtlas> {
        for (idx, g) in gluings.iter().enumerate() {
            let fail = |reason: &str| Error::NonIsomorphicGluing { index: idx, reason: reason.into() };
            if g.i >= charts.len() || g.j >= charts.len() {
                return Err(fail("chart index out of range"));
            }
            let ai = &charts[g.i];
            let aj = &charts[g.j];
            if !ai.characters().is_free() || !aj.characters().is_free() {
                return Err(fail("glued charts must have torsion-free characters"));
            }
            if !ai.monoid_contains(&g.f_i) || !aj.monoid_contains(&g.f_j) {
                return Err(fail("gluing element is not a monoid member"));
            }
            if g.charmap.rows != ai.characters().rank()
                || g.charmap.cols != aj.characters().rank()
                || g.charmap.rows != g.charmap.cols
            {
                return Err(fail("character map has the wrong shape"));
            }
            let Some(inv) = arith::unimodular_inverse(&g.charmap) else {
                return Err(fail("character map is not invertible over Z"));
            };
            // the localizations must correspond under the character map
            let li = ai.localize(&g.f_i).expect("member");
            let lj = aj.localize(&g.f_j).expect("member");
            let push = |m: &IntMat, e: &GroupElem, grp: &crate::group::CharacterGroup| {
                grp.elem_free(m.apply(&e.free))
            };
            for gen in lj.generators() {
                if !li.monoid_contains(&push(&g.charmap, gen, ai.characters())) {
                    return Err(fail("character map does not carry one localization into the other"));
                }
            }
            for gen in li.generators() {
                if !lj.monoid_contains(&push(&inv, gen, aj.characters())) {
                    return Err(fail("inverse character map does not carry the localization back"));
                }
            }
        }
        Ok(SchemeAtlas { charts, gluings })
    }

    pub fn charts(&self) -> &[F1Algebra] {
        &self.charts
    }

    pub fn gluings(&self) -> &[AtlasGluing] {
        &self.gluings
    }

    /// Chart-wise normalization; the gluing data is untouched because
    /// normalization is a homeomorphism and keeps every character group.
    pub fn normalize(&self, dim_bound: usize) -> Result<(SchemeAtlas, Vec<bool>)> {
        let mut charts = Vec::new();
        let mut flags = Vec::new();
        for c in &self.charts {
            let (n, was_normal) = c.normalize(dim_bound)?;
            charts.push(n);
            flags.push(was_normal);
        }
        Ok((SchemeAtlas::new(charts, self.gluings.clone())?, flags))
    }

    /// The cone complex of the atlas: polar cones glued along the faces cut
    /// by the gluing elements.
    pub fn sigma(&self) -> Result<ConeComplex> {
        self.sigma_with_punctures(None)
    }

    fn sigma_with_punctures(&self, ideals: Option<&[MonomialIdeal]>) -> Result<ConeComplex> {
        let mut cones = Vec::new();
        for (k, chart) in self.charts.iter().enumerate() {
            let sigma = chart.polar_cone();
            let punctures = match ideals {
                Some(list) if !list[k].generators.is_empty() => {
                    chart.completion_punctures(&list[k])?
                }
                _ => Vec::new(),
            };
            cones.push(PuncturedCone::new(sigma, punctures)?);
        }
        let gluings = self
            .gluings
            .iter()
            .map(|g| Gluing {
                i: g.i,
                cutter_i: g.f_i.clone(),
                j: g.j,
                cutter_j: g.f_j.clone(),
                charmap: g.charmap.clone(),
            })
            .collect();
        ConeComplex::new(cones, gluings)
    }
}

/// A scheme atlas together with an ideal of definition per chart. An empty
/// generator list is the zero ideal: the chart is marked everywhere and its
/// completion is the chart itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalSchemeAtlas {
    pub atlas: SchemeAtlas,
    pub ideals: Vec<MonomialIdeal>,
}

impl FormalSchemeAtlas {
    pub fn new(atlas: SchemeAtlas, ideals: Vec<MonomialIdeal>) -> Result<FormalSchemeAtlas> {
        if ideals.len() != atlas.charts.len() {
            return Err(Error::InvariantError("one ideal of definition per chart".into()));
        }
        // compatibility across gluings: generators land in each other's
        // radical after localization, checked by bounded monoid membership
        for (idx, g) in atlas.gluings.iter().enumerate() {
            let ti = &ideals[g.i];
            let tj = &ideals[g.j];
            if ti.generators.is_empty() != tj.generators.is_empty() {
                return Err(Error::IncompatibleIdeals {
                    index: idx,
                    generator: "zero ideal glued to a nonzero one".into(),
                });
            }
            if ti.generators.is_empty() {
                continue;
            }
            let ai = &atlas.charts[g.i];
            let aj = &atlas.charts[g.j];
            let li = ai.localize(&g.f_i).expect("member");
            let lj = aj.localize(&g.f_j).expect("member");
            let inv = arith::unimodular_inverse(&g.charmap).expect("validated");
            let radical_contains = |loc: &F1Algebra, ideal: &MonomialIdeal, x: &GroupElem| -> bool {
                (1..=RADICAL_CHECK_BOUND).any(|k| {
                    let kx = loc.characters().scale(&Int::from(k as i64), x);
                    ideal
                        .generators
                        .iter()
                        .any(|t| loc.monoid_contains(&loc.characters().sub(&kx, t)))
                })
            };
            for t in &tj.generators {
                let tx = ai.characters().elem_free(g.charmap.apply(&t.free));
                if !radical_contains(&li, ti, &tx) {
                    return Err(Error::IncompatibleIdeals {
                        index: idx,
                        generator: format!("{:?}", t),
                    });
                }
            }
            for t in &ti.generators {
                let tx = aj.characters().elem_free(inv.apply(&t.free));
                if !radical_contains(&lj, tj, &tx) {
                    return Err(Error::IncompatibleIdeals {
                        index: idx,
                        generator: format!("{:?}", t),
                    });
                }
            }
        }
        Ok(FormalSchemeAtlas { atlas, ideals })
    }

    /// Punctured cone complex: polar cones with completion punctures.
    pub fn sigma(&self) -> Result<ConeComplex> {
        self.atlas.sigma_with_punctures(Some(&self.ideals))
    }
}

/// Formal completion: attach ideals of definition. Returns the marked atlas
/// and the charts on which completion fails to be injective (the Krull
/// warning list). Completing twice along the same ideals is the identity.
pub fn complete(atlas: &SchemeAtlas, ideals: Vec<MonomialIdeal>) -> Result<(FormalSchemeAtlas, Vec<usize>)> {
    if ideals.iter().any(|t| t.generators.is_empty()) {
        return Err(Error::ZeroIdeal);
    }
    let warnings: Vec<usize> = atlas
        .charts
        .iter()
        .enumerate()
        .filter(|(k, chart)| !chart.krull_injective(&ideals[*k]))
        .map(|(k, _)| k)
        .collect();
    let fsa = FormalSchemeAtlas::new(atlas.clone(), ideals)?;
    Ok((fsa, warnings))
}

/// Left adjoint to sigma: one normal chart per cone, built from the Hilbert
/// basis of the polar monoid, with punctures converted to ideals of
/// definition through their cutters.
pub fn spec(complex: &ConeComplex, dim_bound: usize) -> Result<FormalSchemeAtlas> {
    let mut charts = Vec::new();
    let mut ideals = Vec::new();
    for pc in complex.cones() {
        let gens = pc.cone.polar_monoid_generators(dim_bound)?;
        let chart = F1Algebra::embedded_unchecked(pc.cone.group().clone(), gens);
        let marks: Vec<GroupElem> = pc
            .maximal_punctures()
            .into_iter()
            .map(|m| {
                let f = pc.cone.face_by_mask(m).expect("puncture is a face");
                f.cutter_elem(pc.cone.group())
            })
            .collect();
        ideals.push(MonomialIdeal { generators: marks });
        charts.push(chart);
    }
    let gluings = complex
        .gluings()
        .iter()
        .map(|g| AtlasGluing {
            i: g.i,
            f_i: g.cutter_i.clone(),
            j: g.j,
            f_j: g.cutter_j.clone(),
            charmap: g.charmap.clone(),
        })
        .collect();
    let atlas = SchemeAtlas::new(charts, gluings)?;
    FormalSchemeAtlas::new(atlas, ideals)
}

/// Result of a blow-up: the new atlas, the refinement morphism of fans, and
/// bookkeeping about where each new chart came from.
#[derive(Debug)]
pub struct BlowUp {
    pub atlas: SchemeAtlas,
    pub morphism: ComplexMorphism,
    /// (original chart, dominant ideal generator) per new chart.
    pub origins: Vec<(usize, GroupElem)>,
    /// Whether each new chart was already normal.
    pub chart_was_normal: Vec<bool>,
}

/// Blow up an atlas along per-chart monomial ideals (compatible on
/// overlaps). Fan level: each polar cone is refined by the ideal
/// generators; chart level: one localized Rees chart per dominant
/// generator. The returned morphism is the refinement, proper birational.
pub fn blow_up(
    atlas: &SchemeAtlas,
    ideals: &[MonomialIdeal],
    normalize_charts: bool,
    dim_bound: usize,
) -> Result<BlowUp> {
    if ideals.len() != atlas.charts().len() || ideals.iter().any(|t| t.generators.is_empty()) {
        return Err(Error::ZeroIdeal);
    }
    // reuse the compatibility check of formal completion
    FormalSchemeAtlas::new(atlas.clone(), ideals.to_vec())?;

    struct Piece {
        chart: usize,
        generator: GroupElem,
        cone: Cone,
        algebra: F1Algebra,
        was_normal: bool,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    for (ci, chart) in atlas.charts().iter().enumerate() {
        let sigma = chart.polar_cone();
        for s in &ideals[ci].generators {
            // domain where s is the minimal valuation among the generators
            let mut ineqs: Vec<Vec<Int>> = sigma.facets().to_vec();
            for e in sigma.equations() {
                ineqs.push(e.clone());
                ineqs.push(arith::neg_vec(e));
            }
            for t in &ideals[ci].generators {
                if t != s {
                    ineqs.push(arith::sub_vec(&t.free, &s.free));
                }
            }
            let cone = Cone::from_free_inequalities(sigma.group().clone(), ineqs)
                .expect("piece of a pointed cone");
            if cone.dim() != sigma.dim() {
                continue;
            }
            if pieces.iter().any(|p| p.chart == ci && p.cone == cone) {
                continue;
            }
            let mut algebra = chart.rees_chart(&ideals[ci], s)?;
            let (normalized, was_normal) = algebra.normalize(dim_bound)?;
            if normalize_charts {
                algebra = normalized;
            }
            pieces.push(Piece { chart: ci, generator: s.clone(), cone, algebra, was_normal });
        }
    }

    let mut gluings: Vec<AtlasGluing> = Vec::new();
    // intra-chart wall gluings
    for a in 0..pieces.len() {
        for b in a + 1..pieces.len() {
            if pieces[a].chart != pieces[b].chart {
                continue;
            }
            let wall = pieces[a].cone.intersect(&pieces[b].cone)?;
            if wall.dim() + 1 != pieces[a].cone.dim() {
                continue;
            }
            // cutter of the wall inside each piece: difference of the
            // dominant generators, nonpositive on the piece by construction
            let diff_a = pieces[a]
                .cone
                .group()
                .elem_free(arith::sub_vec(&pieces[b].generator.free, &pieces[a].generator.free));
            let diff_b = pieces[a]
                .cone
                .group()
                .elem_free(arith::sub_vec(&pieces[a].generator.free, &pieces[b].generator.free));
            gluings.push(AtlasGluing {
                i: a,
                f_i: diff_a,
                j: b,
                f_j: diff_b,
                charmap: IntMat::identity(pieces[a].cone.group().rank()),
            });
        }
    }
    // inter-chart gluings: restrict each original gluing to matching pieces
    for g in atlas.gluings() {
        let psi = g.charmap.transpose();
        let psi_inv = arith::unimodular_inverse(&psi).expect("validated");
        for (a, pa) in pieces.iter().enumerate() {
            if pa.chart != g.i {
                continue;
            }
            for (b, pb) in pieces.iter().enumerate() {
                if pb.chart != g.j {
                    continue;
                }
                // overlap of piece a with the glued face, transported to j
                let Some(face_a) = pa.cone.face_cut_by(&g.f_i) else { continue };
                let Some(face_b) = pb.cone.face_cut_by(&g.f_j) else { continue };
                let fa_rays: Vec<Vec<Int>> = crate::cone::mask_indices(face_a.mask)
                    .into_iter()
                    .filter(|&k| k < pa.cone.rays().len())
                    .map(|k| arith::primitive(&psi_inv.apply(&pa.cone.rays()[k])))
                    .collect();
                let fb_rays: Vec<Vec<Int>> = crate::cone::mask_indices(face_b.mask)
                    .into_iter()
                    .filter(|&k| k < pb.cone.rays().len())
                    .map(|k| pb.cone.rays()[k].clone())
                    .collect();
                let mut fa_sorted = fa_rays.clone();
                fa_sorted.sort();
                let mut fb_sorted = fb_rays.clone();
                fb_sorted.sort();
                if fa_sorted != fb_sorted {
                    continue;
                }
                gluings.push(AtlasGluing {
                    i: a,
                    f_i: g.f_i.clone(),
                    j: b,
                    f_j: g.f_j.clone(),
                    charmap: g.charmap.clone(),
                });
            }
        }
    }
    let new_atlas = SchemeAtlas::new(pieces.iter().map(|p| p.algebra.clone()).collect(), gluings)?;
    let source = new_atlas.sigma()?;
    let target = atlas.sigma()?;
    let assignments = pieces
        .iter()
        .map(|p| Assignment {
            target: p.chart,
            charmap: IntMat::identity(p.cone.group().rank()),
        })
        .collect();
    let morphism = ComplexMorphism::new(source, target, assignments)?;
    Ok(BlowUp {
        atlas: new_atlas,
        morphism,
        origins: pieces.iter().map(|p| (p.chart, p.generator.clone())).collect(),
        chart_was_normal: pieces.iter().map(|p| p.was_normal).collect(),
    })
}

/// The formally embedded closure of the open generated by one cone's faces:
/// the big star of that cone.
pub fn embedded_closure(complex: &ConeComplex, cone: usize) -> ConeComplex {
    complex.big_star(cone)
}

/// Algebraisation: when the character local system is constant, rebuild the
/// scheme atlas whose completion along the returned markings recovers the
/// complex. Pairs of cones whose glued overlap was punctured away entirely
/// are re-glued along their zero faces (the generic gluing); overlaps that
/// survive are re-glued along the full underlying faces.
pub fn algebraise(
    complex: &ConeComplex,
    dim_bound: usize,
) -> Result<(SchemeAtlas, Vec<MonomialIdeal>)> {
    if complex.is_empty() {
        return Err(Error::InvariantError("empty complex".into()));
    }
    if complex.components().len() != 1 {
        return Err(Error::InvariantError("algebraise needs a connected complex".into()));
    }
    let base = 0usize;
    let sys = complex.monodromy(base);
    if let Some(l) = sys.loops.iter().find(|l| !l.monodromy_n.is_identity()) {
        return Err(Error::NonConstantCharacters {
            cone: base,
            witness: l.monodromy_k.clone(),
        });
    }
    // charts: normal algebras of the underlying cones, punctures dropped
    let mut charts = Vec::new();
    let mut markings = Vec::new();
    for pc in complex.cones() {
        let gens = pc.cone.polar_monoid_generators(dim_bound)?;
        charts.push(F1Algebra::embedded_unchecked(pc.cone.group().clone(), gens));
        let marks: Vec<GroupElem> = pc
            .maximal_punctures()
            .into_iter()
            .map(|m| pc.cone.face_by_mask(m).expect("face").cutter_elem(pc.cone.group()))
            .collect();
        markings.push(MonomialIdeal { generators: marks });
    }
    let transports: Vec<IntMat> = sys
        .transports
        .iter()
        .map(|t| t.clone().expect("connected complex"))
        .collect();
    let mut gluings: Vec<AtlasGluing> = Vec::new();
    for i in 0..complex.len() {
        for j in i + 1..complex.len() {
            // point transport N_i -> N_j through the constant system
            let tj_inv = arith::unimodular_inverse(&transports[j]).expect("unimodular");
            let psi = tj_inv.mul(&transports[i]);
            let charmap = psi.transpose();
            let maximal = complex.maximal_glued_faces(i, j);
            let kept: Vec<_> = maximal
                .iter()
                .filter(|d| !complex.cones()[i].is_punctured_mask(d.face_i))
                .collect();
            if !kept.is_empty() {
                // fill with the full underlying faces, one gluing per
                // maximal glued face, in a fixed lexicographic order
                let mut sorted: Vec<_> = maximal.iter().collect();
                sorted.sort_by_key(|d| d.face_i);
                for d in sorted {
                    let fi = complex.cones()[i].cone.face_by_mask(d.face_i).expect("face");
                    let fj = complex.cones()[j].cone.face_by_mask(d.face_j).expect("face");
                    gluings.push(AtlasGluing {
                        i,
                        f_i: fi.cutter_elem(complex.cones()[i].cone.group()),
                        j,
                        f_j: fj.cutter_elem(complex.cones()[j].cone.group()),
                        charmap: charmap.clone(),
                    });
                }
            } else if !maximal.is_empty() || complex.len() > 1 {
                // punctured-away (or merely indirect) overlap: glue along
                // the zero faces, i.e. at the generic point
                let fi = complex.cones()[i].cone.face_by_mask(
                    if complex.cones()[i].cone.is_zero_cone() {
                        complex.cones()[i].cone.improper_mask()
                    } else {
                        0
                    },
                );
                let fj = complex.cones()[j].cone.face_by_mask(
                    if complex.cones()[j].cone.is_zero_cone() {
                        complex.cones()[j].cone.improper_mask()
                    } else {
                        0
                    },
                );
                let (Some(fi), Some(fj)) = (fi, fj) else { continue };
                gluings.push(AtlasGluing {
                    i,
                    f_i: fi.cutter_elem(complex.cones()[i].cone.group()),
                    j,
                    f_j: fj.cutter_elem(complex.cones()[j].cone.group()),
                    charmap: charmap.clone(),
                });
            }
        }
    }
    let atlas = SchemeAtlas::new(charts, gluings)?;
    Ok((atlas, markings))
}

/// Which of the three expansion recursions to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionKind {
    /// Advance (U, V, Z) := (Ũ, Ṽ, Z × Ṽ): the expanded degeneration.
    El,
    /// Advance (U, V, Z) := (U₀, Ṽ, Z̃): full stages with strict transforms.
    Sur,
    /// Advance (U, V, Z) := (U₀, Ũ, Z̃): only the chart of the germ.
    SurLower,
}

/// Input to the expansion engine: an affine cone V, the open face U cut by
/// `face_cutter`, and the centre ideal Z (log generators).
#[derive(Clone, Debug)]
pub struct ExpansionDatum {
    pub cone: Cone,
    pub face_cutter: GroupElem,
    pub center: Vec<GroupElem>,
}

struct StageCone {
    cone: Cone,
    /// strict-transform data: (original generator, rays of its divisor)
    z: Vec<(GroupElem, Vec<Vec<Int>>)>,
    /// None when the chart lies inside U (the equation became a unit)
    f: Option<GroupElem>,
}

/// Stage complexes 1..k of the chosen expansion recursion.
pub fn expansion_stages(
    datum: &ExpansionDatum,
    kind: ExpansionKind,
    stages: u32,
) -> Result<Vec<ConeComplex>> {
    if datum.center.is_empty() || datum.center.iter().any(|z| z.is_zero()) {
        return Err(Error::ZeroCenter);
    }
    if datum.cone.face_cut_by(&datum.face_cutter).is_none() {
        return Err(Error::InvariantError("face cutter does not cut a face of V".into()));
    }
    let group = datum.cone.group().clone();
    let divisor_rays = |g: &GroupElem, cone: &Cone| -> Vec<Vec<Int>> {
        cone.rays()
            .iter()
            .filter(|r| arith::dot(&g.free, r) < Int::zero())
            .cloned()
            .collect()
    };
    let f_rays = divisor_rays(&datum.face_cutter, &datum.cone);
    if datum
        .center
        .iter()
        .all(|z| divisor_rays(z, &datum.cone).is_empty())
    {
        return Err(Error::ZeroCenter);
    }
    let mut state = vec![StageCone {
        cone: datum.cone.clone(),
        z: datum
            .center
            .iter()
            .map(|z| (z.clone(), divisor_rays(z, &datum.cone)))
            .collect(),
        f: Some(datum.face_cutter.clone()),
    }];
    let mut out = Vec::new();
    for _stage in 0..stages {
        let mut next: Vec<StageCone> = Vec::new();
        for sc in &state {
            // centre on this chart: strict transforms of Z plus the equation of U's complement
            let mut cands: Vec<GroupElem> = sc.z.iter().map(|(g, _)| g.clone()).collect();
            let effective = !cands.is_empty() && sc.f.is_some();
            if let Some(f) = &sc.f {
                cands.push(f.clone());
            }
            if !effective {
                next.push(StageCone {
                    cone: sc.cone.clone(),
                    z: sc.z.clone(),
                    f: sc.f.clone(),
                });
                continue;
            }
            let pieces = sc.cone.refine_by_function(&cands, false);
            for piece in pieces {
                // strict transform of a divisor on the piece: prescribe the
                // original multiplicities on the original divisor rays and
                // zero on all others
                let strict = |orig: &GroupElem, rays: &[Vec<Int>]| -> Result<Option<GroupElem>> {
                    let present: Vec<&Vec<Int>> = piece
                        .rays()
                        .iter()
                        .filter(|r| rays.contains(r))
                        .collect();
                    if present.is_empty() {
                        return Ok(None);
                    }
                    let rows: Vec<Vec<Int>> = piece.rays().to_vec();
                    let rhs: Vec<Int> = piece
                        .rays()
                        .iter()
                        .map(|r| {
                            if rays.contains(r) {
                                arith::dot(&orig.free, r)
                            } else {
                                Int::zero()
                            }
                        })
                        .collect();
                    let m = IntMat::from_rows(rows);
                    match arith::solve_integer(&m, &rhs) {
                        Some(gvec) => Ok(Some(group.elem_free(gvec))),
                        None => Err(Error::InvariantError(
                            "strict transform is not a monomial on this piece".into(),
                        )),
                    }
                };
                let new_f = match kind {
                    // Sur/sur keep U = pullback of U₀: the equation is the
                    // total transform, i.e. the original monomial
                    ExpansionKind::Sur | ExpansionKind::SurLower => sc.f.clone(),
                    // él advances U to the expansion chart: the complement
                    // becomes the strict transform of the original divisor
                    ExpansionKind::El => strict(&datum.face_cutter, &f_rays)?,
                };
                let new_z = match kind {
                    ExpansionKind::El => sc.z.clone(), // total transform
                    ExpansionKind::Sur | ExpansionKind::SurLower => {
                        let mut zz = Vec::new();
                        for (orig, rays) in &sc.z {
                            if let Some(g) = strict(orig, rays)? {
                                zz.push((g, rays.clone()));
                            }
                        }
                        zz
                    }
                };
                next.push(StageCone { cone: piece, z: new_z, f: new_f });
            }
        }
        // deduplicate cones (unchanged charts can coincide with pieces)
        let mut dedup: Vec<StageCone> = Vec::new();
        for sc in next {
            if !dedup.iter().any(|o| o.cone == sc.cone) {
                dedup.push(sc);
            }
        }
        state = dedup;
        if kind == ExpansionKind::SurLower {
            // keep only the germ chart: the piece still carrying the centre
            state.retain(|sc| !sc.z.is_empty());
            if state.len() != 1 {
                return Err(Error::InvariantError(
                    "sur expansion did not isolate a single germ chart".into(),
                ));
            }
        }
        let stage_cones: Vec<&StageCone> = match kind {
            ExpansionKind::El => state
                .iter()
                .filter(|sc| {
                    !sc.cone.rays().iter().any(|r| f_rays.contains(r))
                })
                .collect(),
            _ => state.iter().collect(),
        };
        out.push(chain_complex(&stage_cones.iter().map(|sc| sc.cone.clone()).collect::<Vec<_>>())?);
    }
    Ok(out)
}

/// Assemble cones living in one N into a complex, gluing along shared
/// facets (identity transitions).
pub fn chain_complex(cones: &[Cone]) -> Result<ConeComplex> {
    let pcs: Vec<PuncturedCone> = cones.iter().map(|c| PuncturedCone::unpunctured(c.clone())).collect();
    let mut gluings = Vec::new();
    for a in 0..cones.len() {
        for b in a + 1..cones.len() {
            let wall = cones[a].intersect(&cones[b])?;
            if wall.is_zero_cone() || wall.dim() + 1 != cones[a].dim().max(cones[b].dim()) {
                continue;
            }
            let cutter_a = face_cutter_for(&cones[a], &wall);
            let cutter_b = face_cutter_for(&cones[b], &wall);
            let (Some(fa), Some(fb)) = (cutter_a, cutter_b) else { continue };
            gluings.push(AtlasGluing {
                i: a,
                f_i: fa,
                j: b,
                f_j: fb,
                charmap: IntMat::identity(cones[a].group().rank()),
            });
        }
    }
    let complex_gluings = gluings
        .into_iter()
        .map(|g| Gluing { i: g.i, cutter_i: g.f_i, j: g.j, cutter_j: g.f_j, charmap: g.charmap })
        .collect();
    ConeComplex::new(pcs, complex_gluings)
}

/// The canonical cutter of a subcone that happens to be a face.
fn face_cutter_for(cone: &Cone, sub: &Cone) -> Option<GroupElem> {
    let mut mask = 0u128;
    for r in sub.rays() {
        let pos = cone.rays().iter().position(|s| s == r)?;
        mask |= 1 << pos;
    }
    cone.face_by_mask(mask)
        .map(|f| f.cutter_elem(cone.group()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::vec_from_i64 as v64;
    use crate::cone::DEFAULT_HILBERT_DIM_BOUND;
    use crate::group::{elem_from_i64 as e64, CharacterGroup};

    fn p1_atlas() -> SchemeAtlas {
        // F1[t] and F1[s] glued along F1[t^{±1}] with s = t^{-1}
        SchemeAtlas::new(
            vec![F1Algebra::free(1), F1Algebra::free(1)],
            vec![AtlasGluing {
                i: 0,
                f_i: e64(&[1]),
                j: 1,
                f_j: e64(&[1]),
                charmap: IntMat::from_i64(&[&[-1]]),
            }],
        )
        .unwrap()
    }

    #[test]
    fn sigma_of_p1_atlas() {
        let s = p1_atlas().sigma().unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contiguous(0, 1).is_some());
        let t = s.develop(0).unwrap();
        assert_eq!(t[1].as_ref().unwrap().apply(&v64(&[-1])), v64(&[1]));
    }

    #[test]
    fn sigma_spec_roundtrip_formal_plane() {
        let a2 = SchemeAtlas::single(F1Algebra::free(2));
        let t = MonomialIdeal::new(&a2.charts()[0], vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap();
        let (fsa, warnings) = complete(&a2, vec![t]).unwrap();
        assert!(warnings.is_empty());
        let sigma = fsa.sigma().unwrap();
        assert_eq!(sigma.cones()[0].punctures().len(), 3);
        let back = spec(&sigma, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        let sigma2 = back.sigma().unwrap();
        assert_eq!(sigma, sigma2);
        // the spec chart is F1[x, y] again
        assert!(back.atlas.charts()[0].monoid_equals(&F1Algebra::free(2)));
    }

    #[test]
    fn spec_of_blowup_fan_has_rees_charts() {
        let a = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[0, -1]), v64(&[-1, -1])]).unwrap();
        let b = Cone::from_rays(CharacterGroup::free(2), vec![v64(&[-1, -1]), v64(&[-1, 0])]).unwrap();
        let fan = chain_complex(&[a, b]).unwrap();
        let fsa = spec(&fan, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        let expected0 = F1Algebra::embedded_unchecked(
            CharacterGroup::free(2),
            vec![e64(&[1, 0]), e64(&[-1, 1])],
        );
        let expected1 = F1Algebra::embedded_unchecked(
            CharacterGroup::free(2),
            vec![e64(&[0, 1]), e64(&[1, -1])],
        );
        assert!(fsa.atlas.charts()[0].monoid_equals(&expected0));
        assert!(fsa.atlas.charts()[1].monoid_equals(&expected1));
        let round = fsa.sigma().unwrap();
        assert_eq!(round, fan);
    }

    #[test]
    fn normalize_scheme_fixes_cusp_chart_only() {
        let g = CharacterGroup::free(1);
        let cusp = F1Algebra::embedded(&g, vec![e64(&[2]), e64(&[3])]);
        let atlas = SchemeAtlas::new(vec![cusp, F1Algebra::free(1)], vec![]).unwrap();
        let (n, flags) = atlas.normalize(DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert_eq!(flags, vec![false, true]);
        assert!(n.charts()[0].monoid_equals(&F1Algebra::free(1)));
    }

    #[test]
    fn blow_up_plane_at_origin() {
        let a2 = SchemeAtlas::single(F1Algebra::free(2));
        let t = MonomialIdeal::new(&a2.charts()[0], vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap();
        let bl = blow_up(&a2, &[t], false, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert_eq!(bl.atlas.charts().len(), 2);
        let expected0 = F1Algebra::embedded_unchecked(
            CharacterGroup::free(2),
            vec![e64(&[1, 0]), e64(&[-1, 1])],
        );
        let expected1 = F1Algebra::embedded_unchecked(
            CharacterGroup::free(2),
            vec![e64(&[0, 1]), e64(&[1, -1])],
        );
        assert!(bl.atlas.charts()[0].monoid_equals(&expected0));
        assert!(bl.atlas.charts()[1].monoid_equals(&expected1));
        assert!(bl.chart_was_normal.iter().all(|&b| b));
        // the fan is split along the diagonal
        let fan = bl.morphism.source.clone();
        let mut rays: Vec<Vec<Int>> = fan.cones().iter().flat_map(|c| c.cone.rays().to_vec()).collect();
        rays.sort();
        rays.dedup();
        assert!(rays.contains(&v64(&[-1, -1])));
    }

    #[test]
    fn blow_up_principal_is_isomorphism() {
        let a2 = SchemeAtlas::single(F1Algebra::free(2));
        let t = MonomialIdeal::new(&a2.charts()[0], vec![e64(&[1, 0])]).unwrap();
        let bl = blow_up(&a2, &[t], false, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert_eq!(bl.atlas.charts().len(), 1);
        assert!(bl.atlas.charts()[0].monoid_equals(&F1Algebra::free(2)));
    }

    #[test]
    fn blow_up_index_two_quadrant_is_not_normal() {
        // quadrant monoid inside an index-2 lattice: the chart of the
        // blow-up along (x^2, y^2) needs saturation
        let g = CharacterGroup::free(2);
        let a = F1Algebra::embedded(&g, vec![e64(&[2, 0]), e64(&[1, 1]), e64(&[0, 2])]);
        let atlas = SchemeAtlas::single(a);
        let x2 = atlas.charts()[0].generators()[0].clone();
        let y2 = atlas.charts()[0].generators()[2].clone();
        let t = MonomialIdeal::new(&atlas.charts()[0], vec![x2, y2]).unwrap();
        let bl = blow_up(&atlas, &[t], false, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert!(bl.chart_was_normal.iter().any(|&b| !b));
        let bl2 = blow_up(&atlas, &[MonomialIdeal::new(&atlas.charts()[0], vec![
            atlas.charts()[0].generators()[0].clone(),
            atlas.charts()[0].generators()[2].clone(),
        ]).unwrap()], true, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        // after normalization every chart is saturated
        for c in bl2.atlas.charts() {
            let (_, ok) = c.normalize(DEFAULT_HILBERT_DIM_BOUND).unwrap();
            assert!(ok);
        }
    }

    #[test]
    fn complete_emits_krull_warning() {
        let b = F1Algebra::from_presentation(2, vec![(vec![1, 1], vec![0, 1])]).unwrap();
        let x_img = b.generators()[0].clone();
        let atlas = SchemeAtlas::single(b.underlying_integral());
        let t = MonomialIdeal { generators: vec![x_img] };
        let (_fsa, warnings) = complete(&atlas, vec![t]).unwrap();
        assert_eq!(warnings, vec![0]);
        // and the plane along (x) is injective
        let a2 = SchemeAtlas::single(F1Algebra::free(2));
        let tx = MonomialIdeal::new(&a2.charts()[0], vec![e64(&[1, 0])]).unwrap();
        let (_f2, w2) = complete(&a2, vec![tx]).unwrap();
        assert!(w2.is_empty());
    }

    #[test]
    fn algebraise_single_formal_plane() {
        let a2 = SchemeAtlas::single(F1Algebra::free(2));
        let t = MonomialIdeal::new(&a2.charts()[0], vec![e64(&[1, 0]), e64(&[0, 1])]).unwrap();
        let (fsa, _) = complete(&a2, vec![t]).unwrap();
        let sigma = fsa.sigma().unwrap();
        let (atlas, markings) = algebraise(&sigma, DEFAULT_HILBERT_DIM_BOUND).unwrap();
        assert!(atlas.charts()[0].monoid_equals(&F1Algebra::free(2)));
        assert_eq!(markings[0].generators.len(), 2);
        // completion along the markings recovers the complex
        let (fsa2, _) = complete(&atlas, markings).unwrap();
        assert_eq!(fsa2.sigma().unwrap(), sigma);
    }

    #[test]
    fn algebraise_rejects_tate_loop() {
        let loop_complex = crate::complex::tests::tate_loop();
        let err = algebraise(&loop_complex, DEFAULT_HILBERT_DIM_BOUND);
        match err {
            Err(Error::NonConstantCharacters { witness, .. }) => {
                assert_eq!(witness, IntMat::from_i64(&[&[1, 1], &[0, 1]]));
            }
            other => panic!("expected NonConstantCharacters, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn expansion_sur_stages_halve() {
        // V = F1[x, y], U cut by x, Z = (y)
        let datum = ExpansionDatum {
            cone: Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0]), e64(&[0, 1])])
                .unwrap(),
            face_cutter: e64(&[1, 0]),
            center: vec![e64(&[0, 1])],
        };
        let stages = expansion_stages(&datum, ExpansionKind::Sur, 3).unwrap();
        assert_eq!(stages[0].len(), 2);
        assert_eq!(stages[1].len(), 3);
        assert_eq!(stages[2].len(), 4);
        // breakpoints: rays (-1,-k) for k = 1..stage
        let rays_of = |c: &ConeComplex| {
            let mut rays: Vec<Vec<Int>> = c.cones().iter().flat_map(|p| p.cone.rays().to_vec()).collect();
            rays.sort();
            rays.dedup();
            rays
        };
        assert!(rays_of(&stages[2]).contains(&v64(&[-1, -1])));
        assert!(rays_of(&stages[2]).contains(&v64(&[-1, -2])));
        assert!(rays_of(&stages[2]).contains(&v64(&[-1, -3])));
    }

    #[test]
    fn expansion_el_stages_are_nested_chains() {
        let datum = ExpansionDatum {
            cone: Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0]), e64(&[0, 1])])
                .unwrap(),
            face_cutter: e64(&[1, 0]),
            center: vec![e64(&[0, 1])],
        };
        let stages = expansion_stages(&datum, ExpansionKind::El, 3).unwrap();
        assert_eq!(stages[0].len(), 1);
        assert_eq!(stages[1].len(), 2);
        assert_eq!(stages[2].len(), 3);
        // nested: every cone of stage k appears in stage k+1
        for w in stages.windows(2) {
            for pc in w[0].cones() {
                assert!(w[1].cones().iter().any(|qc| qc.cone == pc.cone));
            }
        }
        // stage cones never touch the far ray (-1, 0)
        for s in &stages {
            for pc in s.cones() {
                assert!(!pc.cone.rays().contains(&v64(&[-1, 0])));
            }
        }
    }

    #[test]
    fn expansion_sur_lower_shrinks_to_germ() {
        let datum = ExpansionDatum {
            cone: Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0]), e64(&[0, 1])])
                .unwrap(),
            face_cutter: e64(&[1, 0]),
            center: vec![e64(&[0, 1])],
        };
        let stages = expansion_stages(&datum, ExpansionKind::SurLower, 3).unwrap();
        for (k, s) in stages.iter().enumerate() {
            assert_eq!(s.len(), 1);
            let rays = s.cones()[0].cone.rays();
            assert!(rays.contains(&v64(&[0, -1])));
            assert!(rays.contains(&v64(&[-1, -(k as i64) - 1])));
        }
    }

    #[test]
    fn zero_center_rejected() {
        let datum = ExpansionDatum {
            cone: Cone::from_inequalities(CharacterGroup::free(2), vec![e64(&[1, 0]), e64(&[0, 1])])
                .unwrap(),
            face_cutter: e64(&[1, 0]),
            center: vec![],
        };
        assert!(matches!(
            expansion_stages(&datum, ExpansionKind::Sur, 1),
            Err(Error::ZeroCenter)
        ));
    }
}
