//! Structured text documents: parsing, validation, canonical serialization.
//!
//! One file holds one document; cross-references by id stay within the
//! file. Persisted data is exact integers only. Rays are derived, never
//! persisted; a parsed cone recomputes its canonical V-description.

use crate::algebra::{F1Algebra, Mode, MonomialIdeal};
use crate::arith::{Int, IntMat};
use crate::complex::{Assignment, ComplexMorphism, ConeComplex, Gluing};
use crate::cone::{Cone, PuncturedCone};
use crate::error::{Error, Result};
use crate::functors::{AtlasGluing, FormalSchemeAtlas, SchemeAtlas};
use crate::group::{CharacterGroup, GroupElem};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

fn schema(at: &str, message: impl Into<String>) -> Error {
    Error::SchemaError { at: at.into(), message: message.into() }
}

// ---------------------------------------------------------------- wire types

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct GroupRepr {
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub torsion: Vec<i64>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(untagged)]
pub enum ElemRepr {
    Plain(Vec<i64>),
    WithResidues { free: Vec<i64>, residues: Vec<i64> },
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct AlgebraRepr {
    pub group: GroupRepr,
    pub mode: String,
    pub generators: Vec<ElemRepr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<(Vec<u64>, Vec<u64>)>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct IdealRepr {
    pub generators: Vec<ElemRepr>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ConeRepr {
    pub group: GroupRepr,
    pub inequalities: Vec<ElemRepr>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PuncturedConeRepr {
    pub cone: ConeRepr,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub punctures: Vec<ElemRepr>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ComplexConeRepr {
    pub id: usize,
    pub punctured_cone: PuncturedConeRepr,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct GluingRepr {
    pub from: usize,
    pub from_cutter: ElemRepr,
    pub to: usize,
    pub to_cutter: ElemRepr,
    pub charmap: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ComplexRepr {
    pub cones: Vec<ComplexConeRepr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gluings: Vec<GluingRepr>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct AssignmentRepr {
    pub cone: usize,
    pub target_cone: usize,
    pub charmap: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct MorphismRepr {
    pub source: ComplexRepr,
    pub target: ComplexRepr,
    pub assignments: Vec<AssignmentRepr>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct AtlasGluingRepr {
    pub from: usize,
    pub from_element: ElemRepr,
    pub to: usize,
    pub to_element: ElemRepr,
    pub charmap: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SchemeAtlasRepr {
    pub charts: Vec<AlgebraRepr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gluings: Vec<AtlasGluingRepr>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct FormalSchemeAtlasRepr {
    pub scheme_atlas: SchemeAtlasRepr,
    pub ideals: Vec<IdealRepr>,
}

/// A parsed, validated document.
#[derive(Clone, Debug)]
pub enum Document {
    Algebra(F1Algebra),
    Cone(Cone),
    Complex(ConeComplex),
    Morphism(ComplexMorphism),
    SchemeAtlas(SchemeAtlas),
    FormalSchemeAtlas(FormalSchemeAtlas),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Algebra(_) => "algebra",
            Document::Cone(_) => "cone",
            Document::Complex(_) => "complex",
            Document::Morphism(_) => "morphism",
            Document::SchemeAtlas(_) => "scheme_atlas",
            Document::FormalSchemeAtlas(_) => "formal_scheme_atlas",
        }
    }

    /// Canonical form: complexes relabeled deterministically; other payloads
    /// already have a canonical in-memory form.
    pub fn canonical(self) -> Document {
        match self {
            Document::Complex(c) => Document::Complex(c.canonical()),
            other => other,
        }
    }
}

// ------------------------------------------------------------- conversions

fn int_to_i64(x: &Int, at: &str) -> Result<i64> {
    i64::try_from(x.clone()).map_err(|_| schema(at, "integer exceeds the persisted range"))
}

fn group_to_repr(g: &CharacterGroup) -> Result<GroupRepr> {
    Ok(GroupRepr {
        rank: g.rank(),
        torsion: g
            .torsion()
            .iter()
            .map(|d| int_to_i64(d, "group.torsion"))
            .collect::<Result<_>>()?,
    })
}

fn group_from_repr(r: &GroupRepr, at: &str) -> Result<CharacterGroup> {
    CharacterGroup::new(r.rank, r.torsion.iter().map(|&d| Int::from(d)).collect())
        .map_err(|m| schema(at, m))
}

fn elem_to_repr(e: &GroupElem, at: &str) -> Result<ElemRepr> {
    let free: Vec<i64> = e
        .free
        .iter()
        .map(|x| int_to_i64(x, at))
        .collect::<Result<_>>()?;
    if e.torsion.is_empty() {
        Ok(ElemRepr::Plain(free))
    } else {
        Ok(ElemRepr::WithResidues {
            free,
            residues: e
                .torsion
                .iter()
                .map(|x| int_to_i64(x, at))
                .collect::<Result<_>>()?,
        })
    }
}

fn elem_from_repr(r: &ElemRepr, g: &CharacterGroup, at: &str) -> Result<GroupElem> {
    let (free, residues) = match r {
        ElemRepr::Plain(v) => (v.clone(), vec![0; g.torsion().len()]),
        ElemRepr::WithResidues { free, residues } => (free.clone(), residues.clone()),
    };
    g.elem(
        free.into_iter().map(Int::from).collect(),
        residues.into_iter().map(Int::from).collect(),
    )
    .map_err(|m| schema(at, m))
}

fn matrix_to_repr(m: &IntMat, at: &str) -> Result<Vec<Vec<i64>>> {
    (0..m.rows)
        .map(|r| m.row(r).iter().map(|x| int_to_i64(x, at)).collect())
        .collect()
}

fn matrix_from_repr(rows: &[Vec<i64>], at: &str) -> Result<IntMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(schema(at, "ragged matrix"));
    }
    let mut m = IntMat::zero(r, c);
    for (i, row) in rows.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            m[(i, j)] = Int::from(x);
        }
    }
    Ok(m)
}

pub fn algebra_to_repr(a: &F1Algebra) -> Result<AlgebraRepr> {
    Ok(AlgebraRepr {
        group: group_to_repr(a.characters())?,
        mode: match a.mode() {
            Mode::Embedded => "embedded".into(),
            Mode::Presented { .. } => "presented".into(),
        },
        generators: a
            .generators()
            .iter()
            .map(|e| elem_to_repr(e, "algebra.generators"))
            .collect::<Result<_>>()?,
        relations: match a.mode() {
            Mode::Embedded => Vec::new(),
            Mode::Presented { relations } => relations.clone(),
        },
    })
}

pub fn algebra_from_repr(r: &AlgebraRepr) -> Result<F1Algebra> {
    match r.mode.as_str() {
        "presented" => {
            // zero-relation guard: the wire form cannot express a zero side,
            // but an empty side pair with an explicit empty list of
            // generators would: reject presentations over zero generators
            F1Algebra::from_presentation(r.generators.len(), r.relations.clone())
        }
        "embedded" => {
            let g = group_from_repr(&r.group, "algebra.group")?;
            let gens = r
                .generators
                .iter()
                .map(|e| elem_from_repr(e, &g, "algebra.generators"))
                .collect::<Result<Vec<_>>>()?;
            let a = F1Algebra::embedded(&g, gens.clone());
            // an embedded document must already be in canonical coordinates
            if a.characters() != &g {
                return Err(Error::InvariantError(
                    "generators do not generate the stated character group".into(),
                ));
            }
            Ok(a)
        }
        other => Err(schema("algebra.mode", format!("unknown mode {:?}", other))),
    }
}

pub fn cone_to_repr(c: &Cone) -> Result<ConeRepr> {
    Ok(ConeRepr {
        group: group_to_repr(c.group())?,
        inequalities: c
            .inequalities()
            .iter()
            .map(|e| elem_to_repr(e, "cone.inequalities"))
            .collect::<Result<_>>()?,
    })
}

pub fn cone_from_repr(r: &ConeRepr) -> Result<Cone> {
    let g = group_from_repr(&r.group, "cone.group")?;
    let ineqs = r
        .inequalities
        .iter()
        .map(|e| elem_from_repr(e, &g, "cone.inequalities"))
        .collect::<Result<Vec<_>>>()?;
    Cone::from_inequalities(g, ineqs)
}

pub fn punctured_cone_to_repr(pc: &PuncturedCone) -> Result<PuncturedConeRepr> {
    let punctures = pc
        .punctures()
        .iter()
        .map(|&m| {
            let f = pc.cone.face_by_mask(m).expect("puncture is a face");
            elem_to_repr(&f.cutter_elem(pc.cone.group()), "punctured_cone.punctures")
        })
        .collect::<Result<_>>()?;
    Ok(PuncturedConeRepr { cone: cone_to_repr(&pc.cone)?, punctures })
}

pub fn punctured_cone_from_repr(r: &PuncturedConeRepr) -> Result<PuncturedCone> {
    let cone = cone_from_repr(&r.cone)?;
    let mut masks = Vec::new();
    for (k, p) in r.punctures.iter().enumerate() {
        let e = elem_from_repr(p, cone.group(), "punctured_cone.punctures")?;
        let face = cone.face_cut_by(&e).ok_or_else(|| {
            Error::InvariantError(format!("puncture {} does not cut a face", k))
        })?;
        masks.push(face.mask);
    }
    PuncturedCone::new(cone, masks)
}

pub fn complex_to_repr(c: &ConeComplex) -> Result<ComplexRepr> {
    Ok(ComplexRepr {
        cones: c
            .cones()
            .iter()
            .enumerate()
            .map(|(id, pc)| {
                Ok(ComplexConeRepr { id, punctured_cone: punctured_cone_to_repr(pc)? })
            })
            .collect::<Result<_>>()?,
        gluings: c
            .gluings()
            .iter()
            .map(|g| {
                Ok(GluingRepr {
                    from: g.i,
                    from_cutter: elem_to_repr(&g.cutter_i, "gluing.from_cutter")?,
                    to: g.j,
                    to_cutter: elem_to_repr(&g.cutter_j, "gluing.to_cutter")?,
                    charmap: matrix_to_repr(&g.charmap, "gluing.charmap")?,
                })
            })
            .collect::<Result<_>>()?,
    })
}

pub fn complex_from_repr(r: &ComplexRepr) -> Result<ConeComplex> {
    let mut cones = vec![None; r.cones.len()];
    for c in &r.cones {
        if c.id >= r.cones.len() || cones[c.id].is_some() {
            return Err(schema("complex.cones", "ids must be 0..n distinct"));
        }
        cones[c.id] = Some(punctured_cone_from_repr(&c.punctured_cone)?);
    }
    let cones: Vec<PuncturedCone> = cones.into_iter().map(|c| c.unwrap()).collect();
    let gluings = r
        .gluings
        .iter()
        .map(|g| {
            if g.from >= cones.len() || g.to >= cones.len() {
                return Err(schema("complex.gluings", "cone id out of range"));
            }
            Ok(Gluing {
                i: g.from,
                cutter_i: elem_from_repr(&g.from_cutter, cones[g.from].cone.group(), "gluing")?,
                j: g.to,
                cutter_j: elem_from_repr(&g.to_cutter, cones[g.to].cone.group(), "gluing")?,
                charmap: matrix_from_repr(&g.charmap, "gluing.charmap")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ConeComplex::new(cones, gluings)
}

pub fn morphism_to_repr(m: &ComplexMorphism) -> Result<MorphismRepr> {
    Ok(MorphismRepr {
        source: complex_to_repr(&m.source)?,
        target: complex_to_repr(&m.target)?,
        assignments: m
            .assignments
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Ok(AssignmentRepr {
                    cone: i,
                    target_cone: a.target,
                    charmap: matrix_to_repr(&a.charmap, "assignment.charmap")?,
                })
            })
            .collect::<Result<_>>()?,
    })
}

pub fn morphism_from_repr(r: &MorphismRepr) -> Result<ComplexMorphism> {
    let source = complex_from_repr(&r.source)?;
    let target = complex_from_repr(&r.target)?;
    let mut assignments = vec![None; source.len()];
    for a in &r.assignments {
        if a.cone >= source.len() || assignments[a.cone].is_some() {
            return Err(schema("morphism.assignments", "one assignment per source cone"));
        }
        assignments[a.cone] = Some(Assignment {
            target: a.target_cone,
            charmap: matrix_from_repr(&a.charmap, "assignment.charmap")?,
        });
    }
    let assignments: Vec<Assignment> = assignments
        .into_iter()
        .map(|a| a.ok_or_else(|| schema("morphism.assignments", "missing assignment")))
        .collect::<Result<_>>()?;
    ComplexMorphism::new(source, target, assignments)
}

pub fn scheme_atlas_to_repr(a: &SchemeAtlas) -> Result<SchemeAtlasRepr> {
    Ok(SchemeAtlasRepr {
        charts: a.charts().iter().map(algebra_to_repr).collect::<Result<_>>()?,
        gluings: a
            .gluings()
            .iter()
            .map(|g| {
                Ok(AtlasGluingRepr {
                    from: g.i,
                    from_element: elem_to_repr(&g.f_i, "atlas.gluing")?,
                    to: g.j,
                    to_element: elem_to_repr(&g.f_j, "atlas.gluing")?,
                    charmap: matrix_to_repr(&g.charmap, "atlas.gluing.charmap")?,
                })
            })
            .collect::<Result<_>>()?,
    })
}

pub fn scheme_atlas_from_repr(r: &SchemeAtlasRepr) -> Result<SchemeAtlas> {
    let charts = r
        .charts
        .iter()
        .map(algebra_from_repr)
        .collect::<Result<Vec<_>>>()?;
    let gluings = r
        .gluings
        .iter()
        .map(|g| {
            if g.from >= charts.len() || g.to >= charts.len() {
                return Err(schema("scheme_atlas.gluings", "chart id out of range"));
            }
            Ok(AtlasGluing {
                i: g.from,
                f_i: elem_from_repr(&g.from_element, charts[g.from].characters(), "atlas.gluing")?,
                j: g.to,
                f_j: elem_from_repr(&g.to_element, charts[g.to].characters(), "atlas.gluing")?,
                charmap: matrix_from_repr(&g.charmap, "atlas.gluing.charmap")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SchemeAtlas::new(charts, gluings)
}

pub fn formal_atlas_to_repr(f: &FormalSchemeAtlas) -> Result<FormalSchemeAtlasRepr> {
    Ok(FormalSchemeAtlasRepr {
        scheme_atlas: scheme_atlas_to_repr(&f.atlas)?,
        ideals: f
            .ideals
            .iter()
            .map(|t| {
                Ok(IdealRepr {
                    generators: t
                        .generators
                        .iter()
                        .map(|e| elem_to_repr(e, "ideal.generators"))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?,
    })
}

pub fn formal_atlas_from_repr(r: &FormalSchemeAtlasRepr) -> Result<FormalSchemeAtlas> {
    let atlas = scheme_atlas_from_repr(&r.scheme_atlas)?;
    if r.ideals.len() != atlas.charts().len() {
        return Err(schema("formal_scheme_atlas.ideals", "one ideal per chart"));
    }
    let ideals = r
        .ideals
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let gens = t
                .generators
                .iter()
                .map(|e| elem_from_repr(e, atlas.charts()[k].characters(), "ideal.generators"))
                .collect::<Result<Vec<_>>>()?;
            MonomialIdeal::new(&atlas.charts()[k], gens)
        })
        .collect::<Result<Vec<_>>>()?;
    FormalSchemeAtlas::new(atlas, ideals)
}

// --------------------------------------------------------------- documents

#[derive(Serialize, Deserialize)]
struct DocumentRepr {
    kind: String,
    format_version: u32,
    payload: serde_json::Value,
}

pub fn parse(text: &str) -> Result<Document> {
    let raw: DocumentRepr = serde_json::from_str(text)
        .map_err(|e| schema("document", format!("invalid JSON: {}", e)))?;
    if raw.format_version != FORMAT_VERSION {
        return Err(schema(
            "document.format_version",
            format!("expected {}, found {}", FORMAT_VERSION, raw.format_version),
        ));
    }
    let payload = raw.payload;
    let from_value = |at: &str| -> Result<serde_json::Value> {
        let _ = at;
        Ok(payload.clone())
    };
    match raw.kind.as_str() {
        "algebra" => {
            let r: AlgebraRepr = serde_json::from_value(from_value("algebra")?)
                .map_err(|e| schema("algebra", e.to_string()))?;
            Ok(Document::Algebra(algebra_from_repr(&r)?))
        }
        "cone" => {
            let r: ConeRepr = serde_json::from_value(from_value("cone")?)
                .map_err(|e| schema("cone", e.to_string()))?;
            Ok(Document::Cone(cone_from_repr(&r)?))
        }
        "complex" => {
            let r: ComplexRepr = serde_json::from_value(from_value("complex")?)
                .map_err(|e| schema("complex", e.to_string()))?;
            Ok(Document::Complex(complex_from_repr(&r)?))
        }
        "morphism" => {
            let r: MorphismRepr = serde_json::from_value(from_value("morphism")?)
                .map_err(|e| schema("morphism", e.to_string()))?;
            Ok(Document::Morphism(morphism_from_repr(&r)?))
        }
        "scheme_atlas" => {
            let r: SchemeAtlasRepr = serde_json::from_value(from_value("scheme_atlas")?)
                .map_err(|e| schema("scheme_atlas", e.to_string()))?;
            Ok(Document::SchemeAtlas(scheme_atlas_from_repr(&r)?))
        }
        "formal_scheme_atlas" => {
            let r: FormalSchemeAtlasRepr = serde_json::from_value(from_value("formal_scheme_atlas")?)
                .map_err(|e| schema("formal_scheme_atlas", e.to_string()))?;
            Ok(Document::FormalSchemeAtlas(formal_atlas_from_repr(&r)?))
        }
        other => Err(schema("document.kind", format!("unknown kind {:?}", other))),
    }
}

pub fn serialize(doc: &Document) -> Result<String> {
    let (kind, payload) = match doc {
        Document::Algebra(a) => ("algebra", serde_json::to_value(algebra_to_repr(a)?)),
        Document::Cone(c) => ("cone", serde_json::to_value(cone_to_repr(c)?)),
        Document::Complex(c) => ("complex", serde_json::to_value(complex_to_repr(c)?)),
        Document::Morphism(m) => ("morphism", serde_json::to_value(morphism_to_repr(m)?)),
        Document::SchemeAtlas(a) => ("scheme_atlas", serde_json::to_value(scheme_atlas_to_repr(a)?)),
        Document::FormalSchemeAtlas(f) => {
            ("formal_scheme_atlas", serde_json::to_value(formal_atlas_to_repr(f)?))
        }
    };
    let payload = payload.map_err(|e| schema("document", e.to_string()))?;
    let repr = DocumentRepr { kind: kind.into(), format_version: FORMAT_VERSION, payload };
    serde_json::to_string_pretty(&repr)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| schema("document", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::elem_from_i64 as e64;

    fn p1_complex() -> ConeComplex {
        let ray = Cone::from_inequalities(CharacterGroup::free(1), vec![e64(&[1])]).unwrap();
        ConeComplex::new(
            vec![
                PuncturedCone::unpunctured(ray.clone()),
                PuncturedCone::unpunctured(ray),
            ],
            vec![Gluing {
                i: 0,
                cutter_i: e64(&[1]),
                j: 1,
                cutter_j: e64(&[1]),
                charmap: IntMat::from_i64(&[&[-1]]),
            }],
        )
        .unwrap()
    }

    #[test]
    fn p1_roundtrip_is_byte_identical() {
        let doc = Document::Complex(p1_complex()).canonical();
        let text = serialize(&doc).unwrap();
        let parsed = parse(&text).unwrap().canonical();
        let text2 = serialize(&parsed).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn algebra_roundtrip_with_torsion() {
        let a = F1Algebra::from_presentation(1, vec![(vec![2], vec![0])]).unwrap();
        let text = serialize(&Document::Algebra(a.clone())).unwrap();
        let parsed = parse(&text).unwrap();
        match parsed {
            Document::Algebra(b) => assert_eq!(a, b),
            _ => panic!("kind changed"),
        }
    }

    #[test]
    fn non_invertible_charmap_rejected() {
        let mut repr = complex_to_repr(&p1_complex()).unwrap();
        repr.gluings[0].charmap = vec![vec![2]];
        let err = complex_from_repr(&repr);
        assert!(matches!(err, Err(Error::NonIsomorphicGluing { .. })));
    }

    #[test]
    fn non_downward_closed_punctures_rejected() {
        // quadrant punctured along one ray but not the origin
        let quad = Cone::from_inequalities(
            CharacterGroup::free(2),
            vec![e64(&[1, 0]), e64(&[0, 1])],
        )
        .unwrap();
        let repr = PuncturedConeRepr {
            cone: cone_to_repr(&quad).unwrap(),
            punctures: vec![ElemRepr::Plain(vec![1, 0])],
        };
        let err = punctured_cone_from_repr(&repr);
        match err {
            Err(Error::InvariantError(msg)) => assert!(msg.contains("downward")),
            other => panic!("expected invariant error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn schema_error_has_location() {
        let err = parse("{\"kind\": \"nonsense\", \"format_version\": 1, \"payload\": {}}");
        match err {
            Err(Error::SchemaError { at, .. }) => assert_eq!(at, "document.kind"),
            other => panic!("expected schema error, got {:?}", other.map(|_| ())),
        }
    }
}
