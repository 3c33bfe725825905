//! Command line front end: parse documents, dispatch constructions and
//! checks, render reports and witnesses.
//!
//! Exit codes: 0 = property holds / construction succeeded, 1 = property
//! fails (a witness is printed), 2 = error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use f1fan::algebra::{F1Algebra, MonomialIdeal, DEFAULT_DEGREE_BOUND};
use f1fan::arith::Int;
use f1fan::complex::ConeComplex;
use f1fan::cone::DEFAULT_HILBERT_DIM_BOUND;
use f1fan::criteria::{self, JetGroup, Verdict, Witness};
use f1fan::functors::{self, ExpansionDatum, ExpansionKind, SchemeAtlas};
use f1fan::group::GroupElem;
use f1fan::io::{self, Document};
use f1fan::Error;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "f1fan", version, about = "Exact combinatorics of monoid schemes")]
struct Cli {
    /// Emit machine-readable JSON instead of text reports.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a document: cones, faces, punctures, primes, components.
    Describe { file: String },
    /// Decide a property; exit 0 when it holds, 1 with a witness otherwise.
    Check {
        #[arg(value_enum)]
        property: Property,
        file: String,
    },
    /// Chart-wise normalization (algebra or scheme atlas).
    Normalize { file: String },
    /// Blow up along a monomial ideal.
    Blowup {
        file: String,
        #[command(flatten)]
        ideal: IdealArg,
        /// Normalize the Rees charts.
        #[arg(long)]
        normalize: bool,
    },
    /// Formal completion along a monomial ideal.
    Complete {
        file: String,
        #[command(flatten)]
        ideal: IdealArg,
    },
    /// Refine a cone by the domains of linearity of monomials.
    Subdivide {
        file: String,
        /// JSON list of exponent vectors, e.g. "[[1,0],[0,1]]".
        #[arg(long)]
        function: String,
        /// Prepend the constant 0 to the maximum.
        #[arg(long)]
        include_zero: bool,
    },
    /// Rebuild the marked scheme atlas of a complex with constant characters.
    Algebraise { file: String },
    /// Staged expansion of an open face inside an affine cone.
    Expand {
        file: String,
        #[arg(long, value_enum)]
        kind: ExpandKind,
        #[arg(long)]
        stages: u32,
        /// Cutter of the open face, e.g. "[1,0]".
        #[arg(long)]
        face: String,
        /// JSON list of centre ideal generators.
        #[arg(long)]
        center: String,
    },
    /// Exhaustive jet counting over a coordinate box.
    Oracle {
        file: String,
        #[arg(long, default_value = "Z")]
        group: String,
        #[arg(long, default_value_t = 5)]
        radius: i64,
        /// Denominator bound for group Q.
        #[arg(long, default_value_t = 2)]
        denominator: u32,
    },
}

#[derive(Args)]
struct IdealArg {
    /// Ideal generators: "[[1,0],[0,1]]" for one chart, or a list of such
    /// lists for multi-chart atlases.
    #[arg(long)]
    ideal: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Separated,
    Proper,
    Overconvergent,
    Quasicompact,
    Noetherian,
    Normal,
    Algebraisable,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpandKind {
    /// Growing chain of charts exhausting the open part.
    Degeneration,
    /// Full stage subdivisions with strict transforms.
    Subdivision,
    /// Shrinking germ charts.
    Germ,
}

fn hilbert_bound() -> usize {
    std::env::var("F1FAN_HILBERT_DIM_BOUND")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_HILBERT_DIM_BOUND)
}

fn degree_bound() -> u32 {
    std::env::var("F1FAN_DEGREE_BOUND")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_DEGREE_BOUND)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}

fn load(file: &str) -> Result<Document, Error> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::SchemaError {
        at: file.into(),
        message: e.to_string(),
    })?;
    io::parse(&text)
}

fn print_doc(doc: &Document) -> Result<(), Error> {
    print!("{}", io::serialize(doc)?);
    Ok(())
}

fn verdict_exit(v: &Verdict, json: bool) -> ExitCode {
    if json {
        println!("{}", verdict_json(v));
    } else {
        println!("{}: {}", v.property, if v.holds { "yes" } else { "no" });
        if let Some(w) = &v.witness {
            println!("witness: {}", witness_text(w));
        }
    }
    if v.holds {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn witness_text(w: &Witness) -> String {
    match w {
        Witness::ConePair { i, j, detail } => format!("cone pair ({}, {}): {}", i, j, detail),
        Witness::UncoveredDirection { source_cone, face, direction } => format!(
            "uncovered direction {:?} at face {:#x} of cone {}",
            direction, face, source_cone
        ),
        Witness::PuncturedStratum { source_cone, face, point } => format!(
            "kept base point over punctured stratum {:#x} of cone {} (jet {:?})",
            face, source_cone, point
        ),
        Witness::MissingLift { point } => format!("jet {} has no lift", rat_vec_text(point)),
        Witness::MultiLift { point, count } => {
            format!("jet {} has {} lifts", rat_vec_text(point), count)
        }
        Witness::Monodromy { matrix } => format!("monodromy matrix {}", matrix_text(matrix)),
        Witness::Flag { detail } => detail.clone(),
    }
}

fn rat_vec_text(v: &[f1fan::arith::Rat]) -> String {
    let coords: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", coords.join(", "))
}

fn matrix_text(m: &f1fan::arith::IntMat) -> String {
    let rows: Vec<String> = (0..m.rows)
        .map(|r| {
            let entries: Vec<String> = m.row(r).iter().map(|x| x.to_string()).collect();
            format!("[{}]", entries.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

fn verdict_json(v: &Verdict) -> String {
    let witness = v.witness.as_ref().map(witness_text).unwrap_or_default();
    serde_json::json!({
        "property": v.property,
        "holds": v.holds,
        "witness": if v.witness.is_some() { Some(witness) } else { None },
    })
    .to_string()
}

fn parse_vectors(text: &str, at: &str) -> Result<Vec<Vec<i64>>, Error> {
    serde_json::from_str(text).map_err(|e| Error::SchemaError {
        at: at.into(),
        message: e.to_string(),
    })
}

fn elems_from_vectors(vs: &[Vec<i64>], chart: &F1Algebra) -> Result<Vec<GroupElem>, Error> {
    vs.iter()
        .map(|v| {
            chart
                .characters()
                .elem(
                    v.iter().map(|&x| Int::from(x)).collect(),
                    vec![Int::from(0); chart.characters().torsion().len()],
                )
                .map_err(|m| Error::SchemaError { at: "ideal".into(), message: m })
        })
        .collect()
}

/// Parse per-chart ideals: either one list of vectors applied to a single
/// chart, or a list of lists matching the chart count. The literal zero
/// vector is the monoid unit, not zero; an explicit empty list is the zero
/// ideal and is rejected here.
fn parse_ideals(text: &str, atlas: &SchemeAtlas) -> Result<Vec<MonomialIdeal>, Error> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::SchemaError {
        at: "ideal".into(),
        message: e.to_string(),
    })?;
    let as_per_chart: Option<Vec<Vec<Vec<i64>>>> =
        serde_json::from_value(value.clone()).ok();
    let per_chart: Vec<Vec<Vec<i64>>> = match as_per_chart {
        Some(v)
            if v.len() == atlas.charts().len()
                && v.iter().all(|c| c.iter().all(|g| !g.is_empty())) =>
        {
            v
        }
        _ => {
            let single: Vec<Vec<i64>> =
                serde_json::from_value(value).map_err(|e| Error::SchemaError {
                    at: "ideal".into(),
                    message: e.to_string(),
                })?;
            vec![single; atlas.charts().len()]
        }
    };
    if per_chart.iter().any(|gens| gens.is_empty()) {
        return Err(Error::ZeroIdeal);
    }
    per_chart
        .iter()
        .zip(atlas.charts())
        .map(|(gens, chart)| {
            let elems = elems_from_vectors(gens, chart)?;
            MonomialIdeal::new(chart, elems)
        })
        .collect()
}

fn as_atlas(doc: Document) -> Result<SchemeAtlas, Error> {
    match doc {
        Document::Algebra(a) => Ok(SchemeAtlas::single(a)),
        Document::SchemeAtlas(a) => Ok(a),
        Document::FormalSchemeAtlas(f) => Ok(f.atlas),
        other => Err(Error::SchemaError {
            at: "document".into(),
            message: format!("expected an algebra or atlas, found {}", other.kind()),
        }),
    }
}

fn as_complex(doc: &Document) -> Result<ConeComplex, Error> {
    match doc {
        Document::Complex(c) => Ok(c.clone()),
        Document::Cone(c) => Ok(ConeComplex::single(
            f1fan::cone::PuncturedCone::unpunctured(c.clone()),
        )),
        Document::SchemeAtlas(a) => a.sigma(),
        Document::FormalSchemeAtlas(f) => f.sigma(),
        other => Err(Error::SchemaError {
            at: "document".into(),
            message: format!("expected a complex-like document, found {}", other.kind()),
        }),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Describe { file } => {
            let doc = load(file)?;
            describe(&doc, cli.json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { property, file } => {
            let doc = load(file)?;
            let verdict = check(*property, &doc)?;
            Ok(verdict_exit(&verdict, cli.json))
        }
        Command::Normalize { file } => {
            let atlas = as_atlas(load(file)?)?;
            let (normalized, flags) = atlas.normalize(hilbert_bound())?;
            eprintln!(
                "normalized {} chart(s); already normal: {:?}",
                normalized.charts().len(),
                flags
            );
            let doc = if normalized.charts().len() == 1 && normalized.gluings().is_empty() {
                Document::Algebra(normalized.charts()[0].clone())
            } else {
                Document::SchemeAtlas(normalized)
            };
            print_doc(&doc)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Blowup { file, ideal, normalize } => {
            let atlas = as_atlas(load(file)?)?;
            let ideals = parse_ideals(&ideal.ideal, &atlas)?;
            let bl = functors::blow_up(&atlas, &ideals, *normalize, hilbert_bound())?;
            eprintln!(
                "blow-up has {} chart(s); normal: {:?}",
                bl.atlas.charts().len(),
                bl.chart_was_normal
            );
            print_doc(&Document::SchemeAtlas(bl.atlas))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Complete { file, ideal } => {
            let atlas = as_atlas(load(file)?)?;
            let ideals = parse_ideals(&ideal.ideal, &atlas)?;
            let (fsa, warnings) = functors::complete(&atlas, ideals)?;
            for w in &warnings {
                eprintln!("KrullWarning: completion of chart {} is not injective", w);
            }
            print_doc(&Document::FormalSchemeAtlas(fsa))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Subdivide { file, function, include_zero } => {
            let doc = load(file)?;
            let Document::Cone(cone) = doc else {
                return Err(Error::SchemaError {
                    at: "document".into(),
                    message: "subdivide expects a cone document".into(),
                });
            };
            let vs = parse_vectors(function, "function")?;
            let fs: Vec<GroupElem> = vs
                .iter()
                .map(|v| cone.group().elem_free(v.iter().map(|&x| Int::from(x)).collect()))
                .collect();
            let pieces = cone.refine_by_function(&fs, *include_zero);
            let complex = functors::chain_complex(
                &pieces.into_iter().collect::<Vec<_>>(),
            )?;
            print_doc(&Document::Complex(complex))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Algebraise { file } => {
            let complex = as_complex(&load(file)?)?;
            match functors::algebraise(&complex, hilbert_bound()) {
                Ok((atlas, markings)) => {
                    let fsa = f1fan::functors::FormalSchemeAtlas::new(atlas, markings)?;
                    print_doc(&Document::FormalSchemeAtlas(fsa))?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(Error::NonConstantCharacters { cone, witness }) => {
                    let v = Verdict {
                        property: "algebraisable".into(),
                        holds: false,
                        witness: Some(Witness::Monodromy { matrix: witness }),
                    };
                    let _ = cone;
                    Ok(verdict_exit(&v, cli.json))
                }
                Err(e) => Err(e),
            }
        }
        Command::Expand { file, kind, stages, face, center } => {
            let doc = load(file)?;
            let Document::Cone(cone) = doc else {
                return Err(Error::SchemaError {
                    at: "document".into(),
                    message: "expand expects a cone document".into(),
                });
            };
            let face_vec = parse_vectors(face, "face")?;
            if face_vec.len() != 1 {
                return Err(Error::SchemaError {
                    at: "face".into(),
                    message: "exactly one cutter vector expected".into(),
                });
            }
            let center_vecs = parse_vectors(center, "center")?;
            let to_elem = |v: &Vec<i64>| {
                cone.group().elem_free(v.iter().map(|&x| Int::from(x)).collect())
            };
            let datum = ExpansionDatum {
                cone: cone.clone(),
                face_cutter: to_elem(&face_vec[0]),
                center: center_vecs.iter().map(to_elem).collect(),
            };
            let k = match kind {
                ExpandKind::Degeneration => ExpansionKind::El,
                ExpandKind::Subdivision => ExpansionKind::Sur,
                ExpandKind::Germ => ExpansionKind::SurLower,
            };
            let all = functors::expansion_stages(&datum, k, *stages)?;
            for (n, stage) in all.iter().enumerate() {
                eprintln!("stage {}: {} cone(s)", n + 1, stage.len());
            }
            let last = all.last().expect("stages >= 1");
            print_doc(&Document::Complex(last.clone()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { file, group, radius, denominator } => {
            let doc = load(file)?;
            let jet_group = match group.as_str() {
                "Z" | "z" => JetGroup::Z,
                "Q" | "q" => JetGroup::Q { denominator: *denominator },
                other => {
                    return Err(Error::SchemaError {
                        at: "group".into(),
                        message: format!("unknown exponent group {:?}", other),
                    })
                }
            };
            let report = match &doc {
                Document::Morphism(m) => criteria::jet_oracle_morphism(m, jet_group, *radius)?,
                other => criteria::jet_oracle(&as_complex(other)?, jet_group, *radius)?,
            };
            let total = report.counts.len();
            let missing = report.counts.iter().filter(|(_, c)| *c == 0).count();
            let multiple = report.counts.iter().filter(|(_, c)| *c > 1).count();
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "points": total,
                        "without_lift": missing,
                        "with_multiple_lifts": multiple,
                        "separated": report.separated.holds,
                        "overconvergent": report.overconvergent.holds,
                    })
                );
            } else {
                println!("sampled {} jets: {} without lift, {} with multiple lifts", total, missing, multiple);
                println!("{}: {}", report.separated.property, report.separated.holds);
                println!("{}: {}", report.overconvergent.property, report.overconvergent.holds);
            }
            let ok = report.separated.holds && report.overconvergent.holds;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn check(property: Property, doc: &Document) -> Result<Verdict, Error> {
    match property {
        Property::Separated => match doc {
            Document::Morphism(m) => criteria::check_separated_morphism(m),
            other => Ok(criteria::check_separated(&as_complex(other)?)),
        },
        Property::Overconvergent => match doc {
            Document::Morphism(m) => Ok(criteria::check_overconvergent(m)),
            other => Ok(criteria::check_overconvergent(&criteria::to_point(
                &as_complex(other)?,
            ))),
        },
        Property::Proper => match doc {
            Document::Morphism(m) => Ok(criteria::check_proper(m)),
            other => Ok(criteria::check_proper(&criteria::to_point(&as_complex(
                other,
            )?))),
        },
        Property::Quasicompact => {
            let c = as_complex(doc)?;
            let cls = criteria::classify(&c, hilbert_bound())?;
            Ok(Verdict {
                property: "quasi-compact".into(),
                holds: cls.quasi_compact,
                witness: None,
            })
        }
        Property::Noetherian => {
            let c = as_complex(doc)?;
            let cls = criteria::classify(&c, hilbert_bound())?;
            Ok(Verdict {
                property: "noetherian".into(),
                holds: cls.noetherian,
                witness: (!cls.noetherian).then(|| Witness::Flag {
                    detail: "span lattice is rank-deficient".into(),
                }),
            })
        }
        Property::Normal => match doc {
            Document::Algebra(a) => {
                let integral = if a.is_embedded() {
                    a.clone()
                } else {
                    match a.is_integral(degree_bound()) {
                        Ok(true) => a.underlying_integral(),
                        Ok(false) => {
                            return Ok(Verdict {
                                property: "normal".into(),
                                holds: false,
                                witness: Some(Witness::Flag {
                                    detail: "algebra is not integral".into(),
                                }),
                            })
                        }
                        Err(e) => return Err(e),
                    }
                };
                let (_, was_normal) = integral.normalize(hilbert_bound())?;
                Ok(Verdict {
                    property: "normal".into(),
                    holds: was_normal,
                    witness: (!was_normal).then(|| Witness::Flag {
                        detail: "saturation enlarges the monoid".into(),
                    }),
                })
            }
            Document::SchemeAtlas(a) => {
                let (_, flags) = a.normalize(hilbert_bound())?;
                let holds = flags.iter().all(|&b| b);
                Ok(Verdict {
                    property: "normal".into(),
                    holds,
                    witness: (!holds).then(|| Witness::Flag {
                        detail: format!("non-normal charts: {:?}", flags),
                    }),
                })
            }
            other => {
                let c = as_complex(other)?;
                let cls = criteria::classify(&c, hilbert_bound())?;
                Ok(Verdict { property: "normal".into(), holds: cls.normal, witness: None })
            }
        },
        Property::Algebraisable => {
            let c = as_complex(doc)?;
            match functors::algebraise(&c, hilbert_bound()) {
                Ok(_) => Ok(Verdict { property: "algebraisable".into(), holds: true, witness: None }),
                Err(Error::NonConstantCharacters { witness, .. }) => Ok(Verdict {
                    property: "algebraisable".into(),
                    holds: false,
                    witness: Some(Witness::Monodromy { matrix: witness }),
                }),
                Err(e) => Err(e),
            }
        }
    }
}

fn describe(doc: &Document, json: bool) -> Result<(), Error> {
    match doc {
        Document::Algebra(a) => {
            let primes = a.primes();
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "kind": "algebra",
                        "characters": a.characters().to_string(),
                        "generators": a.generators().len(),
                        "points": primes.len(),
                    })
                );
            } else {
                println!("algebra over {}", a.characters());
                println!("generators: {}", a.generators().len());
                println!("points (primes): {}", primes.len());
                for p in &primes {
                    println!(
                        "  prime with face of dim {}, complement generated by {} generator(s)",
                        p.face.dim,
                        p.complement_generators.len()
                    );
                }
            }
        }
        Document::Cone(c) => {
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "kind": "cone",
                        "dim": c.dim(),
                        "rays": c.rays().len(),
                        "faces": c.faces().len(),
                    })
                );
            } else {
                println!("cone of dim {} with {} ray(s), {} face(s)", c.dim(), c.rays().len(), c.faces().len());
            }
        }
        other => {
            let c = as_complex(other)?;
            let components = c.components().len();
            let points = atlas_point_count(&c);
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "kind": other.kind(),
                        "cones": c.len(),
                        "points": points,
                        "components": components,
                    })
                );
            } else {
                println!("complex with {} cone(s), {} component(s)", c.len(), components);
                println!("points (kept faces up to gluing): {}", points);
                for (k, pc) in c.cones().iter().enumerate() {
                    println!(
                        "  cone {}: dim {}, {} face(s), {} punctured, character rank {}",
                        k,
                        pc.cone.dim(),
                        pc.cone.faces().len(),
                        pc.punctures().len(),
                        pc.cone.group().rank()
                    );
                }
            }
        }
    }
    Ok(())
}

/// Kept faces up to the derived gluing equivalence: the points of the
/// underlying space, whose specialization order is the face order.
fn atlas_point_count(c: &ConeComplex) -> usize {
    let mut sites: Vec<(usize, u128)> = Vec::new();
    for (i, pc) in c.cones().iter().enumerate() {
        for f in pc.kept_faces() {
            sites.push((i, f.mask));
        }
    }
    let mut parent: Vec<usize> = (0..sites.len()).collect();
    fn find(parent: &mut Vec<usize>, a: usize) -> usize {
        if parent[a] != a {
            let r = find(parent, parent[a]);
            parent[a] = r;
        }
        parent[a]
    }
    for d in c.derived() {
        let a = sites.iter().position(|s| *s == (d.i, d.face_i));
        let b = sites.iter().position(|s| *s == (d.j, d.face_j));
        if let (Some(a), Some(b)) = (a, b) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let mut roots: Vec<usize> = (0..sites.len()).map(|a| find(&mut parent, a)).collect();
    roots.sort();
    roots.dedup();
    roots.len()
}
