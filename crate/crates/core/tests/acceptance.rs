//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any of them fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use groupscope::dsl::{
    exemplar, load_with_prelude, parse, parse_ontology, prelude, validate, AlarmLevel, AllenRelation, Attribute,
    BasicType, ClassDecl, Comparator, Component, Constraint, Ontology, Operand, PhysicalObject, ScenarioModel,
    ScenarioType, Value,
};
use groupscope::engine::{allen, Engine, EngineConfig, FrameState, Interval, ObjectRef, PrimitiveRegistry, SceneObject};
use groupscope::eval::{evaluate, precision_sensitivity, MatchConfig};
use groupscope::meanshift::{mean_shift, FeaturePoint};
use groupscope::pipeline::{run, RecognizeConfig, TrackConfig};
use groupscope::synth::{generate, Scenario, SynthConfig};
use groupscope::tracker::{group_incoherence, normalize, LifecycleKind, TrackerParams, WindowTrajectory};
use groupscope::{FrameId, GroundBounds, GroundTruthGroup, GroupRecord, Point2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. precision / sensitivity against the printed tables

/// (table, row, TP, FP, FN, printed precision, printed sensitivity)
const TABLE_ROWS: &[(&str, &str, u64, u64, u64, f64, f64)] = &[
    ("1", "method-a", 3699, 1379, 3572, 0.73, 0.51),
    ("1", "method-b", 3897, 185, 3374, 0.95, 0.54),
    ("1", "method-c", 4547, 125, 2724, 0.97, 0.62),
    ("1", "method-d", 6559, 128, 2598, 0.98, 0.72),
    ("2", "fc", 125, 101, 3, 0.55, 0.98),
    ("2", "fomd", 159, 0, 8, 1.0, 0.95),
    ("2", "fra1", 139, 0, 67, 1.0, 0.67),
    ("2", "fra2", 141, 0, 55, 1.0, 0.72),
    ("2", "mc1", 231, 0, 82, 1.0, 0.74),
    ("2", "ms3g", 145, 37, 37, 0.80, 0.80),
    ("2", "mwt1", 156, 0, 89, 1.0, 0.64),
    ("2", "mwt2", 336, 0, 268, 1.0, 0.56),
    ("2", "sp", 165, 4, 36, 1.0, 0.82),
    ("2", "c2es1", 858, 652, 487, 0.57, 0.64),
    ("2", "c2es3", 1093, 550, 735, 0.66, 0.60),
    ("2", "c2ls1", 788, 1664, 655, 0.32, 0.55),
    ("2", "c3ps1", 1298, 1135, 210, 0.54, 0.86),
    ("2", "cosme2", 1119, 852, 35, 0.57, 0.97),
    ("2", "csa1", 269, 163, 0, 0.63, 1.0),
    ("2", "cwbs1", 2224, 89, 1090, 0.96, 0.67),
    ("3", "1", 65, 0, 6, 1.0, 0.91),
    ("3", "2", 1346, 69, 318, 0.95, 0.80),
    ("3", "3", 6977, 1677, 4594, 0.80, 0.60),
];

fn metric_arithmetic() -> Outcome {
    let mut misses = Vec::new();
    for &(table, row, tp, fp, fn_, p, s) in TABLE_ROWS {
        let (cp, cs) = precision_sensitivity(tp, fp, fn_);
        // independent oracle: plain fractions
        let (op, os) = (tp as f64 / (tp + fp) as f64, tp as f64 / (tp + fn_) as f64);
        assert!((cp - op).abs() < 1e-12 && (cs - os).abs() < 1e-12);
        if (cp - p).abs() > 0.005 || (cs - s).abs() > 0.005 {
            misses.push(format!("T{table}/{row}: {cp:.4}/{cs:.4} vs printed {p:.2}/{s:.2}"));
        }
    }
    let n = TABLE_ROWS.len();
    if misses.is_empty() {
        outcome(true, format!("{n}/{n} rows within ±0.005"))
    } else {
        outcome(
            false,
            format!("{}/{n} rows within ±0.005; off: {}", n - misses.len(), misses.join("; ")),
        )
    }
}

// ---------------------------------------------------------------------------
// 2. the two listings

const GROUP_LISTING: &str = "class Group:Mobile {
   const false;
   CSInt NumberOfMobiles;
   CSDouble AverageDistMobiles;}
";

const BROWSING_LISTING: &str = "CompositeEvent(browsing,
  PhysicalObjects((g:Group),(e:Equipment))
  Components((c1:Group_Stop(g))
  \t(c2:Group_Near_Equipment(g,e)))
  Constraints((e->Name = \"shop_window\"))
  Alarm ((Level : URGENT)))
";

fn dsl_fidelity() -> Outcome {
    let group = match parse_ontology(GROUP_LISTING) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("Group listing: {e}")),
    };
    let expected_class = ClassDecl {
        name: "Group".into(),
        parent: "Mobile".into(),
        is_const: false,
        attributes: vec![
            Attribute {
                name: "NumberOfMobiles".into(),
                ty: BasicType::Int,
            },
            Attribute {
                name: "AverageDistMobiles".into(),
                ty: BasicType::Double,
            },
        ],
    };
    if group.classes != vec![expected_class] || !group.models.is_empty() {
        return outcome(false, format!("Group listing AST differs: {:?}", group.classes));
    }
    let browsing = match parse_ontology(BROWSING_LISTING) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("browsing listing: {e}")),
    };
    let expected_model = ScenarioModel {
        scenario_type: ScenarioType::CompositeEvent,
        name: "browsing".into(),
        physical_objects: vec![
            PhysicalObject {
                var: "g".into(),
                class: "Group".into(),
            },
            PhysicalObject {
                var: "e".into(),
                class: "Equipment".into(),
            },
        ],
        components: vec![
            Component {
                var: "c1".into(),
                model: "Group_Stop".into(),
                args: vec!["g".into()],
            },
            Component {
                var: "c2".into(),
                model: "Group_Near_Equipment".into(),
                args: vec!["g".into(), "e".into()],
            },
        ],
        constraints: vec![Constraint::Symbolic {
            lhs: Operand::Attr {
                var: "e".into(),
                attr: "Name".into(),
            },
            cmp: Comparator::Eq,
            rhs: Operand::Literal(Value::Str("shop_window".into())),
        }],
        alarm: AlarmLevel::Urgent,
    };
    if browsing.models != vec![expected_model] {
        return outcome(false, format!("browsing AST differs: {:?}", browsing.models));
    }
    let combined = prelude().overlay(&exemplar()).overlay(&group).overlay(&browsing);
    let diags = validate(&combined);
    if !diags.is_empty() {
        return outcome(false, format!("validation: {diags:?}"));
    }
    outcome(true, "both listings parse to the expected ASTs and validate cleanly")
}

// ---------------------------------------------------------------------------
// 3. Mean-Shift against connected components

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Points whose components are tighter than `tol` and further than `2 tol`
/// apart.
fn separated_points(rng: &mut ChaCha8Rng, tol: f64) -> Vec<FeaturePoint> {
    loop {
        let dim = rng.random_range(1..=4);
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=n.min(4));
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let mut pts: Vec<(usize, Vec<f64>)> = Vec::new();
        for i in 0..n {
            let c = if i < k { i } else { rng.random_range(0..k) };
            // inside a ball of radius tol/2 around the center
            let p: Vec<f64> = loop {
                let off: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5) * tol).collect();
                if off.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.49 * tol {
                    break centers[c].iter().zip(&off).map(|(a, b)| a + b).collect();
                }
            };
            pts.push((c, p));
        }
        let ok = pts.iter().enumerate().all(|(i, (ci, pi))| {
            pts[i + 1..].iter().all(|(cj, pj)| {
                let d = dist(pi, pj);
                if ci == cj {
                    d < tol
                } else {
                    d > 2.0 * tol
                }
            })
        });
        if ok {
            return pts
                .into_iter()
                .enumerate()
                .map(|(i, (_, p))| FeaturePoint::new(i as u64 + 1, p))
                .collect();
        }
    }
}

/// Connected components of the "closer than tol" graph.
fn components_oracle(pts: &[FeaturePoint], tol: f64) -> BTreeSet<Vec<u64>> {
    let n = pts.len();
    let mut label: Vec<usize> = (0..n).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..n {
                if dist(&pts[i].coords, &pts[j].coords) < tol && label[j] < label[i] {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (i, l) in label.iter().enumerate() {
        groups.entry(*l).or_default().push(pts[i].owner);
    }
    groups.into_values().collect()
}

fn meanshift_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 0.1;
    let mut failures = 0;
    let mut first = String::new();
    for case in 0..200 {
        let pts = separated_points(&mut rng, tol);
        let got: BTreeSet<Vec<u64>> = match mean_shift(&pts, tol) {
            Ok(c) => c.into_iter().map(|c| c.members).collect(),
            Err(e) => {
                failures += 1;
                first = format!("case {case}: {e}");
                continue;
            }
        };
        let want = components_oracle(&pts, tol);
        if got != want {
            failures += 1;
            if first.is_empty() {
                first = format!("case {case}: got {got:?}, oracle {want:?}");
            }
        }
    }
    if failures == 0 {
        outcome(true, "200/200 partitions equal the connected-components oracle")
    } else {
        outcome(false, format!("{failures}/200 mismatches; first {first}"))
    }
}

// ---------------------------------------------------------------------------
// 4. trigger-tree recognition against an exhaustive recognizer

struct Fixture {
    text: String,
    frames: u64,
    groups: Vec<u64>,
    /// schedule[primitive][group] = truth per frame
    schedule: Vec<BTreeMap<u64, Vec<bool>>>,
    /// per component: primitive index
    components: Vec<usize>,
    /// (left component, relation, right component)
    constraints: Vec<(usize, AllenRelation, usize)>,
    max_gap: u64,
}

fn random_fixture(rng: &mut ChaCha8Rng) -> Fixture {
    let frames = rng.random_range(10..=50);
    let groups: Vec<u64> = (1..=rng.random_range(1..=2)).collect();
    let schedule: Vec<BTreeMap<u64, Vec<bool>>> = (0..3)
        .map(|_| {
            groups
                .iter()
                .map(|&g| {
                    let mut on = rng.random_bool(0.5);
                    let flip = rng.random_range(0.05..0.35);
                    let v = (0..frames)
                        .map(|_| {
                            if rng.random_bool(flip) {
                                on = !on;
                            }
                            on
                        })
                        .collect();
                    (g, v)
                })
                .collect()
        })
        .collect();
    let k = rng.random_range(1..=3);
    let components: Vec<usize> = (0..k).map(|_| rng.random_range(0..3)).collect();
    let mut constraints = Vec::new();
    let pick = |rng: &mut ChaCha8Rng| AllenRelation::ALL[rng.random_range(0..AllenRelation::ALL.len())];
    if k == 2 && rng.random_bool(0.75) {
        let (a, b) = if rng.random_bool(0.5) { (0, 1) } else { (1, 0) };
        constraints.push((a, pick(rng), b));
    } else if k == 3 && rng.random_bool(0.8) {
        let mut order = vec![0, 1, 2];
        order.shuffle(rng);
        constraints.push((order[0], pick(rng), order[1]));
        constraints.push((order[1], pick(rng), order[2]));
    }
    let max_gap = rng.random_range(0..=2);

    let mut text = String::new();
    for p in 0..3 {
        text += &format!("PrimitiveState(P{p}, PhysicalObjects((g:Group)) Alarm((Level : NOTURGENT)))\n");
    }
    text += "CompositeEvent(M, PhysicalObjects((g:Group))\n  Components(";
    for (i, p) in components.iter().enumerate() {
        text += &format!("(c{i}:P{p}(g)) ");
    }
    text += ")\n";
    if !constraints.is_empty() {
        text += "  Constraints(";
        for (a, r, b) in &constraints {
            text += &format!("(c{a} {} c{b}) ", r.as_str());
        }
        text += ")\n";
    }
    text += "  Alarm((Level : URGENT)))\n";
    Fixture {
        text,
        frames,
        groups,
        schedule,
        components,
        constraints,
        max_gap,
    }
}

/// Intervals of a boolean series seen up to frame `t`, bridging up to
/// `max_gap` false frames.
fn intervals_upto(series: &[bool], t: u64, max_gap: u64) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for f in 0..=t {
        if !series[f as usize] {
            continue;
        }
        match out.last_mut() {
            Some(last) if f - last.1 - 1 <= max_gap => last.1 = f,
            _ => out.push((f, f)),
        }
    }
    out
}

fn relation_holds(r: AllenRelation, (s1, e1): (u64, u64), (s2, e2): (u64, u64)) -> bool {
    match r {
        AllenRelation::Before => e1 + 1 < s2,
        AllenRelation::Meets => e1 + 1 == s2,
        AllenRelation::Overlaps => s1 < s2 && s2 <= e1 && e1 < e2,
        AllenRelation::Starts => s1 == s2 && e1 < e2,
        AllenRelation::During => s2 < s1 && e1 < e2,
        AllenRelation::Finishes => e1 == e2 && s1 > s2,
        AllenRelation::Equals => s1 == s2 && e1 == e2,
    }
}

/// Union-merge of (group, start, end) recognitions.
fn merge_into(events: &mut Vec<(u64, u64, u64)>, new: (u64, u64, u64), max_gap: u64) {
    let (g, mut s, mut e) = new;
    events.retain(|&(g2, s2, e2)| {
        let near = g2 == g && s2 <= e + max_gap + 1 && s <= e2 + max_gap + 1;
        if near {
            s = s.min(s2);
            e = e.max(e2);
        }
        !near
    });
    // absorbing may have brought other events within reach
    let mut grown = true;
    while grown {
        grown = false;
        if let Some(i) = events
            .iter()
            .position(|&(g2, s2, e2)| g2 == g && s2 <= e + max_gap + 1 && s <= e2 + max_gap + 1)
        {
            let (_, s2, e2) = events.remove(i);
            s = s.min(s2);
            e = e.max(e2);
            grown = true;
        }
    }
    events.push((g, s, e));
}

fn brute_force(fx: &Fixture) -> BTreeSet<(u64, u64, u64)> {
    let mut events = Vec::new();
    for t in 0..fx.frames {
        for &g in &fx.groups {
            let per_comp: Vec<Vec<(u64, u64)>> = fx
                .components
                .iter()
                .map(|&p| intervals_upto(&fx.schedule[p][&g], t, fx.max_gap))
                .collect();
            let mut idx = vec![0usize; per_comp.len()];
            if per_comp.iter().any(|v| v.is_empty()) {
                continue;
            }
            loop {
                let tuple: Vec<(u64, u64)> = idx.iter().enumerate().map(|(c, &i)| per_comp[c][i]).collect();
                let ok = if fx.constraints.is_empty() {
                    let lo = tuple.iter().map(|x| x.0).max().unwrap();
                    let hi = tuple.iter().map(|x| x.1).min().unwrap();
                    lo <= hi
                } else {
                    fx.constraints.iter().all(|&(a, r, b)| relation_holds(r, tuple[a], tuple[b]))
                };
                if ok {
                    let s = tuple.iter().map(|x| x.0).min().unwrap();
                    let e = tuple.iter().map(|x| x.1).max().unwrap();
                    merge_into(&mut events, (g, s, e), fx.max_gap);
                }
                // next tuple
                let mut c = 0;
                loop {
                    if c == idx.len() {
                        break;
                    }
                    idx[c] += 1;
                    if idx[c] < per_comp[c].len() {
                        break;
                    }
                    idx[c] = 0;
                    c += 1;
                }
                if c == idx.len() {
                    break;
                }
            }
        }
    }
    events.into_iter().collect()
}

fn engine_events(fx: &Fixture) -> Result<BTreeSet<(u64, u64, u64)>, String> {
    let ont = load_with_prelude(&fx.text).map_err(|e| e.to_string())?;
    let mut registry = PrimitiveRegistry::new();
    for p in 0..3 {
        let sched = fx.schedule[p].clone();
        registry.register(&format!("P{p}"), move |objs, st, _| {
            let ObjectRef::Group(g) = objs[0].id else { return false };
            sched[&g][st.frame.0 as usize]
        });
    }
    let cfg = EngineConfig {
        max_gap: fx.max_gap,
        ..EngineConfig::default()
    };
    let mut engine = Engine::new(&ont, registry, cfg).map_err(|e| e.to_string())?;
    for t in 0..fx.frames {
        let state = FrameState {
            frame: FrameId(t),
            objects: fx
                .groups
                .iter()
                .map(|&g| SceneObject::new(ObjectRef::Group(g), "Group"))
                .collect(),
            lifecycle: vec![],
        };
        for r in engine.step(&state).map_err(|e| e.to_string())? {
            if r.interval.end.0 > t {
                return Err(format!("event {} ends after frame {t}", r.interval));
            }
        }
    }
    Ok(engine
        .finish()
        .iter()
        .filter(|e| e.model == "M")
        .map(|e| {
            let ObjectRef::Group(g) = e.bindings["g"] else { unreachable!() };
            (g, e.interval.start.0, e.interval.end.0)
        })
        .collect())
}

fn trigger_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut recognized = 0;
    for case in 0..100 {
        let fx = random_fixture(&mut rng);
        let want = brute_force(&fx);
        let got = match engine_events(&fx) {
            Ok(g) => g,
            Err(e) => return outcome(false, format!("fixture {case}: {e}\n{}", fx.text)),
        };
        if got != want {
            return outcome(
                false,
                format!("fixture {case}: engine {got:?}, brute force {want:?}\n{}", fx.text),
            );
        }
        recognized += usize::from(!want.is_empty());
    }
    outcome(
        true,
        format!("100/100 fixtures identical ({recognized} with at least one recognition)"),
    )
}

// ---------------------------------------------------------------------------
// 5. synthetic lifecycle suite

fn exemplar_ontology() -> Ontology {
    prelude().overlay(&exemplar())
}

fn run_scenario(scenario: Scenario, equipment: &str) -> (groupscope::pipeline::TrackOutput, Vec<groupscope::engine::RecognizedEvent>, Vec<GroundTruthGroup>) {
    let out = generate(&SynthConfig {
        scenario,
        equipment_name: equipment.into(),
        ..SynthConfig::default()
    });
    let track_cfg = TrackConfig::default();
    assert_eq!(track_cfg.params, TrackerParams::default());
    let (tracked, events) = run(
        &out.frames,
        &out.context,
        &exemplar_ontology(),
        PrimitiveRegistry::builtin(),
        &track_cfg,
        &RecognizeConfig::default(),
    )
    .expect("pipeline runs");
    (tracked, events, out.ground_truth)
}

fn lifecycle_suite() -> Outcome {
    let p = TrackerParams::default();
    if (p.window, p.tolerance, p.w_dist, p.w_speed, p.w_dir, p.link_threshold) != (20, 0.1, 7.0, 5.0, 5.0, 0.6) {
        return outcome(false, format!("tracker defaults differ: {p:?}"));
    }
    let mut notes = Vec::new();
    let mut pass = true;

    let (t, _, gt) = run_scenario(Scenario::WalkTogether, "shop_window");
    let ids: BTreeSet<u64> = t.groups.iter().map(|g| g.group_id).collect();
    let r = evaluate(&t.groups, &gt, &MatchConfig::default());
    let walk_ok =
        ids.len() == 1 && r.fragmentation == Some(1.0) && r.purity == Some(1.0) && r.tracking_time >= 0.9;
    pass &= walk_ok;
    notes.push(format!(
        "walk: {} group(s), frag {:?}, purity {:?}, tt {:.3}",
        ids.len(),
        r.fragmentation,
        r.purity,
        r.tracking_time
    ));

    let (t, events, _) = run_scenario(Scenario::SplitAfter(60), "shop_window");
    let splits = t.lifecycle.iter().filter(|e| e.kind == LifecycleKind::Split).count();
    let split_up = events.iter().filter(|e| e.model == "split_up").count();
    pass &= splits >= 1 && split_up >= 1;
    notes.push(format!("split: {splits} SPLIT, {split_up} split_up"));

    let (t, _, _) = run_scenario(Scenario::MergeAt(80), "shop_window");
    let created: BTreeMap<u64, FrameId> = t
        .lifecycle
        .iter()
        .filter(|e| e.kind == LifecycleKind::Created)
        .map(|e| (e.groups[0], e.frame))
        .collect();
    let merges: Vec<_> = t.lifecycle.iter().filter(|e| e.kind == LifecycleKind::Merged).collect();
    let merge_ok = merges.len() == 1 && {
        let m = merges[0];
        let (a, b) = (m.groups[0], m.groups[1]);
        let older = if (created.get(&a), a) <= (created.get(&b), b) { a } else { b };
        m.survivor() == Some(older) && created.get(&a) < created.get(&b)
    };
    pass &= merge_ok;
    notes.push(format!(
        "merge: {} MERGED {:?}",
        merges.len(),
        merges.first().map(|m| m.groups.clone())
    ));
    outcome(pass, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 6. browsing end to end

fn browsing_end_to_end() -> Outcome {
    let (_, events, _) = run_scenario(Scenario::StopNearEquipment, "shop_window");
    let browsing: Vec<_> = events.iter().filter(|e| e.model == "browsing").collect();
    let named_ok = browsing.len() == 1 && browsing[0].alarm == AlarmLevel::Urgent;
    let (_, renamed, _) = run_scenario(Scenario::StopNearEquipment, "ticket_machine");
    let renamed_count = renamed.iter().filter(|e| e.model == "browsing").count();
    outcome(
        named_ok && renamed_count == 0,
        format!(
            "shop_window: {} browsing {}; renamed equipment: {renamed_count} browsing",
            browsing.len(),
            browsing
                .first()
                .map(|e| format!("{} {}", e.interval, e.alarm.as_str()))
                .unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. property suites

const CASES: u32 = 128;

fn runner(seed: u8) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &[seed; 32]),
    )
}

fn bounds() -> GroundBounds {
    GroundBounds {
        min: Point2::new(0.0, 0.0),
        max: Point2::new(50.0, 40.0),
    }
}

fn trajectory(owner: u64, positions: Vec<Point2>, fps: f64) -> WindowTrajectory {
    let speeds = positions
        .windows(2)
        .map(|w| Point2::new((w[1].x - w[0].x) * fps, (w[1].y - w[0].y) * fps))
        .collect();
    let n = positions.len();
    WindowTrajectory {
        owner,
        start: FrameId(0),
        positions,
        speeds,
        observed_mask: vec![true; n],
    }
}

fn positions(len: usize) -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((-10.0f64..60.0, -10.0f64..50.0).prop_map(|(x, y)| Point2::new(x, y)), len)
}

fn prop_normalization() -> Result<(), String> {
    let strat = (positions(20), 0usize..20, 0.0f64..5.0);
    runner(1)
        .run(&strat, |(ps, i, dx)| {
            let w = trajectory(1, ps.clone(), 25.0);
            let f = normalize(&w, &bounds(), 10.0);
            prop_assert_eq!(f.coords.len(), 78);
            prop_assert!(f.coords.iter().all(|c| (0.0..=1.0).contains(c)));
            // moving one position further along x never lowers its coordinate
            let mut moved = ps.clone();
            moved[i].x += dx;
            let g = normalize(&trajectory(1, moved, 25.0), &bounds(), 10.0);
            prop_assert!(g.coords[2 * i] >= f.coords[2 * i]);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prop_incoherence() -> Result<(), String> {
    let params = TrackerParams::default();
    let strat = (prop::collection::vec(positions(20), 1..4), -20.0f64..20.0, -20.0f64..20.0);
    runner(2)
        .run(&strat, |(sets, ox, oy)| {
            let trajs: Vec<WindowTrajectory> = sets
                .iter()
                .enumerate()
                .map(|(i, ps)| trajectory(i as u64, ps.clone(), 25.0))
                .collect();
            let single = group_incoherence(&[&trajs[0]], &params);
            prop_assert_eq!(single.value, 0.0);
            let shifted: Vec<WindowTrajectory> = sets
                .iter()
                .enumerate()
                .map(|(i, ps)| {
                    trajectory(i as u64, ps.iter().map(|p| Point2::new(p.x + ox, p.y + oy)).collect(), 25.0)
                })
                .collect();
            let a = group_incoherence(&trajs.iter().collect::<Vec<_>>(), &params);
            let b = group_incoherence(&shifted.iter().collect::<Vec<_>>(), &params);
            prop_assert!((a.distance_avg - b.distance_avg).abs() < 1e-6);
            prop_assert!((a.speed_std - b.speed_std).abs() < 1e-6);
            prop_assert!((a.direction_std - b.direction_std).abs() < 1e-6);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prop_allen() -> Result<(), String> {
    let iv = (0u64..40, 0u64..15).prop_map(|(s, l)| Interval::new(s, s + l));
    runner(3)
        .run(&(iv.clone(), iv), |(a, b)| {
            let fwd = AllenRelation::ALL.iter().filter(|r| allen(**r, &a, &b)).count();
            let inv = AllenRelation::ALL
                .iter()
                .filter(|r| **r != AllenRelation::Equals && allen(**r, &b, &a))
                .count();
            prop_assert!(fwd <= 1);
            prop_assert_eq!(fwd + inv, 1);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9_]{0,6}".prop_map(|s| format!("v{s}"))
}

fn literal() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        (-1e6f64..1e6).prop_map(Value::Double),
        "[ -~]{0,8}".prop_map(Value::Str),
        (0u64..1000).prop_map(|f| Value::Timestamp(FrameId(f))),
        (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(a, b)| Value::Point2D([a, b])),
        prop::collection::vec((-1e3f64..1e3).prop_map(|a| [a, -a, 0.5]), 0..3).prop_map(Value::Point3DList),
    ]
}

fn ontology() -> impl Strategy<Value = Ontology> {
    let class = (
        ident(),
        ident(),
        any::<bool>(),
        prop::collection::vec((ident(), prop::sample::select(BasicType::ALL.to_vec())), 0..4),
    )
        .prop_map(|(name, parent, is_const, attrs)| ClassDecl {
            name,
            parent,
            is_const,
            attributes: attrs.into_iter().map(|(name, ty)| Attribute { name, ty }).collect(),
        });
    let operand = prop_oneof![
        (ident(), ident()).prop_map(|(var, attr)| Operand::Attr { var, attr }),
        ident().prop_map(Operand::Var),
        literal().prop_map(Operand::Literal),
    ];
    let cmp = prop::sample::select(vec![
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ]);
    let constraint = prop_oneof![
        (operand.clone(), cmp, operand).prop_map(|(lhs, cmp, rhs)| Constraint::Symbolic { lhs, cmp, rhs }),
        (ident(), prop::sample::select(AllenRelation::ALL.to_vec()), ident())
            .prop_map(|(left, relation, right)| Constraint::Temporal { left, relation, right }),
    ];
    let model = (
        prop::sample::select(vec![
            ScenarioType::PrimitiveState,
            ScenarioType::CompositeState,
            ScenarioType::PrimitiveEvent,
            ScenarioType::CompositeEvent,
        ]),
        ident(),
        prop::collection::vec((ident(), ident()).prop_map(|(var, class)| PhysicalObject { var, class }), 0..3),
        prop::collection::vec(
            (ident(), ident(), prop::collection::vec(ident(), 1..3))
                .prop_map(|(var, model, args)| Component { var, model, args }),
            0..3,
        ),
        prop::collection::vec(constraint, 0..3),
        prop::sample::select(vec![AlarmLevel::NotUrgent, AlarmLevel::Urgent, AlarmLevel::VeryUrgent]),
    )
        .prop_map(|(scenario_type, name, physical_objects, components, constraints, alarm)| ScenarioModel {
            scenario_type,
            name,
            physical_objects,
            components,
            constraints,
            alarm,
        });
    (prop::collection::vec(class, 0..3), prop::collection::vec(model, 0..3))
        .prop_map(|(classes, models)| Ontology { classes, models })
}

fn prop_parse_print_parse() -> Result<(), String> {
    runner(4)
        .run(&ontology(), |ont| {
            let once = parse(&ont.to_string()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(&once, &ont);
            let twice = parse(&once.to_string()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(twice, once);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn records_strategy() -> impl Strategy<Value = (Vec<GroupRecord>, Vec<GroundTruthGroup>)> {
    let members = prop::collection::btree_set(1u64..8, 1..4);
    let tracked = prop::collection::vec((0u64..10, 1u64..5, members.clone()), 0..25);
    let gt = prop::collection::vec((0u64..10, 1u64..4, members), 0..25);
    (tracked, gt).prop_map(|(t, g)| {
        // one row per (frame, id), distinct member sets within a frame
        let mut seen = BTreeSet::new();
        let mut sets = BTreeSet::new();
        let tracked = t
            .into_iter()
            .filter(|(f, id, m)| seen.insert((*f, *id)) && sets.insert((*f, m.clone())))
            .map(|(f, id, m)| GroupRecord {
                frame: FrameId(f),
                group_id: id,
                incoherence: 0.0,
                members: m,
            })
            .collect();
        let mut gts: BTreeMap<u64, GroundTruthGroup> = BTreeMap::new();
        let mut sets = BTreeSet::new();
        for (f, id, m) in g {
            if gts.get(&id).is_some_and(|g| g.members.contains_key(&FrameId(f))) || !sets.insert((f, m.clone())) {
                continue;
            }
            gts.entry(id)
                .or_insert_with(|| GroundTruthGroup {
                    gt_id: id,
                    members: BTreeMap::new(),
                })
                .members
                .insert(FrameId(f), m);
        }
        (tracked, gts.into_values().collect())
    })
}

fn prop_metrics() -> Result<(), String> {
    runner(5)
        .run(&(records_strategy(), 1u64..100), |((tracked, gt), shift)| {
            let cfg = MatchConfig::default();
            let r = evaluate(&tracked, &gt, &cfg);
            let unit = |v: f64| (0.0..=1.0).contains(&v);
            prop_assert!(unit(r.precision) && unit(r.sensitivity) && unit(r.tracking_time));
            prop_assert!(r.fragmentation.is_none_or(unit) && r.purity.is_none_or(unit));
            // renaming tracked ids (order-preserving and reversing) changes nothing
            for rename in [|id: u64, s: u64| id + s, |id: u64, s: u64| 1000 + s - id] {
                let renamed: Vec<GroupRecord> = tracked
                    .iter()
                    .map(|g| GroupRecord {
                        group_id: rename(g.group_id, shift),
                        ..g.clone()
                    })
                    .collect();
                let r2 = evaluate(&renamed, &gt, &cfg);
                prop_assert_eq!((r.tp, r.fp, r.fn_), (r2.tp, r2.fp, r2.fn_));
                prop_assert_eq!(r.fragmentation, r2.fragmentation);
                prop_assert_eq!(r.purity, r2.purity);
                prop_assert_eq!(r.tracking_time, r2.tracking_time);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prop_determinism() -> Result<(), String> {
    let scenario = prop_oneof![
        Just(Scenario::WalkTogether),
        (30u64..60).prop_map(Scenario::SplitAfter),
        (40u64..70).prop_map(Scenario::MergeAt),
        Just(Scenario::StopNearEquipment),
        Just(Scenario::Fig4),
    ];
    let ont = exemplar_ontology();
    runner(6)
        .run(&(scenario, any::<u64>()), |(scenario, seed)| {
            let cfg = SynthConfig {
                scenario,
                seed,
                ..SynthConfig::default()
            };
            let go = || {
                let out = generate(&cfg);
                let tracked = run(
                    &out.frames,
                    &out.context,
                    &ont,
                    PrimitiveRegistry::builtin(),
                    &TrackConfig::default(),
                    &RecognizeConfig::default(),
                )
                .expect("pipeline runs");
                (out, tracked)
            };
            prop_assert_eq!(go(), go());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn property_suites() -> Outcome {
    let suites: [(&str, fn() -> Result<(), String>); 6] = [
        ("normalization", prop_normalization),
        ("incoherence", prop_incoherence),
        ("allen", prop_allen),
        ("parse-print-parse", prop_parse_print_parse),
        ("metrics", prop_metrics),
        ("determinism", prop_determinism),
    ];
    let mut failed = Vec::new();
    for (name, f) in suites {
        if let Err(e) = f() {
            failed.push(format!("{name}: {e}"));
        }
    }
    if failed.is_empty() {
        outcome(true, format!("6 suites × {CASES} cases passed"))
    } else {
        outcome(false, failed.join("; "))
    }
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("metric arithmetic", metric_arithmetic, Duration::from_secs(1)),
        ("DSL fidelity", dsl_fidelity, Duration::from_secs(1)),
        ("Mean-Shift oracle equivalence", meanshift_oracle, Duration::from_secs(10)),
        ("trigger-tree equivalence", trigger_equivalence, Duration::from_secs(10)),
        ("synthetic lifecycle suite", lifecycle_suite, Duration::from_secs(30)),
        ("browsing end-to-end", browsing_end_to_end, Duration::from_secs(5)),
        ("invariant property suites", property_suites, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut o = check();
        let elapsed = start.elapsed();
        if elapsed > budget {
            o.pass = false;
            o.detail += &format!(" (over the {budget:?} budget)");
        }
        failures += usize::from(!o.pass);
        println!(
            "criterion {}: {} {name} [{:.2?}] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            elapsed,
            o.detail
        );
    }
    println!("acceptance: {}/7 criteria passed", 7 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
