//! Event recognition over tracked groups and the scene context.
//!
//! Primitive models are evaluated on every frame for every compatible tuple of
//! objects and turned into intervals. Composite models are optimized to
//! binary form and re-evaluated only when one of their trigger components is
//! recognized or extended.

mod allen;
mod objects;
mod primitives;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

pub use allen::{allen, allen_by_name, Interval};
pub use objects::{context_objects, FrameState, ObjectRef, SceneObject};
pub use primitives::{Evaluator, PrimitiveParams, PrimitiveRegistry};

use crate::dsl::{
    build_trigger_tree, optimize_all, validate, AlarmLevel, Anchor, ClassTable, Constraint, Diagnostic,
    History, Ontology, OptimizeError, OptimizedModel, Operand, PhysicalObject, Value, DEFAULT_HISTORY_CAPACITY,
};
use crate::scene::{EventRecord, FrameId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid ontology:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("primitive model {0} has neither an evaluator nor constraints")]
    MissingEvaluator(String),
    #[error("unknown temporal relation '{0}'")]
    UnknownRelation(String),
    #[error("frame {got} fed after frame {last}")]
    OutOfOrder { last: FrameId, got: FrameId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Longest run of false frames bridged inside one interval.
    pub max_gap: u64,
    pub params: PrimitiveParams,
    pub history_capacity: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_gap: 0,
            params: PrimitiveParams::default(),
            history_capacity: DEFAULT_HISTORY_CAPACITY,
        }
    }
}

pub type Bindings = BTreeMap<String, ObjectRef>;

#[derive(Debug, Clone, PartialEq)]
pub struct RecognizedEvent {
    pub model: String,
    pub bindings: Bindings,
    pub interval: Interval,
    pub alarm: AlarmLevel,
}

impl RecognizedEvent {
    pub fn to_record(&self) -> EventRecord {
        EventRecord {
            name: self.model.clone(),
            start: self.interval.start,
            end: self.interval.end,
            alarm: self.alarm.as_str().to_string(),
            bindings: self.bindings.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
        }
    }
}

/// Whether a true observation at `frame` continues an interval ending at
/// `end` when up to `max_gap` false frames may be bridged.
pub fn bridges(end: FrameId, frame: FrameId, max_gap: u64) -> bool {
    frame > end && frame.0 - end.0 - 1 <= max_gap
}

/// Intervals of one boolean signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalTrack {
    pub max_gap: u64,
    pub intervals: Vec<Interval>,
}

impl IntervalTrack {
    pub fn new(max_gap: u64) -> Self {
        Self {
            max_gap,
            intervals: Vec::new(),
        }
    }

    /// Records the value of the signal at `frame`; frames must increase.
    pub fn observe(&mut self, frame: FrameId, value: bool) {
        let max_gap = self.max_gap;
        if let Some(last) = self.intervals.last_mut() {
            if value && bridges(last.end, frame, max_gap) {
                last.end = frame;
                last.open = true;
                return;
            }
            if frame.0 > last.end.0 + max_gap {
                last.open = false;
            }
        }
        if value {
            self.intervals.push(Interval::at(frame));
        }
    }
}

/// Merges `new` into `events`: every event of the same model and bindings
/// whose interval overlaps or lies within `max_gap` frames of it is fused into
/// one. The result does not depend on insertion order.
pub fn dedupe(events: &mut Vec<RecognizedEvent>, new: RecognizedEvent, max_gap: u64) {
    let mut merged = new;
    let mut first: Option<usize> = None;
    let mut i = 0;
    while i < events.len() {
        let e = &events[i];
        let near = e.model == merged.model
            && e.bindings == merged.bindings
            && e.interval.start.0 <= merged.interval.end.0 + max_gap + 1
            && merged.interval.start.0 <= e.interval.end.0 + max_gap + 1;
        if near {
            merged.interval = e.interval.hull(&merged.interval);
            merged.alarm = merged.alarm.max(e.alarm);
            if first.is_none() {
                first = Some(i);
                i += 1;
            } else {
                events.remove(i);
            }
        } else {
            i += 1;
        }
    }
    match first {
        Some(k) => events[k] = merged,
        None => events.push(merged),
    }
}

/// Events at or above `min`, in order NOTURGENT < URGENT < VERYURGENT.
pub fn filter_by_alarm(events: &[RecognizedEvent], min: AlarmLevel) -> Vec<RecognizedEvent> {
    events.iter().filter(|e| e.alarm >= min).cloned().collect()
}

type InstId = usize;

#[derive(Debug, Clone)]
struct Instance {
    model: usize,
    bindings: Bindings,
    hull: Interval,
    anchor: Interval,
    parts: Vec<InstId>,
    alive: bool,
}

#[derive(Debug, Clone)]
struct Slot {
    var: String,
    model: usize,
    args: Vec<String>,
    trigger: bool,
}

#[derive(Debug, Clone)]
struct Model {
    opt: OptimizedModel,
    primitive: bool,
    slots: Vec<Slot>,
    alive: BTreeSet<InstId>,
    by_parts: HashMap<Vec<InstId>, Vec<InstId>>,
}

impl Model {
    fn name(&self) -> &str {
        &self.opt.model.name
    }

    fn params(&self) -> &[PhysicalObject] {
        &self.opt.model.physical_objects
    }
}

#[derive(Default)]
struct Changes {
    changed: Vec<BTreeSet<InstId>>,
    removed: Vec<BTreeSet<InstId>>,
}

pub struct Engine {
    models: Vec<Model>,
    index: HashMap<String, usize>,
    /// Composite models, components before their users.
    order: Vec<usize>,
    table: ClassTable,
    registry: PrimitiveRegistry,
    config: EngineConfig,
    insts: Vec<Instance>,
    users: HashMap<InstId, Vec<InstId>>,
    prim_current: HashMap<(usize, Bindings), InstId>,
    histories: HashMap<ObjectRef, BTreeMap<String, History>>,
    classes: BTreeMap<ObjectRef, String>,
    events: Vec<RecognizedEvent>,
    last_frame: Option<FrameId>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("models", &self.models.iter().map(Model::name).collect::<Vec<_>>())
            .field("last_frame", &self.last_frame)
            .field("events", &self.events.len())
            .finish()
    }
}

impl Engine {
    /// Builds an engine for a complete ontology (prelude included).
    pub fn new(ontology: &Ontology, registry: PrimitiveRegistry, config: EngineConfig) -> Result<Self, EngineError> {
        let diags = validate(ontology);
        if !diags.is_empty() {
            return Err(EngineError::Invalid(diags));
        }
        let optimized = optimize_all(ontology)?;
        let tree = build_trigger_tree(&optimized);
        let index: HashMap<String, usize> = optimized
            .iter()
            .enumerate()
            .map(|(i, o)| (o.model.name.clone(), i))
            .collect();
        let mut models = Vec::with_capacity(optimized.len());
        for o in &optimized {
            let primitive = o.model.components.is_empty();
            if primitive && !registry.contains(&o.model.name) && o.model.constraints.is_empty() {
                return Err(EngineError::MissingEvaluator(o.model.name.clone()));
            }
            let slots = o
                .model
                .components
                .iter()
                .map(|c| Slot {
                    var: c.var.clone(),
                    model: index[&c.model],
                    args: c.args.clone(),
                    trigger: tree.is_trigger(&o.model.name, &c.var),
                })
                .collect();
            models.push(Model {
                opt: o.clone(),
                primitive,
                slots,
                alive: BTreeSet::new(),
                by_parts: HashMap::new(),
            });
        }
        let order = topological(&models);
        Ok(Self {
            models,
            index,
            order,
            table: ClassTable::new(&ontology.classes),
            registry,
            config,
            insts: Vec::new(),
            users: HashMap::new(),
            prim_current: HashMap::new(),
            histories: HashMap::new(),
            classes: BTreeMap::new(),
            events: Vec::new(),
            last_frame: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// All recognitions so far, merged per model and bindings. Generated
    /// intermediate models are never reported.
    pub fn events(&self) -> &[RecognizedEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<RecognizedEvent> {
        self.events
    }

    pub fn is_primitive(&self, model: &str) -> bool {
        self.index.get(model).is_some_and(|i| self.models[*i].primitive)
    }

    /// Object tuples a primitive model is instantiated with at this frame,
    /// after the symbolic constraints are applied.
    pub fn instantiations(&self, model: &str, state: &FrameState) -> Vec<Bindings> {
        let Some(&m) = self.index.get(model) else { return Vec::new() };
        let lookup = |o: &ObjectRef, a: &str| state.object(o).and_then(|x| x.get(a)).cloned();
        let model = &self.models[m];
        self.enumerate(model.params(), Bindings::new(), state.objects.iter().map(|o| (&o.id, o.class.as_str())))
            .into_iter()
            .filter(|b| symbolic_ok(&model.opt.model.constraints, b, &lookup))
            .collect()
    }

    fn enumerate<'a>(
        &self,
        params: &[PhysicalObject],
        seed: Bindings,
        objects: impl Iterator<Item = (&'a ObjectRef, &'a str)> + Clone,
    ) -> Vec<Bindings> {
        let mut out = vec![seed];
        for p in params {
            let mut next = Vec::new();
            for b in out {
                if b.contains_key(&p.var) {
                    next.push(b);
                    continue;
                }
                for (id, class) in objects.clone() {
                    if !self.table.is_subclass(class, &p.class) || b.values().any(|v| v == id) {
                        continue;
                    }
                    let mut nb = b.clone();
                    nb.insert(p.var.clone(), id.clone());
                    next.push(nb);
                }
            }
            out = next;
        }
        out
    }

    fn attribute(&self, obj: &ObjectRef, attr: &str) -> Option<Value> {
        self.histories.get(obj)?.get(attr)?.latest().cloned()
    }

    fn record(&mut self, state: &FrameState) {
        let cap = self.config.history_capacity;
        for o in &state.objects {
            self.classes.insert(o.id.clone(), o.class.clone());
            let h = self.histories.entry(o.id.clone()).or_default();
            for (k, v) in &o.attributes {
                h.entry(k.clone())
                    .or_insert_with(|| History::with_capacity(cap))
                    .push(state.frame, v.clone());
            }
        }
    }

    fn new_instance(&mut self, inst: Instance) -> InstId {
        let id = self.insts.len();
        for &p in &inst.parts {
            self.users.entry(p).or_default().push(id);
        }
        self.models[inst.model].alive.insert(id);
        if !inst.parts.is_empty() {
            self.models[inst.model].by_parts.entry(inst.parts.clone()).or_default().push(id);
        }
        self.insts.push(inst);
        id
    }

    fn kill(&mut self, id: InstId, changes: &mut Changes) {
        let inst = &mut self.insts[id];
        if !inst.alive {
            return;
        }
        inst.alive = false;
        let m = inst.model;
        self.models[m].alive.remove(&id);
        changes.changed[m].remove(&id);
        changes.removed[m].insert(id);
    }

    fn step_primitives(&mut self, state: &FrameState, changes: &mut Changes) {
        let t = state.frame;
        let objects: Vec<(&ObjectRef, &str)> = state.objects.iter().map(|o| (&o.id, o.class.as_str())).collect();
        let lookup = |o: &ObjectRef, a: &str| state.object(o).and_then(|x| x.get(a)).cloned();
        for m in 0..self.models.len() {
            if !self.models[m].primitive {
                continue;
            }
            let model = &self.models[m];
            let mut truths = Vec::new();
            for b in self.enumerate(model.params(), Bindings::new(), objects.iter().copied()) {
                if !symbolic_ok(&model.opt.model.constraints, &b, &lookup) {
                    continue;
                }
                let holds = match self.registry.get(model.name()) {
                    Some(f) => {
                        let objs: Vec<&SceneObject> = model
                            .params()
                            .iter()
                            .filter_map(|p| state.object(&b[&p.var]))
                            .collect();
                        f(&objs, state, &self.config.params)
                    }
                    None => true,
                };
                if holds {
                    truths.push(b);
                }
            }
            for b in truths {
                let key = (m, b);
                let current = self.prim_current.get(&key).copied();
                match current {
                    Some(id) if bridges(self.insts[id].hull.end, t, self.config.max_gap) => {
                        let inst = &mut self.insts[id];
                        inst.hull.end = t;
                        inst.hull.open = true;
                        inst.anchor = inst.hull;
                        changes.changed[m].insert(id);
                    }
                    _ => {
                        let id = self.new_instance(Instance {
                            model: m,
                            bindings: key.1.clone(),
                            hull: Interval::at(t),
                            anchor: Interval::at(t),
                            parts: Vec::new(),
                            alive: true,
                        });
                        self.prim_current.insert(key, id);
                        changes.changed[m].insert(id);
                    }
                }
            }
        }
    }

    /// Valid binding sets for `parts` in model `m`, with the instance's hull
    /// and anchor; `None` when the temporal constraint fails.
    fn combine(&self, m: usize, parts: &[InstId]) -> Option<(Vec<Bindings>, Interval, Interval)> {
        let model = &self.models[m];
        let mut b = Bindings::new();
        for (slot, &p) in model.slots.iter().zip(parts) {
            let sub = &self.models[slot.model];
            for (param, arg) in sub.params().iter().zip(&slot.args) {
                let obj = self.insts[p].bindings.get(&param.var)?;
                match b.get(arg) {
                    Some(existing) if existing != obj => return None,
                    _ => {
                        b.insert(arg.clone(), obj.clone());
                    }
                }
            }
        }
        let anchor_of = |var: &str| -> Option<Interval> {
            let k = model.slots.iter().position(|s| s.var == var)?;
            Some(self.insts[parts[k]].anchor)
        };
        let temporal = model.opt.temporal();
        match temporal {
            Some((l, rel, r)) => {
                if !allen(rel, &anchor_of(l)?, &anchor_of(r)?) {
                    return None;
                }
            }
            None if parts.len() == 2 => {
                self.insts[parts[0]].anchor.intersection(&self.insts[parts[1]].anchor)?;
            }
            None => {}
        }
        let hull = parts
            .iter()
            .map(|&p| self.insts[p].hull)
            .reduce(|a, b| a.hull(&b))
            .expect("composite models have components");
        let anchor = match &model.opt.anchor {
            Anchor::Hull => hull,
            Anchor::Component(v) => anchor_of(v)?,
            Anchor::Intersection => {
                let a = &self.insts[parts[0]].anchor;
                match parts.get(1) {
                    Some(&q) => a.intersection(&self.insts[q].anchor)?,
                    None => *a,
                }
            }
        };
        // distinct variables bind distinct objects
        let values: BTreeSet<&ObjectRef> = b.values().collect();
        if values.len() != b.len() {
            return None;
        }
        let known = self.classes.iter().map(|(id, c)| (id, c.as_str()));
        let lookup = |o: &ObjectRef, a: &str| self.attribute(o, a);
        let sets: Vec<Bindings> = self
            .enumerate(model.params(), b, known)
            .into_iter()
            .filter(|b| symbolic_ok(&model.opt.model.constraints, b, &lookup))
            .collect();
        Some((sets, hull, anchor))
    }

    fn evaluate(&mut self, m: usize, parts: Vec<InstId>, changes: &mut Changes) {
        let (sets, hull, anchor) = self.combine(m, &parts).unwrap_or_default();
        let existing: Vec<InstId> = self.models[m]
            .by_parts
            .get(&parts)
            .map(|v| v.iter().copied().filter(|i| self.insts[*i].alive).collect())
            .unwrap_or_default();
        for &id in &existing {
            if !sets.contains(&self.insts[id].bindings) {
                self.kill(id, changes);
            }
        }
        for b in sets {
            match existing.iter().find(|&&id| self.insts[id].bindings == b) {
                Some(&id) => {
                    let inst = &mut self.insts[id];
                    if !inst.hull.same_span(&hull) || !inst.anchor.same_span(&anchor) {
                        inst.hull = hull;
                        inst.anchor = anchor;
                        changes.changed[m].insert(id);
                    }
                }
                None => {
                    let id = self.new_instance(Instance {
                        model: m,
                        bindings: b,
                        hull,
                        anchor,
                        parts: parts.clone(),
                        alive: true,
                    });
                    changes.changed[m].insert(id);
                }
            }
        }
    }

    fn step_composite(&mut self, m: usize, changes: &mut Changes) {
        let slots = self.models[m].slots.clone();
        for (k, slot) in slots.iter().enumerate() {
            let removed: Vec<InstId> = changes.removed[slot.model].iter().copied().collect();
            for r in removed {
                let users: Vec<InstId> = self.users.get(&r).cloned().unwrap_or_default();
                for u in users {
                    if self.insts[u].model == m && self.insts[u].parts[k] == r {
                        self.kill(u, changes);
                    }
                }
            }
            let changed: Vec<InstId> = changes.changed[slot.model].iter().copied().collect();
            for c in changed {
                if !self.insts[c].alive {
                    continue;
                }
                if slot.trigger {
                    match slots.len() {
                        1 => self.evaluate(m, vec![c], changes),
                        _ => {
                            let other = 1 - k;
                            let partners: Vec<InstId> = self.models[slots[other].model].alive.iter().copied().collect();
                            for o in partners {
                                let parts = if k == 0 { vec![c, o] } else { vec![o, c] };
                                self.evaluate(m, parts, changes);
                            }
                        }
                    }
                } else {
                    let users: Vec<InstId> = self.users.get(&c).cloned().unwrap_or_default();
                    for u in users {
                        let inst = &self.insts[u];
                        if inst.model == m && inst.alive && inst.parts[k] == c {
                            let parts = inst.parts.clone();
                            self.evaluate(m, parts, changes);
                        }
                    }
                }
            }
        }
    }

    /// Processes one frame and returns the recognitions made at it (new
    /// events and extensions of known ones).
    pub fn step(&mut self, state: &FrameState) -> Result<Vec<RecognizedEvent>, EngineError> {
        if let Some(last) = self.last_frame {
            if state.frame <= last {
                return Err(EngineError::OutOfOrder { last, got: state.frame });
            }
        }
        self.last_frame = Some(state.frame);
        self.record(state);
        let n = self.models.len();
        let mut changes = Changes {
            changed: vec![BTreeSet::new(); n],
            removed: vec![BTreeSet::new(); n],
        };
        self.step_primitives(state, &mut changes);
        for i in 0..self.order.len() {
            let m = self.order[i];
            self.step_composite(m, &mut changes);
        }

        let t = state.frame;
        let max_gap = self.config.max_gap;
        for e in &mut self.events {
            e.interval.open = e.interval.end.0 + max_gap >= t.0;
        }
        let mut out = Vec::new();
        for (m, ids) in changes.changed.iter().enumerate() {
            let model = &self.models[m];
            if model.opt.is_generated() {
                continue;
            }
            for &id in ids {
                let inst = &self.insts[id];
                let mut interval = inst.hull;
                interval.open = interval.end == t;
                out.push(RecognizedEvent {
                    model: model.name().to_string(),
                    bindings: inst.bindings.clone(),
                    interval,
                    alarm: model.opt.model.alarm,
                });
            }
        }
        for e in &out {
            dedupe(&mut self.events, e.clone(), max_gap);
        }
        Ok(out)
    }

    /// Closes every event; call after the last frame.
    pub fn finish(&mut self) -> &[RecognizedEvent] {
        for e in &mut self.events {
            e.interval.open = false;
        }
        &self.events
    }
}

fn topological(models: &[Model]) -> Vec<usize> {
    fn visit(m: usize, models: &[Model], done: &mut Vec<bool>, out: &mut Vec<usize>) {
        if done[m] {
            return;
        }
        done[m] = true;
        for s in &models[m].slots {
            visit(s.model, models, done, out);
        }
        if !models[m].primitive {
            out.push(m);
        }
    }
    let mut done = vec![false; models.len()];
    let mut out = Vec::new();
    for m in 0..models.len() {
        visit(m, models, &mut done, &mut out);
    }
    out
}

fn resolve(op: &Operand, b: &Bindings, lookup: &impl Fn(&ObjectRef, &str) -> Option<Value>) -> Option<Resolved> {
    match op {
        Operand::Literal(v) => Some(Resolved::Value(v.clone())),
        Operand::Var(v) => b.get(v).cloned().map(Resolved::Object),
        Operand::Attr { var, attr } => lookup(b.get(var)?, attr).map(Resolved::Value),
    }
}

enum Resolved {
    Value(Value),
    Object(ObjectRef),
}

/// Symbolic constraints of a model under `b`. Constraints mentioning an
/// unbound variable or a missing attribute fail.
fn symbolic_ok(
    constraints: &[Constraint],
    b: &Bindings,
    lookup: &impl Fn(&ObjectRef, &str) -> Option<Value>,
) -> bool {
    constraints.iter().all(|c| match c {
        Constraint::Temporal { .. } => true,
        Constraint::Symbolic { lhs, cmp, rhs } => match (resolve(lhs, b, lookup), resolve(rhs, b, lookup)) {
            (Some(Resolved::Value(l)), Some(Resolved::Value(r))) => l.compare(*cmp, &r),
            (Some(Resolved::Object(l)), Some(Resolved::Object(r))) => match cmp {
                crate::dsl::Comparator::Eq => l == r,
                crate::dsl::Comparator::Ne => l != r,
                _ => false,
            },
            _ => false,
        },
    })
}
