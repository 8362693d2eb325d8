use std::collections::VecDeque;
use std::fmt;

use crate::scene::FrameId;

/// The basic attribute types of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasicType {
    Bool,
    Int,
    Double,
    String,
    Timestamp,
    Interval,
    Point2I,
    Point2D,
    Point3I,
    Point3D,
    Point3DList,
}

impl BasicType {
    pub const ALL: [BasicType; 11] = [
        BasicType::Bool,
        BasicType::Int,
        BasicType::Double,
        BasicType::String,
        BasicType::Timestamp,
        BasicType::Interval,
        BasicType::Point2I,
        BasicType::Point2D,
        BasicType::Point3I,
        BasicType::Point3D,
        BasicType::Point3DList,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            BasicType::Bool => "CSBool",
            BasicType::Int => "CSInt",
            BasicType::Double => "CSDouble",
            BasicType::String => "CSString",
            BasicType::Timestamp => "CSTimestamp",
            BasicType::Interval => "CSInterval",
            BasicType::Point2I => "CSPoint2I",
            BasicType::Point2D => "CSPoint2D",
            BasicType::Point3I => "CSPoint3I",
            BasicType::Point3D => "CSPoint3D",
            BasicType::Point3DList => "CSPoint3DList",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.keyword() == s)
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, BasicType::Int | BasicType::Double)
    }

    /// Types whose values have a total order usable with `<`, `<=`, ...
    pub fn is_ordered(self) -> bool {
        matches!(self, BasicType::Int | BasicType::Double | BasicType::Timestamp | BasicType::String)
    }
}

impl fmt::Display for BasicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A literal or attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Double(f64),
    Str(String),
    Timestamp(FrameId),
    Interval(FrameId, FrameId),
    Point2I([i64; 2]),
    Point2D([f64; 2]),
    Point3I([i64; 3]),
    Point3D([f64; 3]),
    Point3DList(Vec<[f64; 3]>),
}

impl Value {
    pub fn basic_type(&self) -> BasicType {
        match self {
            Value::Bool(_) => BasicType::Bool,
            Value::Int(_) => BasicType::Int,
            Value::Double(_) => BasicType::Double,
            Value::Str(_) => BasicType::String,
            Value::Timestamp(_) => BasicType::Timestamp,
            Value::Interval(..) => BasicType::Interval,
            Value::Point2I(_) => BasicType::Point2I,
            Value::Point2D(_) => BasicType::Point2D,
            Value::Point3I(_) => BasicType::Point3I,
            Value::Point3D(_) => BasicType::Point3D,
            Value::Point3DList(_) => BasicType::Point3DList,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Double(v) => Some(*v),
            Value::Timestamp(f) => Some(f.0 as f64),
            _ => None,
        }
    }

    /// Whether a value of this type may be compared with `other`. Integers and
    /// doubles compare with each other.
    pub fn comparable_types(a: BasicType, b: BasicType) -> bool {
        a == b || (a.is_numeric() && b.is_numeric())
    }

    pub fn compare(&self, cmp: Comparator, other: &Value) -> bool {
        use std::cmp::Ordering;
        let ord = match (self, other) {
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            _ => match (self.as_f64(), other.as_f64()) {
                (Some(a), Some(b)) => a.partial_cmp(&b),
                _ => None,
            },
        };
        match (cmp, ord) {
            (Comparator::Eq, Some(o)) => o == Ordering::Equal,
            (Comparator::Ne, Some(o)) => o != Ordering::Equal,
            (Comparator::Eq, None) => self == other,
            (Comparator::Ne, None) => self != other,
            (Comparator::Lt, Some(o)) => o == Ordering::Less,
            (Comparator::Le, Some(o)) => o != Ordering::Greater,
            (Comparator::Gt, Some(o)) => o == Ordering::Greater,
            (Comparator::Ge, Some(o)) => o != Ordering::Less,
            (_, None) => false,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // `{:?}` is the shortest representation that parses back exactly
    format!("{v:?}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: Vec<String>| xs.join(", ");
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Double(d) => f.write_str(&fmt_f64(*d)),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::Timestamp(t) => write!(f, "@{t}"),
            Value::Interval(a, b) => write!(f, "[{a}..{b}]"),
            Value::Point2I(p) => write!(f, "[{}]", join(p.iter().map(|v| v.to_string()).collect())),
            Value::Point3I(p) => write!(f, "[{}]", join(p.iter().map(|v| v.to_string()).collect())),
            Value::Point2D(p) => write!(f, "[{}]", join(p.iter().map(|v| fmt_f64(*v)).collect())),
            Value::Point3D(p) => write!(f, "[{}]", join(p.iter().map(|v| fmt_f64(*v)).collect())),
            Value::Point3DList(ps) => {
                let items = ps
                    .iter()
                    .map(|p| format!("[{}]", join(p.iter().map(|v| fmt_f64(*v)).collect())))
                    .collect();
                write!(f, "[{}]", join(items))
            }
        }
    }
}

pub const DEFAULT_HISTORY_CAPACITY: usize = 128;

/// Bounded record of the values an attribute took over time. Oldest entries
/// are evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    capacity: usize,
    entries: VecDeque<(FrameId, Value)>,
}

impl Default for History {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_HISTORY_CAPACITY)
    }
}

impl History {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::new(),
        }
    }

    /// Records `value` at `frame`; a second value for the same frame replaces
    /// the first.
    pub fn push(&mut self, frame: FrameId, value: Value) {
        if let Some(last) = self.entries.back_mut() {
            if last.0 == frame {
                last.1 = value;
                return;
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((frame, value));
    }

    pub fn latest(&self) -> Option<&Value> {
        self.entries.back().map(|(_, v)| v)
    }

    /// Value in effect at `frame`: the last one recorded at or before it.
    pub fn at(&self, frame: FrameId) -> Option<&Value> {
        self.entries.iter().rev().find(|(f, _)| *f <= frame).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(FrameId, Value)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub ty: BasicType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub parent: String,
    pub is_const: bool,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioType {
    PrimitiveState,
    CompositeState,
    PrimitiveEvent,
    CompositeEvent,
}

impl ScenarioType {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioType::PrimitiveState => "PrimitiveState",
            ScenarioType::CompositeState => "CompositeState",
            ScenarioType::PrimitiveEvent => "PrimitiveEvent",
            ScenarioType::CompositeEvent => "CompositeEvent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PrimitiveState" => Some(ScenarioType::PrimitiveState),
            "CompositeState" => Some(ScenarioType::CompositeState),
            "PrimitiveEvent" => Some(ScenarioType::PrimitiveEvent),
            "CompositeEvent" => Some(ScenarioType::CompositeEvent),
            _ => None,
        }
    }

    pub fn is_primitive(self) -> bool {
        matches!(self, ScenarioType::PrimitiveState | ScenarioType::PrimitiveEvent)
    }
}

/// Alarm levels, ordered from least to most urgent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum AlarmLevel {
    #[default]
    NotUrgent,
    Urgent,
    VeryUrgent,
}

impl AlarmLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            AlarmLevel::NotUrgent => "NOTURGENT",
            AlarmLevel::Urgent => "URGENT",
            AlarmLevel::VeryUrgent => "VERYURGENT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "NOTURGENT" => Some(AlarmLevel::NotUrgent),
            "URGENT" => Some(AlarmLevel::Urgent),
            "VERYURGENT" => Some(AlarmLevel::VeryUrgent),
            _ => None,
        }
    }
}

impl fmt::Display for AlarmLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, Comparator::Eq | Comparator::Ne)
    }
}

/// The temporal relations available between two components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllenRelation {
    Before,
    Meets,
    Overlaps,
    Starts,
    During,
    Finishes,
    Equals,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 7] = [
        AllenRelation::Before,
        AllenRelation::Meets,
        AllenRelation::Overlaps,
        AllenRelation::Starts,
        AllenRelation::During,
        AllenRelation::Finishes,
        AllenRelation::Equals,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AllenRelation::Before => "before",
            AllenRelation::Meets => "meets",
            AllenRelation::Overlaps => "overlaps",
            AllenRelation::Starts => "starts",
            AllenRelation::During => "during",
            AllenRelation::Finishes => "finishes",
            AllenRelation::Equals => "equals",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for AllenRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    /// `var->Attr`
    Attr { var: String, attr: String },
    /// A bare variable: a physical object or a component.
    Var(String),
    Literal(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Symbolic { lhs: Operand, cmp: Comparator, rhs: Operand },
    Temporal { left: String, relation: AllenRelation, right: String },
}

impl Constraint {
    pub fn is_temporal(&self) -> bool {
        matches!(self, Constraint::Temporal { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalObject {
    pub var: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub var: String,
    pub model: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioModel {
    pub scenario_type: ScenarioType,
    pub name: String,
    pub physical_objects: Vec<PhysicalObject>,
    pub components: Vec<Component>,
    pub constraints: Vec<Constraint>,
    pub alarm: AlarmLevel,
}

impl ScenarioModel {
    pub fn object_class(&self, var: &str) -> Option<&str> {
        self.physical_objects.iter().find(|p| p.var == var).map(|p| p.class.as_str())
    }

    pub fn component(&self, var: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.var == var)
    }

    pub fn temporal_constraints(&self) -> impl Iterator<Item = (&str, AllenRelation, &str)> {
        self.constraints.iter().filter_map(|c| match c {
            Constraint::Temporal { left, relation, right } => Some((left.as_str(), *relation, right.as_str())),
            _ => None,
        })
    }

    pub fn symbolic_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| !c.is_temporal())
    }
}

/// Parsed class declarations and event models, in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ontology {
    pub classes: Vec<ClassDecl>,
    pub models: Vec<ScenarioModel>,
}

impl Ontology {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn model(&self, name: &str) -> Option<&ScenarioModel> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Layers `other` over `self`: classes of `other` replace same-named ones,
    /// models are appended (same-named ones replaced).
    pub fn overlay(&self, other: &Ontology) -> Ontology {
        let mut classes: Vec<ClassDecl> = self
            .classes
            .iter()
            .filter(|c| other.class(&c.name).is_none())
            .cloned()
            .collect();
        classes.extend(other.classes.iter().cloned());
        let mut models: Vec<ScenarioModel> = self
            .models
            .iter()
            .filter(|m| other.model(&m.name).is_none())
            .cloned()
            .collect();
        models.extend(other.models.iter().cloned());
        Ontology { classes, models }
    }
}
