use std::collections::BTreeMap;
use std::fmt;

use crate::dsl::Value;
use crate::scene::{FrameId, SceneContext};
use crate::tracker::{GroupId, GroupLifecycleEvent};

/// Identity of an object an event can bind to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectRef {
    Group(GroupId),
    Zone(String),
    Equipment(String),
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectRef::Group(id) => write!(f, "{id}"),
            ObjectRef::Zone(n) | ObjectRef::Equipment(n) => f.write_str(n),
        }
    }
}

/// An object present in one frame with its current attribute values.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: ObjectRef,
    /// Ontology class name, e.g. `Group`.
    pub class: String,
    pub attributes: BTreeMap<String, Value>,
}

impl SceneObject {
    pub fn new(id: ObjectRef, class: impl Into<String>) -> Self {
        Self {
            id,
            class: class.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, attr: &str, value: Value) -> Self {
        self.attributes.insert(attr.to_string(), value);
        self
    }

    pub fn get(&self, attr: &str) -> Option<&Value> {
        self.attributes.get(attr)
    }

    pub fn get_f64(&self, attr: &str) -> Option<f64> {
        self.get(attr).and_then(Value::as_f64)
    }

    /// Ground-plane position, from a 3D or 2D `Position` attribute.
    pub fn ground_position(&self) -> Option<(f64, f64)> {
        match self.get("Position")? {
            Value::Point3D([x, y, _]) | Value::Point2D([x, y]) => Some((*x, *y)),
            _ => None,
        }
    }
}

/// Everything the engine sees at one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameState {
    pub frame: FrameId,
    pub objects: Vec<SceneObject>,
    pub lifecycle: Vec<GroupLifecycleEvent>,
}

impl FrameState {
    pub fn object(&self, id: &ObjectRef) -> Option<&SceneObject> {
        self.objects.iter().find(|o| &o.id == id)
    }
}

/// Zones and equipment of the context as scene objects.
pub fn context_objects(ctx: &SceneContext) -> Vec<SceneObject> {
    let mut out = Vec::new();
    for z in &ctx.zones {
        out.push(
            SceneObject::new(ObjectRef::Zone(z.name.clone()), "Zone")
                .with("Name", Value::Str(z.name.clone()))
                .with("Polygon", Value::Point3DList(z.polygon.iter().map(|p| [p.x, p.y, 0.0]).collect())),
        );
    }
    for e in &ctx.equipment {
        out.push(
            SceneObject::new(ObjectRef::Equipment(e.name.clone()), "Equipment")
                .with("Name", Value::Str(e.name.clone()))
                .with("Position", Value::Point2D([e.position.x, e.position.y])),
        );
    }
    out
}
