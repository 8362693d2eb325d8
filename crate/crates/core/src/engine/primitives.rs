use std::collections::BTreeMap;
use std::fmt;

use super::objects::{FrameState, ObjectRef, SceneObject};
use crate::dsl::Value;
use crate::scene::{polygon_contains, Point2};
use crate::tracker::LifecycleKind;

/// Thresholds of the built-in vision primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveParams {
    /// Group_Stop: ground speed below this, m/s.
    pub stop_speed: f64,
    /// Group_Near_Equipment: center-to-equipment distance below this, m.
    pub near_distance: f64,
    /// Group_Lively: speed standard deviation above this, m/s.
    pub lively_stddev: f64,
}

impl Default for PrimitiveParams {
    fn default() -> Self {
        Self {
            stop_speed: 0.3,
            near_distance: 2.0,
            lively_stddev: 1.0,
        }
    }
}

pub type Evaluator = Box<dyn Fn(&[&SceneObject], &FrameState, &PrimitiveParams) -> bool + Send + Sync>;

/// Named predicates backing primitive models.
#[derive(Default)]
pub struct PrimitiveRegistry {
    evaluators: BTreeMap<String, Evaluator>,
}

impl fmt::Debug for PrimitiveRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.evaluators.keys()).finish()
    }
}

fn zone_polygon(z: &SceneObject) -> Option<Vec<Point2>> {
    match z.get("Polygon")? {
        Value::Point3DList(ps) => Some(ps.iter().map(|p| Point2::new(p[0], p[1])).collect()),
        _ => None,
    }
}

fn inside(g: &SceneObject, z: &SceneObject) -> Option<bool> {
    let (x, y) = g.ground_position()?;
    let poly = zone_polygon(z)?;
    Some(polygon_contains(Point2::new(x, y), &poly))
}

fn lifecycle(kind: LifecycleKind) -> Evaluator {
    Box::new(move |objs, state, _| {
        let ObjectRef::Group(id) = objs[0].id else { return false };
        state.lifecycle.iter().any(|e| {
            e.kind == kind
                && match kind {
                    LifecycleKind::Merged => e.survivor() == Some(id),
                    _ => e.involves(id),
                }
        })
    })
}

impl PrimitiveRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Group_Stop, Group_Lively, Group_Near_Equipment, Group_Stays_Inside_Zone,
    /// Group_Outside_Zone, Group_Created, Group_Split, Group_Merge.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register("Group_Stop", |o, _, p| o[0].get_f64("Speed").is_some_and(|s| s < p.stop_speed));
        r.register("Group_Lively", |o, _, p| {
            o[0].get_f64("SpeedStdDev").is_some_and(|s| s > p.lively_stddev)
        });
        r.register("Group_Near_Equipment", |o, _, p| {
            match (o[0].ground_position(), o[1].ground_position()) {
                (Some((gx, gy)), Some((ex, ey))) => (gx - ex).hypot(gy - ey) < p.near_distance,
                _ => false,
            }
        });
        r.register("Group_Stays_Inside_Zone", |o, _, _| inside(o[0], o[1]) == Some(true));
        r.register("Group_Outside_Zone", |o, _, _| inside(o[0], o[1]) == Some(false));
        r.evaluators.insert("Group_Created".into(), lifecycle(LifecycleKind::Created));
        r.evaluators.insert("Group_Split".into(), lifecycle(LifecycleKind::Split));
        r.evaluators.insert("Group_Merge".into(), lifecycle(LifecycleKind::Merged));
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        f: impl Fn(&[&SceneObject], &FrameState, &PrimitiveParams) -> bool + Send + Sync + 'static,
    ) {
        self.evaluators.insert(name.to_string(), Box::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&Evaluator> {
        self.evaluators.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.evaluators.contains_key(name)
    }
}
