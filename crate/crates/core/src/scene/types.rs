use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Frame index. The whole system counts time in frames; seconds are derived
/// from [`SceneContext::frame_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FrameId(pub u64);

impl FrameId {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Saturating offset; `None` when the result would be negative.
    pub fn offset(self, delta: i64) -> Option<FrameId> {
        if delta >= 0 {
            Some(FrameId(self.0 + delta as u64))
        } else {
            self.0.checked_sub(delta.unsigned_abs()).map(FrameId)
        }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of a tracked mobile. The upstream tracker keeps it stable along a
/// track; father links may point at a different id.
pub type MobileId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Projection on the ground plane.
    pub fn ground(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Object category assigned from the 3D size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MobileClass {
    Person,
    GroupOfPersons,
    Noise,
    Unclassified,
}

impl MobileClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MobileClass::Person => "PERSON",
            MobileClass::GroupOfPersons => "GROUP_OF_PERSONS",
            MobileClass::Noise => "NOISE",
            MobileClass::Unclassified => "UNCLASSIFIED",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "PERSON" => Some(MobileClass::Person),
            "GROUP_OF_PERSONS" => Some(MobileClass::GroupOfPersons),
            "NOISE" => Some(MobileClass::Noise),
            "UNCLASSIFIED" => Some(MobileClass::Unclassified),
            _ => None,
        }
    }
}

impl fmt::Display for MobileClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Probabilistic link from a mobile to one detected at an earlier frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatherLink {
    pub father: MobileId,
    pub probability: f64,
}

/// One detected physical object at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Mobile {
    pub id: MobileId,
    pub frame: FrameId,
    /// Meters on the calibrated ground plane; `z` is height.
    pub position: Point3,
    /// Width, depth, height in meters.
    pub size: Point3,
    pub class: MobileClass,
    pub fathers: Vec<FatherLink>,
}

impl Mobile {
    pub fn new(id: MobileId, frame: FrameId, position: Point3, size: Point3) -> Self {
        Self {
            id,
            frame,
            position,
            size,
            class: MobileClass::Unclassified,
            fathers: Vec::new(),
        }
    }

    pub fn with_father(mut self, father: MobileId, probability: f64) -> Self {
        self.fathers.push(FatherLink { father, probability });
        self
    }
}

/// All mobiles detected at one frame, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame: FrameId,
    pub mobiles: Vec<Mobile>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundBounds {
    pub min: Point2,
    pub max: Point2,
}

impl GroundBounds {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub name: String,
    pub polygon: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equipment {
    pub name: String,
    pub position: Point2,
}

/// Static description of the observed scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext {
    pub ground_bounds: GroundBounds,
    pub frame_rate: f64,
    pub zones: Vec<Zone>,
    pub equipment: Vec<Equipment>,
}

impl SceneContext {
    pub fn new(ground_bounds: GroundBounds, frame_rate: f64) -> Self {
        Self {
            ground_bounds,
            frame_rate,
            zones: Vec::new(),
            equipment: Vec::new(),
        }
    }

    /// Converts a frame count to seconds.
    pub fn seconds(&self, frames: f64) -> f64 {
        frames / self.frame_rate
    }

    pub fn zone(&self, name: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.name == name)
    }

    pub fn equipment(&self, name: &str) -> Option<&Equipment> {
        self.equipment.iter().find(|e| e.name == name)
    }
}

/// Reference group: per-frame member sets identified by mobile ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthGroup {
    pub gt_id: u64,
    pub members: BTreeMap<FrameId, BTreeSet<MobileId>>,
}
