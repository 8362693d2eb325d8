//! Line-oriented text formats: detections, scene context, ground truth, and
//! the group / event outputs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::geometry::is_simple_polygon;
use super::types::*;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Parsed detection file: frames in increasing order, mobiles sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionStream {
    pub frames: Vec<FrameDetections>,
    pub warnings: Vec<ParseWarning>,
}

impl DetectionStream {
    pub fn mobiles(&self) -> impl Iterator<Item = &Mobile> {
        self.frames.iter().flat_map(|f| f.mobiles.iter())
    }

    pub fn last_frame(&self) -> Option<FrameId> {
        self.frames.last().map(|f| f.frame)
    }
}

/// Yields `(line_number, trimmed_line)` for non-empty, non-comment lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: FromStr>(s: &str, line: usize, what: &str) -> Result<T, ParseError> {
    s.trim()
        .parse::<T>()
        .map_err(|_| ParseError::new(line, format!("invalid {what} '{}'", s.trim())))
}

fn parse_finite(s: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = parse_num(s, line, what)?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn parse_id_list(s: &str, line: usize) -> Result<BTreeSet<MobileId>, ParseError> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_num::<MobileId>(t, line, "member id"))
        .collect()
}

/// Parses `frame,id,x,y,z,w,d,h[,father:prob[;father:prob]...]` records.
pub fn parse_detections(text: &str) -> Result<DetectionStream, ParseError> {
    let mut frames: Vec<FrameDetections> = Vec::new();
    let mut warnings = Vec::new();
    // ids seen at frames strictly before the current one
    let mut known: HashSet<MobileId> = HashSet::new();
    let mut current_ids: HashSet<MobileId> = HashSet::new();

    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() < 8 || fields.len() > 9 {
            return Err(ParseError::new(
                line,
                format!("expected 8 or 9 fields, found {}", fields.len()),
            ));
        }
        let frame = FrameId(parse_num(fields[0], line, "frame")?);
        let id: MobileId = parse_num(fields[1], line, "id")?;
        let mut xyz = [0.0; 6];
        for (k, slot) in xyz.iter_mut().enumerate() {
            *slot = parse_finite(fields[2 + k], line, "coordinate")?;
        }
        let position = Point3::new(xyz[0], xyz[1], xyz[2]);
        let size = Point3::new(xyz[3], xyz[4], xyz[5]);
        if size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0 {
            return Err(ParseError::new(line, "size components must be > 0"));
        }

        match frames.last() {
            Some(last) if frame < last.frame => {
                return Err(ParseError::new(
                    line,
                    format!("non-monotone frame {} after {}", frame, last.frame),
                ));
            }
            Some(last) if frame == last.frame => {}
            _ => {
                known.extend(current_ids.drain());
                frames.push(FrameDetections {
                    frame,
                    mobiles: Vec::new(),
                });
            }
        }
        if !current_ids.insert(id) {
            return Err(ParseError::new(
                line,
                format!("duplicate mobile id {id} at frame {frame}"),
            ));
        }

        let mut mobile = Mobile::new(id, frame, position, size);
        if let Some(links) = fields.get(8) {
            for link in links.split(';').map(str::trim).filter(|l| !l.is_empty()) {
                let (father, prob) = link.split_once(':').ok_or_else(|| {
                    ParseError::new(line, format!("link '{link}' is not father:prob"))
                })?;
                let father: MobileId = parse_num(father, line, "father id")?;
                let probability = parse_finite(prob, line, "link probability")?;
                if !(0.0..=1.0).contains(&probability) {
                    return Err(ParseError::new(
                        line,
                        format!("link probability {probability} outside [0,1]"),
                    ));
                }
                if known.contains(&father) {
                    mobile.fathers.push(FatherLink {
                        father,
                        probability,
                    });
                } else {
                    warnings.push(ParseWarning {
                        line,
                        message: format!("unknown father {father} of mobile {id} dropped"),
                    });
                }
            }
        }
        frames.last_mut().unwrap().mobiles.push(mobile);
    }

    for f in &mut frames {
        f.mobiles.sort_by_key(|m| m.id);
    }
    Ok(DetectionStream { frames, warnings })
}

pub fn write_detections<'a>(mobiles: impl IntoIterator<Item = &'a Mobile>) -> String {
    let mut out = String::new();
    for m in mobiles {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.frame, m.id, m.position.x, m.position.y, m.position.z, m.size.x, m.size.y, m.size.z
        );
        if !m.fathers.is_empty() {
            out.push(',');
            let links: Vec<String> = m
                .fathers
                .iter()
                .map(|l| format!("{}:{}", l.father, l.probability))
                .collect();
            out.push_str(&links.join(";"));
        }
        out.push('\n');
    }
    out
}

fn parse_point_list(body: &str, line: usize) -> Result<Vec<Point2>, ParseError> {
    let inner = body
        .trim()
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .ok_or_else(|| ParseError::new(line, "expected parenthesized point list"))?;
    inner
        .split(',')
        .map(|pair| {
            let coords: Vec<&str> = pair.split_whitespace().collect();
            if coords.len() != 2 {
                return Err(ParseError::new(line, format!("bad point '{}'", pair.trim())));
            }
            Ok(Point2::new(
                parse_finite(coords[0], line, "x")?,
                parse_finite(coords[1], line, "y")?,
            ))
        })
        .collect()
}

/// Parses the scene context: `bounds`, `fps`, `zone` and `equipment` lines.
pub fn parse_context(text: &str) -> Result<SceneContext, ParseError> {
    let mut bounds = None;
    let mut fps = None;
    let mut zones: Vec<Zone> = Vec::new();
    let mut equipment: Vec<Equipment> = Vec::new();
    let mut last_line = 0;

    for (line, content) in content_lines(text) {
        last_line = line;
        let (keyword, rest) = content
            .split_once(char::is_whitespace)
            .ok_or_else(|| ParseError::new(line, format!("incomplete directive '{content}'")))?;
        let rest = rest.trim();
        match keyword {
            "bounds" => {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| parse_finite(t, line, "bound"))
                    .collect::<Result<_, _>>()?;
                if v.len() != 4 {
                    return Err(ParseError::new(line, "bounds needs xmin ymin xmax ymax"));
                }
                if v[2] <= v[0] || v[3] <= v[1] {
                    return Err(ParseError::new(line, "degenerate ground bounds"));
                }
                bounds = Some(GroundBounds {
                    min: Point2::new(v[0], v[1]),
                    max: Point2::new(v[2], v[3]),
                });
            }
            "fps" => {
                let f = parse_finite(rest, line, "frame rate")?;
                if f <= 0.0 {
                    return Err(ParseError::new(line, "frame rate must be > 0"));
                }
                fps = Some(f);
            }
            "zone" | "equipment" => {
                let (name, body) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| ParseError::new(line, format!("{keyword} needs a name and points")))?;
                let points = parse_point_list(body, line)?;
                if keyword == "zone" {
                    if points.len() < 3 {
                        return Err(ParseError::new(
                            line,
                            format!("zone '{name}' needs at least 3 vertices"),
                        ));
                    }
                    if !is_simple_polygon(&points) {
                        return Err(ParseError::new(
                            line,
                            format!("zone '{name}' is self-intersecting"),
                        ));
                    }
                    if zones.iter().any(|z| z.name == name) {
                        return Err(ParseError::new(line, format!("duplicate zone name '{name}'")));
                    }
                    zones.push(Zone {
                        name: name.to_string(),
                        polygon: points,
                    });
                } else {
                    if points.len() != 1 {
                        return Err(ParseError::new(
                            line,
                            format!("equipment '{name}' needs exactly one point"),
                        ));
                    }
                    if equipment.iter().any(|e| e.name == name) {
                        return Err(ParseError::new(
                            line,
                            format!("duplicate equipment name '{name}'"),
                        ));
                    }
                    equipment.push(Equipment {
                        name: name.to_string(),
                        position: points[0],
                    });
                }
            }
            other => {
                return Err(ParseError::new(line, format!("unknown directive '{other}'")));
            }
        }
    }

    let ground_bounds = bounds.ok_or_else(|| ParseError::new(last_line, "missing 'bounds'"))?;
    let frame_rate = fps.ok_or_else(|| ParseError::new(last_line, "missing 'fps'"))?;
    Ok(SceneContext {
        ground_bounds,
        frame_rate,
        zones,
        equipment,
    })
}

pub fn write_context(ctx: &SceneContext) -> String {
    let b = ctx.ground_bounds;
    let mut out = format!(
        "bounds {} {} {} {}\nfps {}\n",
        b.min.x, b.min.y, b.max.x, b.max.y, ctx.frame_rate
    );
    for z in &ctx.zones {
        let pts: Vec<String> = z.polygon.iter().map(|p| format!("{} {}", p.x, p.y)).collect();
        let _ = writeln!(out, "zone {} ({})", z.name, pts.join(", "));
    }
    for e in &ctx.equipment {
        let _ = writeln!(out, "equipment {} ({} {})", e.name, e.position.x, e.position.y);
    }
    out
}

/// Parses `frame,gt_id,member;member;...`. Repeated (frame, gt_id) pairs are
/// merged.
pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthGroup>, ParseError> {
    let mut groups: BTreeMap<u64, GroundTruthGroup> = BTreeMap::new();
    let mut last_frame: Option<FrameId> = None;
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != 3 {
            return Err(ParseError::new(
                line,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let frame = FrameId(parse_num(fields[0], line, "frame")?);
        if last_frame.is_some_and(|f| frame < f) {
            return Err(ParseError::new(line, format!("non-monotone frame {frame}")));
        }
        last_frame = Some(frame);
        let gt_id: u64 = parse_num(fields[1], line, "gt id")?;
        let members = parse_id_list(fields[2], line)?;
        if members.is_empty() {
            return Err(ParseError::new(line, "empty member list"));
        }
        groups
            .entry(gt_id)
            .or_insert_with(|| GroundTruthGroup {
                gt_id,
                members: BTreeMap::new(),
            })
            .members
            .entry(frame)
            .or_default()
            .extend(members);
    }
    Ok(groups.into_values().collect())
}

pub fn write_ground_truth(groups: &[GroundTruthGroup]) -> String {
    let mut rows: Vec<(FrameId, u64, &BTreeSet<MobileId>)> = groups
        .iter()
        .flat_map(|g| g.members.iter().map(move |(f, m)| (*f, g.gt_id, m)))
        .collect();
    rows.sort_by_key(|(f, id, _)| (*f, *id));
    let mut out = String::new();
    for (frame, id, members) in rows {
        let _ = writeln!(out, "{},{},{}", frame, id, join_ids(members));
    }
    out
}

fn join_ids<'a>(ids: impl IntoIterator<Item = &'a MobileId>) -> String {
    ids.into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// One row of the group output.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecord {
    pub frame: FrameId,
    pub group_id: u64,
    pub incoherence: f64,
    pub members: BTreeSet<MobileId>,
}

pub fn write_groups(records: &[GroupRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{:.4},{}",
            r.frame,
            r.group_id,
            r.incoherence,
            join_ids(&r.members)
        );
    }
    out
}

pub fn parse_groups(text: &str) -> Result<Vec<GroupRecord>, ParseError> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != 4 {
            return Err(ParseError::new(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let members = parse_id_list(fields[3], line)?;
        if members.is_empty() {
            return Err(ParseError::new(line, "empty member list"));
        }
        out.push(GroupRecord {
            frame: FrameId(parse_num(fields[0], line, "frame")?),
            group_id: parse_num(fields[1], line, "group id")?,
            incoherence: parse_finite(fields[2], line, "incoherence")?,
            members,
        });
    }
    Ok(out)
}

/// One row of the event output. Bindings keep the model's variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub name: String,
    pub start: FrameId,
    pub end: FrameId,
    pub alarm: String,
    pub bindings: Vec<(String, String)>,
}

pub fn write_events(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let b: Vec<String> = r
            .bindings
            .iter()
            .map(|(var, obj)| format!("{var}={obj}"))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name,
            r.start,
            r.end,
            r.alarm,
            b.join(";")
        );
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<EventRecord>, ParseError> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != 5 {
            return Err(ParseError::new(
                line,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let bindings = fields[4]
            .split(';')
            .filter(|b| !b.trim().is_empty())
            .map(|b| {
                b.split_once('=')
                    .map(|(v, o)| (v.trim().to_string(), o.trim().to_string()))
                    .ok_or_else(|| ParseError::new(line, format!("binding '{b}' is not var=obj")))
            })
            .collect::<Result<_, _>>()?;
        out.push(EventRecord {
            name: fields[0].trim().to_string(),
            start: FrameId(parse_num(fields[1], line, "start frame")?),
            end: FrameId(parse_num(fields[2], line, "end frame")?),
            alarm: fields[3].trim().to_string(),
            bindings,
        });
    }
    Ok(out)
}
