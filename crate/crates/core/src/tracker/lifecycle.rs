use std::fmt;
use std::fmt::Write as _;

use crate::scene::{FrameId, ParseError};

pub type GroupId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LifecycleKind {
    Created,
    Split,
    Merged,
    Terminated,
}

impl LifecycleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleKind::Created => "CREATED",
            LifecycleKind::Split => "SPLIT",
            LifecycleKind::Merged => "MERGED",
            LifecycleKind::Terminated => "TERMINATED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "CREATED" => Some(LifecycleKind::Created),
            "SPLIT" => Some(LifecycleKind::Split),
            "MERGED" => Some(LifecycleKind::Merged),
            "TERMINATED" => Some(LifecycleKind::Terminated),
            _ => None,
        }
    }
}

impl fmt::Display for LifecycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A change in the set of tracked groups. For `Merged`, `groups` is
/// `[survivor, absorbed]` and the survivor is the older group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLifecycleEvent {
    pub kind: LifecycleKind,
    pub frame: FrameId,
    pub groups: Vec<GroupId>,
}

impl GroupLifecycleEvent {
    pub fn survivor(&self) -> Option<GroupId> {
        match self.kind {
            LifecycleKind::Merged => self.groups.first().copied(),
            _ => None,
        }
    }

    pub fn involves(&self, group: GroupId) -> bool {
        self.groups.contains(&group)
    }
}

/// `frame,kind,group[;group]` rows.
pub fn write_lifecycle(events: &[GroupLifecycleEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let ids: Vec<String> = e.groups.iter().map(|g| g.to_string()).collect();
        let _ = writeln!(out, "{},{},{}", e.frame, e.kind, ids.join(";"));
    }
    out
}

pub fn parse_lifecycle(text: &str) -> Result<Vec<GroupLifecycleEvent>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != 3 {
            return Err(ParseError::new(line, format!("expected 3 fields, found {}", fields.len())));
        }
        let frame = fields[0]
            .trim()
            .parse()
            .map(FrameId)
            .map_err(|_| ParseError::new(line, "invalid frame"))?;
        let kind = LifecycleKind::parse(fields[1].trim())
            .ok_or_else(|| ParseError::new(line, format!("unknown lifecycle kind '{}'", fields[1])))?;
        let groups = fields[2]
            .split(';')
            .filter(|g| !g.trim().is_empty())
            .map(|g| g.trim().parse::<GroupId>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| ParseError::new(line, "invalid group id"))?;
        if groups.is_empty() || (kind == LifecycleKind::Merged && groups.len() != 2) {
            return Err(ParseError::new(line, "wrong number of group ids"));
        }
        out.push(GroupLifecycleEvent { kind, frame, groups });
    }
    Ok(out)
}
