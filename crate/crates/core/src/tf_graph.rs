//! The device transformation tree.
//!
//! Every edge stores the pose of its child frame expressed in its parent
//! frame, i.e. the transform that maps child coordinates into the parent.
//! Lookups chain edges along the unique tree path, inverting edges that are
//! walked from child to parent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::{rotation_angle_between, translation_distance, Transform, UnitQuaternion};

pub const CALIBRATION_FORMAT_VERSION: u32 = 1;
const CALIBRATION_HEADER: &str = "# rigkit calibration";

#[derive(Debug, Error)]
pub enum TfError {
    #[error("invalid frame id {0:?}: must be non-empty and contain no whitespace")]
    InvalidFrameId(String),
    #[error("frames {a} and {b} are already connected by an edge")]
    DuplicateEdge { a: FrameId, b: FrameId },
    #[error("edge from {0} to itself")]
    SelfLoop(FrameId),
    #[error("unknown frame {0}")]
    UnknownFrame(FrameId),
    #[error("no path between {from} and {to}")]
    Disconnected { from: FrameId, to: FrameId },
    #[error("line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TfError> = std::result::Result<T, E>;

/// Name of a coordinate frame. Case-sensitive, non-empty, no whitespace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameId(String);

impl FrameId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(TfError::InvalidFrameId(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for FrameId {
    type Error = TfError;
    fn try_from(s: String) -> Result<Self> {
        FrameId::new(s)
    }
}

impl From<FrameId> for String {
    fn from(f: FrameId) -> String {
        f.0
    }
}

impl FromStr for FrameId {
    type Err = TfError;
    fn from_str(s: &str) -> Result<Self> {
        FrameId::new(s)
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Estimated,
    Manufacturer,
    Cad,
}

impl EdgeSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeSource::Estimated => "estimated",
            EdgeSource::Manufacturer => "manufacturer",
            EdgeSource::Cad => "cad",
        }
    }
}

impl FromStr for EdgeSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "estimated" => Ok(EdgeSource::Estimated),
            "manufacturer" => Ok(EdgeSource::Manufacturer),
            "cad" => Ok(EdgeSource::Cad),
            other => Err(format!(
                "unknown source {other:?} (expected estimated, manufacturer or cad)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibEdge {
    pub parent: FrameId,
    pub child: FrameId,
    /// Child pose in the parent frame.
    pub transform: Transform,
    pub source: EdgeSource,
    pub label: String,
}

impl CalibEdge {
    pub fn new(parent: FrameId, child: FrameId, transform: Transform, source: EdgeSource) -> Self {
        Self {
            parent,
            child,
            transform,
            source,
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn pair_key(&self) -> (FrameId, FrameId) {
        unordered(&self.parent, &self.child)
    }
}

fn unordered(a: &FrameId, b: &FrameId) -> (FrameId, FrameId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameGraph {
    root: FrameId,
    frames: BTreeSet<FrameId>,
    edges: Vec<CalibEdge>,
    pairs: BTreeMap<(FrameId, FrameId), usize>,
}

impl FrameGraph {
    /// Graph holding only its root frame.
    pub fn new(root: FrameId) -> Self {
        let mut frames = BTreeSet::new();
        frames.insert(root.clone());
        Self {
            root,
            frames,
            edges: Vec::new(),
            pairs: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &FrameId {
        &self.root
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameId> {
        self.frames.iter()
    }

    pub fn edges(&self) -> &[CalibEdge] {
        &self.edges
    }

    pub fn contains(&self, frame: &FrameId) -> bool {
        self.frames.contains(frame)
    }

    pub fn add_frame(&mut self, frame: FrameId) {
        self.frames.insert(frame);
    }

    /// Builder-style [`FrameGraph::insert_edge`].
    pub fn add_edge(mut self, edge: CalibEdge) -> Result<Self> {
        self.insert_edge(edge)?;
        Ok(self)
    }

    pub fn insert_edge(&mut self, edge: CalibEdge) -> Result<()> {
        if edge.parent == edge.child {
            return Err(TfError::SelfLoop(edge.parent));
        }
        let key = edge.pair_key();
        if self.pairs.contains_key(&key) {
            return Err(TfError::DuplicateEdge { a: key.0, b: key.1 });
        }
        self.frames.insert(edge.parent.clone());
        self.frames.insert(edge.child.clone());
        self.pairs.insert(key, self.edges.len());
        self.edges.push(edge);
        Ok(())
    }

    pub fn edge_between(&self, a: &FrameId, b: &FrameId) -> Option<&CalibEdge> {
        self.pairs.get(&unordered(a, b)).map(|&i| &self.edges[i])
    }

    /// Replaces the transform of an existing edge, keeping its direction.
    pub fn set_edge_transform(&mut self, a: &FrameId, b: &FrameId, t: Transform) -> Result<()> {
        let i = *self
            .pairs
            .get(&unordered(a, b))
            .ok_or_else(|| TfError::Disconnected {
                from: a.clone(),
                to: b.clone(),
            })?;
        self.edges[i].transform = t;
        Ok(())
    }

    fn adjacency(&self) -> BTreeMap<&FrameId, Vec<(&FrameId, usize)>> {
        let mut adj: BTreeMap<&FrameId, Vec<(&FrameId, usize)>> =
            self.frames.iter().map(|f| (f, Vec::new())).collect();
        for (i, e) in self.edges.iter().enumerate() {
            adj.entry(&e.parent).or_default().push((&e.child, i));
            adj.entry(&e.child).or_default().push((&e.parent, i));
        }
        for list in adj.values_mut() {
            list.sort();
        }
        adj
    }

    pub fn validate(&self) -> ValidationReport {
        let adj = self.adjacency();
        let mut reachable = BTreeSet::new();
        let mut queue = VecDeque::new();
        if self.frames.contains(&self.root) {
            reachable.insert(&self.root);
            queue.push_back(&self.root);
        }
        while let Some(f) = queue.pop_front() {
            for (n, _) in &adj[f] {
                if reachable.insert(*n) {
                    queue.push_back(*n);
                }
            }
        }

        // Union-find over edges in canonical order; an edge joining two frames
        // that are already connected closes a cycle.
        let index: BTreeMap<&FrameId, usize> =
            self.frames.iter().enumerate().map(|(i, f)| (f, i)).collect();
        let mut parent: Vec<usize> = (0..self.frames.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut cycle_edges = Vec::new();
        for e in self.sorted_edges() {
            let (a, b) = (
                find(&mut parent, index[&e.parent]),
                find(&mut parent, index[&e.child]),
            );
            if a == b {
                cycle_edges.push((e.parent.clone(), e.child.clone()));
            } else {
                parent[a] = b;
            }
        }

        let unreachable: Vec<FrameId> = self
            .frames
            .iter()
            .filter(|f| !reachable.contains(f))
            .cloned()
            .collect();
        let orphans: Vec<FrameId> = self
            .frames
            .iter()
            .filter(|f| **f != self.root && adj[f].is_empty())
            .cloned()
            .collect();
        ValidationReport {
            root: self.root.clone(),
            root_present: self.frames.contains(&self.root),
            frame_count: self.frames.len(),
            edge_count: self.edges.len(),
            unreachable,
            orphans,
            cycle_edges,
        }
    }

    pub fn lookup(&self, from: &FrameId, to: &FrameId) -> Result<Transform> {
        for f in [from, to] {
            if !self.frames.contains(f) {
                return Err(TfError::UnknownFrame(f.clone()));
            }
        }
        if from == to {
            return Ok(Transform::IDENTITY);
        }
        let path = self.path(from, to).ok_or_else(|| TfError::Disconnected {
            from: from.clone(),
            to: to.clone(),
        })?;
        let mut acc = Transform::IDENTITY;
        let mut at = from;
        for i in path {
            let e = &self.edges[i];
            if &e.parent == at {
                acc = acc.compose(&e.transform);
                at = &e.child;
            } else {
                acc = acc.compose(&e.transform.inverse());
                at = &e.parent;
            }
        }
        Ok(acc)
    }

    /// Edge indices on the BFS path from `from` to `to`.
    fn path(&self, from: &FrameId, to: &FrameId) -> Option<Vec<usize>> {
        let adj = self.adjacency();
        let mut came_from: BTreeMap<&FrameId, (&FrameId, usize)> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(f) = queue.pop_front() {
            if f == to {
                let mut path = Vec::new();
                let mut at = to;
                while at != from {
                    let (prev, edge) = came_from[at];
                    path.push(edge);
                    at = prev;
                }
                path.reverse();
                return Some(path);
            }
            for &(n, edge) in &adj[f] {
                if seen.insert(n) {
                    came_from.insert(n, (f, edge));
                    queue.push_back(n);
                }
            }
        }
        None
    }

    fn sorted_edges(&self) -> Vec<&CalibEdge> {
        let mut edges: Vec<&CalibEdge> = self.edges.iter().collect();
        edges.sort_by(|a, b| (&a.parent, &a.child).cmp(&(&b.parent, &b.child)));
        edges
    }

    /// Canonical text serialization, see [`parse_calibration`].
    pub fn to_calibration_string(&self) -> String {
        let mut out = String::new();
        out.push_str(CALIBRATION_HEADER);
        out.push('\n');
        out.push_str(&format!("format_version {CALIBRATION_FORMAT_VERSION}\n"));
        out.push_str(&format!("root {}\n", self.root));
        for f in &self.frames {
            out.push_str(&format!("frame {f}\n"));
        }
        for e in self.sorted_edges() {
            let t = &e.transform.translation;
            let q = &e.transform.rotation;
            out.push_str(&format!(
                "edge {} {} {} {} {} {} {} {} {} {}",
                e.parent,
                e.child,
                fixed(t.x, 9),
                fixed(t.y, 9),
                fixed(t.z, 9),
                fixed(q.w(), 12),
                fixed(q.x(), 12),
                fixed(q.y(), 12),
                fixed(q.z(), 12),
                e.source.as_str(),
            ));
            if !e.label.is_empty() {
                out.push(' ');
                out.push_str(&e.label);
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed-point formatting without a sign on values that round to zero.
pub(crate) fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub root: FrameId,
    pub root_present: bool,
    pub frame_count: usize,
    pub edge_count: usize,
    /// Frames with no path to the root.
    pub unreachable: Vec<FrameId>,
    /// Non-root frames without any edge.
    pub orphans: Vec<FrameId>,
    /// Edges (parent, child) that close a cycle.
    pub cycle_edges: Vec<(FrameId, FrameId)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.root_present && self.unreachable.is_empty() && self.cycle_edges.is_empty()
    }

    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.root_present {
            out.push(format!("root frame {} is missing", self.root));
        }
        for f in &self.unreachable {
            out.push(format!("frame {f} is unreachable from root {}", self.root));
        }
        for (p, c) in &self.cycle_edges {
            out.push(format!("edge {p} -> {c} closes a cycle"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtrinsicDiff {
    pub from: FrameId,
    pub to: FrameId,
    pub position_diff_m: f64,
    pub angular_diff_deg: f64,
}

/// Compares the relative pose of each frame pair across two graphs.
pub fn diff_graphs(
    a: &FrameGraph,
    b: &FrameGraph,
    pairs: &[(FrameId, FrameId)],
) -> Result<Vec<ExtrinsicDiff>> {
    pairs
        .iter()
        .map(|(from, to)| {
            let ta = a.lookup(from, to)?;
            let tb = b.lookup(from, to)?;
            Ok(ExtrinsicDiff {
                from: from.clone(),
                to: to.clone(),
                position_diff_m: translation_distance(&ta.translation, &tb.translation),
                angular_diff_deg: rotation_angle_between(&ta.rotation, &tb.rotation),
            })
        })
        .collect()
}

pub fn export_calibration(g: &FrameGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, g.to_calibration_string())?;
    Ok(())
}

/// Reads a calibration file. Files ending in `.json` go through
/// [`parse_calibration_json`], everything else through [`parse_calibration`].
pub fn import_calibration(path: impl AsRef<Path>) -> Result<FrameGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_calibration_json(&text)
    } else {
        parse_calibration(&text)
    }
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> TfError {
    TfError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Splits off the first `n` whitespace-separated tokens and returns the
/// untouched remainder (leading separator removed).
fn split_tokens(line: &str, n: usize) -> (Vec<&str>, &str) {
    let mut tokens = Vec::with_capacity(n);
    let mut rest = line;
    while tokens.len() < n {
        rest = rest.trim_start_matches([' ', '\t']);
        if rest.is_empty() {
            break;
        }
        let end = rest.find([' ', '\t']).unwrap_or(rest.len());
        tokens.push(&rest[..end]);
        rest = &rest[end..];
    }
    let rest = rest.strip_prefix([' ', '\t']).unwrap_or(rest);
    (tokens, rest)
}

/// Parses the text calibration format.
///
/// ```text
/// file    := header version root record*
/// header  := "# rigkit calibration" NL
/// version := "format_version" SP "1" NL
/// root    := "root" SP frame NL
/// record  := ("frame" SP frame | edge | comment | "") NL
/// edge    := "edge" SP parent SP child SP tx SP ty SP tz SP qw SP qx SP qy SP qz SP source [SP label]
/// comment := "#" any*
/// ```
///
/// Translations are meters, quaternions must be unit-norm within 1e-9.
pub fn parse_calibration(text: &str) -> Result<FrameGraph> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut version = None;
    let mut graph: Option<FrameGraph> = None;
    for (no, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (tok, rest) = split_tokens(trimmed, 2);
        match (tok.first().copied(), version) {
            (Some("format_version"), None) => {
                let v: u32 = tok
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(no, "format_version", "expected an integer"))?;
                if v != CALIBRATION_FORMAT_VERSION {
                    return Err(parse_err(
                        no,
                        "format_version",
                        format!("unsupported version {v}"),
                    ));
                }
                version = Some(v);
            }
            (Some("root"), Some(_)) => {
                if !rest.is_empty() || tok.len() != 2 {
                    return Err(parse_err(no, "root", "expected exactly one frame name"));
                }
                let root = FrameId::new(tok[1]).map_err(|e| parse_err(no, "root", e.to_string()))?;
                graph = Some(FrameGraph::new(root));
                break;
            }
            (Some(other), None) => {
                return Err(parse_err(
                    no,
                    "format_version",
                    format!("expected format_version before {other:?}"),
                ))
            }
            (Some(other), Some(_)) => {
                return Err(parse_err(no, "root", format!("expected root before {other:?}")))
            }
            (None, _) => unreachable!(),
        }
    }
    let mut graph = graph.ok_or_else(|| parse_err(0, "root", "missing root record"))?;

    for (no, line) in lines {
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let (tok, rest) = split_tokens(trimmed, 11);
        match tok[0] {
            "frame" => {
                if tok.len() != 2 || !rest.is_empty() {
                    return Err(parse_err(no, "frame", "expected exactly one frame name"));
                }
                let f = FrameId::new(tok[1]).map_err(|e| parse_err(no, "frame", e.to_string()))?;
                graph.add_frame(f);
            }
            "edge" => {
                let edge = parse_edge_tokens(no, &tok, rest)?;
                graph.insert_edge(edge).map_err(|e| parse_err(no, "edge", e.to_string()))?;
            }
            other => return Err(parse_err(no, "record", format!("unknown record {other:?}"))),
        }
    }
    Ok(graph)
}

fn parse_edge_tokens(no: usize, tok: &[&str], label: &str) -> Result<CalibEdge> {
    const FIELDS: [&str; 11] = [
        "edge", "parent", "child", "tx", "ty", "tz", "qw", "qx", "qy", "qz", "source",
    ];
    if tok.len() < FIELDS.len() {
        return Err(parse_err(
            no,
            FIELDS[tok.len()],
            format!("edge record has {} of {} fields", tok.len(), FIELDS.len()),
        ));
    }
    let parent = FrameId::new(tok[1]).map_err(|e| parse_err(no, "parent", e.to_string()))?;
    let child = FrameId::new(tok[2]).map_err(|e| parse_err(no, "child", e.to_string()))?;
    let mut nums = [0.0; 7];
    for (k, slot) in nums.iter_mut().enumerate() {
        let raw = tok[3 + k];
        *slot = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                parse_err(no, FIELDS[3 + k], format!("{raw:?} is not a finite number"))
            })?;
    }
    let rotation = UnitQuaternion::from_normalized(nums[3], nums[4], nums[5], nums[6])
        .map_err(|e| parse_err(no, "quaternion", format!("edge {parent} -> {child}: {e}")))?;
    let source = tok[10]
        .parse::<EdgeSource>()
        .map_err(|e| parse_err(no, "source", e))?;
    Ok(CalibEdge {
        parent,
        child,
        transform: Transform::new(rotation, Vector3::new(nums[0], nums[1], nums[2])),
        source,
        label: label.to_string(),
    })
}

/// Tolerance on quaternion norm for JSON producers, which rarely print
/// twelve decimals. Accepted quaternions are renormalized.
pub const JSON_QUATERNION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonCalibration {
    format_version: u32,
    root: String,
    #[serde(default)]
    frames: Vec<String>,
    edges: Vec<JsonEdge>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEdge {
    parent: String,
    child: String,
    translation: [f64; 3],
    /// `[w, x, y, z]`
    rotation: [f64; 4],
    source: EdgeSource,
    #[serde(default)]
    label: String,
}

/// JSON equivalent of the text format:
///
/// ```json
/// {"format_version": 1, "root": "base_link", "frames": [],
///  "edges": [{"parent": "base_link", "child": "os_sensor",
///             "translation": [0, 0, 0.1], "rotation": [1, 0, 0, 0],
///             "source": "cad", "label": "mount"}]}
/// ```
pub fn parse_calibration_json(text: &str) -> Result<FrameGraph> {
    let doc: JsonCalibration = serde_json::from_str(text).map_err(|e| TfError::Parse {
        line: e.line(),
        field: "json".into(),
        message: e.to_string(),
    })?;
    if doc.format_version != CALIBRATION_FORMAT_VERSION {
        return Err(parse_err(
            0,
            "format_version",
            format!("unsupported version {}", doc.format_version),
        ));
    }
    let root = FrameId::new(doc.root).map_err(|e| parse_err(0, "root", e.to_string()))?;
    let mut graph = FrameGraph::new(root);
    for f in doc.frames {
        graph.add_frame(FrameId::new(f).map_err(|e| parse_err(0, "frames", e.to_string()))?);
    }
    for (i, e) in doc.edges.into_iter().enumerate() {
        let field = format!("edges[{i}]");
        let parent = FrameId::new(e.parent).map_err(|err| parse_err(0, &field, err.to_string()))?;
        let child = FrameId::new(e.child).map_err(|err| parse_err(0, &field, err.to_string()))?;
        let [w, x, y, z] = e.rotation;
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > JSON_QUATERNION_TOLERANCE {
            return Err(parse_err(
                0,
                &format!("{field}.rotation"),
                format!("edge {parent} -> {child}: quaternion norm {norm} is not 1"),
            ));
        }
        let rotation = UnitQuaternion::new(w, x, y, z)
            .map_err(|err| parse_err(0, &field, err.to_string()))?;
        if e.translation.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(0, &format!("{field}.translation"), "non-finite value"));
        }
        let edge = CalibEdge {
            parent,
            child,
            transform: Transform::new(rotation, Vector3::from(e.translation)),
            source: e.source,
            label: e.label,
        };
        graph
            .insert_edge(edge)
            .map_err(|err| parse_err(0, &field, err.to_string()))?;
    }
    Ok(graph)
}
