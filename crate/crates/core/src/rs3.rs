//! `.rs3` treebank files: reading, forest extraction, binarization and
//! writing.
//!
//! Reading happens in two steps. [`read_rs3`] parses the XML into flat
//! relation/segment/group tables and checks references. [`Rs3Document::forest`]
//! then resolves the rs3 attachment conventions into ordered n-ary trees,
//! one per connected component:
//!
//! * `relname="span"` makes a node the nucleus content of its parent group;
//! * a multinuclear relname under a `multinuc` group makes a node one of its
//!   nuclei;
//! * any other (mononuclear) relname makes a node a satellite of its parent.
//!
//! A node with several satellites is resolved into nested two-child
//! mononuclear nodes: satellites to the right of the nucleus attach first,
//! nearest first, then satellites to the left, nearest first.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::document::DocumentRecord;
use crate::tree::{LabelError, Node, Nuclearity, RelationLabel, RstTree, Span, TreeDesc, TreeError, SPAN_RELATION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Rs3Error {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("node `{id}` refers to missing parent `{parent}`")]
    DanglingParentId { id: String, parent: String },
    #[error("node `{id}` uses relname `{relname}` which is not declared")]
    UnknownRelname { id: String, relname: String },
    #[error("segment `{0}` has no text")]
    EmptySegmentText(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{id}`: {msg}")]
    Structure { id: String, msg: String },
    #[error("nodes `{0}` form a cycle")]
    Cycle(String),
    #[error("`{0}` node has a single child")]
    UnaryChain(String),
    #[error("mononuclear `{relation}` node has {children} children, expected 2")]
    MalformedMononuclear { relation: String, children: usize },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("document `{0}` has no tree")]
    MissingTree(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelKind {
    Rst,
    Multinuc,
}

impl RelKind {
    fn as_str(self) -> &'static str {
        match self {
            RelKind::Rst => "rst",
            RelKind::Multinuc => "multinuc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rs3Relation {
    pub name: String,
    pub kind: RelKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rs3Segment {
    pub id: String,
    pub parent: Option<String>,
    pub relname: Option<String>,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Span,
    Multinuc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rs3Group {
    pub id: String,
    pub kind: GroupKind,
    pub parent: Option<String>,
    pub relname: Option<String>,
}

/// Flat contents of an `.rs3` file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Rs3Document {
    pub relations: Vec<Rs3Relation>,
    pub segments: Vec<Rs3Segment>,
    pub groups: Vec<Rs3Group>,
}

/// Ordered n-ary discourse tree, as annotated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NaryTree {
    Leaf(usize),
    Node { relation: String, kind: NaryKind, children: Vec<NaryTree> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaryKind {
    Multinuclear,
    /// Exactly two children; `nucleus` is the index of the nucleus.
    Mononuclear {
        nucleus: usize,
    },
}

/// One connected component of an rs3 file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rs3Tree {
    pub segment_ids: Vec<String>,
    /// EDU texts in document order; leaf `k` of `tree` is `texts[k]`.
    pub texts: Vec<String>,
    pub tree: NaryTree,
}

/// Parses an rs3 file and returns its connected components, ordered by
/// their first segment.
pub fn parse_rs3(bytes: &[u8]) -> Result<Vec<Rs3Tree>, Rs3Error> {
    read_rs3(bytes)?.forest()
}

pub fn read_rs3(bytes: &[u8]) -> Result<Rs3Document, Rs3Error> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes).map_err(|e| Rs3Error::MalformedXml(format!("not UTF-8: {e}")))?;
    let mut reader = Reader::from_str(text);
    let mut doc = Rs3Document::default();
    let mut open_segment: Option<Rs3Segment> = None;
    let mut depth = 0usize;
    loop {
        let event = reader.read_event().map_err(|e| xml_err(&reader, e))?;
        match event {
            Event::Start(e) => {
                depth += 1;
                if e.name().as_ref() == b"segment" {
                    open_segment = Some(segment_from(&e)?);
                } else {
                    handle_element(&e, &mut doc)?;
                }
            }
            Event::Empty(e) => {
                if e.name().as_ref() == b"segment" {
                    let seg = segment_from(&e)?;
                    return Err(Rs3Error::EmptySegmentText(seg.id));
                }
                handle_element(&e, &mut doc)?;
            }
            Event::Text(t) => {
                if let Some(seg) = open_segment.as_mut() {
                    let s = t.unescape().map_err(|e| xml_err(&reader, e))?;
                    seg.text.push_str(&s);
                }
            }
            Event::CData(t) => {
                if let Some(seg) = open_segment.as_mut() {
                    seg.text.push_str(&String::from_utf8_lossy(&t.into_inner()));
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                if e.name().as_ref() == b"segment" {
                    if let Some(mut seg) = open_segment.take() {
                        seg.text = seg.text.split_whitespace().collect::<Vec<_>>().join(" ");
                        if seg.text.is_empty() {
                            return Err(Rs3Error::EmptySegmentText(seg.id));
                        }
                        doc.segments.push(seg);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Rs3Error::MalformedXml("unexpected end of file".into()));
    }
    doc.check_references()?;
    Ok(doc)
}

fn xml_err(reader: &Reader<&[u8]>, e: impl std::fmt::Display) -> Rs3Error {
    Rs3Error::MalformedXml(format!("at byte {}: {e}", reader.buffer_position()))
}

fn attrs(e: &BytesStart<'_>) -> Result<HashMap<String, String>, Rs3Error> {
    let mut out = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Rs3Error::MalformedXml(err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|err| Rs3Error::MalformedXml(err.to_string()))?;
        out.insert(key, value.into_owned());
    }
    Ok(out)
}

fn required(map: &mut HashMap<String, String>, key: &str, elem: &str) -> Result<String, Rs3Error> {
    map.remove(key).ok_or_else(|| Rs3Error::MalformedXml(format!("<{elem}> without `{key}`")))
}

fn optional(map: &mut HashMap<String, String>, key: &str) -> Option<String> {
    map.remove(key).filter(|v| !v.trim().is_empty())
}

fn segment_from(e: &BytesStart<'_>) -> Result<Rs3Segment, Rs3Error> {
    let mut a = attrs(e)?;
    Ok(Rs3Segment {
        id: required(&mut a, "id", "segment")?,
        parent: optional(&mut a, "parent"),
        relname: optional(&mut a, "relname"),
        text: String::new(),
    })
}

fn handle_element(e: &BytesStart<'_>, doc: &mut Rs3Document) -> Result<(), Rs3Error> {
    match e.name().as_ref() {
        b"rel" => {
            let mut a = attrs(e)?;
            let name = required(&mut a, "name", "rel")?;
            let kind = match a.get("type").map(String::as_str) {
                Some("multinuc") => RelKind::Multinuc,
                Some("rst") | None => RelKind::Rst,
                Some(other) => return Err(Rs3Error::MalformedXml(format!("unknown relation type `{other}`"))),
            };
            doc.relations.push(Rs3Relation { name, kind });
        }
        b"group" => {
            let mut a = attrs(e)?;
            let id = required(&mut a, "id", "group")?;
            let kind = match a.get("type").map(String::as_str) {
                Some("multinuc") => GroupKind::Multinuc,
                Some("span") => GroupKind::Span,
                other => {
                    return Err(Rs3Error::Structure { id, msg: format!("unknown group type {other:?}") });
                }
            };
            doc.groups.push(Rs3Group { id, kind, parent: optional(&mut a, "parent"), relname: optional(&mut a, "relname") });
        }
        _ => {}
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Elem {
    Segment(usize),
    Group(usize),
}

enum Link {
    SpanChild,
    Nucleus,
    Satellite,
}

struct Resolved<'a> {
    doc: &'a Rs3Document,
    index: HashMap<&'a str, Elem>,
    span_children: HashMap<Elem, Vec<Elem>>,
    nuclei: HashMap<Elem, Vec<(Elem, String)>>,
    satellites: HashMap<Elem, Vec<(Elem, String)>>,
    /// Smallest segment position in each element's subtree.
    first_pos: HashMap<Elem, usize>,
}

impl Rs3Document {
    fn id(&self, e: Elem) -> &str {
        match e {
            Elem::Segment(i) => &self.segments[i].id,
            Elem::Group(i) => &self.groups[i].id,
        }
    }

    fn link(&self, e: Elem) -> (Option<&str>, Option<&str>) {
        match e {
            Elem::Segment(i) => (self.segments[i].parent.as_deref(), self.segments[i].relname.as_deref()),
            Elem::Group(i) => (self.groups[i].parent.as_deref(), self.groups[i].relname.as_deref()),
        }
    }

    fn elements(&self) -> impl Iterator<Item = Elem> {
        (0..self.segments.len()).map(Elem::Segment).chain((0..self.groups.len()).map(Elem::Group))
    }

    fn index(&self) -> Result<HashMap<&str, Elem>, Rs3Error> {
        let mut index = HashMap::new();
        for e in self.elements() {
            if index.insert(self.id(e), e).is_some() {
                return Err(Rs3Error::DuplicateId(self.id(e).to_string()));
            }
        }
        Ok(index)
    }

    fn relation_kinds(&self, name: &str) -> (bool, bool) {
        let mut rst = false;
        let mut multi = false;
        for r in self.relations.iter().filter(|r| r.name == name) {
            match r.kind {
                RelKind::Rst => rst = true,
                RelKind::Multinuc => multi = true,
            }
        }
        (rst, multi)
    }

    fn check_references(&self) -> Result<(), Rs3Error> {
        let index = self.index()?;
        for e in self.elements() {
            let (parent, relname) = self.link(e);
            if let Some(p) = parent {
                if !index.contains_key(p) {
                    return Err(Rs3Error::DanglingParentId { id: self.id(e).to_string(), parent: p.to_string() });
                }
            }
            if let Some(r) = relname {
                if parent.is_some() && r != SPAN_RELATION && self.relation_kinds(r) == (false, false) {
                    return Err(Rs3Error::UnknownRelname { id: self.id(e).to_string(), relname: r.to_string() });
                }
            }
        }
        Ok(())
    }

    /// Resolves the attachment structure into one n-ary tree per connected
    /// component.
    pub fn forest(&self) -> Result<Vec<Rs3Tree>, Rs3Error> {
        self.check_references()?;
        let index = self.index()?;
        let mut r = Resolved {
            doc: self,
            index,
            span_children: HashMap::new(),
            nuclei: HashMap::new(),
            satellites: HashMap::new(),
            first_pos: HashMap::new(),
        };
        let mut roots = Vec::new();
        for e in self.elements() {
            let (parent, relname) = self.link(e);
            let Some(p) = parent else {
                roots.push(e);
                continue;
            };
            let pe = r.index[p];
            let relname = relname.unwrap_or("");
            let parent_kind = match pe {
                Elem::Group(g) => Some(self.groups[g].kind),
                Elem::Segment(_) => None,
            };
            let (rst, multi) = self.relation_kinds(relname);
            let link = if relname == SPAN_RELATION || relname.is_empty() {
                Link::SpanChild
            } else if multi && parent_kind == Some(GroupKind::Multinuc) {
                Link::Nucleus
            } else if rst {
                Link::Satellite
            } else {
                return Err(Rs3Error::Structure {
                    id: self.id(e).to_string(),
                    msg: format!("multinuclear relname `{relname}` under a non-multinuc parent"),
                });
            };
            match link {
                Link::SpanChild => {
                    if parent_kind != Some(GroupKind::Span) {
                        return Err(Rs3Error::Structure {
                            id: self.id(e).to_string(),
                            msg: "`span` child of a node that is not a span group".into(),
                        });
                    }
                    r.span_children.entry(pe).or_default().push(e);
                }
                Link::Nucleus => r.nuclei.entry(pe).or_default().push((e, relname.to_string())),
                Link::Satellite => r.satellites.entry(pe).or_default().push((e, relname.to_string())),
            }
        }

        // First positions, with cycle detection.
        let mut state: HashMap<Elem, u8> = HashMap::new();
        for e in self.elements() {
            r.compute_first(e, &mut state)?;
        }
        if let Some(e) = self.elements().find(|e| !state.contains_key(e)) {
            return Err(Rs3Error::Cycle(self.id(e).to_string()));
        }

        let mut components = Vec::new();
        for root in roots {
            let Some(&first) = r.first_pos.get(&root) else {
                continue; // childless group, no text
            };
            let tree = r.build(root)?;
            components.push((first, tree));
        }
        components.sort_by_key(|(first, _)| *first);

        let mut reached = 0;
        let mut out = Vec::with_capacity(components.len());
        for (_, tree) in components {
            let mut positions = Vec::new();
            collect_leaves(&tree, &mut positions);
            positions.sort_unstable();
            reached += positions.len();
            let renumber: HashMap<usize, usize> = positions.iter().enumerate().map(|(k, &p)| (p, k)).collect();
            out.push(Rs3Tree {
                segment_ids: positions.iter().map(|&p| self.segments[p].id.clone()).collect(),
                texts: positions.iter().map(|&p| self.segments[p].text.clone()).collect(),
                tree: relabel_leaves(&tree, &renumber),
            });
        }
        if reached != self.segments.len() {
            return Err(Rs3Error::Structure {
                id: String::new(),
                msg: format!("{} of {} segments are not reachable from a root", self.segments.len() - reached, self.segments.len()),
            });
        }
        Ok(out)
    }
}

impl Resolved<'_> {
    fn children(&self, e: Elem) -> impl Iterator<Item = Elem> + '_ {
        let spans = self.span_children.get(&e).into_iter().flatten().copied();
        let nuclei = self.nuclei.get(&e).into_iter().flatten().map(|(c, _)| *c);
        let sats = self.satellites.get(&e).into_iter().flatten().map(|(c, _)| *c);
        spans.chain(nuclei).chain(sats)
    }

    fn compute_first(&mut self, e: Elem, state: &mut HashMap<Elem, u8>) -> Result<Option<usize>, Rs3Error> {
        match state.get(&e) {
            Some(1) => return Err(Rs3Error::Cycle(self.doc.id(e).to_string())),
            Some(_) => return Ok(self.first_pos.get(&e).copied()),
            None => {}
        }
        state.insert(e, 1);
        let mut first = match e {
            Elem::Segment(i) => Some(i),
            Elem::Group(_) => None,
        };
        let children: Vec<Elem> = self.children(e).collect();
        for c in children {
            if let Some(p) = self.compute_first(c, state)? {
                first = Some(first.map_or(p, |f: usize| f.min(p)));
            }
        }
        state.insert(e, 2);
        if let Some(f) = first {
            self.first_pos.insert(e, f);
        }
        Ok(first)
    }

    fn pos(&self, e: Elem) -> Result<usize, Rs3Error> {
        self.first_pos
            .get(&e)
            .copied()
            .ok_or_else(|| Rs3Error::Structure { id: self.doc.id(e).to_string(), msg: "group has no content".into() })
    }

    fn content(&self, e: Elem) -> Result<NaryTree, Rs3Error> {
        let id = || self.doc.id(e).to_string();
        match e {
            Elem::Segment(i) => {
                if self.span_children.contains_key(&e) || self.nuclei.contains_key(&e) {
                    return Err(Rs3Error::Structure { id: id(), msg: "segment has span or multinuclear children".into() });
                }
                Ok(NaryTree::Leaf(i))
            }
            Elem::Group(g) => match self.doc.groups[g].kind {
                GroupKind::Span => {
                    if self.nuclei.contains_key(&e) {
                        return Err(Rs3Error::Structure { id: id(), msg: "span group has multinuclear children".into() });
                    }
                    match self.span_children.get(&e).map(Vec::as_slice) {
                        Some([only]) => self.build(*only),
                        Some(many) if many.len() > 1 => {
                            Err(Rs3Error::Structure { id: id(), msg: format!("span group has {} span children", many.len()) })
                        }
                        _ => Err(Rs3Error::Structure { id: id(), msg: "span group has no span child".into() }),
                    }
                }
                GroupKind::Multinuc => {
                    let Some(nuclei) = self.nuclei.get(&e) else {
                        return Err(Rs3Error::Structure { id: id(), msg: "multinuc group has no nuclei".into() });
                    };
                    let mut ordered = Vec::with_capacity(nuclei.len());
                    for (c, rel) in nuclei {
                        ordered.push((self.pos(*c)?, *c, rel));
                    }
                    ordered.sort_by_key(|(p, _, _)| *p);
                    // The first-listed relation names the node; rs3 uses one relname per multinuc.
                    let relation = ordered[0].2.clone();
                    let children = ordered.iter().map(|(_, c, _)| self.build(*c)).collect::<Result<Vec<_>, _>>()?;
                    Ok(NaryTree::Node { relation, kind: NaryKind::Multinuclear, children })
                }
            },
        }
    }

    fn build(&self, e: Elem) -> Result<NaryTree, Rs3Error> {
        let mut tree = self.content(e)?;
        let Some(sats) = self.satellites.get(&e) else {
            return Ok(tree);
        };
        let own = self.pos(e)?;
        let mut right = Vec::new();
        let mut left = Vec::new();
        for (s, rel) in sats {
            let p = self.pos(*s)?;
            if p > own {
                right.push((p, *s, rel));
            } else {
                left.push((p, *s, rel));
            }
        }
        right.sort_by_key(|(p, _, _)| *p);
        left.sort_by_key(|(p, _, _)| std::cmp::Reverse(*p));
        for (_, s, rel) in right {
            let sat = self.build(s)?;
            tree = NaryTree::Node { relation: rel.clone(), kind: NaryKind::Mononuclear { nucleus: 0 }, children: vec![tree, sat] };
        }
        for (_, s, rel) in left {
            let sat = self.build(s)?;
            tree = NaryTree::Node { relation: rel.clone(), kind: NaryKind::Mononuclear { nucleus: 1 }, children: vec![sat, tree] };
        }
        Ok(tree)
    }
}

fn collect_leaves(tree: &NaryTree, out: &mut Vec<usize>) {
    match tree {
        NaryTree::Leaf(k) => out.push(*k),
        NaryTree::Node { children, .. } => children.iter().for_each(|c| collect_leaves(c, out)),
    }
}

fn relabel_leaves(tree: &NaryTree, map: &HashMap<usize, usize>) -> NaryTree {
    match tree {
        NaryTree::Leaf(k) => NaryTree::Leaf(map[k]),
        NaryTree::Node { relation, kind, children } => {
            NaryTree::Node { relation: relation.clone(), kind: *kind, children: children.iter().map(|c| relabel_leaves(c, map)).collect() }
        }
    }
}

impl NaryTree {
    pub fn leaf_count(&self) -> usize {
        match self {
            NaryTree::Leaf(_) => 1,
            NaryTree::Node { children, .. } => children.iter().map(NaryTree::leaf_count).sum(),
        }
    }

    /// Binary description: multinuclear nodes become right-branching
    /// cascades `(c1 (c2 (... ck)))`, every level labeled with the same
    /// relation and `NN`.
    pub fn binary_desc(&self) -> Result<TreeDesc, Rs3Error> {
        match self {
            NaryTree::Leaf(k) => Ok(TreeDesc::Leaf(*k)),
            NaryTree::Node { relation, kind, children } => {
                if children.len() == 1 {
                    return Err(Rs3Error::UnaryChain(relation.clone()));
                }
                let mut parts = children.iter().map(NaryTree::binary_desc).collect::<Result<Vec<_>, _>>()?;
                match kind {
                    NaryKind::Mononuclear { nucleus } => {
                        if parts.len() != 2 || *nucleus > 1 {
                            return Err(Rs3Error::MalformedMononuclear { relation: relation.clone(), children: parts.len() });
                        }
                        let nuc = if *nucleus == 0 { Nuclearity::NS } else { Nuclearity::SN };
                        let label = RelationLabel::new(relation, nuc)?;
                        let right = parts.pop().expect("two children");
                        let left = parts.pop().expect("two children");
                        Ok(TreeDesc::node(left, right, label))
                    }
                    NaryKind::Multinuclear => {
                        let label = RelationLabel::new(relation, Nuclearity::NN)?;
                        let mut acc = parts.pop().expect("at least two children");
                        while let Some(prev) = parts.pop() {
                            acc = TreeDesc::node(prev, acc, label.clone());
                        }
                        Ok(acc)
                    }
                }
            }
        }
    }

    /// Lifts a binary tree into n-ary form without merging anything.
    pub fn from_binary(tree: &RstTree) -> NaryTree {
        lift(tree.root(), false)
    }

    /// Inverse of the right-branching cascade: an `NN` node whose right
    /// child is an `NN` node with the same relation is merged into it.
    pub fn debinarize(tree: &RstTree) -> NaryTree {
        lift(tree.root(), true)
    }
}

fn lift(node: &Node, merge: bool) -> NaryTree {
    match node {
        Node::Leaf { edu, .. } => NaryTree::Leaf(*edu),
        Node::Internal { left, right, label, .. } => {
            let kind = match label.nuclearity {
                Nuclearity::NN => NaryKind::Multinuclear,
                Nuclearity::NS => NaryKind::Mononuclear { nucleus: 0 },
                Nuclearity::SN => NaryKind::Mononuclear { nucleus: 1 },
            };
            let mut children = vec![lift(left, merge)];
            match lift(right, merge) {
                NaryTree::Node { relation, kind: NaryKind::Multinuclear, children: inner }
                    if merge && kind == NaryKind::Multinuclear && relation == label.relation =>
                {
                    children.extend(inner)
                }
                other => children.push(other),
            }
            NaryTree::Node { relation: label.relation.clone(), kind, children }
        }
    }
}

/// Binarizes an n-ary tree over `edus` (token spans, leaf order).
pub fn binarize(tree: &NaryTree, edus: &[Span]) -> Result<RstTree, Rs3Error> {
    Ok(RstTree::build(&tree.binary_desc()?, edus)?)
}

/// Writes a document's tree as rs3 XML. Multinuclear cascades are merged
/// back into single multinuc groups; every mononuclear node gets its own
/// span group, so reading the output reproduces the tree exactly.
pub fn serialize_rs3(doc: &DocumentRecord) -> Result<String, Rs3Error> {
    let tree = doc.tree.as_ref().ok_or_else(|| Rs3Error::MissingTree(doc.id.clone()))?;
    let nary = NaryTree::debinarize(tree);

    let n = tree.leaf_count();
    let mut parents: Vec<Option<(usize, String)>> = vec![None; n];
    let mut groups: Vec<(GroupKind, Option<(usize, String)>)> = Vec::new();
    let mut relations = BTreeSet::new();

    // Returns the xml id of the element heading `t`. Segments are 1..=n,
    // groups n+1...
    fn emit(
        t: &NaryTree,
        n: usize,
        parents: &mut Vec<Option<(usize, String)>>,
        groups: &mut Vec<(GroupKind, Option<(usize, String)>)>,
        relations: &mut BTreeSet<(String, RelKind)>,
    ) -> usize {
        match t {
            NaryTree::Leaf(k) => k + 1,
            NaryTree::Node { relation, kind, children } => {
                let heads: Vec<usize> = children.iter().map(|c| emit(c, n, parents, groups, relations)).collect();
                let gid = n + groups.len() + 1;
                let mut set = |id: usize, link: (usize, String), groups: &mut Vec<(GroupKind, Option<(usize, String)>)>| {
                    if id <= n {
                        parents[id - 1] = Some(link);
                    } else {
                        groups[id - n - 1].1 = Some(link);
                    }
                };
                match kind {
                    NaryKind::Multinuclear => {
                        relations.insert((relation.clone(), RelKind::Multinuc));
                        groups.push((GroupKind::Multinuc, None));
                        for h in heads {
                            set(h, (gid, relation.clone()), groups);
                        }
                    }
                    NaryKind::Mononuclear { nucleus } => {
                        relations.insert((relation.clone(), RelKind::Rst));
                        groups.push((GroupKind::Span, None));
                        let nuc = heads[*nucleus];
                        let sat = heads[1 - *nucleus];
                        set(nuc, (gid, SPAN_RELATION.to_string()), groups);
                        set(sat, (nuc, relation.clone()), groups);
                    }
                }
                gid
            }
        }
    }
    emit(&nary, n, &mut parents, &mut groups, &mut relations);

    let mut xml = String::from("<rst>\n\t<header>\n\t\t<relations>\n");
    for (name, kind) in &relations {
        let _ = writeln!(xml, "\t\t\t<rel name=\"{}\" type=\"{}\"/>", escape(name.as_str()), kind.as_str());
    }
    xml.push_str("\t\t</relations>\n\t</header>\n\t<body>\n");
    let link_attrs = |link: &Option<(usize, String)>| match link {
        Some((p, rel)) => format!(" parent=\"{p}\" relname=\"{}\"", escape(rel.as_str())),
        None => String::new(),
    };
    for (k, edu) in doc.edus.iter().enumerate() {
        let text: Vec<&str> = doc.tokens[edu.first..=edu.last].iter().map(|t| t.text.as_str()).collect();
        let _ = writeln!(xml, "\t\t<segment id=\"{}\"{}>{}</segment>", k + 1, link_attrs(&parents[k]), escape(text.join(" ").as_str()));
    }
    for (g, (kind, link)) in groups.iter().enumerate() {
        let kind = match kind {
            GroupKind::Span => "span",
            GroupKind::Multinuc => "multinuc",
        };
        let _ = writeln!(xml, "\t\t<group id=\"{}\" type=\"{kind}\"{}/>", n + g + 1, link_attrs(link));
    }
    xml.push_str("\t</body>\n</rst>\n");
    Ok(xml)
}

/// Relation names declared in an rs3 file, lowercased.
pub fn declared_relations(doc: &Rs3Document) -> BTreeMap<String, BTreeSet<RelKind>> {
    let mut out: BTreeMap<String, BTreeSet<RelKind>> = BTreeMap::new();
    for r in &doc.relations {
        out.entry(r.name.to_lowercase()).or_default().insert(r.kind);
    }
    out
}
