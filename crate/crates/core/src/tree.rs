//! Binarized RST constituent trees over EDUs.
//!
//! A tree is built from a [`TreeDesc`] (a nested description that may be
//! malformed) together with the token spans of the EDUs it covers. Every
//! node caches both its EDU range and its token range.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inclusive index range `[first, last]`.
///
/// Used both for token ranges (EDU extents, node spans) and for EDU ranges
/// inside a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub first: usize,
    pub last: usize,
}

/// Token extent of one elementary discourse unit (both ends inclusive).
pub type EduSpan = Span;

impl Span {
    /// Returns `None` when `first > last`.
    pub fn new(first: usize, last: usize) -> Option<Span> {
        (first <= last).then_some(Span { first, last })
    }

    pub fn single(index: usize) -> Span {
        Span { first: index, last: index }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.first <= index && index <= self.last
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.first <= other.last && other.first <= self.last
    }

    /// `n` one-token EDUs covering tokens `0..n`.
    pub fn unit_edus(n: usize) -> Vec<Span> {
        (0..n).map(Span::single).collect()
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

/// A token of a document. `index` is the 0-based position in the document,
/// `char_start` the character offset into the document text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nuclearity {
    NN,
    NS,
    SN,
}

impl Nuclearity {
    pub const ALL: [Nuclearity; 3] = [Nuclearity::NN, Nuclearity::NS, Nuclearity::SN];

    pub fn as_str(self) -> &'static str {
        match self {
            Nuclearity::NN => "NN",
            Nuclearity::NS => "NS",
            Nuclearity::SN => "SN",
        }
    }

    /// Roles of the (left, right) children.
    pub fn roles(self) -> (Role, Role) {
        match self {
            Nuclearity::NN => (Role::Nucleus, Role::Nucleus),
            Nuclearity::NS => (Role::Nucleus, Role::Satellite),
            Nuclearity::SN => (Role::Satellite, Role::Nucleus),
        }
    }

    pub fn is_multinuclear(self) -> bool {
        self == Nuclearity::NN
    }
}

impl fmt::Display for Nuclearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Nuclearity {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NN" => Ok(Nuclearity::NN),
            "NS" => Ok(Nuclearity::NS),
            "SN" => Ok(Nuclearity::SN),
            _ => Err(LabelError::Nuclearity(s.to_string())),
        }
    }
}

/// Role of a node under its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Nucleus,
    Satellite,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Nucleus => "N",
            Role::Satellite => "S",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelError {
    #[error("malformed label `{0}`: expected `relation_NN|NS|SN`")]
    Malformed(String),
    #[error("unknown nuclearity `{0}`")]
    Nuclearity(String),
    #[error("invalid relation name `{0}`")]
    Relation(String),
}

/// Reserved relation carried by nucleus children of mononuclear relations.
pub const SPAN_RELATION: &str = "span";

/// Relation name plus nuclearity of an internal node.
///
/// Relation names are case-folded to lowercase on construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationLabel {
    pub relation: String,
    pub nuclearity: Nuclearity,
}

impl RelationLabel {
    pub fn new(relation: &str, nuclearity: Nuclearity) -> Result<Self, LabelError> {
        let relation = relation.trim().to_lowercase();
        if relation.is_empty()
            || relation == SPAN_RELATION
            || relation.chars().any(|c| c.is_whitespace() || c == '(' || c == ')' || c == '#')
        {
            return Err(LabelError::Relation(relation));
        }
        Ok(RelationLabel { relation, nuclearity })
    }

    /// `relation_NUC`, e.g. `elaboration_NS`.
    pub fn merged(&self) -> String {
        format!("{}_{}", self.relation, self.nuclearity)
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.relation, self.nuclearity)
    }
}

impl FromStr for RelationLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (relation, nuc) = s.rsplit_once('_').ok_or_else(|| LabelError::Malformed(s.to_string()))?;
        let nuclearity = nuc.parse().map_err(|_| LabelError::Malformed(s.to_string()))?;
        RelationLabel::new(relation, nuclearity)
    }
}

/// Nested, unchecked description of a constituent tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeDesc {
    Leaf(usize),
    Node { label: RelationLabel, children: Vec<TreeDesc> },
}

impl TreeDesc {
    pub fn node(left: TreeDesc, right: TreeDesc, label: RelationLabel) -> TreeDesc {
        TreeDesc::Node { label, children: vec![left, right] }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("internal node has {0} children, expected 2")]
    NonBinaryNode(usize),
    #[error("children cover EDUs {left} and {right}, which are not adjacent")]
    NonContiguousChildren { left: Span, right: Span },
    #[error("EDU {0} appears more than once")]
    DuplicateLeaf(usize),
    #[error("leaf refers to EDU {index} but only {count} EDUs exist")]
    LeafOutOfRange { index: usize, count: usize },
    #[error("tree covers EDUs {covered} but {count} EDUs were supplied")]
    IncompleteCover { covered: Span, count: usize },
    #[error("EDU token spans are not contiguous at EDU {0}")]
    NonContiguousEdus(usize),
    #[error("no EDUs supplied")]
    Empty,
    #[error("bad tree string at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

/// A node of a binarized RST tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Leaf { edu: usize, tokens: Span },
    Internal { left: Box<Node>, right: Box<Node>, label: RelationLabel, edus: Span, tokens: Span },
}

impl Node {
    pub fn edus(&self) -> Span {
        match self {
            Node::Leaf { edu, .. } => Span::single(*edu),
            Node::Internal { edus, .. } => *edus,
        }
    }

    pub fn tokens(&self) -> Span {
        match self {
            Node::Leaf { tokens, .. } | Node::Internal { tokens, .. } => *tokens,
        }
    }

    pub fn label(&self) -> Option<&RelationLabel> {
        match self {
            Node::Leaf { .. } => None,
            Node::Internal { label, .. } => Some(label),
        }
    }

    pub fn children(&self) -> Option<(&Node, &Node)> {
        match self {
            Node::Leaf { .. } => None,
            Node::Internal { left, right, .. } => Some((left, right)),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn describe(&self) -> TreeDesc {
        match self {
            Node::Leaf { edu, .. } => TreeDesc::Leaf(*edu),
            Node::Internal { left, right, label, .. } => TreeDesc::node(left.describe(), right.describe(), label.clone()),
        }
    }
}

/// One evaluation unit: a non-root node with its role under the parent and
/// the relation attached to it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constituent {
    pub span: Span,
    pub role: Role,
    pub relation: String,
}

/// Strictly binary RST tree with cached spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RstTree {
    root: Node,
}

impl RstTree {
    /// Builds a tree from a description over `edus` (token spans, in order).
    /// Leaves must be exactly `0..edus.len()`, left to right.
    pub fn build(desc: &TreeDesc, edus: &[Span]) -> Result<RstTree, TreeError> {
        if edus.is_empty() {
            return Err(TreeError::Empty);
        }
        for k in 1..edus.len() {
            if edus[k - 1].last + 1 != edus[k].first {
                return Err(TreeError::NonContiguousEdus(k));
            }
        }
        let mut seen = vec![false; edus.len()];
        let root = build_node(desc, edus, &mut seen)?;
        let covered = root.edus();
        if covered.first != 0 || covered.last + 1 != edus.len() {
            return Err(TreeError::IncompleteCover { covered, count: edus.len() });
        }
        Ok(RstTree { root })
    }

    /// Single-EDU tree.
    pub fn leaf(edu: Span) -> RstTree {
        RstTree { root: Node::Leaf { edu: 0, tokens: edu } }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.root.edus().len()
    }

    pub fn internal_count(&self) -> usize {
        self.leaf_count() - 1
    }

    /// Maximum number of edges from the root to a leaf.
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn tokens(&self) -> Span {
        self.root.tokens()
    }

    pub fn describe(&self) -> TreeDesc {
        self.root.describe()
    }

    /// Token spans of the leaves, left to right.
    pub fn edu_spans(&self) -> Vec<Span> {
        let mut out = Vec::with_capacity(self.leaf_count());
        for node in self.nodes() {
            if let Node::Leaf { tokens, .. } = node {
                out.push(*tokens);
            }
        }
        out
    }

    /// Pre-order traversal.
    pub fn nodes(&self) -> Nodes<'_> {
        Nodes { stack: vec![&self.root] }
    }

    /// Internal nodes in pre-order.
    pub fn internal_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes().filter(|n| !n.is_leaf())
    }

    /// Rewrites every label with `f`, keeping the structure.
    pub fn map_labels<F>(&self, mut f: F) -> RstTree
    where
        F: FnMut(&RelationLabel) -> RelationLabel,
    {
        fn go<F: FnMut(&RelationLabel) -> RelationLabel>(node: &Node, f: &mut F) -> Node {
            match node {
                Node::Leaf { .. } => node.clone(),
                Node::Internal { left, right, label, edus, tokens } => Node::Internal {
                    left: Box::new(go(left, f)),
                    right: Box::new(go(right, f)),
                    label: f(label),
                    edus: *edus,
                    tokens: *tokens,
                },
            }
        }
        RstTree { root: go(&self.root, &mut f) }
    }

    /// Non-root constituents ordered by (span start, span length).
    ///
    /// The satellite of a mononuclear relation carries the relation name and
    /// its nucleus carries `span`; both children of a multinuclear relation
    /// carry the relation name.
    pub fn constituents(&self) -> Vec<Constituent> {
        let mut out = Vec::with_capacity(2 * self.internal_count());
        for node in self.internal_nodes() {
            let (left, right) = node.children().expect("internal node");
            let label = node.label().expect("internal node");
            let (lrole, rrole) = label.nuclearity.roles();
            for (child, role) in [(left, lrole), (right, rrole)] {
                let relation = match role {
                    Role::Nucleus if !label.nuclearity.is_multinuclear() => SPAN_RELATION.to_string(),
                    _ => label.relation.clone(),
                };
                out.push(Constituent { span: child.tokens(), role, relation });
            }
        }
        out.sort_by_key(|c| (c.span.first, c.span.len()));
        out
    }
}

/// Free-function form of [`RstTree::build`].
pub fn build_tree(desc: &TreeDesc, edus: &[Span]) -> Result<RstTree, TreeError> {
    RstTree::build(desc, edus)
}

/// Free-function form of [`RstTree::constituents`].
pub fn enumerate_constituents(tree: &RstTree) -> Vec<Constituent> {
    tree.constituents()
}

fn build_node(desc: &TreeDesc, edus: &[Span], seen: &mut [bool]) -> Result<Node, TreeError> {
    match desc {
        TreeDesc::Leaf(k) => {
            let k = *k;
            if k >= edus.len() {
                return Err(TreeError::LeafOutOfRange { index: k, count: edus.len() });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(TreeError::DuplicateLeaf(k));
            }
            Ok(Node::Leaf { edu: k, tokens: edus[k] })
        }
        TreeDesc::Node { label, children } => {
            if children.len() != 2 {
                return Err(TreeError::NonBinaryNode(children.len()));
            }
            let left = build_node(&children[0], edus, seen)?;
            let right = build_node(&children[1], edus, seen)?;
            let (le, re) = (left.edus(), right.edus());
            if le.last + 1 != re.first {
                return Err(TreeError::NonContiguousChildren { left: le, right: re });
            }
            Ok(Node::Internal {
                edus: Span { first: le.first, last: re.last },
                tokens: Span { first: left.tokens().first, last: right.tokens().last },
                left: Box::new(left),
                right: Box::new(right),
                label: label.clone(),
            })
        }
    }
}

pub struct Nodes<'a> {
    stack: Vec<&'a Node>,
}

impl<'a> Iterator for Nodes<'a> {
    type Item = &'a Node;

    fn next(&mut self) -> Option<&'a Node> {
        let node = self.stack.pop()?;
        if let Node::Internal { left, right, .. } = node {
            self.stack.push(right);
            self.stack.push(left);
        }
        Some(node)
    }
}

// Bracketed form: `(rel_NUC left right)`, leaves `#k`.

impl fmt::Display for TreeDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeDesc::Leaf(k) => write!(f, "#{k}"),
            TreeDesc::Node { label, children } => {
                write!(f, "({label}")?;
                for child in children {
                    write!(f, " {child}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for RstTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl FromStr for TreeDesc {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parser = BracketParser { src: s.as_bytes(), pos: 0 };
        let desc = parser.parse()?;
        parser.skip_ws();
        if parser.pos != s.len() {
            return Err(parser.err("trailing input"));
        }
        Ok(desc)
    }
}

struct BracketParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl BracketParser<'_> {
    fn err(&self, msg: &str) -> TreeError {
        TreeError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        // Atoms only split at ASCII bytes, so the slice stays valid UTF-8.
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn parse(&mut self) -> Result<TreeDesc, TreeError> {
        self.skip_ws();
        match self.src.get(self.pos) {
            None => Err(self.err("unexpected end of input")),
            Some(b'#') => {
                self.pos += 1;
                let start = self.pos;
                let digits = self.atom();
                digits.parse().map(TreeDesc::Leaf).map_err(|_| TreeError::Syntax { pos: start, msg: format!("bad leaf index `{digits}`") })
            }
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let start = self.pos;
                let label: RelationLabel =
                    self.atom().parse().map_err(|e: LabelError| TreeError::Syntax { pos: start, msg: e.to_string() })?;
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    match self.src.get(self.pos) {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        None => return Err(self.err("unclosed `(`")),
                        _ => children.push(self.parse()?),
                    }
                }
                Ok(TreeDesc::Node { label, children })
            }
            Some(_) => Err(self.err("expected `(` or `#`")),
        }
    }
}
