//! Chronological trees: an Ulam–Harris discrete tree whose vertices carry a
//! birth level `alpha` and a death level `omega`.
//!
//! Vertices live in an arena indexed by [`NodeId`]; the child at position
//! `k - 1` of a vertex's child list carries the label suffix `k`. A point of
//! the tree is a pair `(vertex, level)` with `alpha < level <= omega`, plus
//! the root point `rho = (root, 0)`.

mod io;
mod order;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{read_jsonl, write_jsonl, VertexRecord};
pub use order::PointKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("unknown label {0}")]
    UnknownLabel(UlamLabel),
    #[error("invalid label {0}: entries must be >= 1")]
    InvalidLabel(UlamLabel),
    #[error("{0} is missing its parent")]
    MissingParent(UlamLabel),
    #[error("children of {0} are not numbered 1..K without gaps")]
    ChildGap(UlamLabel),
    #[error("{label}: need alpha < omega, got ({alpha}, {omega}]")]
    EmptyLifetime { label: UlamLabel, alpha: f64, omega: f64 },
    #[error("{label}: birth level {alpha} outside the parent's lifetime ({lo}, {hi})")]
    BirthOutsideParent { label: UlamLabel, alpha: f64, lo: f64, hi: f64 },
    #[error("siblings under {0} share the birth level {1}")]
    SiblingTie(UlamLabel, f64),
    #[error("root must have alpha = 0, got {0}")]
    RootAlpha(f64),
    #[error("duplicate label {0}")]
    Duplicate(UlamLabel),
    #[error("point {0} is not in the tree")]
    InvalidPoint(TreePoint),
    #[error("grafting needs a simple point, {0} is a {1:?}")]
    NotSimple(TreePoint, PointKind),
    #[error("child index {index} out of range 1..={max}")]
    ChildIndex { index: usize, max: usize },
    #[error("tree has an infinite lifetime; truncate it first")]
    InfiniteLength,
    #[error("truncation level must be positive, got {0}")]
    NonPositiveLevel(f64),
    #[error("empty tree")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Ulam–Harris label: the empty word is the ancestor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UlamLabel(pub Vec<u32>);

impl UlamLabel {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn generation(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, k: u32) -> Self {
        let mut v = self.0.clone();
        v.push(k);
        Self(v)
    }

    pub fn parent(&self) -> Option<Self> {
        let (_, init) = self.0.split_last()?;
        Some(Self(init.to_vec()))
    }

    /// `u|k`: the ancestor at generation `k`.
    pub fn truncated(&self, k: usize) -> Self {
        Self(self.0[..k.min(self.0.len())].to_vec())
    }

    /// `self` is a (weak) ancestor of `other` in the Ulam–Harris order.
    pub fn is_prefix_of(&self, other: &UlamLabel) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for UlamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

impl From<Vec<u32>> for UlamLabel {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Existence point `(label, level)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePoint {
    pub label: UlamLabel,
    pub level: f64,
}

impl TreePoint {
    pub fn new(label: impl Into<UlamLabel>, level: f64) -> Self {
        Self {
            label: label.into(),
            level,
        }
    }
}

impl fmt::Display for TreePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.label, self.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    alpha: f64,
    omega: f64,
    depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronologicalTree {
    nodes: Vec<Node>,
}

impl ChronologicalTree {
    pub const ROOT: NodeId = NodeId(0);

    /// A single ancestor living on `(0, omega]`.
    pub fn new(omega: f64) -> Result<Self, TreeError> {
        if !(omega > 0.0) {
            return Err(TreeError::EmptyLifetime {
                label: UlamLabel::root(),
                alpha: 0.0,
                omega,
            });
        }
        Ok(Self {
            nodes: vec![Node {
                parent: None,
                children: Vec::new(),
                alpha: 0.0,
                omega,
                depth: 0,
            }],
        })
    }

    /// Appends a child of `parent` with the next free index, checking the
    /// lifetime and sibling invariants.
    pub fn push_child(&mut self, parent: NodeId, alpha: f64, omega: f64) -> Result<NodeId, TreeError> {
        let p = &self.nodes[parent.0];
        if !(alpha > p.alpha && alpha < p.omega) {
            return Err(TreeError::BirthOutsideParent {
                label: self.label(parent).child(p.children.len() as u32 + 1),
                alpha,
                lo: p.alpha,
                hi: p.omega,
            });
        }
        if !(omega > alpha) {
            return Err(TreeError::EmptyLifetime {
                label: self.label(parent).child(p.children.len() as u32 + 1),
                alpha,
                omega,
            });
        }
        if p.children.iter().any(|c| self.nodes[c.0].alpha == alpha) {
            return Err(TreeError::SiblingTie(self.label(parent), alpha));
        }
        Ok(self.push_child_unchecked(parent, alpha, omega))
    }

    pub(crate) fn push_child_unchecked(&mut self, parent: NodeId, alpha: f64, omega: f64) -> NodeId {
        let id = NodeId(self.nodes.len());
        let depth = self.nodes[parent.0].depth + 1;
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            alpha,
            omega,
            depth,
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    /// Builds a tree from `(label, alpha, omega)` triples in any order,
    /// reporting the first invariant violation.
    pub fn from_vertices<I>(vertices: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = (UlamLabel, f64, f64)>,
    {
        let mut sorted: Vec<(UlamLabel, f64, f64)> = vertices.into_iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut iter = sorted.into_iter();
        let (root_label, alpha, omega) = iter.next().ok_or(TreeError::Empty)?;
        if !root_label.0.is_empty() {
            return Err(TreeError::MissingParent(root_label));
        }
        if alpha != 0.0 {
            return Err(TreeError::RootAlpha(alpha));
        }
        let mut tree = Self::new(omega)?;
        let mut prev = root_label;
        for (label, alpha, omega) in iter {
            if label == prev {
                return Err(TreeError::Duplicate(label));
            }
            if label.0.iter().any(|&k| k == 0) {
                return Err(TreeError::InvalidLabel(label));
            }
            let parent_label = label.parent().expect("non-root label");
            let parent = tree
                .find(&parent_label)
                .ok_or_else(|| TreeError::MissingParent(label.clone()))?;
            let k = *label.0.last().expect("non-root label") as usize;
            if k != tree.nodes[parent.0].children.len() + 1 {
                return Err(TreeError::ChildGap(parent_label));
            }
            tree.push_child(parent, alpha, omega).map_err(|e| match e {
                TreeError::BirthOutsideParent { alpha, lo, hi, .. } => TreeError::BirthOutsideParent {
                    label: label.clone(),
                    alpha,
                    lo,
                    hi,
                },
                TreeError::EmptyLifetime { alpha, omega, .. } => TreeError::EmptyLifetime {
                    label: label.clone(),
                    alpha,
                    omega,
                },
                other => other,
            })?;
            prev = label;
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn alpha(&self, id: NodeId) -> f64 {
        self.nodes[id.0].alpha
    }

    pub fn omega(&self, id: NodeId) -> f64 {
        self.nodes[id.0].omega
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn generation(&self, id: NodeId) -> usize {
        self.nodes[id.0].depth as usize
    }

    /// `zeta(u) = omega(u) - alpha(u)`.
    pub fn lifespan_of(&self, id: NodeId) -> f64 {
        let n = &self.nodes[id.0];
        n.omega - n.alpha
    }

    pub fn label(&self, id: NodeId) -> UlamLabel {
        let mut digits = Vec::with_capacity(self.nodes[id.0].depth as usize);
        let mut cur = id;
        while let Some(p) = self.nodes[cur.0].parent {
            let k = self.nodes[p.0]
                .children
                .iter()
                .position(|&c| c == cur)
                .expect("child registered with parent");
            digits.push(k as u32 + 1);
            cur = p;
        }
        digits.reverse();
        UlamLabel(digits)
    }

    pub fn find(&self, label: &UlamLabel) -> Option<NodeId> {
        let mut cur = Self::ROOT;
        for &k in &label.0 {
            cur = *self.nodes[cur.0].children.get((k as usize).checked_sub(1)?)?;
        }
        Some(cur)
    }

    fn resolve(&self, label: &UlamLabel) -> Result<NodeId, TreeError> {
        self.find(label)
            .ok_or_else(|| TreeError::UnknownLabel(label.clone()))
    }

    /// Lifespan of the vertex with the given label.
    pub fn lifespan(&self, label: &UlamLabel) -> Result<f64, TreeError> {
        Ok(self.lifespan_of(self.resolve(label)?))
    }

    /// Sum of all lifespans, `+inf` if any vertex is immortal.
    pub fn total_length(&self) -> f64 {
        self.nodes.iter().map(|n| n.omega - n.alpha).sum()
    }

    pub fn has_infinite_lifetime(&self) -> bool {
        self.nodes.iter().any(|n| n.omega.is_infinite())
    }

    /// Number of vertices alive at `level`: `alpha < level <= omega`.
    pub fn width(&self, level: f64) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.alpha < level && level <= n.omega)
            .count()
    }

    /// Vertices alive at `level`, in arena order.
    pub fn alive_at(&self, level: f64) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(move |&id| {
            let n = &self.nodes[id.0];
            n.alpha < level && level <= n.omega
        })
    }

    /// Sum of lifespans per generation, `Z_0, Z_1, ...`.
    pub fn generation_lengths(&self) -> Vec<f64> {
        let mut z = Vec::new();
        for n in &self.nodes {
            let g = n.depth as usize;
            if z.len() <= g {
                z.resize(g + 1, 0.0);
            }
            z[g] += n.omega - n.alpha;
        }
        z
    }

    /// Largest death level.
    pub fn height(&self) -> f64 {
        self.nodes.iter().map(|n| n.omega).fold(0.0, f64::max)
    }

    /// The truncation `{x : level(x) <= tau}`; surviving children keep their
    /// relative order and are renumbered `1..K`.
    pub fn truncate(&self, tau: f64) -> Result<Self, TreeError> {
        if !(tau > 0.0) {
            return Err(TreeError::NonPositiveLevel(tau));
        }
        let root = &self.nodes[0];
        let mut out = Self::new(root.omega.min(tau))?;
        let mut stack = vec![(Self::ROOT, Self::ROOT)];
        while let Some((src, dst)) = stack.pop() {
            for &c in &self.nodes[src.0].children {
                let n = &self.nodes[c.0];
                if n.alpha >= tau {
                    continue;
                }
                let id = out.push_child_unchecked(dst, n.alpha, n.omega.min(tau));
                stack.push((c, id));
            }
        }
        Ok(out)
    }

    /// Checks `int_0^tau width(s) ds = length(truncate(tau))` by computing both
    /// sides independently; returns `(integral of width, truncated length)`.
    pub fn width_integral(&self, tau: f64) -> Result<(f64, f64), TreeError> {
        let truncated = self.truncate(tau)?.total_length();
        // +1 at each birth, -1 at each death, swept in level order
        let mut events: Vec<(f64, i64)> = Vec::with_capacity(2 * self.nodes.len());
        for n in &self.nodes {
            if n.alpha >= tau {
                continue;
            }
            events.push((n.alpha, 1));
            events.push((n.omega.min(tau), -1));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut alive = 0i64;
        let mut last = 0.0;
        let mut integral = 0.0;
        for (level, delta) in events {
            integral += alive as f64 * (level - last);
            alive += delta;
            last = level;
        }
        Ok((integral, truncated))
    }

    /// Grafts `guest` at the simple point `x` as child number `index` of
    /// `x.label`; younger siblings with index `>= index` shift up by one.
    pub fn graft(&self, guest: &ChronologicalTree, x: &TreePoint, index: usize) -> Result<Self, TreeError> {
        let host_id = self.point_node(x)?;
        match self.classify_point(x)? {
            PointKind::Simple => {}
            kind => return Err(TreeError::NotSimple(x.clone(), kind)),
        }
        let k = self.nodes[host_id.0].children.len();
        if index == 0 || index > k + 1 {
            return Err(TreeError::ChildIndex { index, max: k + 1 });
        }
        let mut out = self.clone();
        let shift = x.level;
        let base = out.nodes.len();
        for (i, n) in guest.nodes.iter().enumerate() {
            out.nodes.push(Node {
                parent: Some(match n.parent {
                    Some(p) => NodeId(base + p.0),
                    None => host_id,
                }),
                children: n.children.iter().map(|c| NodeId(base + c.0)).collect(),
                alpha: n.alpha + shift,
                omega: n.omega + shift,
                depth: n.depth + self.nodes[host_id.0].depth + 1,
            });
            debug_assert_eq!(out.nodes.len() - 1, base + i);
        }
        out.nodes[host_id.0].children.insert(index - 1, NodeId(base));
        Ok(out)
    }

    /// Canonical form: every child list sorted by decreasing birth level.
    /// Two trees equal up to sibling relabelling have equal canonical forms.
    pub fn canonical(&self) -> Self {
        let mut out = Self::new(self.nodes[0].omega).expect("valid root");
        let mut stack = vec![(Self::ROOT, Self::ROOT)];
        while let Some((src, dst)) = stack.pop() {
            let mut kids = self.nodes[src.0].children.clone();
            kids.sort_by(|a, b| self.nodes[b.0].alpha.total_cmp(&self.nodes[a.0].alpha));
            for c in kids {
                let n = &self.nodes[c.0];
                let id = out.push_child_unchecked(dst, n.alpha, n.omega);
                stack.push((c, id));
            }
        }
        out.renumber_depth_first();
        out
    }

    /// Rebuilds the arena in depth-first preorder so that structurally equal
    /// trees compare equal with `==`.
    fn renumber_depth_first(&mut self) {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            order.push(id);
            for &c in self.nodes[id.0].children.iter().rev() {
                stack.push(c);
            }
        }
        let mut new_index = vec![0usize; self.nodes.len()];
        for (new, old) in order.iter().enumerate() {
            new_index[old.0] = new;
        }
        let nodes = order
            .iter()
            .map(|old| {
                let n = &self.nodes[old.0];
                Node {
                    parent: n.parent.map(|p| NodeId(new_index[p.0])),
                    children: n.children.iter().map(|c| NodeId(new_index[c.0])).collect(),
                    alpha: n.alpha,
                    omega: n.omega,
                    depth: n.depth,
                }
            })
            .collect();
        self.nodes = nodes;
    }

    /// Vertices as `(label, alpha, omega)` in lexicographic label order.
    pub fn vertices(&self) -> Vec<(UlamLabel, f64, f64)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(Self::ROOT, UlamLabel::root())];
        while let Some((id, label)) = stack.pop() {
            let n = &self.nodes[id.0];
            for (k, &c) in n.children.iter().enumerate().rev() {
                stack.push((c, label.child(k as u32 + 1)));
            }
            out.push((label, n.alpha, n.omega));
        }
        out
    }
}
