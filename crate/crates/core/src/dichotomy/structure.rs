use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// How class subsets are split at each internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Each class joins either side with probability 1/2 (redrawn while a side is empty).
    #[default]
    Random,
    /// Uniformly random bipartition into sizes `ceil(n/2)` and `floor(n/2)`.
    Balanced,
}

impl std::str::FromStr for SplitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitStrategy::Random),
            "balanced" => Ok(SplitStrategy::Balanced),
            other => Err(Error::InvalidArgument(format!("unknown split strategy {other:?}"))),
        }
    }
}

/// One node of a class hierarchy. Internal nodes have `children = Some((left, right))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureNode {
    /// Sorted class indices under this node.
    pub classes: Vec<usize>,
    pub children: Option<(NodeId, NodeId)>,
}

/// A binary tree over the class set `{0, .., m-1}`, stored as an arena in
/// pre-order (parents precede children). Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeStructure {
    nodes: Vec<StructureNode>,
    num_classes: usize,
    parent: Vec<Option<NodeId>>,
    depth: Vec<usize>,
    leaf_of: Vec<NodeId>,
}

impl TreeStructure {
    /// Validates an arena of nodes and builds the lookup tables.
    pub fn from_nodes(nodes: Vec<StructureNode>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Format(format!("invalid tree structure: {msg}")));
        let Some(root) = nodes.first() else {
            return bad("no nodes".into());
        };
        let m = root.classes.len();
        if m < 2 || root.classes != (0..m).collect::<Vec<_>>() {
            return bad("root must hold classes 0..m with m >= 2".into());
        }
        let mut parent = vec![None; nodes.len()];
        let mut depth = vec![0; nodes.len()];
        let mut leaf_of = vec![usize::MAX; m];
        let mut visited = vec![false; nodes.len()];
        visited[0] = true;
        for (id, node) in nodes.iter().enumerate() {
            if !visited[id] {
                return bad(format!("node {id} unreachable or out of pre-order"));
            }
            match node.children {
                None => {
                    if node.classes.len() != 1 {
                        return bad(format!("leaf {id} holds {} classes", node.classes.len()));
                    }
                    leaf_of[node.classes[0]] = id;
                }
                Some((l, r)) => {
                    if l <= id || r <= id || l >= nodes.len() || r >= nodes.len() || l == r {
                        return bad(format!("node {id} has invalid children"));
                    }
                    if visited[l] || visited[r] {
                        return bad(format!("node {id} shares a child"));
                    }
                    let (lc, rc) = (&nodes[l].classes, &nodes[r].classes);
                    if lc.is_empty() || rc.is_empty() {
                        return bad(format!("node {id} has an empty side"));
                    }
                    let mut merged: Vec<usize> = lc.iter().chain(rc).copied().collect();
                    merged.sort_unstable();
                    if merged != node.classes {
                        return bad(format!("children of node {id} do not partition its classes"));
                    }
                    for c in [l, r] {
                        visited[c] = true;
                        parent[c] = Some(id);
                        depth[c] = depth[id] + 1;
                    }
                }
            }
            if node.classes.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("classes of node {id} not sorted"));
            }
        }
        if leaf_of.contains(&usize::MAX) {
            return bad("some class has no leaf".into());
        }
        Ok(TreeStructure {
            nodes,
            num_classes: m,
            parent,
            depth,
            leaf_of,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn nodes(&self) -> &[StructureNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &StructureNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn classes(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].classes
    }

    pub fn children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id]
    }

    /// Root has depth 0.
    pub fn depth(&self, id: NodeId) -> usize {
        self.depth[id]
    }

    /// Depth of the deepest leaf.
    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn leaf_of(&self, class: usize) -> NodeId {
        self.leaf_of[class]
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&id| self.nodes[id].children.is_some())
    }

    /// Left subset `C_k1` of internal node `id`.
    pub fn left_classes(&self, id: NodeId) -> &[usize] {
        let (l, _) = self.nodes[id].children.expect("internal node");
        &self.nodes[l].classes
    }

    pub fn right_classes(&self, id: NodeId) -> &[usize] {
        let (_, r) = self.nodes[id].children.expect("internal node");
        &self.nodes[r].classes
    }

    /// Internal nodes from the root to `class`'s leaf, each with whether the
    /// path continues into the left subset.
    pub fn path_to(&self, class: usize) -> Vec<(NodeId, bool)> {
        let mut path = Vec::new();
        let mut child = self.leaf_of[class];
        while let Some(p) = self.parent[child] {
            let (l, _) = self.nodes[p].children.expect("parent is internal");
            path.push((p, child == l));
            child = p;
        }
        path.reverse();
        path
    }

    /// Nodes at depth `d`, plus leaves that are shallower.
    pub fn frontier(&self, d: usize) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&id| self.depth[id] == d || (self.depth[id] < d && self.nodes[id].children.is_none()))
            .collect()
    }
}

/// Samples a random class hierarchy over `m` classes.
pub fn sample_structure(m: usize, strategy: SplitStrategy, seed: u64) -> Result<TreeStructure> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(2 * m - 1);
    build(&mut nodes, (0..m).collect(), strategy, &mut rng);
    TreeStructure::from_nodes(nodes)
}

fn build<R: Rng>(nodes: &mut Vec<StructureNode>, classes: Vec<usize>, strategy: SplitStrategy, rng: &mut R) -> NodeId {
    let id = nodes.len();
    if classes.len() == 1 {
        nodes.push(StructureNode {
            classes,
            children: None,
        });
        return id;
    }
    let (left, right) = split_classes(&classes, strategy, rng);
    nodes.push(StructureNode {
        classes,
        children: None,
    });
    let l = build(nodes, left, strategy, rng);
    let r = build(nodes, right, strategy, rng);
    nodes[id].children = Some((l, r));
    id
}

fn split_classes<R: Rng>(classes: &[usize], strategy: SplitStrategy, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    match strategy {
        SplitStrategy::Random => loop {
            let (left, right): (Vec<usize>, Vec<usize>) = classes.iter().partition(|_| rng.gen_bool(0.5));
            if !left.is_empty() && !right.is_empty() {
                return (left, right);
            }
        },
        SplitStrategy::Balanced => {
            let mut shuffled = classes.to_vec();
            shuffled.shuffle(rng);
            let mut right = shuffled.split_off(classes.len().div_ceil(2));
            let mut left = shuffled;
            left.sort_unstable();
            right.sort_unstable();
            (left, right)
        }
    }
}
