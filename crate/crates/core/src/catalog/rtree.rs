//! Static R-tree bulk-loaded with Sort-Tile-Recursive packing.

use crate::geo::BBox;

#[derive(Debug, Clone)]
enum Children {
    Items(Vec<usize>),
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    bbox: BBox,
    children: Children,
}

/// Immutable packed R-tree over item indices `0..n`.
#[derive(Debug, Clone)]
pub struct PackedRTree {
    nodes: Vec<Node>,
    boxes: Vec<BBox>,
    root: Option<usize>,
}

fn union_all(boxes: impl Iterator<Item = BBox>) -> BBox {
    boxes
        .reduce(|a, b| a.union(&b))
        .expect("STR groups are never empty")
}

/// Sort-Tile-Recursive grouping of `(bbox, payload)` entries into runs of at
/// most `fanout`.
fn str_groups<T: Copy>(mut entries: Vec<(BBox, T)>, fanout: usize) -> Vec<Vec<(BBox, T)>> {
    let n = entries.len();
    let leaves = n.div_ceil(fanout);
    let slices = (leaves as f64).sqrt().ceil() as usize;
    let per_slice = slices.max(1) * fanout;
    entries.sort_by(|a, b| a.0.center().lon.total_cmp(&b.0.center().lon));
    let mut groups = Vec::with_capacity(leaves);
    for slice in entries.chunks_mut(per_slice) {
        slice.sort_by(|a, b| a.0.center().lat.total_cmp(&b.0.center().lat));
        groups.extend(slice.chunks(fanout).map(|c| c.to_vec()));
    }
    groups
}

impl PackedRTree {
    pub fn build(boxes: Vec<BBox>, fanout: usize) -> Self {
        assert!(fanout >= 2, "fanout must be at least 2");
        let mut nodes = Vec::new();
        if boxes.is_empty() {
            return Self {
                nodes,
                boxes,
                root: None,
            };
        }
        let items: Vec<(BBox, usize)> = boxes.iter().copied().zip(0..).collect();
        let mut level: Vec<(BBox, usize)> = str_groups(items, fanout)
            .into_iter()
            .map(|g| {
                nodes.push(Node {
                    bbox: union_all(g.iter().map(|e| e.0)),
                    children: Children::Items(g.iter().map(|e| e.1).collect()),
                });
                (nodes.last().unwrap().bbox, nodes.len() - 1)
            })
            .collect();
        while level.len() > 1 {
            level = str_groups(level, fanout)
                .into_iter()
                .map(|g| {
                    nodes.push(Node {
                        bbox: union_all(g.iter().map(|e| e.0)),
                        children: Children::Nodes(g.iter().map(|e| e.1).collect()),
                    });
                    (nodes.last().unwrap().bbox, nodes.len() - 1)
                })
                .collect();
        }
        let root = Some(level[0].1);
        Self { nodes, boxes, root }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Indices of items whose box intersects `window` (closed test), in
    /// traversal order.
    pub fn search(&self, window: &BBox) -> Vec<usize> {
        let mut out = Vec::new();
        let Some(root) = self.root else {
            return out;
        };
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bbox.intersects(window) {
                continue;
            }
            match &node.children {
                Children::Items(items) => {
                    out.extend(items.iter().copied().filter(|&i| self.boxes[i].intersects(window)))
                }
                Children::Nodes(kids) => stack.extend(kids.iter().copied()),
            }
        }
        out
    }

    /// Every item index reachable from the root, with multiplicity.
    pub fn leaf_items(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            match &self.nodes[id].children {
                Children::Items(items) => out.extend(items),
                Children::Nodes(kids) => stack.extend(kids),
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        let mut depth = 0;
        let mut cur = self.root;
        while let Some(id) = cur {
            depth += 1;
            cur = match &self.nodes[id].children {
                Children::Items(_) => None,
                Children::Nodes(kids) => kids.first().copied(),
            };
        }
        depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_item_indexed_once() {
        let boxes: Vec<BBox> = (0..1000)
            .map(|i| {
                let x = (i % 37) as f64;
                let y = (i / 37) as f64;
                BBox::new(x, y, x + 0.5, y + 0.5).unwrap()
            })
            .collect();
        let tree = PackedRTree::build(boxes, 16);
        let mut items = tree.leaf_items();
        items.sort_unstable();
        assert_eq!(items, (0..1000).collect::<Vec<_>>());
        // 1000 items / 16 = 63 leaves -> 4 nodes -> 1 root
        assert_eq!(tree.depth(), 3);
    }
}
