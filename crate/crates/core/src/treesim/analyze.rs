//! Single-pass structural analysis of a plane tree.

use super::sampler::{validate_parents, PlaneTree};
use crate::error::Result;

/// Per-vertex structure derived from the parent array.
///
/// All index vectors follow the tree's preorder numbering, so the subtree of
/// vertex `v` is exactly the index range `v .. v + subtree_size[v]`.
#[derive(Debug, Clone)]
pub struct TreeStats {
    /// Parent pointers, root marked by [`ROOT_SENTINEL`].
    pub parent: Vec<u32>,
    /// Generation count per vertex; root has depth 0.
    pub depth: Vec<u32>,
    /// Descendant count including self.
    pub subtree_size: Vec<u32>,
    /// CSR offsets into `child_list`: children of v are
    /// `child_list[child_start[v] .. child_start[v+1]]`, in preorder.
    pub child_start: Vec<u32>,
    pub child_list: Vec<u32>,
    /// CSR offsets into `depth_vertices`: vertices at depth d are
    /// `depth_vertices[depth_start[d] .. depth_start[d+1]]`, in preorder.
    pub depth_start: Vec<u32>,
    pub depth_vertices: Vec<u32>,
}

impl TreeStats {
    pub fn total_progeny(&self) -> usize {
        self.depth.len()
    }

    /// Largest depth present.
    pub fn height(&self) -> u32 {
        self.depth_start.len() as u32 - 2
    }

    pub fn children_of(&self, v: u32) -> &[u32] {
        let a = self.child_start[v as usize] as usize;
        let b = self.child_start[v as usize + 1] as usize;
        &self.child_list[a..b]
    }

    pub fn vertices_at_depth(&self, d: u32) -> &[u32] {
        if d as usize + 1 >= self.depth_start.len() {
            return &[];
        }
        let a = self.depth_start[d as usize] as usize;
        let b = self.depth_start[d as usize + 1] as usize;
        &self.depth_vertices[a..b]
    }

    /// #{v : depth(v) = d}.
    pub fn depth_count(&self, d: u32) -> usize {
        self.vertices_at_depth(d).len()
    }

    /// #{v : depth(v) >= d}.
    pub fn deep_count(&self, d: u32) -> usize {
        if d == 0 {
            return self.total_progeny();
        }
        if d as usize + 1 >= self.depth_start.len() {
            return 0;
        }
        self.total_progeny() - self.depth_start[d as usize] as usize
    }

    /// Depth histogram as counts per depth, 0..=height.
    pub fn depth_histogram(&self) -> Vec<usize> {
        (0..=self.height()).map(|d| self.depth_count(d)).collect()
    }
}

/// Compute depths, subtree sizes, children ranges and the depth index in
/// O(T). Fails on a malformed parent array.
pub fn analyze(tree: &PlaneTree) -> Result<TreeStats> {
    validate_parents(&tree.parent)?;
    let n = tree.parent.len();

    let mut depth = vec![0u32; n];
    let mut max_depth = 0u32;
    for v in 1..n {
        let d = depth[tree.parent[v] as usize] + 1;
        depth[v] = d;
        max_depth = max_depth.max(d);
    }

    let mut subtree_size = vec![1u32; n];
    for v in (1..n).rev() {
        subtree_size[tree.parent[v] as usize] += subtree_size[v];
    }

    // Children CSR by counting sort on the parent pointer; preorder scan
    // keeps each child list sorted.
    let mut child_start = vec![0u32; n + 1];
    for v in 1..n {
        child_start[tree.parent[v] as usize + 1] += 1;
    }
    for i in 0..n {
        child_start[i + 1] += child_start[i];
    }
    let mut cursor = child_start.clone();
    let mut child_list = vec![0u32; n - 1];
    for v in 1..n {
        let p = tree.parent[v] as usize;
        child_list[cursor[p] as usize] = v as u32;
        cursor[p] += 1;
    }

    // Depth CSR, same counting-sort idea.
    let mut depth_start = vec![0u32; max_depth as usize + 2];
    for &d in &depth {
        depth_start[d as usize + 1] += 1;
    }
    for i in 0..max_depth as usize + 1 {
        depth_start[i + 1] += depth_start[i];
    }
    let mut cursor = depth_start.clone();
    let mut depth_vertices = vec![0u32; n];
    for (v, &d) in depth.iter().enumerate() {
        depth_vertices[cursor[d as usize] as usize] = v as u32;
        cursor[d as usize] += 1;
    }

    Ok(TreeStats {
        parent: tree.parent.clone(),
        depth,
        subtree_size,
        child_start,
        child_list,
        depth_start,
        depth_vertices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::treesim::{sample_tree, OffspringLaw, TreeSample, ROOT_SENTINEL};

    fn stats_from_parents(parent: Vec<u32>) -> Result<TreeStats> {
        analyze(&PlaneTree::from_parents(parent)?)
    }

    fn path4() -> TreeStats {
        stats_from_parents(vec![ROOT_SENTINEL, 0, 1, 2]).unwrap()
    }

    fn star3() -> TreeStats {
        stats_from_parents(vec![ROOT_SENTINEL, 0, 0, 0]).unwrap()
    }

    /// root -> {a, b}, a -> {c}: preorder [root, a, c, b].
    fn cherry() -> TreeStats {
        stats_from_parents(vec![ROOT_SENTINEL, 0, 1, 0]).unwrap()
    }

    #[test]
    fn path_depths_and_sizes() {
        let s = path4();
        assert_eq!(s.depth, vec![0, 1, 2, 3]);
        assert_eq!(s.subtree_size, vec![4, 3, 2, 1]);
        assert_eq!(s.height(), 3);
    }

    #[test]
    fn star_histogram() {
        let s = star3();
        assert_eq!(s.depth_histogram(), vec![1, 3]);
        assert_eq!(s.children_of(0), &[1, 2, 3]);
    }

    #[test]
    fn cherry_subtrees() {
        let s = cherry();
        assert_eq!(s.subtree_size[1], 2); // a
        assert_eq!(s.subtree_size[3], 1); // b
        assert_eq!(s.children_of(0), &[1, 3]);
        assert_eq!(s.children_of(1), &[2]);
    }

    #[test]
    fn counting_identity_on_random_trees() {
        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        for i in 0..300u64 {
            let mut rng = stream(9, "analyze-ident", i);
            let tree = match sample_tree(&law, &mut rng, 1 << 14) {
                TreeSample::Complete(t) => t,
                TreeSample::Overflow => continue,
            };
            let s = analyze(&tree).unwrap();
            assert_eq!(s.subtree_size[0] as usize, s.total_progeny());
            for d in 0..s.height() {
                let sum: u64 = s
                    .vertices_at_depth(d + 1)
                    .iter()
                    .map(|&v| s.subtree_size[v as usize] as u64)
                    .sum();
                assert_eq!(sum as usize, s.deep_count(d + 1), "tree {i}, depth {d}");
            }
        }
    }

    #[test]
    fn malformed_parent_arrays_error() {
        assert!(stats_from_parents(vec![0, 0]).is_err());
        assert!(stats_from_parents(vec![ROOT_SENTINEL, 3]).is_err());
    }
}
