//! Depth-first tree generation via the Łukasiewicz walk.

use super::offspring::OffspringLaw;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parent-pointer value of the root.
pub const ROOT_SENTINEL: u32 = u32::MAX;

/// A rooted plane tree in depth-first (preorder) vertex order.
///
/// `parent[0] == ROOT_SENTINEL` and `parent[i] < i` for every other vertex;
/// each subtree occupies a contiguous index range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneTree {
    pub parent: Vec<u32>,
}

impl PlaneTree {
    pub fn total_progeny(&self) -> usize {
        self.parent.len()
    }

    /// Build from a parent array, validating the preorder encoding.
    pub fn from_parents(parent: Vec<u32>) -> Result<Self> {
        validate_parents(&parent)?;
        Ok(PlaneTree { parent })
    }
}

/// Checks that `parent` encodes a single rooted plane tree in preorder
/// consistent with depth-first generation.
pub(super) fn validate_parents(parent: &[u32]) -> Result<()> {
    if parent.is_empty() {
        return Err(Error::Structure("empty parent array".into()));
    }
    if parent.len() > ROOT_SENTINEL as usize {
        return Err(Error::Structure("tree too large for u32 indexing".into()));
    }
    if parent[0] != ROOT_SENTINEL {
        return Err(Error::Structure(format!(
            "vertex 0 must be the root (sentinel {ROOT_SENTINEL}), got {}",
            parent[0]
        )));
    }
    // In preorder, vertex i's parent must be on the current ancestor stack;
    // everything popped on the way is a completed subtree.
    let mut spine: Vec<u32> = vec![0];
    for (i, &p) in parent.iter().enumerate().skip(1) {
        if p as usize >= i {
            return Err(Error::Structure(format!(
                "vertex {i} has parent {p}, which does not precede it"
            )));
        }
        while let Some(&top) = spine.last() {
            if top == p {
                break;
            }
            spine.pop();
        }
        if spine.is_empty() {
            return Err(Error::Structure(format!(
                "vertex {i} has parent {p} outside its ancestor chain"
            )));
        }
        spine.push(i as u32);
    }
    Ok(())
}

/// Outcome of unconditioned generation under a progeny cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeSample {
    Complete(PlaneTree),
    /// Total progeny would have exceeded the cap.
    Overflow,
}

/// Generate one unconditioned tree depth-first. Returns `Overflow` as soon
/// as the total progeny would exceed `cap`. Deterministic given the stream.
pub fn sample_tree<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R, cap: usize) -> TreeSample {
    debug_assert!(cap >= 1);
    let mut parent: Vec<u32> = Vec::with_capacity(16);
    parent.push(ROOT_SENTINEL);
    // (vertex, children still to create)
    let mut stack: Vec<(u32, u64)> = Vec::with_capacity(16);
    let k0 = law.sample(rng);
    if k0 > 0 {
        stack.push((0, k0));
    }
    while let Some(top) = stack.last_mut() {
        if top.1 == 0 {
            stack.pop();
            continue;
        }
        top.1 -= 1;
        let v = top.0;
        if parent.len() >= cap {
            return TreeSample::Overflow;
        }
        let u = parent.len() as u32;
        parent.push(v);
        let k = law.sample(rng);
        if k > 0 {
            stack.push((u, k));
        }
    }
    TreeSample::Complete(PlaneTree { parent })
}

/// Total progeny of one tree without building it: the Łukasiewicz walk with
/// only a pending-vertex counter. Returns `(progeny, overflowed)`; when
/// overflowed, `progeny == cap`.
pub fn sample_progeny<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R, cap: u64) -> (u64, bool) {
    debug_assert!(cap >= 1);
    let mut pending = 1u64;
    let mut total = 0u64;
    while pending > 0 {
        if total >= cap {
            return (cap, true);
        }
        total += 1;
        pending += law.sample(rng);
        pending -= 1;
    }
    (total, false)
}

/// A size-window conditioned tree together with rejection diagnostics.
#[derive(Debug, Clone)]
pub struct ConditionedTree {
    pub tree: PlaneTree,
    pub attempts: u64,
}

/// Rejection-sample until total progeny lands in [m, m(1+theta)].
///
/// Attempts run as bare walks; the accepted attempt is replayed from the
/// saved stream state to materialize the tree with identical draws.
pub fn sample_tree_conditioned(
    law: &OffspringLaw,
    m: usize,
    theta: f64,
    rng: &mut ChaCha8Rng,
    max_attempts: u64,
) -> Result<ConditionedTree> {
    if m < 2 {
        return Err(Error::domain(format!("conditioned size must be >= 2, got {m}")));
    }
    if !(theta > 0.0 && theta <= 0.1) {
        return Err(Error::domain(format!(
            "size window theta must lie in (0, 0.1], got {theta}"
        )));
    }
    let hi = (m as f64 * (1.0 + theta)).floor() as u64;
    if hi < m as u64 {
        return Err(Error::domain("size window is empty"));
    }
    for attempt in 1..=max_attempts {
        let saved = rng.clone();
        let (t, overflow) = sample_progeny(law, rng, hi + 1);
        if !overflow && t >= m as u64 {
            let mut replay = saved;
            match sample_tree(law, &mut replay, hi as usize + 1) {
                TreeSample::Complete(tree) => {
                    debug_assert_eq!(tree.total_progeny() as u64, t);
                    *rng = replay;
                    return Ok(ConditionedTree { tree, attempts: attempt });
                }
                TreeSample::Overflow => unreachable!("replay cannot overflow"),
            }
        }
    }
    Err(Error::Sampling(format!(
        "no tree with progeny in [{m}, {hi}] after {max_attempts} attempts \
         (acceptance rate below {:.2e})",
        1.0 / max_attempts as f64
    )))
}
