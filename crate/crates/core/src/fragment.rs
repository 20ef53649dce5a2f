//! Fragmentation statistics read off a discrete tree.
//!
//! The components of {H > t} in the continuum correspond exactly to the
//! subtrees rooted at depth ⌊t·c⌋ + 1, where c = c_H · n0^{(α-1)/α} converts
//! a continuum level into a generation count. Every operation here is a pure
//! function of a [`TreeStats`] and a [`LevelMap`].

use crate::error::{Error, Result};
use crate::treesim::TreeStats;
use std::io::Write;

/// Maximum stored entries of a ranked mass sequence; the rest is kept as a
/// remainder mass.
pub const SDOWN_TRUNCATION: usize = 1 << 12;

/// Correspondence between continuum levels/masses and discrete depths/counts.
#[derive(Debug, Clone, Copy)]
pub struct LevelMap {
    pub n0: u32,
    pub alpha: f64,
    pub c_h: f64,
}

impl LevelMap {
    pub fn new(n0: u32, alpha: f64, c_h: f64) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::domain("n0 must be >= 1"));
        }
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::domain(format!("alpha must lie in (1,2), got {alpha}")));
        }
        if !(c_h.is_finite() && c_h > 0.0) {
            return Err(Error::domain(format!("c_h must be > 0, got {c_h}")));
        }
        Ok(LevelMap { n0, alpha, c_h })
    }

    /// Depths per unit level: c_H · n0^{(α-1)/α}.
    pub fn depth_scale(&self) -> f64 {
        self.c_h * (self.n0 as f64).powf((self.alpha - 1.0) / self.alpha)
    }

    /// ⌊t · c_H · n0^{(α-1)/α}⌋.
    pub fn depth_of(&self, t: f64) -> u32 {
        debug_assert!(t >= 0.0);
        (t * self.depth_scale()).floor() as u32
    }

    /// The level represented by generation d: t = d / (c_H n0^{(α-1)/α}).
    pub fn level_of(&self, d: u32) -> f64 {
        d as f64 / self.depth_scale()
    }

    pub fn mass_of(&self, count: u32) -> f64 {
        count as f64 / self.n0 as f64
    }
}

/// An element of S↓: ranked non-increasing masses, truncated with an
/// explicit remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMasses {
    /// Ranked non-increasing; at most [`SDOWN_TRUNCATION`] entries.
    pub head: Vec<f64>,
    /// Total mass of the truncated-away entries.
    pub remainder: f64,
}

impl RankedMasses {
    fn from_sorted_counts(counts: &[u32], map: &LevelMap) -> Self {
        let keep = counts.len().min(SDOWN_TRUNCATION);
        let head = counts[..keep].iter().map(|&c| map.mass_of(c)).collect();
        let remainder: f64 = counts[keep..].iter().map(|&c| map.mass_of(c)).sum();
        RankedMasses { head, remainder }
    }

    pub fn total(&self) -> f64 {
        self.head.iter().sum::<f64>() + self.remainder
    }

    pub fn largest(&self) -> f64 {
        self.head.first().copied().unwrap_or(0.0)
    }
}

/// Ranked fragment masses per level of a grid.
#[derive(Debug, Clone)]
pub struct FragmentationCurve {
    pub levels: Vec<f64>,
    pub masses: Vec<RankedMasses>,
}

/// The fragments at generation-level d: subtree sizes of the vertices at
/// depth d+1, ranked non-increasing. Empty when d is at or above the height.
pub fn fragments_at_level(stats: &TreeStats, d: u32) -> Vec<u32> {
    let mut counts: Vec<u32> = stats
        .vertices_at_depth(d + 1)
        .iter()
        .map(|&v| stats.subtree_size[v as usize])
        .collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
}

/// Ranked masses along a sorted level grid.
pub fn fragmentation_curve(
    stats: &TreeStats,
    map: &LevelMap,
    t_grid: &[f64],
) -> Result<FragmentationCurve> {
    for w in t_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::domain("level grid must be sorted strictly increasing"));
        }
    }
    if let Some(&t0) = t_grid.first() {
        if t0 < 0.0 {
            return Err(Error::domain("levels must be non-negative"));
        }
    }
    let masses = t_grid
        .iter()
        .map(|&t| {
            let counts = fragments_at_level(stats, map.depth_of(t));
            RankedMasses::from_sorted_counts(&counts, map)
        })
        .collect();
    Ok(FragmentationCurve {
        levels: t_grid.to_vec(),
        masses,
    })
}

/// One dislocation of the tagged fragment: the level crossing of one strict
/// ancestor of the tagged vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedEvent {
    /// Generation of the crossed ancestor.
    pub depth: u32,
    /// Level of the event, t = depth / (c_H n0^{(α-1)/α}).
    pub level: f64,
    /// Vertex count of the fragment just below the event.
    pub pre_count: u32,
    /// Child subtree vertex counts, ranked non-increasing.
    pub piece_counts: Vec<u32>,
    /// pre_count / n0.
    pub pre_mass: f64,
    /// piece_counts / n0.
    pub pieces: Vec<f64>,
    /// Mass of the crossed ancestor itself: 1/n0.
    pub dust: f64,
}

/// The tagged fragment's dislocation record along the ancestor chain.
#[derive(Debug, Clone)]
pub struct TaggedPath {
    pub tagged_vertex: u32,
    /// Events from the root crossing down to the parent of the tagged
    /// vertex; pre_count is strictly decreasing.
    pub events: Vec<TaggedEvent>,
}

/// Walk the strict-ancestor chain of `tagged` from the root down, emitting
/// one event per crossing. Conservation Σ pieces + 1 = pre_count holds
/// exactly by construction and is asserted.
pub fn tagged_path(stats: &TreeStats, map: &LevelMap, tagged: u32) -> Result<TaggedPath> {
    if tagged as usize >= stats.total_progeny() {
        return Err(Error::domain(format!(
            "tagged vertex {tagged} out of range (progeny {})",
            stats.total_progeny()
        )));
    }
    let mut chain: Vec<u32> = Vec::with_capacity(stats.depth[tagged as usize] as usize);
    let mut v = tagged;
    while let Some(p) = stats.parent_of(v) {
        chain.push(p);
        v = p;
    }
    chain.reverse();
    let events = chain
        .iter()
        .map(|&a| {
            let pre_count = stats.subtree_size[a as usize];
            let mut piece_counts: Vec<u32> = stats
                .children_of(a)
                .iter()
                .map(|&c| stats.subtree_size[c as usize])
                .collect();
            piece_counts.sort_unstable_by(|x, y| y.cmp(x));
            let pieces_sum: u64 = piece_counts.iter().map(|&c| c as u64).sum();
            assert_eq!(
                pieces_sum + 1,
                pre_count as u64,
                "dislocation conservation violated at vertex {a}"
            );
            let depth = stats.depth[a as usize];
            TaggedEvent {
                depth,
                level: map.level_of(depth),
                pre_count,
                pre_mass: map.mass_of(pre_count),
                pieces: piece_counts.iter().map(|&c| map.mass_of(c)).collect(),
                piece_counts,
                dust: 1.0 / map.n0 as f64,
            }
        })
        .collect();
    Ok(TaggedPath {
        tagged_vertex: tagged,
        events,
    })
}

/// Small-fragment counts at one level.
#[derive(Debug, Clone)]
pub struct SmallFragStats {
    pub t: f64,
    pub eps_grid: Vec<f64>,
    /// N_ε: number of fragments with mass >= ε.
    pub n_eps: Vec<u64>,
    /// M_ε: total mass of fragments with mass <= ε.
    pub m_eps: Vec<f64>,
}

/// N_ε and M_ε over an increasing ε grid, in one pass over the ranked
/// fragment sequence. Masses exactly equal to a threshold count toward both
/// N_ε (>=) and M_ε (<=).
pub fn small_fragment_stats(
    stats: &TreeStats,
    map: &LevelMap,
    t: f64,
    eps_grid: &[f64],
) -> Result<SmallFragStats> {
    for w in eps_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::domain("eps grid must be sorted strictly increasing"));
        }
    }
    if eps_grid.first().map_or(false, |&e| e <= 0.0) {
        return Err(Error::domain("eps thresholds must be positive"));
    }
    let desc = fragments_at_level(stats, map.depth_of(t));
    let total = desc.len();
    // Ascending masses with prefix sums.
    let asc: Vec<f64> = desc.iter().rev().map(|&c| map.mass_of(c)).collect();
    let mut prefix = Vec::with_capacity(total + 1);
    prefix.push(0.0);
    for &m in &asc {
        prefix.push(prefix.last().unwrap() + m);
    }
    let mut n_eps = Vec::with_capacity(eps_grid.len());
    let mut m_eps = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let count_lt = asc.partition_point(|&m| m < eps);
        let count_le = asc.partition_point(|&m| m <= eps);
        n_eps.push((total - count_lt) as u64);
        m_eps.push(prefix[count_le]);
    }
    Ok(SmallFragStats {
        t,
        eps_grid: eps_grid.to_vec(),
        n_eps,
        m_eps,
    })
}

/// Windowed occupation-density estimate of the local time.
#[derive(Debug, Clone)]
pub struct LocalTimeProfile {
    pub t_grid: Vec<f64>,
    pub l_hat: Vec<f64>,
    pub window: u32,
    pub c_l: f64,
}

/// L̂(t) = c_L · c_H · n0^{-1/α} · #{v : depth_of(t) < depth(v) <= depth_of(t)+Δd} / Δd.
pub fn local_time_profile(
    stats: &TreeStats,
    map: &LevelMap,
    t_grid: &[f64],
    window: u32,
    c_l: f64,
) -> Result<LocalTimeProfile> {
    if window < 1 {
        return Err(Error::domain("local-time window must be >= 1 generation"));
    }
    let scale = c_l * map.c_h * (map.n0 as f64).powf(-1.0 / map.alpha);
    let l_hat = t_grid
        .iter()
        .map(|&t| {
            let d = map.depth_of(t);
            let count = stats.deep_count(d + 1) - stats.deep_count(d + window + 1);
            scale * count as f64 / window as f64
        })
        .collect();
    Ok(LocalTimeProfile {
        t_grid: t_grid.to_vec(),
        l_hat,
        window,
        c_l,
    })
}

/// Default window: 5% of a unit level, at least one generation.
pub fn default_window(map: &LevelMap) -> u32 {
    ((0.05 * map.depth_scale()).floor() as u32).max(1)
}

/// Emit a curve as CSV with columns t, rank, mass.
pub fn write_curve_csv<W: Write>(mut w: W, curve: &FragmentationCurve) -> Result<()> {
    writeln!(w, "t,rank,mass")?;
    for (t, ranked) in curve.levels.iter().zip(&curve.masses) {
        for (i, m) in ranked.head.iter().enumerate() {
            writeln!(w, "{t},{},{m}", i + 1)?;
        }
    }
    Ok(())
}

impl TreeStats {
    /// Parent of v, None for the root.
    pub fn parent_of(&self, v: u32) -> Option<u32> {
        let p = self.parent[v as usize];
        (p != crate::treesim::ROOT_SENTINEL).then_some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::treesim::{analyze, sample_tree, OffspringLaw, PlaneTree, TreeSample, ROOT_SENTINEL};

    fn stats(parents: Vec<u32>) -> TreeStats {
        analyze(&PlaneTree::from_parents(parents).unwrap()).unwrap()
    }

    fn map(n0: u32) -> LevelMap {
        LevelMap::new(n0, 1.5, 1.0).unwrap()
    }

    #[test]
    fn fragments_on_hand_trees() {
        let path = stats(vec![ROOT_SENTINEL, 0, 1, 2]);
        assert_eq!(fragments_at_level(&path, 1), vec![2]);
        let star = stats(vec![ROOT_SENTINEL, 0, 0, 0]);
        assert_eq!(fragments_at_level(&star, 0), vec![1, 1, 1]);
        let cherry = stats(vec![ROOT_SENTINEL, 0, 1, 0]);
        assert_eq!(fragments_at_level(&cherry, 0), vec![2, 1]);
        // Beyond the height: empty.
        assert!(fragments_at_level(&path, 10).is_empty());
    }

    #[test]
    fn curve_levels() {
        let cherry = stats(vec![ROOT_SENTINEL, 0, 1, 0]);
        let m = map(4);
        let curve = fragmentation_curve(&cherry, &m, &[0.0, 100.0]).unwrap();
        assert_eq!(curve.masses[0].head, vec![0.5, 0.25]);
        assert!(curve.masses[1].head.is_empty());
        // Unsorted grid rejected.
        assert!(fragmentation_curve(&cherry, &m, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn total_mass_matches_deep_count() {
        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        let m = map(64);
        for i in 0..50u64 {
            let tree = match sample_tree(&law, &mut stream(21, "frag-tot", i), 1 << 14) {
                TreeSample::Complete(t) => t,
                TreeSample::Overflow => continue,
            };
            let s = analyze(&tree).unwrap();
            for d in 0..s.height() {
                let total: f64 = fragments_at_level(&s, d)
                    .iter()
                    .map(|&c| m.mass_of(c))
                    .sum();
                let expect = s.deep_count(d + 1) as f64 / 64.0;
                assert!((total - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tagged_path_on_path_tree() {
        let path = stats(vec![ROOT_SENTINEL, 0, 1, 2]);
        let m = map(4);
        let tp = tagged_path(&path, &m, 3).unwrap();
        assert_eq!(tp.events.len(), 3);
        for (i, e) in tp.events.iter().enumerate() {
            assert_eq!(e.piece_counts.len(), 1, "every event has one piece");
            assert_eq!(e.pre_count as usize, 4 - i);
            assert_eq!(e.dust, 0.25);
        }
        // pre_mass strictly decreasing in steps of 1/n0.
        for w in tp.events.windows(2) {
            assert!((w[0].pre_mass - w[1].pre_mass - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn tagged_path_on_star_and_cherry() {
        let star = stats(vec![ROOT_SENTINEL, 0, 0, 0]);
        let m = map(4);
        let tp = tagged_path(&star, &m, 2).unwrap();
        assert_eq!(tp.events.len(), 1);
        assert_eq!(tp.events[0].pieces, vec![0.25, 0.25, 0.25]);
        assert_eq!(tp.events[0].dust, 0.25);

        let cherry = stats(vec![ROOT_SENTINEL, 0, 1, 0]);
        let tp = tagged_path(&cherry, &m, 2).unwrap();
        assert_eq!(tp.events.len(), 2);
        assert_eq!(tp.events[0].depth, 0);
        assert_eq!(tp.events[0].pieces, vec![0.5, 0.25]);
        assert_eq!(tp.events[1].depth, 1);
        assert_eq!(tp.events[1].pieces, vec![0.25]);
    }

    #[test]
    fn tagged_conservation_is_exact_on_random_trees() {
        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        let m = map(128);
        for i in 0..100u64 {
            let tree = match sample_tree(&law, &mut stream(22, "frag-cons", i), 1 << 12) {
                TreeSample::Complete(t) => t,
                TreeSample::Overflow => continue,
            };
            let s = analyze(&tree).unwrap();
            let tagged = (i as usize % s.total_progeny()) as u32;
            let tp = tagged_path(&s, &m, tagged).unwrap();
            assert_eq!(tp.events.len() as u32, s.depth[tagged as usize]);
            for e in &tp.events {
                let sum: u64 = e.piece_counts.iter().map(|&c| c as u64).sum();
                assert_eq!(sum + 1, e.pre_count as u64);
            }
        }
    }

    #[test]
    fn small_fragments_on_star() {
        let star = stats(vec![ROOT_SENTINEL, 0, 0, 0]);
        let m = map(4);
        // Level below the first generation: three leaf fragments of mass 1/4.
        let s = small_fragment_stats(&star, &m, 0.0, &[0.5 / 4.0]).unwrap();
        assert_eq!(s.n_eps, vec![3]);
        assert_eq!(s.m_eps, vec![0.0]);
        // Threshold above the largest fragment.
        let s = small_fragment_stats(&star, &m, 0.0, &[0.9]).unwrap();
        assert_eq!(s.n_eps, vec![0]);
        assert!((s.m_eps[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn small_fragment_boundary_counts_both_sides() {
        let cherry = stats(vec![ROOT_SENTINEL, 0, 1, 0]);
        let m = map(4);
        // Fragments at level 0: masses 0.5 and 0.25. ε = 0.25 is inclusive
        // on both N and M.
        let s = small_fragment_stats(&cherry, &m, 0.0, &[0.25]).unwrap();
        assert_eq!(s.n_eps, vec![2]);
        assert!((s.m_eps[0] - 0.25).abs() < 1e-12);
        // Count partition: N_ε + #(mass < ε) = total.
        let lt = 0;
        assert_eq!(s.n_eps[0] as usize + lt, 2);
    }

    #[test]
    fn monotonicity_of_n_and_m() {
        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        let m = map(256);
        let grid = [0.002, 0.01, 0.05, 0.2, 1.0];
        for i in 0..60u64 {
            let tree = match sample_tree(&law, &mut stream(23, "frag-mono", i), 1 << 13) {
                TreeSample::Complete(t) => t,
                TreeSample::Overflow => continue,
            };
            let s = analyze(&tree).unwrap();
            let out = small_fragment_stats(&s, &m, 0.05, &grid).unwrap();
            for w in out.n_eps.windows(2) {
                assert!(w[0] >= w[1]);
            }
            for w in out.m_eps.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn local_time_profile_basics() {
        let path = stats(vec![ROOT_SENTINEL, 0, 1, 2]);
        let m = map(4);
        // Beyond the height: zero.
        let p = local_time_profile(&path, &m, &[100.0], 1, 1.0).unwrap();
        assert_eq!(p.l_hat[0], 0.0);
        // Flat histogram: doubling the window leaves the estimate unchanged.
        let p1 = local_time_profile(&path, &m, &[0.0], 1, 1.0).unwrap();
        let p2 = local_time_profile(&path, &m, &[0.0], 2, 1.0).unwrap();
        assert!((p1.l_hat[0] - p2.l_hat[0]).abs() < 1e-12);
        assert!(local_time_profile(&path, &m, &[0.0], 0, 1.0).is_err());
    }

    #[test]
    fn fragments_match_brute_force_components() {
        // Union-find oracle over the adjacency restricted to {depth > d}.
        struct Dsu(Vec<u32>);
        impl Dsu {
            fn find(&mut self, x: u32) -> u32 {
                if self.0[x as usize] != x {
                    let r = self.find(self.0[x as usize]);
                    self.0[x as usize] = r;
                }
                self.0[x as usize]
            }
            fn union(&mut self, a: u32, b: u32) {
                let (ra, rb) = (self.find(a), self.find(b));
                if ra != rb {
                    self.0[ra as usize] = rb;
                }
            }
        }

        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        let mut checked = 0;
        for i in 0..400u64 {
            let tree = match sample_tree(&law, &mut stream(24, "frag-bf", i), 201) {
                TreeSample::Complete(t) => t,
                TreeSample::Overflow => continue,
            };
            if tree.total_progeny() > 200 {
                continue;
            }
            let s = analyze(&tree).unwrap();
            for d in 0..=s.height() {
                let n = s.total_progeny() as u32;
                let mut dsu = Dsu((0..n).collect());
                for v in 1..n {
                    let p = tree.parent[v as usize];
                    if s.depth[v as usize] > d && s.depth[p as usize] > d {
                        dsu.union(v, p);
                    }
                }
                let mut sizes = std::collections::HashMap::new();
                for v in 0..n {
                    if s.depth[v as usize] > d {
                        *sizes.entry(dsu.find(v)).or_insert(0u32) += 1;
                    }
                }
                let mut brute: Vec<u32> = sizes.into_values().collect();
                brute.sort_unstable_by(|a, b| b.cmp(a));
                assert_eq!(fragments_at_level(&s, d), brute, "tree {i} level {d}");
            }
            checked += 1;
        }
        assert!(checked > 50, "too few small trees checked: {checked}");
    }

    #[test]
    fn fragments_nest_across_levels() {
        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        for i in 0..200u64 {
            let tree = match sample_tree(&law, &mut stream(25, "frag-nest", i), 201) {
                TreeSample::Complete(t) => t,
                TreeSample::Overflow => continue,
            };
            let s = analyze(&tree).unwrap();
            for d in 0..s.height().saturating_sub(1) {
                let coarse: Vec<(u32, u32)> = s
                    .vertices_at_depth(d + 1)
                    .iter()
                    .map(|&v| (v, s.subtree_size[v as usize]))
                    .collect();
                for &u in s.vertices_at_depth(d + 2) {
                    // Subtrees are contiguous preorder ranges, so membership
                    // is an interval test; exactly one parent fragment.
                    let homes = coarse
                        .iter()
                        .filter(|&&(v, sz)| u >= v && u < v + sz)
                        .count();
                    assert_eq!(homes, 1);
                    let (v, sz) = *coarse.iter().find(|&&(v, sz)| u >= v && u < v + sz).unwrap();
                    assert!(s.subtree_size[u as usize] <= sz, "child fragment exceeds parent {v}");
                }
            }
        }
    }
}
