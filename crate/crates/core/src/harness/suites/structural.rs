//! Exact structural invariants on simulated trees: dislocation
//! conservation, the level counting identity, and agreement of the
//! subtree-based fragments with brute-force connected components.

use crate::error::Result;
use crate::fragment::fragments_at_level;
use crate::harness::config::RunConfig;
use crate::harness::report::{inputs, CaseRecord};
use crate::rng::stream;
use crate::treesim::{analyze, sample_tree, OffspringLaw, TreeSample};
use std::collections::HashMap;

struct Dsu(Vec<u32>);

impl Dsu {
    fn find(&mut self, x: u32) -> u32 {
        let mut r = x;
        while self.0[r as usize] != r {
            self.0[r as usize] = self.0[self.0[r as usize] as usize];
            r = self.0[r as usize];
        }
        r
    }
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra as usize] = rb;
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Vec<CaseRecord>> {
    let law = OffspringLaw::new(cfg.alpha, cfg.tail_cut)?;

    let mut conservation_violations = 0u64;
    let mut counting_violations = 0u64;
    let mut trees_checked = 0u64;
    for i in 0..400u64 {
        let tree = match sample_tree(&law, &mut stream(cfg.seed, "structural", i), 1 << 14) {
            TreeSample::Complete(t) => t,
            TreeSample::Overflow => continue,
        };
        let s = analyze(&tree)?;
        trees_checked += 1;
        for v in 0..s.total_progeny() as u32 {
            let child_sum: u64 = s
                .children_of(v)
                .iter()
                .map(|&c| s.subtree_size[c as usize] as u64)
                .sum();
            if child_sum + 1 != s.subtree_size[v as usize] as u64 {
                conservation_violations += 1;
            }
        }
        for d in 0..s.height() {
            let sum: u64 = s
                .vertices_at_depth(d + 1)
                .iter()
                .map(|&v| s.subtree_size[v as usize] as u64)
                .sum();
            if sum != s.deep_count(d + 1) as u64 {
                counting_violations += 1;
            }
        }
    }

    // Brute-force component oracle on small trees.
    let mut component_mismatches = 0u64;
    let mut small_checked = 0u64;
    let mut i = 0u64;
    while small_checked < 300 && i < 5_000 {
        let idx = i;
        i += 1;
        let tree = match sample_tree(&law, &mut stream(cfg.seed, "structural-small", idx), 201) {
            TreeSample::Complete(t) => t,
            TreeSample::Overflow => continue,
        };
        if tree.total_progeny() > 200 {
            continue;
        }
        let s = analyze(&tree)?;
        small_checked += 1;
        let n = s.total_progeny() as u32;
        for d in 0..=s.height() {
            let mut dsu = Dsu((0..n).collect());
            for v in 1..n {
                let p = tree.parent[v as usize];
                if s.depth[v as usize] > d && s.depth[p as usize] > d {
                    dsu.union(v, p);
                }
            }
            let mut sizes: HashMap<u32, u32> = HashMap::new();
            for v in 0..n {
                if s.depth[v as usize] > d {
                    *sizes.entry(dsu.find(v)).or_insert(0) += 1;
                }
            }
            let mut brute: Vec<u32> = sizes.into_values().collect();
            brute.sort_unstable_by(|a, b| b.cmp(a));
            if fragments_at_level(&s, d) != brute {
                component_mismatches += 1;
            }
        }
    }

    Ok(vec![
        CaseRecord::new(
            "structural",
            "dislocation-conservation",
            inputs(&[("trees", trees_checked as f64)]),
            conservation_violations as f64,
            0.0,
            0.0,
            0.0,
        ),
        CaseRecord::new(
            "structural",
            "level-counting-identity",
            inputs(&[("trees", trees_checked as f64)]),
            counting_violations as f64,
            0.0,
            0.0,
            0.0,
        ),
        CaseRecord::new(
            "structural",
            "fragments-vs-brute-force",
            inputs(&[("trees", small_checked as f64)]),
            component_mismatches as f64,
            0.0,
            0.0,
            0.0,
        ),
    ])
}
