//! Newman-Girvan modularity and the two-phase Louvain heuristic:
//! greedy local moves, then community aggregation, iterated.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Assignment of nodes to dense, canonically renumbered community ids
/// (ascending by smallest member node).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    community_of: Vec<usize>,
    communities: Vec<Vec<usize>>,
}

impl Partition {
    /// Canonicalize an arbitrary labeling.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut community_of = Vec::with_capacity(assignment.len());
        let mut communities: Vec<Vec<usize>> = Vec::new();
        for (node, &label) in assignment.iter().enumerate() {
            let id = *remap.entry(label).or_insert_with(|| {
                communities.push(Vec::new());
                communities.len() - 1
            });
            community_of.push(id);
            communities[id].push(node);
        }
        Self {
            community_of,
            communities,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_assignment(&(0..n).collect::<Vec<_>>())
    }

    pub fn n_nodes(&self) -> usize {
        self.community_of.len()
    }

    pub fn n_communities(&self) -> usize {
        self.communities.len()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.community_of[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.community_of
    }

    pub fn members(&self, community: usize) -> &[usize] {
        &self.communities[community]
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    Input,
    Shuffle { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LouvainConfig {
    pub max_passes: usize,
    /// minimum strictly-exceeded modularity gain to accept a move
    pub min_gain: f64,
    pub node_order: NodeOrder,
    /// total attempts: the first uses `node_order`, later ones shuffled node
    /// orders with deterministically derived seeds; best final Q wins.
    /// Louvain is greedy and order-dependent, so extra attempts help escape
    /// local optima on weakly structured graphs.
    #[serde(default = "LouvainConfig::default_restarts")]
    pub restarts: usize,
}

impl LouvainConfig {
    fn default_restarts() -> usize {
        1
    }
}

impl Default for LouvainConfig {
    fn default() -> Self {
        Self {
            max_passes: 50,
            min_gain: 0.0,
            node_order: NodeOrder::Input,
            restarts: 1,
        }
    }
}

/// Working graph for one Louvain level. Self-loops carry twice the internal
/// weight of the collapsed community, so total weight (and Q) is invariant
/// under aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    /// weighted degree including the self-loop contribution
    k: Vec<f64>,
    two_m: f64,
}

impl LevelGraph {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n_nodes();
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in g.edges() {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let self_loop = vec![0.0; n];
        let k: Vec<f64> = (0..n).map(|i| g.weighted_degree(i)).collect();
        let two_m = k.iter().sum();
        Self {
            adj,
            self_loop,
            k,
            two_m,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn self_loop(&self, node: usize) -> f64 {
        self.self_loop[node]
    }

    pub fn two_m(&self) -> f64 {
        self.two_m
    }

    pub fn inter_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, neigh) in self.adj.iter().enumerate() {
            for &(j, w) in neigh {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    /// Exact Q for an assignment, by per-community sums in fixed order.
    pub fn modularity_of(&self, assignment: &[usize]) -> f64 {
        let n_comms = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut internal = vec![0.0f64; n_comms]; // double-sum convention
        let mut total = vec![0.0f64; n_comms];
        for i in 0..self.n_nodes() {
            let c = assignment[i];
            total[c] += self.k[i];
            internal[c] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                if assignment[j] == c {
                    internal[c] += w;
                }
            }
        }
        let two_m = self.two_m;
        internal
            .iter()
            .zip(&total)
            .map(|(&inn, &tot)| inn / two_m - (tot / two_m) * (tot / two_m))
            .sum()
    }
}

/// Newman-Girvan modularity of a partition.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    if g.n_edges() == 0 {
        return Err(Error::EdgelessGraph);
    }
    Ok(LevelGraph::from_graph(g).modularity_of(p.assignment()))
}

struct MoveState {
    assignment: Vec<usize>,
    sigma_tot: Vec<f64>,
    sigma_in: Vec<f64>,
}

impl MoveState {
    fn new(lg: &LevelGraph, assignment: Vec<usize>) -> Self {
        let n_comms = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut sigma_tot = vec![0.0; n_comms];
        let mut sigma_in = vec![0.0; n_comms];
        for i in 0..lg.n_nodes() {
            let c = assignment[i];
            sigma_tot[c] += lg.k[i];
            sigma_in[c] += lg.self_loop[i];
            for &(j, w) in &lg.adj[i] {
                if assignment[j] == c {
                    sigma_in[c] += w;
                }
            }
        }
        Self {
            assignment,
            sigma_tot,
            sigma_in,
        }
    }

    fn q(&self, two_m: f64) -> f64 {
        self.sigma_in
            .iter()
            .zip(&self.sigma_tot)
            .map(|(&inn, &tot)| inn / two_m - (tot / two_m) * (tot / two_m))
            .sum()
    }
}

/// One sweep-until-fixpoint local pass. Each node is repeatedly offered the
/// neighboring community with maximal positive gain; ties break toward the
/// smallest community id. Returns the number of accepted moves.
fn local_pass(
    lg: &LevelGraph,
    state: &mut MoveState,
    cfg: &LouvainConfig,
    q_trace: &mut Vec<f64>,
) -> usize {
    let n = lg.n_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    if let NodeOrder::Shuffle { seed } = cfg.node_order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let two_m = lg.two_m;
    let mut total_moved = 0usize;
    let mut sweeps = 0usize;
    loop {
        let mut moved_this_sweep = 0usize;
        for &i in &order {
            if lg.adj[i].is_empty() {
                continue;
            }
            let old = state.assignment[i];
            // weight from i into each neighboring community (current labels)
            let mut neighbor_w: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in &lg.adj[i] {
                *neighbor_w.entry(state.assignment[j]).or_insert(0.0) += w;
            }
            let k_i = lg.k[i];
            let w_i_old = neighbor_w.get(&old).copied().unwrap_or(0.0);
            // remove i from its community
            state.sigma_tot[old] -= k_i;
            state.sigma_in[old] -= 2.0 * w_i_old + lg.self_loop[i];
            let gain = |w_ic: f64, sigma_tot_c: f64| w_ic - sigma_tot_c * k_i / two_m;
            let gain_old = gain(w_i_old, state.sigma_tot[old]);
            let mut best_c = old;
            let mut best_gain = gain_old;
            for (&c, &w_ic) in &neighbor_w {
                if c == old {
                    continue;
                }
                let g = gain(w_ic, state.sigma_tot[c]);
                // strict > plus ascending iteration = smallest-id tie-break
                if g > best_gain && g - gain_old > cfg.min_gain {
                    best_gain = g;
                    best_c = c;
                }
            }
            // reinsert
            let w_i_best = neighbor_w.get(&best_c).copied().unwrap_or(0.0);
            state.sigma_tot[best_c] += k_i;
            state.sigma_in[best_c] += 2.0 * w_i_best + lg.self_loop[i];
            state.assignment[i] = best_c;
            if best_c != old {
                moved_this_sweep += 1;
                q_trace.push(state.q(two_m));
            }
        }
        total_moved += moved_this_sweep;
        sweeps += 1;
        if moved_this_sweep == 0 || sweeps > 1000 {
            break;
        }
    }
    total_moved
}

/// Public single local pass over a graph-level partition.
pub fn louvain_local_pass(
    g: &Graph,
    p: &Partition,
    cfg: &LouvainConfig,
) -> (Partition, usize) {
    let lg = LevelGraph::from_graph(g);
    let mut state = MoveState::new(&lg, p.assignment().to_vec());
    let mut trace = Vec::new();
    let moved = local_pass(&lg, &mut state, cfg, &mut trace);
    (Partition::from_assignment(&state.assignment), moved)
}

/// Collapse each community to a supernode. Inter-community weights sum;
/// self-loops carry twice the internal weight.
pub fn aggregate(lg: &LevelGraph, p: &Partition) -> LevelGraph {
    let n_comms = p.n_communities();
    let mut self_loop = vec![0.0f64; n_comms];
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..lg.n_nodes() {
        let ci = p.community_of(i);
        self_loop[ci] += lg.self_loop[i];
        for &(j, w) in &lg.adj[i] {
            let cj = p.community_of(j);
            if ci == cj {
                // each internal edge visited from both endpoints: sums to 2w
                self_loop[ci] += w;
            } else if ci < cj {
                *weights.entry((ci, cj)).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); n_comms];
    for (&(a, b), &w) in &weights {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let k: Vec<f64> = (0..n_comms)
        .map(|c| self_loop[c] + adj[c].iter().map(|&(_, w)| w).sum::<f64>())
        .collect();
    LevelGraph {
        adj,
        self_loop,
        k,
        two_m: lg.two_m,
    }
}

#[derive(Debug, Clone)]
pub struct LouvainResult {
    /// finest-level labeling of the original nodes
    pub partition: Partition,
    /// coarser partitions of the original nodes, one per completed level
    pub levels: Vec<Partition>,
    /// Q after every accepted move, across all levels
    pub q_trace: Vec<f64>,
    /// isolated nodes, each its own singleton community
    pub unassigned: Vec<usize>,
}

impl LouvainResult {
    pub fn is_unassigned(&self, node: usize) -> bool {
        self.unassigned.binary_search(&node).is_ok()
    }
}

/// Full Louvain: alternate local passes and aggregation until a pass moves
/// nothing or `max_passes` is reached. With `restarts > 1`, reruns under
/// shuffled node orders and keeps the attempt with the best final Q.
pub fn louvain(g: &Graph, cfg: &LouvainConfig) -> Result<LouvainResult> {
    let attempts = cfg.restarts.max(1);
    let base_seed = match cfg.node_order {
        NodeOrder::Shuffle { seed } => seed,
        NodeOrder::Input => 0,
    };
    let mut best: Option<(f64, LouvainResult)> = None;
    for attempt in 0..attempts {
        let attempt_cfg = if attempt == 0 {
            cfg.clone()
        } else {
            LouvainConfig {
                node_order: NodeOrder::Shuffle {
                    seed: base_seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                },
                ..cfg.clone()
            }
        };
        let result = louvain_once(g, &attempt_cfg)?;
        let q = modularity(g, &result.partition)?;
        if best.as_ref().map_or(true, |(best_q, _)| q > *best_q) {
            best = Some((q, result));
        }
    }
    Ok(best.expect("at least one attempt").1)
}

fn louvain_once(g: &Graph, cfg: &LouvainConfig) -> Result<LouvainResult> {
    if g.n_edges() == 0 {
        return Err(Error::EdgelessGraph);
    }
    let n = g.n_nodes();
    let unassigned: Vec<usize> = (0..n).filter(|&i| g.is_isolated(i)).collect();

    let lg0 = LevelGraph::from_graph(g);
    // current community of each original node (dense labels)
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut levels: Vec<Partition> = Vec::new();
    let mut q_trace = Vec::new();

    // Each round re-runs the local pass over *original* nodes starting from
    // the current partition before re-aggregating. Aggregation freezes nodes
    // into supernodes, so without this refinement an improving single-node
    // move can survive in the final partition.
    for round in 0..cfg.max_passes {
        let mut state = MoveState::new(&lg0, assignment.clone());
        let moved_fine = local_pass(&lg0, &mut state, cfg, &mut q_trace);
        if moved_fine == 0 && round > 0 {
            break;
        }
        let p0 = Partition::from_assignment(&state.assignment);
        if moved_fine == 0 && p0.n_communities() == n {
            // nothing improves on singletons at all
            break;
        }

        levels = vec![p0.clone()];
        let mut node_to_super = p0.assignment().to_vec();
        let mut lg = aggregate(&lg0, &p0);
        let mut moved_coarse = 0usize;
        for _pass in 0..cfg.max_passes {
            let mut state = MoveState::new(&lg, (0..lg.n_nodes()).collect());
            let moved = local_pass(&lg, &mut state, cfg, &mut q_trace);
            if moved == 0 {
                break;
            }
            moved_coarse += moved;
            let level_partition = Partition::from_assignment(&state.assignment);
            // project back onto original nodes
            let projected: Vec<usize> = node_to_super
                .iter()
                .map(|&s| level_partition.community_of(s))
                .collect();
            let projected = Partition::from_assignment(&projected);
            node_to_super = projected.assignment().to_vec();
            levels.push(projected);
            lg = aggregate(&lg, &level_partition);
        }
        assignment = node_to_super;
        if moved_fine == 0 && moved_coarse == 0 {
            break;
        }
    }

    Ok(LouvainResult {
        partition: Partition::from_assignment(&assignment),
        levels,
        q_trace,
        unassigned,
    })
}
