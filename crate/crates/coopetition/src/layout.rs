//! Force-directed layout: linear attraction along edges, degree-scaled
//! inverse-distance repulsion between all node pairs, optional gravity.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

const COINCIDENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Fa2Params {
    pub k_repulsion: f64,
    pub gravity: f64,
    /// exponent applied to edge weights in the attraction term
    pub edge_weight_influence: f64,
    pub iterations: usize,
    /// initial step scale
    pub speed: f64,
    /// convergence threshold on max per-node displacement
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for Fa2Params {
    fn default() -> Self {
        Self {
            k_repulsion: 1.0,
            gravity: 0.0,
            edge_weight_influence: 1.0,
            iterations: 1000,
            speed: 0.1,
            tolerance: 1e-5,
            seed: 0,
        }
    }
}

impl Fa2Params {
    pub fn validate(&self) -> Result<()> {
        if self.k_repulsion <= 0.0 {
            return Err(Error::Config("k_repulsion must be > 0".into()));
        }
        if self.gravity < 0.0 {
            return Err(Error::Config("gravity must be >= 0".into()));
        }
        if self.edge_weight_influence < 0.0 {
            return Err(Error::Config("edge_weight_influence must be >= 0".into()));
        }
        if self.speed <= 0.0 {
            return Err(Error::Config("speed must be > 0".into()));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::Config("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutState {
    pub positions: Vec<(f64, f64)>,
    pub iteration: usize,
    pub global_speed: f64,
    /// max per-node displacement of the most recent step
    pub last_max_displacement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    Converged,
    IterationsExhausted,
}

/// Seeded uniform scatter in the unit square.
pub fn init_positions(g: &Graph, seed: u64) -> LayoutState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..g.n_nodes())
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    LayoutState {
        positions,
        iteration: 0,
        global_speed: 0.0,
        last_max_displacement: f64::INFINITY,
    }
}

/// Deterministic pseudo-random direction for a coincident node pair.
fn escape_direction(seed: u64, i: usize, j: usize) -> (f64, f64) {
    // FNV-1a over (seed, i, j)
    let mut h = 0xcbf29ce484222325u64;
    for byte in seed
        .to_le_bytes()
        .into_iter()
        .chain((i as u64).to_le_bytes())
        .chain((j as u64).to_le_bytes())
    {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let angle = (h as f64 / u64::MAX as f64) * std::f64::consts::TAU;
    (angle.cos(), angle.sin())
}

/// One synchronous update: forces accumulated from the pre-step snapshot,
/// displacements bounded so no node moves more than 10% of the current
/// layout diameter.
pub fn fa2_step(g: &Graph, st: &LayoutState, params: &Fa2Params) -> Result<LayoutState> {
    let n = g.n_nodes();
    let pos = &st.positions;
    let mut force = vec![(0.0f64, 0.0f64); n];

    // repulsion over every node pair, computed once per pair so paired
    // contributions cancel exactly
    for i in 0..n {
        for j in i + 1..n {
            let dx = pos[i].0 - pos[j].0;
            let dy = pos[i].1 - pos[j].1;
            let d = (dx * dx + dy * dy).sqrt();
            let mass = (g.degree(i) as f64 + 1.0) * (g.degree(j) as f64 + 1.0);
            let (fx, fy) = if d < COINCIDENT_EPS {
                let (ux, uy) = escape_direction(params.seed, i, j);
                let magnitude = params.k_repulsion * mass / COINCIDENT_EPS;
                (magnitude * ux, magnitude * uy)
            } else {
                let magnitude = params.k_repulsion * mass / d;
                (magnitude * dx / d, magnitude * dy / d)
            };
            if !fx.is_finite() || !fy.is_finite() {
                return Err(Error::LayoutDivergence { a: i, b: j });
            }
            force[i].0 += fx;
            force[i].1 += fy;
            force[j].0 -= fx;
            force[j].1 -= fy;
        }
    }

    // linear attraction along edges
    for &(i, j, w) in g.edges() {
        let dx = pos[j].0 - pos[i].0;
        let dy = pos[j].1 - pos[i].1;
        let scale = w.powf(params.edge_weight_influence);
        let (fx, fy) = (scale * dx, scale * dy);
        if !fx.is_finite() || !fy.is_finite() {
            return Err(Error::LayoutDivergence { a: i, b: j });
        }
        force[i].0 += fx;
        force[i].1 += fy;
        force[j].0 -= fx;
        force[j].1 -= fy;
    }

    // gravity toward the origin
    if params.gravity > 0.0 {
        for i in 0..n {
            let d = (pos[i].0 * pos[i].0 + pos[i].1 * pos[i].1).sqrt();
            if d > 0.0 {
                let magnitude = params.gravity * (g.degree(i) as f64 + 1.0);
                force[i].0 -= magnitude * pos[i].0 / d;
                force[i].1 -= magnitude * pos[i].1 / d;
            }
        }
    }

    // global speed, bounded so no node moves more than 10% of the diameter
    let mut speed = params.speed;
    let max_force = force
        .iter()
        .map(|&(fx, fy)| (fx * fx + fy * fy).sqrt())
        .fold(0.0f64, f64::max);
    let diameter = layout_diameter(pos);
    if diameter > 0.0 && max_force * speed > 0.1 * diameter {
        speed = 0.1 * diameter / max_force;
    }

    let mut positions = Vec::with_capacity(n);
    let mut max_disp = 0.0f64;
    for i in 0..n {
        let dx = speed * force[i].0;
        let dy = speed * force[i].1;
        let disp = (dx * dx + dy * dy).sqrt();
        if disp > max_disp {
            max_disp = disp;
        }
        positions.push((pos[i].0 + dx, pos[i].1 + dy));
    }
    for (idx, &(x, y)) in positions.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::LayoutDivergence { a: idx, b: idx });
        }
    }
    Ok(LayoutState {
        positions,
        iteration: st.iteration + 1,
        global_speed: speed,
        last_max_displacement: max_disp,
    })
}

fn layout_diameter(pos: &[(f64, f64)]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let dx = pos[i].0 - pos[j].0;
            let dy = pos[i].1 - pos[j].1;
            let d = (dx * dx + dy * dy).sqrt();
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Iterate until max displacement drops below tolerance or the iteration
/// budget runs out.
pub fn fa2_run(g: &Graph, params: &Fa2Params) -> Result<(LayoutState, StopCondition)> {
    params.validate()?;
    let mut st = init_positions(g, params.seed);
    for _ in 0..params.iterations {
        st = fa2_step(g, &st, params)?;
        if st.last_max_displacement < params.tolerance {
            return Ok((st, StopCondition::Converged));
        }
    }
    Ok((st, StopCondition::IterationsExhausted))
}

/// Standalone CSV dump: `entity_id,x,y`.
pub fn write_positions_csv<W: Write>(
    entity_ids: &[String],
    positions: &[(f64, f64)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "entity_id,x,y")?;
    for (id, &(x, y)) in entity_ids.iter().zip(positions) {
        writeln!(out, "{id},{x},{y}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    #[test]
    fn init_is_seed_deterministic() {
        let g = Graph::new(ids(5), vec![(0, 1, 1.0)]);
        let a = init_positions(&g, 42);
        let b = init_positions(&g, 42);
        assert_eq!(a.positions, b.positions);
        let c = init_positions(&g, 43);
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn single_node_without_gravity_stays_put() {
        let g = Graph::new(ids(1), vec![]);
        let st = init_positions(&g, 1);
        let next = fa2_step(&g, &st, &Fa2Params::default()).unwrap();
        assert_eq!(next.positions, st.positions);
    }

    #[test]
    fn two_node_zero_force_at_equilibrium_distance() {
        // equilibrium of d = k_r*(1+1)(1+1)/d against attraction d: d* = 2
        let g = Graph::new(ids(2), vec![(0, 1, 1.0)]);
        let mut st = init_positions(&g, 0);
        st.positions = vec![(0.0, 0.0), (2.0, 0.0)];
        let next = fa2_step(&g, &st, &Fa2Params::default()).unwrap();
        for (p, q) in st.positions.iter().zip(&next.positions) {
            assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_symmetry_is_preserved() {
        // path 0-1-2 with 0 and 2 mirrored about node 1
        let g = Graph::new(ids(3), vec![(0, 1, 1.0), (1, 2, 1.0)]);
        let mut st = init_positions(&g, 0);
        st.positions = vec![(-1.0, 0.5), (0.0, 0.5), (1.0, 0.5)];
        let next = fa2_step(&g, &st, &Fa2Params::default()).unwrap();
        assert!((next.positions[0].0 + next.positions[2].0).abs() < 1e-12);
        assert!((next.positions[1].0).abs() < 1e-12);
    }

    #[test]
    fn two_node_run_converges_to_distance_two() {
        let g = Graph::new(ids(2), vec![(0, 1, 1.0)]);
        let params = Fa2Params {
            iterations: 1000,
            ..Fa2Params::default()
        };
        let (st, stop) = fa2_run(&g, &params).unwrap();
        assert_eq!(stop, StopCondition::Converged);
        let (a, b) = (st.positions[0], st.positions[1]);
        let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        assert!((d - 2.0).abs() / 2.0 < 0.01, "distance {d}");
    }

    #[test]
    fn centroid_drift_stays_tiny_without_gravity() {
        let g = Graph::new(
            ids(4),
            vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, 1.0), (0, 3, 0.25)],
        );
        let mut st = init_positions(&g, 3);
        for _ in 0..50 {
            let next = fa2_step(&g, &st, &Fa2Params::default()).unwrap();
            let cx0: f64 = st.positions.iter().map(|p| p.0).sum::<f64>() / 4.0;
            let cy0: f64 = st.positions.iter().map(|p| p.1).sum::<f64>() / 4.0;
            let cx1: f64 = next.positions.iter().map(|p| p.0).sum::<f64>() / 4.0;
            let cy1: f64 = next.positions.iter().map(|p| p.1).sum::<f64>() / 4.0;
            assert!(((cx1 - cx0).powi(2) + (cy1 - cy0).powi(2)).sqrt() < 1e-9);
            st = next;
        }
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let g = Graph::new(ids(3), vec![(0, 1, 1.0)]);
        let params = Fa2Params {
            iterations: 0,
            ..Fa2Params::default()
        };
        let (st, stop) = fa2_run(&g, &params).unwrap();
        assert_eq!(stop, StopCondition::IterationsExhausted);
        assert_eq!(st.positions, init_positions(&g, params.seed).positions);
    }

    #[test]
    fn identical_runs_bit_identical() {
        let g = Graph::new(ids(6), vec![(0, 1, 1.0), (2, 3, 0.5), (4, 5, 0.25), (1, 2, 1.0)]);
        let params = Fa2Params {
            iterations: 200,
            seed: 5,
            ..Fa2Params::default()
        };
        let (a, _) = fa2_run(&g, &params).unwrap();
        let (b, _) = fa2_run(&g, &params).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn weight_influence_zero_ignores_weights() {
        let weighted = Graph::new(ids(3), vec![(0, 1, 0.3), (1, 2, 0.9)]);
        let binary = Graph::new(ids(3), vec![(0, 1, 1.0), (1, 2, 1.0)]);
        let params = Fa2Params {
            edge_weight_influence: 0.0,
            iterations: 100,
            seed: 8,
            ..Fa2Params::default()
        };
        let (a, _) = fa2_run(&weighted, &params).unwrap();
        let (b, _) = fa2_run(&binary, &params).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn coincident_nodes_separate() {
        let g = Graph::new(ids(2), vec![(0, 1, 1.0)]);
        let mut st = init_positions(&g, 0);
        st.positions = vec![(0.5, 0.5), (0.5, 0.5)];
        let next = fa2_step(&g, &st, &Fa2Params::default()).unwrap();
        let d = ((next.positions[0].0 - next.positions[1].0).powi(2)
            + (next.positions[0].1 - next.positions[1].1).powi(2))
        .sqrt();
        assert!(d > 0.0);
    }

    #[test]
    fn bridged_blocks_separate_spatially() {
        // two K4 blocks joined by one bridge
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
        edges.push((3, 4, 1.0));
        let g = Graph::new(ids(8), edges);
        let params = Fa2Params {
            iterations: 2000,
            seed: 2,
            ..Fa2Params::default()
        };
        let (st, _) = fa2_run(&g, &params).unwrap();
        let dist = |i: usize, j: usize| {
            let (a, b) = (st.positions[i], st.positions[j]);
            ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
        };
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..8 {
            for j in i + 1..8 {
                if (i < 4) == (j < 4) {
                    intra.push(dist(i, j));
                } else {
                    inter.push(dist(i, j));
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) < mean(&inter));
    }
}
