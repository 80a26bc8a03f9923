//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`).
//!
//! Oracles here are deliberately independent re-implementations (brute-force
//! edge classification, full Newman double sum, exhaustive partition search)
//! rather than calls back into the optimized code paths they check.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coopetition::community::{louvain, modularity, LouvainConfig, Partition};
use coopetition::graph::Graph;
use coopetition::layout::{fa2_run, fa2_step, init_positions, Fa2Params};
use coopetition::metrics::{conductance, label_agreement, EdgeCounting};
use coopetition::pipeline::{run_pipeline, InputSpec, PipelineConfig};
use coopetition::similarity::{
    empirical_cdf, pairwise_distances, quantile_cutoff, reciprocal_similarity, sparsify,
    DistanceMode, SimilarityMatrix, ZeroDistancePolicy,
};
use coopetition::synthgen::{generate, SynthConfig};

fn verdict(id: u32, name: &str, pass: bool, details: &str) {
    println!(
        "ACCEPTANCE {id} ({name}): {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {id} ({name}) failed: {details}");
}

/// Random undirected weighted graph without self-loops or parallel edges.
fn random_graph(rng: &mut ChaCha8Rng, n: usize, p_edge: f64) -> Graph {
    let ids = (0..n).map(|i| format!("n{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p_edge) {
                edges.push((i, j, rng.gen_range(0.5..1.5)));
            }
        }
    }
    Graph::new(ids, edges)
}

fn is_connected(n: usize, edges: &[(usize, usize, f64)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(i, j, _) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Full Newman double sum over the adjacency matrix.
fn modularity_oracle(g: &Graph, p: &Partition) -> f64 {
    let n = g.n_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j, w) in g.edges() {
        a[i][j] += w;
        a[j][i] += w;
    }
    let k: Vec<f64> = (0..n).map(|i| a[i].iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if p.community_of(i) == p.community_of(j) {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Edge-by-edge endpoint classification.
fn conductance_oracle(
    g: &Graph,
    p: &Partition,
    c: usize,
    counting: EdgeCounting,
) -> Option<f64> {
    let mut boundary = 0.0;
    let mut internal = 0.0;
    for &(i, j, w) in g.edges() {
        let inside = (p.community_of(i) == c) as u8 + (p.community_of(j) == c) as u8;
        let contribution = match counting {
            EdgeCounting::Binary => 1.0,
            EdgeCounting::Weighted => w,
        };
        match inside {
            1 => boundary += contribution,
            2 => internal += contribution,
            _ => {}
        }
    }
    if internal == 0.0 {
        None
    } else {
        Some(boundary / internal)
    }
}

#[test]
fn criterion_1_metric_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    while checked < 200 {
        let n = rng.gen_range(3..=20);
        let g = random_graph(&mut rng, n, 0.35);
        if g.n_edges() == 0 {
            continue;
        }
        let assignment: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let p = Partition::from_assignment(&assignment);
        let q = modularity(&g, &p).unwrap();
        let q_oracle = modularity_oracle(&g, &p);
        worst = worst.max((q - q_oracle).abs());
        for c in 0..p.n_communities() {
            for counting in [EdgeCounting::Binary, EdgeCounting::Weighted] {
                let got = conductance(&g, &p, c, counting).unwrap();
                let want = conductance_oracle(&g, &p, c, counting);
                match (got, want) {
                    (None, None) => {}
                    (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                    _ => verdict(
                        1,
                        "metric oracle",
                        false,
                        "conductance None/Some disagreement",
                    ),
                }
            }
        }
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "metric oracle",
        worst < 1e-12 && secs < 10.0,
        &format!("200 graphs, max |Δ| = {worst:.3e}, {secs:.2}s (< 10s)"),
    );
}

/// Iterate set partitions of {0..n-1} as restricted growth strings.
fn for_each_partition(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a = vec![0usize; n];
    let mut b = vec![0usize; n]; // b[i] = max(a[0..=i])
    loop {
        f(&a);
        // advance to the next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if a[i] <= b[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        b[i] = b[i - 1].max(a[i]);
        for j in (i + 1)..n {
            a[j] = 0;
            b[j] = b[i];
        }
    }
}

#[test]
fn criterion_2_louvain_exact_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut tested = 0usize;
    let mut skipped_nonunique = 0usize;
    let mut attempts = 0usize;
    while tested < 50 && attempts < 2000 {
        attempts += 1;
        let n = rng.gen_range(3..=8);
        let g = random_graph(&mut rng, n, 0.5);
        if !is_connected(n, g.edges()) {
            continue;
        }
        // exhaustive optimum via the independent oracle
        let mut best_q = f64::NEG_INFINITY;
        let mut second_q = f64::NEG_INFINITY;
        let mut best: Vec<usize> = Vec::new();
        for_each_partition(n, |assignment| {
            let p = Partition::from_assignment(assignment);
            let q = modularity_oracle(&g, &p);
            if q > best_q {
                second_q = best_q;
                best_q = q;
                best = assignment.to_vec();
            } else if q > second_q {
                second_q = q;
            }
        });
        if best_q - second_q < 1e-9 {
            skipped_nonunique += 1;
            continue;
        }
        let cfg = LouvainConfig {
            restarts: 64,
            ..LouvainConfig::default()
        };
        let result = louvain(&g, &cfg).unwrap();
        let optimal = Partition::from_assignment(&best);
        assert_eq!(
            result.partition, optimal,
            "louvain missed the unique optimum (Q* = {best_q}) on a {n}-node graph"
        );
        // Q monotone nondecreasing across every recorded move and level
        for pair in result.q_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-12,
                "q_trace decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        tested += 1;
    }
    verdict(
        2,
        "louvain exact",
        tested == 50,
        &format!(
            "{tested} unique-optimum connected graphs matched exhaustive search \
             ({skipped_nonunique} non-unique skipped), Q trace monotone"
        ),
    );
}

#[test]
fn criterion_3_karate_club() {
    let start = Instant::now();
    let raw = include_str!("../fixtures/karate_club.edges");
    let edges: Vec<(usize, usize, f64)> = raw
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let a: usize = it.next().unwrap().parse().unwrap();
            let b: usize = it.next().unwrap().parse().unwrap();
            (a, b, 1.0)
        })
        .collect();
    assert_eq!(edges.len(), 78, "karate fixture must carry 78 edges");
    let ids = (0..34).map(|i| format!("v{i}")).collect();
    let g = Graph::new(ids, edges);
    let result = louvain(&g, &LouvainConfig::default()).unwrap();
    let q = modularity(&g, &result.partition).unwrap();
    let q_oracle = modularity_oracle(&g, &result.partition);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "karate club",
        q >= 0.40 && (q - q_oracle).abs() < 1e-12 && secs < 1.0,
        &format!(
            "34 nodes / 78 edges, Q = {q:.4} (>= 0.40), {} communities, {secs:.3}s (< 1s)",
            result.partition.n_communities()
        ),
    );
}

/// The full unsupervised chain: distances -> reciprocal similarity ->
/// 95th-percentile cutoff -> graph -> Louvain.
fn detect(cfg: &SynthConfig) -> (coopetition::community::LouvainResult, Vec<coopetition::affiliation::EntityMetadata>) {
    let data = generate(cfg).unwrap();
    let d = pairwise_distances(&data.matrix, DistanceMode::Plain, None).unwrap();
    let s = reciprocal_similarity(&d, ZeroDistancePolicy::CapToOne);
    let cutoff = quantile_cutoff(&empirical_cdf(&s).unwrap(), 0.95);
    let sparse = sparsify(&s, cutoff);
    let ids: Vec<String> = (0..data.matrix.n_entities()).map(|i| format!("e{i}")).collect();
    let g = coopetition::graph::build_graph(
        &sparse,
        &ids,
        coopetition::graph::EdgeWeighting::Similarity,
    );
    let det = louvain(&g, &LouvainConfig::default()).unwrap();
    (det, data.metadata)
}

#[test]
fn criterion_4_planted_recovery() {
    let start = Instant::now();
    let mut planted_accs = Vec::new();
    let mut chance_gaps = Vec::new();
    let mut chance_accs = Vec::new();
    for seed in 0..10u64 {
        // planted case: preset already has p_cross = 0.1 * p_core
        let cfg = SynthConfig::tseba_like(seed);
        assert!((cfg.p_cross - 0.1 * cfg.p_core).abs() < 1e-12);
        let (det, meta) = detect(&cfg);
        planted_accs.push(label_agreement(&det, &meta, 0.5).unwrap().accuracy);

        // chance case: no planted signal beyond the loner tail
        let mut chance_cfg = SynthConfig::tseba_like(seed);
        chance_cfg.p_cross = chance_cfg.p_core;
        let (det, meta) = detect(&chance_cfg);
        let acc = label_agreement(&det, &meta, 0.5).unwrap().accuracy;
        // label-permutation baseline over the same detection
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6261_7365);
        let mut baseline = 0.0;
        let permutations = 20;
        for _ in 0..permutations {
            let mut permuted = meta.clone();
            let mut labels: Vec<_> = permuted.iter().map(|m| m.label.clone()).collect();
            labels.shuffle(&mut rng);
            for (m, l) in permuted.iter_mut().zip(labels) {
                m.label = l;
            }
            baseline += label_agreement(&det, &permuted, 0.5).unwrap().accuracy;
        }
        baseline /= permutations as f64;
        chance_accs.push(acc);
        chance_gaps.push((acc - baseline).abs());
    }
    let min_planted = planted_accs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_gap = chance_gaps.iter().cloned().fold(0.0, f64::max);
    // raising p_cross to p_core must not improve recovery on any seed
    let monotone = planted_accs
        .iter()
        .zip(&chance_accs)
        .all(|(a, b)| a >= b);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        4,
        "planted recovery",
        min_planted >= 0.90 && max_gap <= 0.1 && monotone && secs < 60.0,
        &format!(
            "10 seeds: min accuracy {min_planted:.3} (>= 0.90), \
             max |chance - baseline| {max_gap:.3} (<= 0.1), {secs:.1}s (< 60s)"
        ),
    );
}

#[test]
fn criterion_5_sparsification_contract() {
    let n_values = 10_000usize;
    // tie-free sample: a seeded shuffle of 10k distinct values in (0, 1)
    let mut values: Vec<f64> = (1..=n_values)
        .map(|i| i as f64 / (n_values + 1) as f64)
        .collect();
    values.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let n_entities = 150; // 150 * 149 / 2 = 11175 >= 10000 slots
    let mut pairs = Vec::with_capacity(n_values);
    let mut it = values.into_iter();
    'outer: for i in 0..n_entities {
        for j in (i + 1)..n_entities {
            match it.next() {
                Some(v) => pairs.push((i, j, v)),
                None => break 'outer,
            }
        }
    }
    let s = SimilarityMatrix::from_pairs(n_entities, pairs);
    let cutoff = quantile_cutoff(&empirical_cdf(&s).unwrap(), 0.95);
    let sparse = sparsify(&s, cutoff);
    let retained = sparse.pairs().len();
    let min_retained = sparse
        .pairs()
        .iter()
        .map(|&(_, _, v)| v)
        .fold(f64::INFINITY, f64::min);
    verdict(
        5,
        "sparsification contract",
        retained == 500 && min_retained > cutoff,
        &format!(
            "N = 10000, q = 0.95: retained {retained} (= ceil(0.05 * N) = 500), \
             min retained {min_retained:.6} > cutoff {cutoff:.6}"
        ),
    );
}

#[test]
fn criterion_6_fa2_equilibrium() {
    let start = Instant::now();
    let g = Graph::new(
        vec!["a".into(), "b".into()],
        vec![(0, 1, 1.0)],
    );
    let params = Fa2Params {
        seed: 7,
        ..Fa2Params::default()
    };
    assert_eq!(params.k_repulsion, 1.0);
    assert_eq!(params.gravity, 0.0);
    assert!(params.iterations <= 1000);

    // stepwise: centroid must not drift
    let mut state = init_positions(&g, params.seed);
    let centroid = |st: &coopetition::layout::LayoutState| {
        let (mut cx, mut cy) = (0.0, 0.0);
        for &(x, y) in &st.positions {
            cx += x;
            cy += y;
        }
        (cx / 2.0, cy / 2.0)
    };
    let mut max_drift: f64 = 0.0;
    for _ in 0..params.iterations {
        let before = centroid(&state);
        state = fa2_step(&g, &state, &params).unwrap();
        let after = centroid(&state);
        max_drift = max_drift.max((after.0 - before.0).hypot(after.1 - before.1));
    }
    let (ax, ay) = state.positions[0];
    let (bx, by) = state.positions[1];
    let distance = (ax - bx).hypot(ay - by);

    // same seed twice through the packaged runner: bit-identical layouts
    let (run_a, _) = fa2_run(&g, &params).unwrap();
    let (run_b, _) = fa2_run(&g, &params).unwrap();
    let bit_identical = run_a
        .positions
        .iter()
        .zip(&run_b.positions)
        .all(|(p, q)| p.0.to_bits() == q.0.to_bits() && p.1.to_bits() == q.1.to_bits());

    let secs = start.elapsed().as_secs_f64();
    verdict(
        6,
        "fa2 equilibrium",
        (distance - 2.0).abs() <= 0.02 && max_drift < 1e-9 && bit_identical && secs < 1.0,
        &format!(
            "distance {distance:.6} (= 2.0 +- 1%), centroid drift {max_drift:.2e}/step (< 1e-9), \
             bit-identical reruns, {secs:.3}s (< 1s)"
        ),
    );
}

fn small_pipeline_config(out_dir: std::path::PathBuf) -> PipelineConfig {
    let synth = SynthConfig {
        k_groups: 3,
        group_sizes: vec![14, 14, 14],
        courses_core_per_group: 20,
        courses_shared: 15,
        p_core: 0.7,
        p_cross: 0.07,
        p_shared: 0.05,
        mixed_group_size: 9,
        loner_count: 5,
        loner_courses: 6,
        loner_pool: 8,
        grade_means: vec![3.2, 3.5, 3.8],
        grade_sd: 0.4,
        grade_min: 0.0,
        grade_max: 5.0,
        group_labels: vec!["alpha".into(), "beta".into(), "gamma".into()],
        seed: 0,
    };
    let config_json = serde_json::json!({
        "input": { "synth_config": { "synth": synth } },
        "layout": coopetition::layout::Fa2Params {
            iterations: 300,
            ..Fa2Params::default()
        },
        "out_dir": out_dir,
        "seed": 42,
    });
    serde_json::from_value(config_json).unwrap()
}

#[test]
fn criterion_7_pipeline_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        run_pipeline(&small_pipeline_config(out.clone())).unwrap();
        (
            std::fs::read(out.join("partition.csv")).unwrap(),
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("graph.gexf")).unwrap(),
        )
    };
    let (partition_a, report_a, graph_a) = run("a");
    let (partition_b, report_b, graph_b) = run("b");
    verdict(
        7,
        "pipeline determinism",
        partition_a == partition_b && report_a == report_b && graph_a == graph_b,
        &format!(
            "two runs from one config: partition.csv ({} bytes), report.json ({} bytes) \
             and graph.gexf ({} bytes) byte-identical",
            partition_a.len(),
            report_a.len(),
            graph_a.len()
        ),
    );
}

#[test]
fn criterion_8_desk_scale_performance() {
    let dir = tempfile::tempdir().unwrap();
    let config_json = serde_json::json!({
        "input": { "synth_preset": { "preset": "tseba-like" } },
        "out_dir": dir.path(),
        "seed": 1,
    });
    let cfg: PipelineConfig = serde_json::from_value(config_json).unwrap();
    let start = Instant::now();
    let artifacts = run_pipeline(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "desk-scale performance",
        artifacts.report.n_entities == 509 && secs < 30.0,
        &format!(
            "509x759 pipeline (distances, cutoff, Louvain, metrics, exact-repulsion layout, exports) \
             in {secs:.1}s (< 30s), {} communities",
            artifacts.report.communities.len()
        ),
    );
}
