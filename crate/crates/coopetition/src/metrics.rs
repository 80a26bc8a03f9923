//! Co-opetition scoring: conductance (cooperative stance), mean grade
//! (competitive stance) and label-agreement accounting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::affiliation::EntityMetadata;
use crate::community::{LouvainResult, Partition};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCounting {
    /// tie counts
    Binary,
    /// similarity weights
    Weighted,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CommunityReport {
    pub community_id: usize,
    pub size: usize,
    pub mean_grade: Option<f64>,
    /// epsilon_AB / epsilon_AA, absent when epsilon_AA = 0
    pub conductance: Option<f64>,
    pub epsilon_ab: f64,
    pub epsilon_aa: f64,
    pub majority_label: Option<String>,
    pub purity: Option<f64>,
    pub mixed: bool,
    pub unassigned: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoopetitionReport {
    pub report_version: u32,
    pub n_entities: usize,
    pub communities: Vec<CommunityReport>,
    pub accuracy: Option<f64>,
    pub mixed_communities: Vec<usize>,
    pub unassigned_count: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsConfig {
    pub counting: EdgeCounting,
    /// a community is mixed when purity < this threshold
    pub purity_threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            counting: EdgeCounting::Binary,
            purity_threshold: 0.5,
        }
    }
}

/// epsilon_AB / epsilon_AA for one community; `None` when there are no
/// internal ties.
pub fn conductance(
    g: &Graph,
    p: &Partition,
    community: usize,
    counting: EdgeCounting,
) -> Result<Option<f64>> {
    if community >= p.n_communities() {
        return Err(Error::UnknownCommunity(community));
    }
    let (ab, aa) = boundary_and_internal(g, p, community, counting);
    Ok(if aa > 0.0 { Some(ab / aa) } else { None })
}

fn boundary_and_internal(
    g: &Graph,
    p: &Partition,
    community: usize,
    counting: EdgeCounting,
) -> (f64, f64) {
    let mut ab = 0.0;
    let mut aa = 0.0;
    for &(i, j, w) in g.edges() {
        let value = match counting {
            EdgeCounting::Binary => 1.0,
            EdgeCounting::Weighted => w,
        };
        let in_i = p.community_of(i) == community;
        let in_j = p.community_of(j) == community;
        match (in_i, in_j) {
            (true, true) => aa += value,
            (true, false) | (false, true) => ab += value,
            (false, false) => {}
        }
    }
    (ab, aa)
}

/// Arithmetic mean of the grades present among community members.
pub fn community_grade(
    p: &Partition,
    meta: &[EntityMetadata],
    community: usize,
) -> Result<Option<f64>> {
    if community >= p.n_communities() {
        return Err(Error::UnknownCommunity(community));
    }
    let grades: Vec<f64> = p
        .members(community)
        .iter()
        .filter_map(|&node| meta.get(node).and_then(|m| m.grade))
        .collect();
    Ok(if grades.is_empty() {
        None
    } else {
        Some(grades.iter().sum::<f64>() / grades.len() as f64)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    /// community id -> (majority label, purity, mixed)
    pub per_community: BTreeMap<usize, (String, f64, bool)>,
    pub accuracy: f64,
    pub mixed_communities: Vec<usize>,
    pub unassigned_count: usize,
}

/// Majority-label agreement. A community is `mixed` when its purity falls
/// below the threshold; members of mixed communities and unassigned nodes
/// count as incorrect.
pub fn label_agreement(
    detection: &LouvainResult,
    meta: &[EntityMetadata],
    purity_threshold: f64,
) -> Result<AgreementReport> {
    let p = &detection.partition;
    if !meta.iter().any(|m| m.label.is_some()) {
        return Err(Error::MissingGroundTruth);
    }
    let n = p.n_nodes();
    let mut per_community = BTreeMap::new();
    let mut mixed_communities = Vec::new();
    let mut correct = 0usize;
    for c in 0..p.n_communities() {
        let members = p.members(c);
        if members.len() == 1 && detection.is_unassigned(members[0]) {
            continue;
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &node in members {
            if let Some(label) = meta.get(node).and_then(|m| m.label.as_deref()) {
                *counts.entry(label).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            continue;
        }
        // ties break toward the lexicographically smallest label
        let (&majority, &majority_count) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .unwrap();
        let labeled: usize = counts.values().sum();
        let purity = majority_count as f64 / labeled as f64;
        let mixed = purity < purity_threshold;
        if mixed {
            mixed_communities.push(c);
        } else {
            correct += members
                .iter()
                .filter(|&&node| {
                    meta.get(node).and_then(|m| m.label.as_deref()) == Some(majority)
                })
                .count();
        }
        per_community.insert(c, (majority.to_string(), purity, mixed));
    }
    Ok(AgreementReport {
        per_community,
        accuracy: correct as f64 / n as f64,
        mixed_communities,
        unassigned_count: detection.unassigned.len(),
    })
}

/// Assemble the per-community and global report.
pub fn coopetition_report(
    g: &Graph,
    detection: &LouvainResult,
    meta: &[EntityMetadata],
    cfg: &MetricsConfig,
) -> Result<CoopetitionReport> {
    let p = &detection.partition;
    let agreement = if meta.iter().any(|m| m.label.is_some()) {
        Some(label_agreement(detection, meta, cfg.purity_threshold)?)
    } else {
        None
    };
    let mut communities = Vec::new();
    for c in 0..p.n_communities() {
        let members = p.members(c);
        let unassigned = members.len() == 1 && detection.is_unassigned(members[0]);
        let (ab, aa) = boundary_and_internal(g, p, c, cfg.counting);
        let (majority_label, purity, mixed) = match agreement
            .as_ref()
            .and_then(|a| a.per_community.get(&c))
        {
            Some((l, pu, m)) => (Some(l.clone()), Some(*pu), *m),
            None => (None, None, false),
        };
        communities.push(CommunityReport {
            community_id: c,
            size: members.len(),
            mean_grade: community_grade(p, meta, c)?,
            conductance: if aa > 0.0 { Some(ab / aa) } else { None },
            epsilon_ab: ab,
            epsilon_aa: aa,
            majority_label,
            purity,
            mixed,
            unassigned,
        });
    }
    Ok(CoopetitionReport {
        report_version: 1,
        n_entities: p.n_nodes(),
        communities,
        accuracy: agreement.as_ref().map(|a| a.accuracy),
        mixed_communities: agreement
            .as_ref()
            .map(|a| a.mixed_communities.clone())
            .unwrap_or_default(),
        unassigned_count: detection.unassigned.len(),
    })
}

impl CoopetitionReport {
    /// Human-readable table, one row per non-unassigned community.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>10} {:>6} {:>10} {:>12} {:>10} {:>10} {:>12} {:>7} {:>6}",
            "community", "size", "mean_grade", "conductance", "eps_AB", "eps_AA", "majority", "purity", "mixed"
        );
        for c in self.communities.iter().filter(|c| !c.unassigned) {
            let fmt_opt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.4}"),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:>10} {:>6} {:>10} {:>12} {:>10.4} {:>10.4} {:>12} {:>7} {:>6}",
                c.community_id,
                c.size,
                fmt_opt(c.mean_grade),
                fmt_opt(c.conductance),
                c.epsilon_ab,
                c.epsilon_aa,
                c.majority_label.as_deref().unwrap_or("-"),
                fmt_opt(c.purity),
                if c.mixed { "yes" } else { "no" },
            );
        }
        let _ = writeln!(out, "entities: {}", self.n_entities);
        let _ = writeln!(out, "unassigned: {}", self.unassigned_count);
        if let Some(acc) = self.accuracy {
            let _ = writeln!(out, "label agreement accuracy: {acc:.4}");
        }
        out
    }
}
