//! Binary affiliation data (entity x feature incidence) and entity metadata.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Sparse binary entities x features incidence matrix.
///
/// Rows are stored as bitsets; entity/feature index order is first-appearance
/// order in the input, which all downstream tie-breaking keys off.
#[derive(Debug, Clone, PartialEq)]
pub struct AffiliationMatrix {
    n_entities: usize,
    n_features: usize,
    entity_ids: Vec<String>,
    feature_ids: Vec<String>,
    rows: Vec<Vec<u64>>,
    n_cells: usize,
}

fn words_for(n_features: usize) -> usize {
    n_features.div_ceil(64)
}

impl AffiliationMatrix {
    pub fn from_cells(
        entity_ids: Vec<String>,
        feature_ids: Vec<String>,
        cells: &[(usize, usize)],
    ) -> Result<Self> {
        let n_entities = entity_ids.len();
        let n_features = feature_ids.len();
        let mut rows = vec![vec![0u64; words_for(n_features)]; n_entities];
        let mut n_cells = 0;
        for &(i, j) in cells {
            if i >= n_entities || j >= n_features {
                return Err(Error::Dimension(format!(
                    "cell ({i}, {j}) outside {n_entities}x{n_features} matrix"
                )));
            }
            let (w, b) = (j / 64, j % 64);
            if rows[i][w] >> b & 1 == 0 {
                rows[i][w] |= 1 << b;
                n_cells += 1;
            }
        }
        Ok(Self {
            n_entities,
            n_features,
            entity_ids,
            feature_ids,
            rows,
            n_cells,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn contains(&self, entity: usize, feature: usize) -> bool {
        self.rows[entity][feature / 64] >> (feature % 64) & 1 == 1
    }

    /// Raw bitset words for one entity row.
    pub fn row_words(&self, entity: usize) -> &[u64] {
        &self.rows[entity]
    }

    /// Set feature indices of one entity row, ascending.
    pub fn row_features(&self, entity: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.rows[entity].iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(w * 64 + b);
                bits &= bits - 1;
            }
        }
        out
    }

    /// All present cells in (entity, feature) order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        (0..self.n_entities)
            .flat_map(|i| self.row_features(i).into_iter().map(move |j| (i, j)))
            .collect()
    }

    /// Number of entities attending each feature.
    pub fn feature_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_features];
        for i in 0..self.n_entities {
            for j in self.row_features(i) {
                counts[j] += 1;
            }
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "entity_id,feature_id")?;
        for i in 0..self.n_entities {
            for j in self.row_features(i) {
                writeln!(out, "{},{}", self.entity_ids[i], self.feature_ids[j])?;
            }
        }
        Ok(())
    }
}

/// Per-entity metadata joined against the matrix by entity id.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EntityMetadata {
    pub entity_id: String,
    pub grade: Option<f64>,
    pub label: Option<String>,
}

/// Summary statistics of an affiliation matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MatrixStats {
    pub density: f64,
    pub max_feature_count: usize,
    pub features_attended_once: usize,
    /// attendance count -> number of features with that count
    pub histogram: BTreeMap<usize, usize>,
}

impl MatrixStats {
    pub fn features_above_threshold(&self, t: usize) -> usize {
        self.histogram
            .iter()
            .filter(|(&count, _)| count > t)
            .map(|(_, &n)| n)
            .sum()
    }
}

/// Result of a load, with ingest diagnostics.
#[derive(Debug)]
pub struct LoadOutcome {
    pub matrix: AffiliationMatrix,
    pub duplicate_declarations: usize,
    pub total_declarations: usize,
}

/// Load `entity_id,feature_id` declaration rows. Duplicate declarations
/// collapse to binary presence and are reported in the diagnostics.
pub fn load_affiliation<R: Read>(source: R) -> Result<LoadOutcome> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut entity_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut feature_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut entity_ids = Vec::new();
    let mut feature_ids = Vec::new();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut total = 0usize;

    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let entity = record[0].trim().to_string();
        let feature = record[1].trim().to_string();
        if entity.is_empty() || feature.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty entity_id or feature_id".into(),
            });
        }
        let ei = *entity_index.entry(entity.clone()).or_insert_with(|| {
            entity_ids.push(entity);
            entity_ids.len() - 1
        });
        let fi = *feature_index.entry(feature.clone()).or_insert_with(|| {
            feature_ids.push(feature);
            feature_ids.len() - 1
        });
        cells.push((ei, fi));
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyDataset("no declaration rows".into()));
    }
    let matrix = AffiliationMatrix::from_cells(entity_ids, feature_ids, &cells)?;
    Ok(LoadOutcome {
        duplicate_declarations: total - matrix.n_cells(),
        total_declarations: total,
        matrix,
    })
}

/// Load `entity_id,grade,label` rows; empty fields mean absent.
pub fn load_metadata<R: Read>(
    source: R,
    grade_min: f64,
    grade_max: f64,
    allowed_labels: Option<&[String]>,
) -> Result<Vec<EntityMetadata>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let entity_id = record[0].trim().to_string();
        let grade_field = record[1].trim();
        let label_field = record[2].trim();
        let grade = if grade_field.is_empty() {
            None
        } else {
            let g: f64 = grade_field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid grade {grade_field:?}"),
            })?;
            if g < grade_min || g > grade_max {
                return Err(Error::GradeOutOfRange {
                    entity: entity_id,
                    grade: g,
                    min: grade_min,
                    max: grade_max,
                });
            }
            Some(g)
        };
        let label = if label_field.is_empty() {
            None
        } else {
            if let Some(allowed) = allowed_labels {
                if !allowed.iter().any(|l| l == label_field) {
                    return Err(Error::UnknownLabel {
                        entity: entity_id,
                        label: label_field.to_string(),
                        declared: allowed.to_vec(),
                    });
                }
            }
            Some(label_field.to_string())
        };
        out.push(EntityMetadata {
            entity_id,
            grade,
            label,
        });
    }
    Ok(out)
}

pub fn write_metadata_csv<W: Write>(meta: &[EntityMetadata], mut out: W) -> Result<()> {
    writeln!(out, "entity_id,grade,label")?;
    for m in meta {
        let grade = m.grade.map(|g| g.to_string()).unwrap_or_default();
        let label = m.label.clone().unwrap_or_default();
        writeln!(out, "{},{},{}", m.entity_id, grade, label)?;
    }
    Ok(())
}

pub fn matrix_stats(m: &AffiliationMatrix) -> MatrixStats {
    let counts = m.feature_counts();
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let total = m.n_entities() * m.n_features();
    MatrixStats {
        density: if total == 0 {
            0.0
        } else {
            m.n_cells() as f64 / total as f64
        },
        max_feature_count: counts.iter().copied().max().unwrap_or(0),
        features_attended_once: counts.iter().filter(|&&c| c == 1).count(),
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> LoadOutcome {
        load_affiliation(s.as_bytes()).unwrap()
    }

    #[test]
    fn loads_distinct_cells() {
        let out = load("entity_id,feature_id\ns1,c1\ns1,c3\ns2,c1\n");
        assert_eq!(out.matrix.n_entities(), 2);
        assert_eq!(out.matrix.n_features(), 2);
        assert_eq!(out.matrix.n_cells(), 3);
        assert_eq!(out.duplicate_declarations, 0);
    }

    #[test]
    fn duplicates_collapse_and_are_reported() {
        let out = load("entity_id,feature_id\ns1,c1\ns1,c1\n");
        assert_eq!(out.matrix.n_entities(), 1);
        assert_eq!(out.matrix.n_features(), 1);
        assert_eq!(out.matrix.n_cells(), 1);
        assert_eq!(out.duplicate_declarations, 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = load_affiliation("entity_id,feature_id\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = load_affiliation("entity_id,feature_id\ns1,c1\nonly_one_field\n".as_bytes())
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn first_appearance_order_is_kept() {
        let out = load("entity_id,feature_id\nb,z\na,y\nb,y\n");
        assert_eq!(out.matrix.entity_ids(), ["b", "a"]);
        assert_eq!(out.matrix.feature_ids(), ["z", "y"]);
    }

    #[test]
    fn stats_density_quarter() {
        let m = AffiliationMatrix::from_cells(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            &[(0, 0)],
        )
        .unwrap();
        let s = matrix_stats(&m);
        assert_eq!(s.density, 0.25);
        assert_eq!(s.max_feature_count, 1);
        assert_eq!(s.features_attended_once, 1);
        assert_eq!(s.histogram.values().sum::<usize>(), 2);
    }

    #[test]
    fn stats_all_zero_matrix() {
        let m = AffiliationMatrix::from_cells(
            (0..4).map(|i| format!("e{i}")).collect(),
            (0..5).map(|j| format!("f{j}")).collect(),
            &[],
        )
        .unwrap();
        let s = matrix_stats(&m);
        assert_eq!(s.density, 0.0);
        assert_eq!(s.max_feature_count, 0);
        assert_eq!(s.features_above_threshold(0), 0);
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let out = load("entity_id,feature_id\ns1,c1\ns1,c3\ns2,c1\ns3,c2\n");
        let mut buf = Vec::new();
        out.matrix.write_csv(&mut buf).unwrap();
        let reloaded = load_affiliation(buf.as_slice()).unwrap();
        assert_eq!(reloaded.matrix, out.matrix);
        assert_eq!(matrix_stats(&reloaded.matrix), matrix_stats(&out.matrix));
    }

    #[test]
    fn stats_invariant_under_permutation() {
        let cells = [(0, 0), (0, 2), (1, 1), (2, 0), (2, 2)];
        let ids = |n: usize, p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let m1 = AffiliationMatrix::from_cells(ids(3, "e"), ids(3, "f"), &cells).unwrap();
        // permute rows 0<->2 and columns 0<->1
        let permuted: Vec<_> = cells
            .iter()
            .map(|&(i, j)| (2 - i, if j == 0 { 1 } else if j == 1 { 0 } else { j }))
            .collect();
        let m2 = AffiliationMatrix::from_cells(ids(3, "e"), ids(3, "f"), &permuted).unwrap();
        let (s1, s2) = (matrix_stats(&m1), matrix_stats(&m2));
        assert_eq!(s1.density, s2.density);
        assert_eq!(s1.histogram, s2.histogram);
    }

    #[test]
    fn metadata_fields_and_errors() {
        let meta = load_metadata(
            "entity_id,grade,label\ns1,3.5,finance\ns2,,\n".as_bytes(),
            0.0,
            5.0,
            None,
        )
        .unwrap();
        assert_eq!(meta[0].grade, Some(3.5));
        assert_eq!(meta[0].label.as_deref(), Some("finance"));
        assert_eq!(meta[1].grade, None);
        assert_eq!(meta[1].label, None);

        let err = load_metadata(
            "entity_id,grade,label\ns1,6.0,finance\n".as_bytes(),
            0.0,
            5.0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::GradeOutOfRange { .. }));

        let allowed = vec!["finance".to_string()];
        let err = load_metadata(
            "entity_id,grade,label\ns1,3.0,magic\n".as_bytes(),
            0.0,
            5.0,
            Some(&allowed),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { .. }));
    }
}
