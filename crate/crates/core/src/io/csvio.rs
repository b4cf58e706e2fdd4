//! CSV readers/writers for the toolkit's tabular interfaces: coefficient
//! tables, estimate lists, pair protocols, scores, template definitions,
//! datasets, training logs and identification score tables.
//!
//! Coefficient columns are split evenly into shape/texture halves (the
//! extra column goes to shape for odd counts).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matching::{LabeledScore, Pair, PairLabel, ScoreSet, TemplateDef};
use crate::metrics::IdentificationScores;
use crate::model::ParamVector;
use crate::pooling::{ItemKind, WeightedEstimate};
use crate::regressor::{Dataset, TrainLog};

fn csv_error(context: &str, e: csv::Error) -> Error {
    Error::Format(format!("{context}: {e}"))
}

fn parse_f64(token: &str, context: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("{context}: bad number {token:?}")))
}

/// Splits flat coefficients into a [`ParamVector`] at the even midpoint.
pub fn split_gamma(values: &[f64]) -> Result<ParamVector> {
    ParamVector::from_concat(values, values.len().div_ceil(2))
}

// ---------------------------------------------------------------------------
// Coefficient tables: id, p0..p{n-1}
// ---------------------------------------------------------------------------

/// Reads an id + coefficient-columns table, preserving row order.
pub fn read_gamma_csv<R: Read>(input: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::Reader::from_reader(input);
    let width = reader
        .headers()
        .map_err(|e| csv_error("gamma csv header", e))?
        .len();
    if width < 2 {
        return Err(Error::Format(
            "gamma csv needs an id column and at least one coefficient".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error("gamma csv", e))?;
        if record.len() != width {
            return Err(Error::dims(format!("gamma csv row {i}"), width, record.len()));
        }
        let id = record[0].trim().to_string();
        let values: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|t| parse_f64(t, &format!("gamma csv row {i}")))
            .collect::<Result<_>>()?;
        rows.push((id, values));
    }
    Ok(rows)
}

/// Writes an id + coefficient-columns table.
pub fn write_gamma_csv<W: Write>(
    out: W,
    id_header: &str,
    rows: &[(String, Vec<f64>)],
) -> Result<()> {
    let width = rows.first().map(|r| r.1.len()).unwrap_or(0);
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![id_header.to_string()];
    header.extend((0..width).map(|i| format!("p{i}")));
    writer
        .write_record(&header)
        .map_err(|e| csv_error("gamma csv header", e))?;
    for (id, values) in rows {
        if values.len() != width {
            return Err(Error::dims(format!("gamma row {id}"), width, values.len()));
        }
        let mut record = vec![id.clone()];
        record.extend(values.iter().map(|v| format!("{v}")));
        writer
            .write_record(&record)
            .map_err(|e| csv_error("gamma csv", e))?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Estimate lists: subject_id, item_id, kind, weight, p0..
// ---------------------------------------------------------------------------

/// One row of an estimate list file.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub subject_id: String,
    pub item_id: String,
    pub kind: ItemKind,
    pub weight: f64,
    pub gamma: Vec<f64>,
}

impl EstimateRow {
    pub fn weighted_estimate(&self) -> Result<WeightedEstimate> {
        Ok(WeightedEstimate::new(split_gamma(&self.gamma)?, self.weight))
    }
}

pub fn read_estimates_csv<R: Read>(input: R) -> Result<Vec<EstimateRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| csv_error("estimates csv header", e))?;
    let width = header.len();
    if width < 5 {
        return Err(Error::Format(
            "estimates csv needs subject_id, item_id, kind, weight and coefficients".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error("estimates csv", e))?;
        if record.len() != width {
            return Err(Error::dims(format!("estimates row {i}"), width, record.len()));
        }
        rows.push(EstimateRow {
            subject_id: record[0].trim().to_string(),
            item_id: record[1].trim().to_string(),
            kind: ItemKind::parse(&record[2])?,
            weight: parse_f64(&record[3], &format!("estimates row {i} weight"))?,
            gamma: record
                .iter()
                .skip(4)
                .map(|t| parse_f64(t, &format!("estimates row {i}")))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

pub fn write_estimates_csv<W: Write>(out: W, rows: &[EstimateRow]) -> Result<()> {
    let width = rows.first().map(|r| r.gamma.len()).unwrap_or(0);
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![
        "subject_id".to_string(),
        "item_id".to_string(),
        "kind".to_string(),
        "weight".to_string(),
    ];
    header.extend((0..width).map(|i| format!("p{i}")));
    writer
        .write_record(&header)
        .map_err(|e| csv_error("estimates csv header", e))?;
    for row in rows {
        if row.gamma.len() != width {
            return Err(Error::dims(
                format!("estimate row {}", row.item_id),
                width,
                row.gamma.len(),
            ));
        }
        let mut record = vec![
            row.subject_id.clone(),
            row.item_id.clone(),
            row.kind.as_str().to_string(),
            format!("{}", row.weight),
        ];
        record.extend(row.gamma.iter().map(|v| format!("{v}")));
        writer
            .write_record(&record)
            .map_err(|e| csv_error("estimates csv", e))?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Pair protocols and scores
// ---------------------------------------------------------------------------

pub fn read_pairs_csv<R: Read>(input: R) -> Result<Vec<Pair>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error("pairs csv", e))?;
        if record.len() != 3 {
            return Err(Error::dims(format!("pairs row {i}"), 3, record.len()));
        }
        pairs.push(Pair {
            id_a: record[0].trim().to_string(),
            id_b: record[1].trim().to_string(),
            label: PairLabel::parse(&record[2])?,
        });
    }
    Ok(pairs)
}

pub fn write_scores_csv<W: Write>(out: W, scores: &ScoreSet) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["id_a", "id_b", "label", "score"])
        .map_err(|e| csv_error("scores csv header", e))?;
    for entry in &scores.entries {
        writer
            .write_record([
                entry.id_a.as_str(),
                entry.id_b.as_str(),
                entry.label.as_str(),
                &format!("{}", entry.score),
            ])
            .map_err(|e| csv_error("scores csv", e))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<ScoreSet> {
    let mut reader = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error("scores csv", e))?;
        if record.len() != 4 {
            return Err(Error::dims(format!("scores row {i}"), 4, record.len()));
        }
        entries.push(LabeledScore {
            id_a: record[0].trim().to_string(),
            id_b: record[1].trim().to_string(),
            label: PairLabel::parse(&record[2])?,
            score: parse_f64(&record[3], &format!("scores row {i}"))?,
        });
    }
    Ok(ScoreSet { entries })
}

// ---------------------------------------------------------------------------
// Template definitions: template_id, item_id, kind
// ---------------------------------------------------------------------------

pub fn read_templates_csv<R: Read>(input: R) -> Result<Vec<TemplateDef>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut defs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error("templates csv", e))?;
        if record.len() != 3 {
            return Err(Error::dims(format!("templates row {i}"), 3, record.len()));
        }
        defs.push(TemplateDef {
            template_id: record[0].trim().to_string(),
            item_id: record[1].trim().to_string(),
            kind: ItemKind::parse(&record[2])?,
        });
    }
    Ok(defs)
}

// ---------------------------------------------------------------------------
// Datasets: features csv (subject_id, f0..) + targets csv (subject_id, p0..)
// ---------------------------------------------------------------------------

/// Reads a dataset from a per-sample features table and a per-subject
/// targets table.
pub fn read_dataset<R1: Read, R2: Read>(features: R1, targets: R2) -> Result<Dataset> {
    let target_rows = read_gamma_csv(targets)?;
    let mut by_subject: BTreeMap<String, ParamVector> = BTreeMap::new();
    for (subject, values) in target_rows {
        let gamma = split_gamma(&values)?;
        if let Some(existing) = by_subject.get(&subject) {
            if existing != &gamma {
                return Err(Error::InvalidInput(format!(
                    "targets csv lists subject {subject:?} twice with differing values"
                )));
            }
        }
        by_subject.insert(subject, gamma);
    }

    let feature_rows = read_gamma_csv(features)?;
    if feature_rows.is_empty() {
        return Err(Error::EmptyInput("features csv"));
    }
    let d = feature_rows[0].1.len();
    let mut matrix = DMatrix::zeros(feature_rows.len(), d);
    let mut subject_ids = Vec::with_capacity(feature_rows.len());
    let mut dataset_targets = Vec::with_capacity(feature_rows.len());
    for (i, (subject, values)) in feature_rows.iter().enumerate() {
        if values.len() != d {
            return Err(Error::dims(format!("features row {i}"), d, values.len()));
        }
        for (j, &v) in values.iter().enumerate() {
            matrix[(i, j)] = v;
        }
        let target = by_subject.get(subject).ok_or_else(|| {
            Error::InvalidInput(format!("subject {subject:?} missing from targets csv"))
        })?;
        subject_ids.push(subject.clone());
        dataset_targets.push(target.clone());
    }

    let dataset = Dataset {
        features: matrix,
        targets: dataset_targets,
        subject_ids,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes the per-sample features table and the per-subject targets table
/// (subjects in first-appearance order).
pub fn write_dataset<W1: Write, W2: Write>(
    features_out: W1,
    targets_out: W2,
    dataset: &Dataset,
) -> Result<()> {
    dataset.validate()?;
    let feature_rows: Vec<(String, Vec<f64>)> = (0..dataset.len())
        .map(|i| {
            (
                dataset.subject_ids[i].clone(),
                dataset.features.row(i).iter().copied().collect(),
            )
        })
        .collect();
    write_gamma_csv(features_out, "subject_id", &feature_rows)?;

    let mut seen = BTreeMap::new();
    let mut target_rows = Vec::new();
    for i in 0..dataset.len() {
        let subject = &dataset.subject_ids[i];
        if seen.insert(subject.clone(), ()).is_none() {
            let gamma = dataset.targets[i].to_vector();
            target_rows.push((subject.clone(), gamma.iter().copied().collect()));
        }
    }
    write_gamma_csv(targets_out, "subject_id", &target_rows)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Training logs: epoch, lr, train_loss, val_loss
// ---------------------------------------------------------------------------

pub fn write_trainlog_csv<W: Write>(out: W, log: &TrainLog) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["epoch", "lr", "train_loss", "val_loss"])
        .map_err(|e| csv_error("trainlog csv header", e))?;
    for row in &log.epochs {
        writer
            .write_record([
                format!("{}", row.epoch),
                format!("{}", row.lr),
                format!("{}", row.train_loss),
                format!("{}", row.val_loss),
            ])
            .map_err(|e| csv_error("trainlog csv", e))?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Identification scores (long form):
// probe_id, probe_identity, gallery_id, gallery_identity, score
// ---------------------------------------------------------------------------

/// Reads a long-form identification table into a complete probe x gallery
/// score matrix. Every (probe, gallery) cell must appear exactly once.
pub fn read_identification_csv<R: Read>(input: R) -> Result<IdentificationScores> {
    let mut reader = csv::Reader::from_reader(input);
    let mut probe_ids: Vec<String> = Vec::new();
    let mut probe_identities: Vec<String> = Vec::new();
    let mut gallery_ids: Vec<String> = Vec::new();
    let mut gallery_identities: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();

    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error("identification csv", e))?;
        if record.len() != 5 {
            return Err(Error::dims(
                format!("identification row {i}"),
                5,
                record.len(),
            ));
        }
        let probe_id = record[0].trim().to_string();
        let probe_identity = record[1].trim().to_string();
        let gallery_id = record[2].trim().to_string();
        let gallery_identity = record[3].trim().to_string();
        let score = parse_f64(&record[4], &format!("identification row {i}"))?;

        let p = match probe_ids.iter().position(|id| *id == probe_id) {
            Some(p) => {
                if probe_identities[p] != probe_identity {
                    return Err(Error::InvalidInput(format!(
                        "probe {probe_id:?} listed with conflicting identities"
                    )));
                }
                p
            }
            None => {
                probe_ids.push(probe_id);
                probe_identities.push(probe_identity);
                probe_ids.len() - 1
            }
        };
        let g = match gallery_ids.iter().position(|id| *id == gallery_id) {
            Some(g) => {
                if gallery_identities[g] != gallery_identity {
                    return Err(Error::InvalidInput(format!(
                        "gallery item {gallery_id:?} listed with conflicting identities"
                    )));
                }
                g
            }
            None => {
                gallery_ids.push(gallery_id);
                gallery_identities.push(gallery_identity);
                gallery_ids.len() - 1
            }
        };
        if cells.insert((p, g), score).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate identification cell at row {i}"
            )));
        }
    }

    if probe_ids.is_empty() || gallery_ids.is_empty() {
        return Err(Error::EmptyInput("identification csv"));
    }
    let mut scores = DMatrix::zeros(probe_ids.len(), gallery_ids.len());
    for p in 0..probe_ids.len() {
        for g in 0..gallery_ids.len() {
            let score = cells.get(&(p, g)).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "missing score for probe {:?} vs gallery {:?}",
                    probe_ids[p], gallery_ids[g]
                ))
            })?;
            scores[(p, g)] = *score;
        }
    }

    let id = IdentificationScores {
        gallery_ids,
        gallery_identities,
        probe_ids,
        probe_identities,
        scores,
    };
    id.validate()?;
    Ok(id)
}

// ---------------------------------------------------------------------------
// Path helpers
// ---------------------------------------------------------------------------

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(Error::Io)
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(Error::Io)
}
