use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use thiserror::Error;

use crate::relext::{RelationInstance, RelationType};

/// `(case_id, utterance_index, sentence_index)`
pub type Provenance = (String, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoldAnnotation {
    pub provenance: Provenance,
    pub instances: BTreeSet<(RelationType, String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Scores {
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Scores {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        // 2PR/(P+R) reduces to 2TP/(predicted+gold); the reduced form is exact
        let f1 = ratio(2 * true_positives, predicted + gold);
        Scores {
            precision,
            recall,
            f1,
            true_positives,
            predicted,
            gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    /// Micro-averaged over all instances.
    pub overall: Scores,
    /// Unweighted mean of per-relation scores over relations with any support.
    pub macro_avg: Scores,
    pub per_relation: BTreeMap<RelationType, Scores>,
}

type Key = (Provenance, RelationType, String, String);

fn gold_keys(gold: &[GoldAnnotation]) -> BTreeSet<Key> {
    gold.iter()
        .flat_map(|g| {
            g.instances
                .iter()
                .map(|(r, l, rt)| (g.provenance.clone(), *r, l.clone(), rt.clone()))
        })
        .collect()
}

fn predicted_keys(predicted: &[RelationInstance]) -> BTreeSet<Key> {
    predicted
        .iter()
        .map(|p| {
            (
                (p.case_id.clone(), p.utterance_index, p.sentence_index),
                p.relation,
                p.left.clone(),
                p.right.clone(),
            )
        })
        .collect()
}

/// Exact-triple scoring within the same sentence.
pub fn score(predicted: &[RelationInstance], gold: &[GoldAnnotation]) -> EvalReport {
    let pred = predicted_keys(predicted);
    let gold = gold_keys(gold);

    let overall = Scores::from_counts(pred.intersection(&gold).count(), pred.len(), gold.len());
    let mut per_relation = BTreeMap::new();
    for r in RelationType::ALL {
        let p: BTreeSet<_> = pred.iter().filter(|k| k.1 == r).collect();
        let g: BTreeSet<_> = gold.iter().filter(|k| k.1 == r).collect();
        if p.is_empty() && g.is_empty() {
            continue;
        }
        per_relation.insert(r, Scores::from_counts(p.intersection(&g).count(), p.len(), g.len()));
    }
    let macro_avg = if per_relation.is_empty() {
        Scores::default()
    } else {
        let n = per_relation.len() as f64;
        let mean = |f: fn(&Scores) -> f64| per_relation.values().map(f).sum::<f64>() / n;
        Scores {
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1: mean(|s| s.f1),
            ..overall
        }
    };
    EvalReport {
        overall,
        macro_avg,
        per_relation,
    }
}

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("gold file row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("gold file: {0}")]
    Csv(#[from] csv::Error),
}

/// Reads `case_id,utt,sent,relation,left,right` rows, grouped by sentence.
pub fn read_gold<R: Read>(reader: R) -> Result<Vec<GoldAnnotation>, GoldError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["case_id", "utt", "sent", "relation", "left", "right"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(GoldError::BadRow {
            row: 1,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }
    let mut grouped: BTreeMap<Provenance, BTreeSet<(RelationType, String, String)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |message: String| GoldError::BadRow { row, message };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("expected an index, got {s:?}")));
        let relation: RelationType = rec[3].parse().map_err(bad)?;
        for phrase in [&rec[4], &rec[5]] {
            if phrase.is_empty() || phrase.contains(char::is_whitespace) {
                return Err(bad(format!("phrase {phrase:?} must be non-empty and underscore-joined")));
            }
        }
        grouped
            .entry((rec[0].to_string(), num(&rec[1])?, num(&rec[2])?))
            .or_default()
            .insert((relation, rec[4].to_string(), rec[5].to_string()));
    }
    Ok(grouped
        .into_iter()
        .map(|(provenance, instances)| GoldAnnotation {
            provenance,
            instances,
        })
        .collect())
}
