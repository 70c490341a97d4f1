//! File I/O and validation: instance/rating files in, score files out.
//!
//! JSONL is the canonical encoding; TSV is an import convenience with a
//! header row and no quoting. A missing reference is encoded as an absent
//! field. On import an empty reference cell (TSV) or empty reference string
//! (JSONL) is normalized to absent, so both encodings of the same data load
//! identically.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate translation for one segment from one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationInstance {
    pub segment_id: String,
    pub system_id: String,
    pub lang_pair: String,
    pub source: String,
    pub candidate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// Annotation protocol the rating was collected under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RatingScale {
    #[serde(rename = "DA")]
    Da,
    #[serde(rename = "MQM")]
    Mqm,
    #[serde(rename = "SQM")]
    Sqm,
    #[serde(rename = "ESA")]
    Esa,
}

impl RatingScale {
    pub const ALL: [RatingScale; 4] = [
        RatingScale::Da,
        RatingScale::Mqm,
        RatingScale::Sqm,
        RatingScale::Esa,
    ];

    /// Upper end of the valid value range (lower end is 0 for all scales).
    pub fn max_value(self) -> f64 {
        match self {
            RatingScale::Mqm => 25.0,
            _ => 100.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RatingScale::Da => "DA",
            RatingScale::Mqm => "MQM",
            RatingScale::Sqm => "SQM",
            RatingScale::Esa => "ESA",
        }
    }
}

impl std::str::FromStr for RatingScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DA" => Ok(RatingScale::Da),
            "MQM" => Ok(RatingScale::Mqm),
            "SQM" => Ok(RatingScale::Sqm),
            "ESA" => Ok(RatingScale::Esa),
            other => Err(Error::Config(format!(
                "unknown scale {other:?} (expected DA, MQM, SQM, or ESA)"
            ))),
        }
    }
}

impl std::fmt::Display for RatingScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether larger raw values mean better or worse translations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    Penalty,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::HigherBetter => "higher_better",
            Orientation::Penalty => "penalty",
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher_better" => Ok(Orientation::HigherBetter),
            "penalty" => Ok(Orientation::Penalty),
            other => Err(Error::Config(format!(
                "unknown orientation {other:?} (expected higher_better or penalty)"
            ))),
        }
    }
}

/// A raw human quality judgment for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRating {
    pub segment_id: String,
    pub system_id: String,
    pub value: f64,
    pub scale: RatingScale,
    pub orientation: Orientation,
}

/// Metric and human scores for one language pair, systems × segments.
/// A cell is comparable only when both entries are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub lang_pair: String,
    pub systems: Vec<String>,
    pub segments: Vec<String>,
    pub metric: Vec<Vec<Option<f64>>>,
    pub human: Vec<Vec<Option<f64>>>,
}

impl ScoreMatrix {
    pub fn new(
        lang_pair: String,
        systems: Vec<String>,
        segments: Vec<String>,
        metric: Vec<Vec<Option<f64>>>,
        human: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let rows = systems.len();
        let cols = segments.len();
        let shape_ok = |m: &[Vec<Option<f64>>]| m.len() == rows && m.iter().all(|r| r.len() == cols);
        if !shape_ok(&metric) || !shape_ok(&human) {
            return Err(Error::Contract(format!(
                "score matrix for {lang_pair} must be {rows}×{cols} in both metric and human"
            )));
        }
        Ok(ScoreMatrix {
            lang_pair,
            systems,
            segments,
            metric,
            human,
        })
    }

    /// True when both metric and human scores exist for (system, segment).
    pub fn comparable(&self, sys: usize, seg: usize) -> bool {
        self.metric[sys][seg].is_some() && self.human[sys][seg].is_some()
    }
}

/// One scored instance as written by `write_scores`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub segment_id: String,
    pub system_id: String,
    pub lang_pair: String,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated: Option<f64>,
}

/// On-disk encodings accepted by the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Jsonl,
    Tsv,
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(FileFormat::Jsonl),
            "tsv" => Ok(FileFormat::Tsv),
            other => Err(Error::Config(format!(
                "unknown format {other:?} (expected jsonl or tsv)"
            ))),
        }
    }
}

/// All fields optional so presence can be validated with exact line numbers.
#[derive(Debug, Default, Deserialize)]
struct RawRecord {
    segment_id: Option<String>,
    system_id: Option<String>,
    lang_pair: Option<String>,
    source: Option<String>,
    candidate: Option<String>,
    reference: Option<String>,
    rating: Option<f64>,
    scale: Option<String>,
    orientation: Option<String>,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn missing(line: usize, field: &str) -> Error {
    Error::Schema {
        line,
        message: format!("missing field {field:?}"),
    }
}

fn required(line: usize, field: &str, value: Option<String>) -> Result<String> {
    value.ok_or_else(|| missing(line, field))
}

fn parse_jsonl_record(line_no: usize, line: &str) -> Result<RawRecord> {
    serde_json::from_str(line).map_err(|e| Error::Schema {
        line: line_no,
        message: e.to_string(),
    })
}

fn parse_tsv_records(text: &str) -> Result<Vec<(usize, RawRecord)>> {
    let mut lines = numbered_lines(text);
    let Some((header_line, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    const KNOWN: [&str; 9] = [
        "segment_id",
        "system_id",
        "lang_pair",
        "source",
        "candidate",
        "reference",
        "rating",
        "scale",
        "orientation",
    ];
    for col in &columns {
        if !KNOWN.contains(col) {
            return Err(Error::Schema {
                line: header_line,
                message: format!("unknown column {col:?}"),
            });
        }
    }
    let mut records = Vec::new();
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(Error::Schema {
                line: line_no,
                message: format!(
                    "expected {} tab-separated cells, found {}",
                    columns.len(),
                    cells.len()
                ),
            });
        }
        let mut raw = RawRecord::default();
        for (col, cell) in columns.iter().zip(&cells) {
            let value = (!cell.is_empty()).then(|| (*cell).to_string());
            match *col {
                "segment_id" => raw.segment_id = value,
                "system_id" => raw.system_id = value,
                "lang_pair" => raw.lang_pair = value,
                "source" => raw.source = value,
                // An empty candidate cell is a present-but-empty translation.
                "candidate" => raw.candidate = Some((*cell).to_string()),
                "reference" => raw.reference = value,
                "rating" => {
                    raw.rating = match value {
                        None => None,
                        Some(v) => Some(v.parse::<f64>().map_err(|_| Error::Schema {
                            line: line_no,
                            message: format!("rating {v:?} is not a number"),
                        })?),
                    }
                }
                "scale" => raw.scale = value,
                "orientation" => raw.orientation = value,
                _ => unreachable!(),
            }
        }
        records.push((line_no, raw));
    }
    Ok(records)
}

fn read_records(path: &Path, format: FileFormat) -> Result<Vec<(usize, RawRecord)>> {
    let text = read_file(path)?;
    match format {
        FileFormat::Jsonl => numbered_lines(&text)
            .map(|(n, l)| parse_jsonl_record(n, l).map(|r| (n, r)))
            .collect(),
        FileFormat::Tsv => parse_tsv_records(&text),
    }
}

fn instance_from_raw(line: usize, raw: &mut RawRecord) -> Result<TranslationInstance> {
    let instance = TranslationInstance {
        segment_id: required(line, "segment_id", raw.segment_id.take())?,
        system_id: required(line, "system_id", raw.system_id.take())?,
        lang_pair: required(line, "lang_pair", raw.lang_pair.take())?,
        source: required(line, "source", raw.source.take())?,
        candidate: required(line, "candidate", raw.candidate.take())?,
        reference: raw.reference.take().filter(|r| !r.is_empty()),
    };
    if instance.source.is_empty() {
        return Err(Error::Schema {
            line,
            message: "source must be non-empty".to_string(),
        });
    }
    Ok(instance)
}

fn rating_from_raw(
    line: usize,
    instance: &TranslationInstance,
    raw: &mut RawRecord,
) -> Result<HumanRating> {
    let value = raw.rating.take().ok_or_else(|| missing(line, "rating"))?;
    let scale = required(line, "scale", raw.scale.take())?
        .parse::<RatingScale>()
        .map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
    let orientation = required(line, "orientation", raw.orientation.take())?
        .parse::<Orientation>()
        .map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
    if !value.is_finite() || value < 0.0 || value > scale.max_value() {
        return Err(Error::Range {
            line,
            message: format!(
                "{} rating {} outside [0, {}]",
                scale,
                value,
                scale.max_value()
            ),
        });
    }
    Ok(HumanRating {
        segment_id: instance.segment_id.clone(),
        system_id: instance.system_id.clone(),
        value,
        scale,
        orientation,
    })
}

/// Deduplicate instances by (segment_id, system_id); exact duplicates are
/// dropped, textual disagreements are conflicts.
fn push_instance(
    out: &mut Vec<TranslationInstance>,
    seen: &mut HashMap<(String, String), usize>,
    instance: TranslationInstance,
) -> Result<()> {
    let key = (instance.segment_id.clone(), instance.system_id.clone());
    match seen.get(&key) {
        Some(&i) => {
            if out[i] != instance {
                return Err(Error::Conflict(format!(
                    "instance ({}, {}) appears twice with different content",
                    key.0, key.1
                )));
            }
        }
        None => {
            seen.insert(key, out.len());
            out.push(instance);
        }
    }
    Ok(())
}

/// Deduplicate ratings by (segment_id, system_id, scale).
fn push_rating(
    out: &mut Vec<HumanRating>,
    seen: &mut HashMap<(String, String, RatingScale), usize>,
    rating: HumanRating,
) -> Result<()> {
    let key = (
        rating.segment_id.clone(),
        rating.system_id.clone(),
        rating.scale,
    );
    match seen.get(&key) {
        Some(&i) => {
            if out[i] != rating {
                return Err(Error::Conflict(format!(
                    "rating ({}, {}, {}) appears twice with different values",
                    key.0, key.1, key.2
                )));
            }
        }
        None => {
            seen.insert(key, out.len());
            out.push(rating);
        }
    }
    Ok(())
}

/// Load a training file where every record carries both an instance and its
/// rating. Validates ranges, deduplicates, and rejects conflicts.
pub fn load_ratings(
    path: &Path,
    format: FileFormat,
) -> Result<(Vec<TranslationInstance>, Vec<HumanRating>)> {
    let mut instances = Vec::new();
    let mut ratings = Vec::new();
    let mut seen_instances = HashMap::new();
    let mut seen_ratings = HashMap::new();
    for (line, mut raw) in read_records(path, format)? {
        let instance = instance_from_raw(line, &mut raw)?;
        let rating = rating_from_raw(line, &instance, &mut raw)?;
        push_instance(&mut instances, &mut seen_instances, instance)?;
        push_rating(&mut ratings, &mut seen_ratings, rating)?;
    }
    Ok((instances, ratings))
}

/// Load a scoring input where rating fields are optional. Records that do
/// carry a rating must carry all three rating fields.
pub fn load_instances(
    path: &Path,
    format: FileFormat,
) -> Result<(Vec<TranslationInstance>, Vec<HumanRating>)> {
    let mut instances = Vec::new();
    let mut ratings = Vec::new();
    let mut seen_instances = HashMap::new();
    let mut seen_ratings = HashMap::new();
    for (line, mut raw) in read_records(path, format)? {
        let instance = instance_from_raw(line, &mut raw)?;
        let has_any_rating_field =
            raw.rating.is_some() || raw.scale.is_some() || raw.orientation.is_some();
        if has_any_rating_field {
            let rating = rating_from_raw(line, &instance, &mut raw)?;
            push_rating(&mut ratings, &mut seen_ratings, rating)?;
        }
        push_instance(&mut instances, &mut seen_instances, instance)?;
    }
    Ok((instances, ratings))
}

/// Write one score record per instance, sorted by (lang_pair, segment_id,
/// system_id) so output is deterministic regardless of input order.
pub fn write_scores(
    instances: &[TranslationInstance],
    rewards: &[f64],
    calibrated: Option<&[f64]>,
    path: &Path,
) -> Result<()> {
    if rewards.len() != instances.len() {
        return Err(Error::Alignment(format!(
            "{} instances but {} rewards",
            instances.len(),
            rewards.len()
        )));
    }
    if let Some(c) = calibrated {
        if c.len() != instances.len() {
            return Err(Error::Alignment(format!(
                "{} instances but {} calibrated scores",
                instances.len(),
                c.len()
            )));
        }
    }
    let mut records: Vec<ScoreRecord> = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| ScoreRecord {
            segment_id: inst.segment_id.clone(),
            system_id: inst.system_id.clone(),
            lang_pair: inst.lang_pair.clone(),
            reward: rewards[i],
            calibrated: calibrated.map(|c| c[i]),
        })
        .collect();
    records.sort_by(|a, b| {
        (&a.lang_pair, &a.segment_id, &a.system_id).cmp(&(
            &b.lang_pair,
            &b.segment_id,
            &b.system_id,
        ))
    });
    let mut out = String::new();
    for record in &records {
        // serde_json cannot fail on this struct; surface it as a contract
        // violation rather than unwrapping.
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Contract(format!("score serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write instances joined with their ratings as training JSONL: one line
/// per (instance, rating), or a bare instance line when unrated. Sorted
/// by (lang_pair, segment_id, system_id, scale).
pub fn write_ratings(
    instances: &[TranslationInstance],
    ratings: &[HumanRating],
    path: &Path,
) -> Result<()> {
    #[derive(Clone, Copy, Serialize)]
    struct Line<'a> {
        segment_id: &'a str,
        system_id: &'a str,
        lang_pair: &'a str,
        source: &'a str,
        candidate: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        reference: Option<&'a str>,
        #[serde(skip_serializing_if = "Option::is_none")]
        rating: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        scale: Option<&'a str>,
        #[serde(skip_serializing_if = "Option::is_none")]
        orientation: Option<&'a str>,
    }
    let mut by_key: HashMap<(&str, &str), Vec<&HumanRating>> = HashMap::new();
    for rating in ratings {
        by_key
            .entry((rating.segment_id.as_str(), rating.system_id.as_str()))
            .or_default()
            .push(rating);
    }
    for list in by_key.values_mut() {
        list.sort_by_key(|r| r.scale.as_str());
    }
    let mut sorted: Vec<&TranslationInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.lang_pair, &a.segment_id, &a.system_id).cmp(&(
            &b.lang_pair,
            &b.segment_id,
            &b.system_id,
        ))
    });
    let mut out = String::new();
    for inst in sorted {
        let base = Line {
            segment_id: &inst.segment_id,
            system_id: &inst.system_id,
            lang_pair: &inst.lang_pair,
            source: &inst.source,
            candidate: &inst.candidate,
            reference: inst.reference.as_deref(),
            rating: None,
            scale: None,
            orientation: None,
        };
        let lines: Vec<Line> = match by_key.get(&(inst.segment_id.as_str(), inst.system_id.as_str()))
        {
            Some(list) if !list.is_empty() => list
                .iter()
                .map(|r| Line {
                    rating: Some(r.value),
                    scale: Some(r.scale.as_str()),
                    orientation: Some(r.orientation.as_str()),
                    ..base
                })
                .collect(),
            _ => vec![base],
        };
        for line in lines {
            let encoded = serde_json::to_string(&line)
                .map_err(|e| Error::Contract(format!("rating serialization failed: {e}")))?;
            out.push_str(&encoded);
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a score file produced by `write_scores`.
pub fn load_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = read_file(path)?;
    numbered_lines(&text)
        .map(|(line, l)| {
            serde_json::from_str(l).map_err(|e| Error::Schema {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().expect("create temp file");
        f.write_all(contents.as_bytes()).expect("write temp file");
        f
    }

    fn record(seg: &str, sys: &str, rating: f64) -> String {
        format!(
            r#"{{"segment_id":"{seg}","system_id":"{sys}","lang_pair":"en-de","source":"src text","candidate":"cand {sys}","reference":"ref text","rating":{rating},"scale":"DA","orientation":"higher_better"}}"#
        )
    }

    #[test]
    fn loads_well_formed_jsonl() {
        let f = write_temp(&format!(
            "{}\n{}\n{}\n",
            record("s1", "a", 80.0),
            record("s1", "b", 50.0),
            record("s2", "a", 30.0)
        ));
        let (instances, ratings) = load_ratings(f.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(instances.len(), 3);
        assert_eq!(ratings.len(), 3);
        assert_eq!(instances[0].segment_id, "s1");
        assert_eq!(instances[0].reference.as_deref(), Some("ref text"));
        assert_eq!(ratings[1].value, 50.0);
        assert_eq!(ratings[2].scale, RatingScale::Da);
    }

    #[test]
    fn out_of_range_da_names_line() {
        let f = write_temp(&format!("{}\n{}\n", record("s1", "a", 80.0), record("s1", "b", 120.0)));
        let err = load_ratings(f.path(), FileFormat::Jsonl).unwrap_err();
        match err {
            Error::Range { line, .. } => assert_eq!(line, 2),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn mqm_range_is_zero_to_twenty_five() {
        let good = r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"x","candidate":"y","rating":25,"scale":"MQM","orientation":"penalty"}"#;
        let bad = good.replace(":25,", ":25.5,");
        let f = write_temp(&format!("{good}\n"));
        assert!(load_ratings(f.path(), FileFormat::Jsonl).is_ok());
        let f = write_temp(&format!("{bad}\n"));
        assert!(matches!(
            load_ratings(f.path(), FileFormat::Jsonl),
            Err(Error::Range { line: 1, .. })
        ));
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","candidate":"y","rating":10,"scale":"DA","orientation":"higher_better"}"#,
        );
        let err = load_ratings(f.path(), FileFormat::Jsonl).unwrap_err();
        match err {
            Error::Schema { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("source"), "message: {message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn empty_source_rejected() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"","candidate":"y","rating":10,"scale":"DA","orientation":"higher_better"}"#,
        );
        assert!(matches!(
            load_ratings(f.path(), FileFormat::Jsonl),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn empty_candidate_allowed() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"x","candidate":"","rating":10,"scale":"DA","orientation":"higher_better"}"#,
        );
        let (instances, _) = load_ratings(f.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(instances[0].candidate, "");
    }

    #[test]
    fn exact_duplicates_dedupe_conflicts_error() {
        let dup = record("s1", "a", 80.0);
        let f = write_temp(&format!("{dup}\n{dup}\n"));
        let (instances, ratings) = load_ratings(f.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(ratings.len(), 1);

        let conflict = record("s1", "a", 80.0).replace("cand a", "other text");
        let f = write_temp(&format!("{dup}\n{conflict}\n"));
        assert!(matches!(
            load_ratings(f.path(), FileFormat::Jsonl),
            Err(Error::Conflict(_))
        ));

        let conflict = record("s1", "a", 60.0);
        let f = write_temp(&format!("{dup}\n{conflict}\n"));
        assert!(matches!(
            load_ratings(f.path(), FileFormat::Jsonl),
            Err(Error::Conflict(_))
        ));
    }

    #[test]
    fn tsv_and_jsonl_load_identically() {
        let jsonl = write_temp(&format!("{}\n{}\n", record("s1", "a", 80.0), record("s1", "b", 50.0)));
        let tsv = write_temp(concat!(
            "segment_id\tsystem_id\tlang_pair\tsource\tcandidate\treference\trating\tscale\torientation\n",
            "s1\ta\ten-de\tsrc text\tcand a\tref text\t80\tDA\thigher_better\n",
            "s1\tb\ten-de\tsrc text\tcand b\tref text\t50\tDA\thigher_better\n",
        ));
        let from_jsonl = load_ratings(jsonl.path(), FileFormat::Jsonl).unwrap();
        let from_tsv = load_ratings(tsv.path(), FileFormat::Tsv).unwrap();
        assert_eq!(from_jsonl, from_tsv);
    }

    #[test]
    fn tsv_empty_reference_is_absent() {
        let tsv = write_temp(concat!(
            "segment_id\tsystem_id\tlang_pair\tsource\tcandidate\treference\trating\tscale\torientation\n",
            "s1\ta\ten-de\tsrc\tcand\t\t80\tDA\thigher_better\n",
        ));
        let (instances, _) = load_ratings(tsv.path(), FileFormat::Tsv).unwrap();
        assert_eq!(instances[0].reference, None);
    }

    #[test]
    fn jsonl_empty_reference_is_absent() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"x","candidate":"y","reference":"","rating":10,"scale":"DA","orientation":"higher_better"}"#,
        );
        let (instances, _) = load_ratings(f.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(instances[0].reference, None);
    }

    #[test]
    fn tsv_cell_count_mismatch_names_line() {
        let tsv = write_temp(concat!(
            "segment_id\tsystem_id\tlang_pair\tsource\tcandidate\n",
            "s1\ta\ten-de\tsrc\n",
        ));
        assert!(matches!(
            load_instances(tsv.path(), FileFormat::Tsv),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn load_instances_accepts_unrated_records() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"x","candidate":"y"}"#,
        );
        let (instances, ratings) = load_instances(f.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(instances.len(), 1);
        assert!(ratings.is_empty());
    }

    #[test]
    fn load_instances_rejects_partial_rating() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"x","candidate":"y","rating":10}"#,
        );
        assert!(matches!(
            load_instances(f.path(), FileFormat::Jsonl),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn load_ratings_requires_rating_fields() {
        let f = write_temp(
            r#"{"segment_id":"s","system_id":"a","lang_pair":"en-de","source":"x","candidate":"y"}"#,
        );
        assert!(matches!(
            load_ratings(f.path(), FileFormat::Jsonl),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_ratings(Path::new("/nonexistent/r.jsonl"), FileFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    fn sample_instances() -> Vec<TranslationInstance> {
        vec![
            TranslationInstance {
                segment_id: "s2".into(),
                system_id: "a".into(),
                lang_pair: "en-de".into(),
                source: "x".into(),
                candidate: "y".into(),
                reference: None,
            },
            TranslationInstance {
                segment_id: "s1".into(),
                system_id: "a".into(),
                lang_pair: "en-de".into(),
                source: "x".into(),
                candidate: "z".into(),
                reference: Some("r".into()),
            },
        ]
    }

    #[test]
    fn write_scores_sorts_and_omits_absent_calibrated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        write_scores(&sample_instances(), &[0.1, -0.2], None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        // Sorted by segment_id: s1 (reward -0.2) before s2 (reward 0.1).
        assert!(lines[0].contains(r#""segment_id":"s1""#));
        assert!(lines[0].contains("-0.2"));
        assert!(lines[1].contains("0.1"));
        assert!(!text.contains("calibrated"));
    }

    #[test]
    fn write_then_load_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        let rewards = [0.1 + 0.2, -1.0 / 3.0];
        let calibrated = [std::f64::consts::PI, 1e-300];
        write_scores(&sample_instances(), &rewards, Some(&calibrated), &path).unwrap();
        let records = load_scores(&path).unwrap();
        // Sorted order puts s1 first; rewards follow their instances.
        assert_eq!(records[0].reward, rewards[1]);
        assert_eq!(records[1].reward, rewards[0]);
        assert_eq!(records[0].calibrated, Some(calibrated[1]));
        assert_eq!(records[1].calibrated, Some(calibrated[0]));

        // Idempotence: writing what was loaded reproduces the bytes.
        let text_a = std::fs::read_to_string(&path).unwrap();
        let reloaded = load_scores(&path).unwrap();
        let path_b = dir.path().join("scores2.jsonl");
        let mut out = String::new();
        for r in &reloaded {
            out.push_str(&serde_json::to_string(r).unwrap());
            out.push('\n');
        }
        std::fs::write(&path_b, &out).unwrap();
        assert_eq!(text_a, std::fs::read_to_string(&path_b).unwrap());
    }

    #[test]
    fn write_scores_length_mismatch_is_alignment_error() {
        let err = write_scores(
            &sample_instances(),
            &[0.1],
            None,
            Path::new("/tmp/unused.jsonl"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn write_ratings_round_trips_through_load_ratings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rated.jsonl");
        let instances = sample_instances();
        let ratings = vec![
            HumanRating {
                segment_id: instances[0].segment_id.clone(),
                system_id: instances[0].system_id.clone(),
                value: 81.5,
                scale: RatingScale::Da,
                orientation: Orientation::HigherBetter,
            },
            HumanRating {
                segment_id: instances[0].segment_id.clone(),
                system_id: instances[0].system_id.clone(),
                value: 0.2,
                scale: RatingScale::Mqm,
                orientation: Orientation::Penalty,
            },
            HumanRating {
                segment_id: instances[1].segment_id.clone(),
                system_id: instances[1].system_id.clone(),
                value: 40.0,
                scale: RatingScale::Da,
                orientation: Orientation::HigherBetter,
            },
        ];
        write_ratings(&instances, &ratings, &path).unwrap();
        let (loaded_instances, loaded_ratings) = load_ratings(&path, FileFormat::Jsonl).unwrap();
        let mut expected = instances.clone();
        expected.sort_by(|a, b| {
            (&a.lang_pair, &a.segment_id, &a.system_id).cmp(&(
                &b.lang_pair,
                &b.segment_id,
                &b.system_id,
            ))
        });
        assert_eq!(loaded_instances, expected);
        assert_eq!(loaded_ratings.len(), ratings.len());
        for rating in &ratings {
            assert!(loaded_ratings.contains(rating));
        }
    }

    #[test]
    fn unrated_instances_write_bare_lines_for_load_instances() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bare.jsonl");
        let instances = sample_instances();
        write_ratings(&instances, &[], &path).unwrap();
        let (loaded, ratings) = load_instances(&path, FileFormat::Jsonl).unwrap();
        assert_eq!(loaded.len(), instances.len());
        assert!(ratings.is_empty());
        assert!(matches!(
            load_ratings(&path, FileFormat::Jsonl),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn score_matrix_shape_is_validated() {
        let ok = ScoreMatrix::new(
            "en-de".into(),
            vec!["a".into(), "b".into()],
            vec!["s1".into()],
            vec![vec![Some(1.0)], vec![None]],
            vec![vec![Some(2.0)], vec![Some(3.0)]],
        )
        .unwrap();
        assert!(ok.comparable(0, 0));
        assert!(!ok.comparable(1, 0));

        let bad = ScoreMatrix::new(
            "en-de".into(),
            vec!["a".into()],
            vec!["s1".into()],
            vec![vec![Some(1.0), Some(2.0)]],
            vec![vec![Some(2.0)]],
        );
        assert!(matches!(bad, Err(Error::Contract(_))));
    }
}
