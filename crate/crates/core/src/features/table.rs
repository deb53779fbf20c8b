use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Cell, Feature, FeatureError, FeatureVector, Result};
use crate::consensus::DifficultyLabel;

/// Category assigned to documents without a topic after imputation.
pub const UNKNOWN_TOPIC: &str = "UNKNOWN";

/// Ordered, non-empty subset of the feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(mut columns: Vec<Feature>) -> Result<Self> {
        columns.sort();
        columns.dedup();
        if columns.is_empty() {
            return Err(FeatureError::EmptySchema);
        }
        Ok(FeatureSchema { columns })
    }

    pub fn all() -> Self {
        FeatureSchema {
            columns: Feature::ALL.to_vec(),
        }
    }

    /// Everything except the temporal columns.
    pub fn without_temporal() -> Self {
        FeatureSchema {
            columns: Feature::ALL
                .into_iter()
                .filter(|f| !f.is_temporal())
                .collect(),
        }
    }

    /// Named presets or a comma-separated column list:
    /// `all`, `no-temporal`, `candid-num` (`m_cand` only), `ment-length`
    /// (`m_len` only), `pred-difficult` (no temporal columns, no topic).
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "all" | "multi" => Ok(Self::all()),
            "no-temporal" => Ok(Self::without_temporal()),
            "candid-num" => Self::new(vec![Feature::MCand]),
            "ment-length" => Self::new(vec![Feature::MLen]),
            "pred-difficult" => Self::new(
                Feature::ALL
                    .into_iter()
                    .filter(|f| !f.is_temporal() && *f != Feature::DTopic)
                    .collect(),
            ),
            list => Self::new(
                list.split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }

    pub fn columns(&self) -> &[Feature] {
        &self.columns
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.columns.contains(&f)
    }

    pub fn is_subset_of(&self, other: &FeatureSchema) -> bool {
        self.columns.iter().all(|c| other.contains(*c))
    }

    /// Drop columns not in `keep`.
    pub fn intersect(&self, keep: &FeatureSchema) -> Result<Self> {
        Self::new(
            self.columns
                .iter()
                .copied()
                .filter(|c| keep.contains(*c))
                .collect(),
        )
    }
}

impl FromStr for FeatureSchema {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Rows of feature vectors. Only the schema's columns carry meaning; the
/// remaining fields of each row are zero / empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureVector>,
}

const LABEL_COLUMN: &str = "label";

fn format_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl FeatureTable {
    pub fn new(schema: FeatureSchema, rows: Vec<FeatureVector>) -> Self {
        FeatureTable { schema, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Restrict to `schema` (which must be a subset of the current one).
    pub fn project(&self, schema: &FeatureSchema) -> Result<Self> {
        if !schema.is_subset_of(&self.schema) {
            return Err(FeatureError::Table(
                "projection asks for columns the table does not have".into(),
            ));
        }
        Ok(FeatureTable {
            schema: schema.clone(),
            rows: self.rows.clone(),
        })
    }

    pub fn labels(&self) -> Vec<Option<DifficultyLabel>> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// CSV with a header of the active column names followed by `label`.
    /// Missing values are empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header: Vec<&str> = self.schema.columns().iter().map(|c| c.name()).collect();
        header.push(LABEL_COLUMN);
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = self
                .schema
                .columns()
                .iter()
                .map(|&c| match row.cell(c) {
                    Cell::Num(v) => v.map(format_num).unwrap_or_default(),
                    Cell::Cat(v) => v.unwrap_or_default().to_string(),
                })
                .collect();
            rec.push(row.label.map(|l| l.to_string()).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = rdr.headers()?.clone();
        let mut columns = Vec::new();
        let mut label_at = None;
        for (i, h) in headers.iter().enumerate() {
            if h == LABEL_COLUMN {
                label_at = Some(i);
            } else {
                columns.push((i, h.parse::<Feature>()?));
            }
        }
        let schema = FeatureSchema::new(columns.iter().map(|c| c.1).collect())?;
        if schema.columns().len() != columns.len() {
            return Err(FeatureError::Table("duplicate column in header".into()));
        }
        let mut rows = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let bad = |m: String| FeatureError::Table(format!("line {line}: {m}"));
            let mut fv = FeatureVector::default();
            for &(i, col) in &columns {
                let raw = rec.get(i).unwrap_or("");
                if raw.is_empty() {
                    if !col.may_be_missing() {
                        return Err(bad(format!("{col} must not be empty")));
                    }
                    fv.missing_mask[col.index()] = true;
                    continue;
                }
                let num = || {
                    raw.parse::<f64>()
                        .map_err(|_| bad(format!("{col}: bad number {raw:?}")))
                };
                let count = || {
                    raw.parse::<usize>()
                        .map_err(|_| bad(format!("{col}: bad count {raw:?}")))
                };
                match col {
                    Feature::MLen => fv.m_len = count()?,
                    Feature::MWords => fv.m_words = count()?,
                    Feature::MFreq => fv.m_freq = count()?,
                    Feature::MDf => fv.m_df = count()?,
                    Feature::MCand => fv.m_cand = count()?,
                    Feature::MPos => fv.m_pos = num()?,
                    Feature::MSent => fv.m_sent = count()?,
                    Feature::DWords => fv.d_words = count()?,
                    Feature::DTopic => fv.d_topic = Some(raw.to_string()),
                    Feature::DEnts => fv.d_ents = count()?,
                    Feature::TAge => {
                        fv.t_age = raw
                            .parse()
                            .map_err(|_| bad(format!("t_age: bad integer {raw:?}")))?
                    }
                    Feature::TDf => fv.t_df = count()?,
                    Feature::TJMin => fv.t_j_min = Some(num()?),
                    Feature::TJMax => fv.t_j_max = Some(num()?),
                    Feature::TJAvg => fv.t_j_avg = Some(num()?),
                }
            }
            if let Some(i) = label_at {
                let raw = rec.get(i).unwrap_or("");
                if !raw.is_empty() {
                    fv.label = Some(raw.parse().map_err(|_| bad(format!("bad label {raw:?}")))?);
                }
            }
            rows.push(fv);
        }
        Ok(FeatureTable { schema, rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputePolicy {
    /// Column mean over the rows where the value is present.
    Mean,
    Constant(f64),
}

impl FromStr for ImputePolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "mean" => Ok(ImputePolicy::Mean),
            other => other
                .strip_prefix("constant:")
                .and_then(|v| v.parse().ok())
                .map(ImputePolicy::Constant)
                .ok_or_else(|| {
                    format!("unknown imputation policy {other:?}; use `mean` or `constant:<v>`")
                }),
        }
    }
}

/// Fill missing continuous values and replace a missing topic with
/// [`UNKNOWN_TOPIC`]. The missing mask is left untouched.
pub fn impute(table: &FeatureTable, policy: ImputePolicy) -> Result<FeatureTable> {
    if table.is_empty() {
        return Err(FeatureError::EmptyTable);
    }
    let mut out = table.clone();
    for &col in table.schema.columns() {
        match col {
            Feature::DTopic => {
                for row in &mut out.rows {
                    if row.d_topic.is_none() {
                        row.d_topic = Some(UNKNOWN_TOPIC.to_string());
                    }
                }
            }
            Feature::TJMin | Feature::TJMax | Feature::TJAvg => {
                let present: Vec<f64> = table.rows.iter().filter_map(|r| r.numeric(col)).collect();
                let fill = match policy {
                    ImputePolicy::Constant(v) => v,
                    ImputePolicy::Mean if present.is_empty() => {
                        return Err(FeatureError::AllMissing(col))
                    }
                    ImputePolicy::Mean => present.iter().sum::<f64>() / present.len() as f64,
                };
                for row in &mut out.rows {
                    let slot = match col {
                        Feature::TJMin => &mut row.t_j_min,
                        Feature::TJMax => &mut row.t_j_max,
                        _ => &mut row.t_j_avg,
                    };
                    slot.get_or_insert(fill);
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tj: Option<f64>) -> FeatureVector {
        let mut fv = FeatureVector {
            m_len: 5,
            m_words: 1,
            t_j_min: tj,
            t_j_max: tj,
            t_j_avg: tj,
            ..Default::default()
        };
        if tj.is_none() {
            fv.missing_mask[Feature::TJMin.index()] = true;
        }
        fv
    }

    fn table(values: &[Option<f64>]) -> FeatureTable {
        FeatureTable::new(
            FeatureSchema::all(),
            values.iter().map(|&v| row(v)).collect(),
        )
    }

    #[test]
    fn mean_imputation() {
        let t = impute(&table(&[Some(1.0), None, Some(3.0)]), ImputePolicy::Mean).unwrap();
        let col: Vec<f64> = t.rows.iter().map(|r| r.t_j_min.unwrap()).collect();
        assert_eq!(col, vec![1.0, 2.0, 3.0]);
        assert!(t.rows[1].is_missing(Feature::TJMin));
        assert_eq!(t.rows[0].d_topic.as_deref(), Some(UNKNOWN_TOPIC));
    }

    #[test]
    fn constant_imputation() {
        let t = impute(&table(&[Some(1.0), None]), ImputePolicy::Constant(0.0)).unwrap();
        assert_eq!(t.rows[1].t_j_avg, Some(0.0));
    }

    #[test]
    fn all_missing_column_fails_under_mean() {
        assert!(matches!(
            impute(&table(&[None, None]), ImputePolicy::Mean),
            Err(FeatureError::AllMissing(_))
        ));
        assert!(impute(&table(&[None, None]), ImputePolicy::Constant(0.5)).is_ok());
        assert!(matches!(
            impute(&table(&[]), ImputePolicy::Mean),
            Err(FeatureError::EmptyTable)
        ));
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        table(&[Some(0.5)]).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "m_len,m_words,m_freq,m_df,m_cand,m_pos,m_sent,d_words,d_topic,d_ents,t_age,t_df,t_j_min,t_j_max,t_j_avg,label"
        );
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "5,1,0,0,0,0,0,0,,0,0,0,0.5,0.5,0.5,"
        );
    }

    #[test]
    fn csv_round_trip_keeps_missing_and_labels() {
        let mut t = table(&[Some(0.25), None]);
        t.rows[0].label = Some(DifficultyLabel::Hard);
        t.rows[1].d_topic = Some("Arts, Culture".into());
        t.rows[1].m_pos = 0.123456789;
        t.rows[0].missing_mask[Feature::DTopic.index()] = true;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows[0].label, Some(DifficultyLabel::Hard));
        assert_eq!(back.rows[1].d_topic.as_deref(), Some("Arts, Culture"));
        assert_eq!(back.rows[1].t_j_min, None);
        assert!(back.rows[1].is_missing(Feature::TJMax));
        assert_eq!(
            back.rows,
            t.rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    // the mask of a read table reflects empty cells only
                    for f in Feature::ALL {
                        r.missing_mask[f.index()] =
                            r.cell(f) == Cell::Num(None) || r.cell(f) == Cell::Cat(None);
                    }
                    r
                })
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn schema_presets() {
        assert_eq!(
            FeatureSchema::parse("m_cand").unwrap().columns(),
            &[Feature::MCand]
        );
        assert_eq!(
            FeatureSchema::parse("candid-num").unwrap(),
            FeatureSchema::parse("m_cand").unwrap()
        );
        assert!(FeatureSchema::without_temporal()
            .columns()
            .iter()
            .all(|c| !c.is_temporal()));
        assert_eq!(
            FeatureSchema::parse("m_len, m_cand").unwrap().columns(),
            &[Feature::MLen, Feature::MCand]
        );
        assert!(FeatureSchema::parse("").is_err());
        assert!(FeatureSchema::new(vec![]).is_err());
    }

    #[test]
    fn projected_table_writes_single_column() {
        let t = table(&[Some(0.5)])
            .project(&FeatureSchema::parse("m_cand").unwrap())
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "m_cand,label\n0,\n");
        let back = FeatureTable::read_csv("m_cand,label\n3,EASY\n".as_bytes()).unwrap();
        assert_eq!(back.schema.columns(), &[Feature::MCand]);
        assert_eq!(back.rows[0].m_cand, 3);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("mean".parse::<ImputePolicy>().unwrap(), ImputePolicy::Mean);
        assert_eq!(
            "constant:0".parse::<ImputePolicy>().unwrap(),
            ImputePolicy::Constant(0.0)
        );
        assert!("median".parse::<ImputePolicy>().is_err());
    }
}
