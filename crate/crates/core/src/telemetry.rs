//! Telemetry data model, CSV ingestion and identifier scrambling.
//!
//! A [`Sample`] is one four-second summary of the link between a UE and its
//! primary serving cell. Integer-coded fields (frequency band, speed range,
//! time interval) are stored as `f64` so that normalized datasets can reuse
//! the same record type.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type CellId = u64;
pub type UeId = u64;

/// Timing advance granularity in meters.
pub const TA_STEP_M: f64 = 78.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Problematic,
}

impl Label {
    pub fn is_problematic(self) -> bool {
        self == Label::Problematic
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Problematic => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Problematic => "problematic",
        })
    }
}

/// Model input features, in CSV column order (identifiers excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    CellDataRateKbps,
    Cqi,
    ErabDurationS,
    FrequencyBand,
    LoadActive,
    Prb,
    RsrpDbm,
    RsrqDb,
    SpeedRange,
    ThroughputKbps,
    TimeInterval,
    TimingAdvanceM,
    TtiPrbUse,
}

#[derive(Debug, Clone, Copy)]
enum Domain {
    NonNegative,
    Range(f64, f64),
    NonNegativeInteger,
    IntegerRange(f64, f64),
    TimingAdvance,
}

impl Feature {
    pub const COUNT: usize = 13;

    pub const ALL: [Feature; Feature::COUNT] = [
        Feature::CellDataRateKbps,
        Feature::Cqi,
        Feature::ErabDurationS,
        Feature::FrequencyBand,
        Feature::LoadActive,
        Feature::Prb,
        Feature::RsrpDbm,
        Feature::RsrqDb,
        Feature::SpeedRange,
        Feature::ThroughputKbps,
        Feature::TimeInterval,
        Feature::TimingAdvanceM,
        Feature::TtiPrbUse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::CellDataRateKbps => "cell_data_rate_kbps",
            Feature::Cqi => "cqi",
            Feature::ErabDurationS => "erab_duration_s",
            Feature::FrequencyBand => "frequency_band",
            Feature::LoadActive => "load_active",
            Feature::Prb => "prb",
            Feature::RsrpDbm => "rsrp_dbm",
            Feature::RsrqDb => "rsrq_db",
            Feature::SpeedRange => "speed_range",
            Feature::ThroughputKbps => "throughput_kbps",
            Feature::TimeInterval => "time_interval",
            Feature::TimingAdvanceM => "timing_advance_m",
            Feature::TtiPrbUse => "tti_prb_use",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn domain(self) -> Domain {
        match self {
            Feature::CellDataRateKbps
            | Feature::ErabDurationS
            | Feature::LoadActive
            | Feature::ThroughputKbps => Domain::NonNegative,
            Feature::Cqi => Domain::Range(0.0, 15.0),
            Feature::Prb | Feature::TtiPrbUse => Domain::Range(0.0, 100.0),
            // Physically RSRP is negative in dBm.
            Feature::RsrpDbm => Domain::Range(-140.0, -44.0),
            Feature::RsrqDb => Domain::Range(-19.5, -3.0),
            Feature::FrequencyBand => Domain::NonNegativeInteger,
            Feature::SpeedRange => Domain::IntegerRange(1.0, 3.0),
            Feature::TimeInterval => Domain::IntegerRange(1.0, 4.0),
            Feature::TimingAdvanceM => Domain::TimingAdvance,
        }
    }
}

/// Column names of the telemetry CSV, in order.
pub const CSV_HEADER: [&str; 15] = [
    "cell_id",
    "ue_id",
    "cell_data_rate_kbps",
    "cqi",
    "erab_duration_s",
    "frequency_band",
    "load_active",
    "prb",
    "rsrp_dbm",
    "rsrq_db",
    "speed_range",
    "throughput_kbps",
    "time_interval",
    "timing_advance_m",
    "tti_prb_use",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub cell_id: CellId,
    pub ue_id: UeId,
    pub cell_data_rate_kbps: f64,
    pub cqi: f64,
    pub erab_duration_s: f64,
    pub frequency_band: f64,
    pub load_active: f64,
    pub prb: f64,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub speed_range: f64,
    pub throughput_kbps: f64,
    pub time_interval: f64,
    pub timing_advance_m: f64,
    pub tti_prb_use: f64,
}

impl Sample {
    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::CellDataRateKbps => self.cell_data_rate_kbps,
            Feature::Cqi => self.cqi,
            Feature::ErabDurationS => self.erab_duration_s,
            Feature::FrequencyBand => self.frequency_band,
            Feature::LoadActive => self.load_active,
            Feature::Prb => self.prb,
            Feature::RsrpDbm => self.rsrp_dbm,
            Feature::RsrqDb => self.rsrq_db,
            Feature::SpeedRange => self.speed_range,
            Feature::ThroughputKbps => self.throughput_kbps,
            Feature::TimeInterval => self.time_interval,
            Feature::TimingAdvanceM => self.timing_advance_m,
            Feature::TtiPrbUse => self.tti_prb_use,
        }
    }

    pub fn get_mut(&mut self, feature: Feature) -> &mut f64 {
        match feature {
            Feature::CellDataRateKbps => &mut self.cell_data_rate_kbps,
            Feature::Cqi => &mut self.cqi,
            Feature::ErabDurationS => &mut self.erab_duration_s,
            Feature::FrequencyBand => &mut self.frequency_band,
            Feature::LoadActive => &mut self.load_active,
            Feature::Prb => &mut self.prb,
            Feature::RsrpDbm => &mut self.rsrp_dbm,
            Feature::RsrqDb => &mut self.rsrq_db,
            Feature::SpeedRange => &mut self.speed_range,
            Feature::ThroughputKbps => &mut self.throughput_kbps,
            Feature::TimeInterval => &mut self.time_interval,
            Feature::TimingAdvanceM => &mut self.timing_advance_m,
            Feature::TtiPrbUse => &mut self.tti_prb_use,
        }
    }

    /// Feature vector in [`Feature::ALL`] order.
    pub fn features(&self) -> [f64; Feature::COUNT] {
        Feature::ALL.map(|f| self.get(f))
    }

    /// Checks every field against its raw-unit domain.
    pub fn validate(&self, row: usize) -> Result<()> {
        for feature in Feature::ALL {
            check_value(feature, self.get(feature), row)?;
        }
        Ok(())
    }

    /// Projects every field into its raw-unit domain.
    pub fn clamp(&mut self) {
        for feature in Feature::ALL {
            let v = self.get_mut(feature);
            *v = clamp_value(feature, *v);
        }
    }
}

fn check_value(feature: Feature, v: f64, row: usize) -> Result<()> {
    let fail = |expected: &str| Error::OutOfRange {
        row,
        field: feature.name().to_string(),
        value: v,
        expected: expected.to_string(),
    };
    if !v.is_finite() {
        return Err(fail("finite"));
    }
    match feature.domain() {
        Domain::NonNegative if v < 0.0 => Err(fail(">= 0")),
        Domain::Range(lo, hi) if v < lo || v > hi => Err(fail(&format!("[{lo}, {hi}]"))),
        Domain::NonNegativeInteger if v < 0.0 || v.fract() != 0.0 => {
            Err(fail("non-negative integer"))
        }
        Domain::IntegerRange(lo, hi) if v < lo || v > hi || v.fract() != 0.0 => {
            Err(fail(&format!("integer in [{lo}, {hi}]")))
        }
        Domain::TimingAdvance => {
            let steps = v / TA_STEP_M;
            if v < 0.0 || (v - steps.round() * TA_STEP_M).abs() > 1e-9 {
                Err(fail("non-negative multiple of 78"))
            } else {
                Ok(())
            }
        }
        _ => Ok(()),
    }
}

fn clamp_value(feature: Feature, v: f64) -> f64 {
    match feature.domain() {
        Domain::NonNegative => v.max(0.0),
        Domain::Range(lo, hi) => v.clamp(lo, hi),
        Domain::NonNegativeInteger => v.round().max(0.0),
        Domain::IntegerRange(lo, hi) => v.round().clamp(lo, hi),
        Domain::TimingAdvance => (v / TA_STEP_M).round().max(0.0) * TA_STEP_M,
    }
}

/// How out-of-range values are treated when loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validation {
    #[default]
    Strict,
    Clamp,
}

/// Samples grouped by cell, with optional expert labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellDataset {
    pub samples: Vec<Sample>,
    pub labels: BTreeMap<CellId, Label>,
}

impl CellDataset {
    /// Builds a dataset, checking that every labeled cell has samples.
    pub fn new(samples: Vec<Sample>, labels: BTreeMap<CellId, Label>) -> Result<Self> {
        let ds = CellDataset { samples, labels };
        ds.check_labels()?;
        Ok(ds)
    }

    pub fn unlabeled(samples: Vec<Sample>) -> Self {
        CellDataset {
            samples,
            labels: BTreeMap::new(),
        }
    }

    pub fn with_labels(mut self, labels: BTreeMap<CellId, Label>) -> Result<Self> {
        self.labels = labels;
        self.check_labels()?;
        Ok(self)
    }

    fn check_labels(&self) -> Result<()> {
        let cells = self.cell_counts();
        match self.labels.keys().find(|id| !cells.contains_key(id)) {
            Some(&id) => Err(Error::LabelWithoutSamples(id)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct cell ids in ascending order.
    pub fn cell_ids(&self) -> Vec<CellId> {
        self.cell_counts().into_keys().collect()
    }

    pub fn cell_counts(&self) -> BTreeMap<CellId, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            *counts.entry(s.cell_id).or_insert(0) += 1;
        }
        counts
    }

    /// Samples per cell, each group in dataset order.
    pub fn by_cell(&self) -> BTreeMap<CellId, Vec<Sample>> {
        let mut groups: BTreeMap<CellId, Vec<Sample>> = BTreeMap::new();
        for s in &self.samples {
            groups.entry(s.cell_id).or_default().push(*s);
        }
        groups
    }

    pub fn cell_samples(&self, cell_id: CellId) -> Vec<Sample> {
        self.samples
            .iter()
            .filter(|s| s.cell_id == cell_id)
            .copied()
            .collect()
    }

    pub fn label(&self, cell_id: CellId) -> Option<Label> {
        self.labels.get(&cell_id).copied()
    }
}

fn column_index(headers: &csv::StringRecord) -> Result<[usize; 15]> {
    let mut index = [None; 15];
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        match CSV_HEADER.iter().position(|c| *c == h) {
            Some(p) => index[p] = Some(i),
            None => return Err(Error::UnknownColumn(h.to_string())),
        }
    }
    let mut out = [0usize; 15];
    for ((slot, found), name) in out.iter_mut().zip(index).zip(CSV_HEADER) {
        *slot = found.ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    name: &str,
    row: usize,
) -> Result<T> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::Parse {
        row,
        field: name.to_string(),
        value: raw.to_string(),
    })
}

/// Reads telemetry CSV from a reader. Rows are numbered from 1 (first data row).
pub fn read_csv<R: Read>(
    reader: R,
    validation: Validation,
) -> std::result::Result<Vec<Sample>, ReadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(ReadError::Csv)?.clone();
    if headers.is_empty() {
        return Err(ReadError::Empty);
    }
    let index = column_index(&headers).map_err(ReadError::Data)?;
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(ReadError::Csv)?;
        let mut s = Sample {
            cell_id: parse_field(&record, index[0], CSV_HEADER[0], row).map_err(ReadError::Data)?,
            ue_id: parse_field(&record, index[1], CSV_HEADER[1], row).map_err(ReadError::Data)?,
            cell_data_rate_kbps: 0.0,
            cqi: 0.0,
            erab_duration_s: 0.0,
            frequency_band: 0.0,
            load_active: 0.0,
            prb: 0.0,
            rsrp_dbm: 0.0,
            rsrq_db: 0.0,
            speed_range: 0.0,
            throughput_kbps: 0.0,
            time_interval: 0.0,
            timing_advance_m: 0.0,
            tti_prb_use: 0.0,
        };
        for (feature, &col) in Feature::ALL.iter().zip(&index[2..]) {
            let v: f64 = parse_field(&record, col, feature.name(), row).map_err(ReadError::Data)?;
            if !v.is_finite() {
                return Err(ReadError::Data(Error::Parse {
                    row,
                    field: feature.name().to_string(),
                    value: record.get(col).unwrap_or("").to_string(),
                }));
            }
            *s.get_mut(*feature) = v;
        }
        match validation {
            Validation::Strict => s.validate(row).map_err(ReadError::Data)?,
            Validation::Clamp => s.clamp(),
        }
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(ReadError::Empty);
    }
    Ok(samples)
}

/// Failure modes of [`read_csv`], before a path is attached.
#[derive(Debug)]
pub enum ReadError {
    Empty,
    Csv(csv::Error),
    Data(Error),
}

impl ReadError {
    fn at(self, path: &Path) -> Error {
        match self {
            ReadError::Empty => Error::EmptyFile(path.to_path_buf()),
            ReadError::Csv(e) => Error::csv(path, e),
            ReadError::Data(e) => e,
        }
    }
}

/// Loads a telemetry CSV. Labels are loaded separately with [`load_labels`].
pub fn load_csv(path: impl AsRef<Path>, validation: Validation) -> Result<CellDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let samples = read_csv(std::io::BufReader::new(file), validation).map_err(|e| e.at(path))?;
    Ok(CellDataset::unlabeled(samples))
}

pub fn write_csv<W: Write>(writer: W, samples: &[Sample]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    let mut fields: Vec<String> = Vec::with_capacity(15);
    for s in samples {
        fields.clear();
        fields.push(s.cell_id.to_string());
        fields.push(s.ue_id.to_string());
        fields.extend(s.features().iter().map(|v| v.to_string()));
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, ds: &CellDataset) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), &ds.samples).map_err(|e| Error::csv(path, e))
}

pub fn read_labels<R: Read>(reader: R) -> Result<BTreeMap<CellId, Label>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut labels = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::csv("<labels>", e))?;
        let first = record.get(0).unwrap_or("").trim();
        if i == 0 && first == "cell_id" {
            continue;
        }
        if record.len() == 1 && first.is_empty() {
            continue;
        }
        let row = i;
        let cell_id: CellId = first.parse().map_err(|_| Error::Parse {
            row,
            field: "cell_id".into(),
            value: first.to_string(),
        })?;
        let label = match record.get(1).map(str::trim) {
            Some("0") => Label::Normal,
            Some("1") => Label::Problematic,
            other => {
                return Err(Error::InvalidLabel {
                    row,
                    value: other.unwrap_or("").to_string(),
                })
            }
        };
        if labels.insert(cell_id, label).is_some() {
            return Err(Error::DuplicateLabel(cell_id));
        }
    }
    Ok(labels)
}

/// Loads `cell_id,label` rows; `1` means problematic. An empty file is valid.
pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<CellId, Label>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Csv { source, .. } => Error::csv(path, source),
        e => e,
    })
}

pub fn save_labels(path: impl AsRef<Path>, labels: &BTreeMap<CellId, Label>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("cell_id,label\n");
    for (id, label) in labels {
        out.push_str(&format!("{id},{}\n", label.as_u8()));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn permutation(ids: impl Iterator<Item = u64>, seed: u64) -> HashMap<u64, u64> {
    let mut distinct: Vec<u64> = ids.collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut targets: Vec<u64> = (0..distinct.len() as u64).collect();
    targets.shuffle(&mut seed::rng(seed));
    distinct.into_iter().zip(targets).collect()
}

/// Replaces cell and UE ids with a seeded bijection onto `0..n`.
pub fn scramble_ids(ds: &CellDataset, seed: u64) -> CellDataset {
    let cell_map = permutation(
        ds.samples.iter().map(|s| s.cell_id),
        seed::stage(seed, "scramble-cell"),
    );
    let ue_map = permutation(
        ds.samples.iter().map(|s| s.ue_id),
        seed::stage(seed, "scramble-ue"),
    );
    let samples = ds
        .samples
        .iter()
        .map(|s| Sample {
            cell_id: cell_map[&s.cell_id],
            ue_id: ue_map[&s.ue_id],
            ..*s
        })
        .collect();
    let labels = ds
        .labels
        .iter()
        .map(|(id, label)| (cell_map[id], *label))
        .collect();
    CellDataset { samples, labels }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// A typical monitoring row.
    pub(crate) fn example_sample() -> Sample {
        Sample {
            cell_id: 2,
            ue_id: 1,
            cell_data_rate_kbps: 1200.0,
            cqi: 6.0,
            erab_duration_s: 10.0,
            frequency_band: 1.0,
            load_active: 15.0,
            prb: 10.0,
            rsrp_dbm: -90.0,
            rsrq_db: -8.0,
            speed_range: 1.0,
            throughput_kbps: 1000.5,
            time_interval: 2.0,
            timing_advance_m: 312.0,
            tti_prb_use: 20.0,
        }
    }

    fn csv_text(rows: &[Sample]) -> String {
        let mut buf = Vec::new();
        write_csv(&mut buf, rows).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn loads_three_rows_in_order() {
        let rows: Vec<Sample> = (0..3)
            .map(|i| Sample {
                ue_id: i,
                ..example_sample()
            })
            .collect();
        let samples = read_csv(csv_text(&rows).as_bytes(), Validation::Strict).unwrap();
        assert_eq!(samples, rows);
    }

    #[test]
    fn cqi_sixteen_is_rejected_with_row_and_field() {
        let rows = vec![
            example_sample(),
            Sample {
                cqi: 16.0,
                ..example_sample()
            },
        ];
        let err = read_csv(csv_text(&rows).as_bytes(), Validation::Strict).unwrap_err();
        match err {
            ReadError::Data(Error::OutOfRange { row, field, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(field, "cqi");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clamp_mode_repairs_out_of_range() {
        let rows = vec![Sample {
            cqi: 16.0,
            timing_advance_m: 100.0,
            rsrp_dbm: -20.0,
            ..example_sample()
        }];
        let samples = read_csv(csv_text(&rows).as_bytes(), Validation::Clamp).unwrap();
        assert_eq!(samples[0].cqi, 15.0);
        assert_eq!(samples[0].timing_advance_m, 78.0);
        assert_eq!(samples[0].rsrp_dbm, -44.0);
    }

    #[test]
    fn example_values_validate() {
        // RSRP is the exception: the printed -20 dBm example is outside the
        // physical [-140, -44] range, so a representative -90 dBm is used.
        example_sample().validate(1).unwrap();
        let mut s = example_sample();
        s.rsrq_db = -8.0;
        s.validate(1).unwrap();
        s.rsrp_dbm = -20.0;
        assert!(s.validate(1).is_err());
    }

    #[test]
    fn timing_advance_must_be_multiple_of_78() {
        let mut s = example_sample();
        s.timing_advance_m = 313.0;
        assert!(s.validate(1).is_err());
        s.timing_advance_m = 0.0;
        s.validate(1).unwrap();
    }

    #[test]
    fn non_numeric_and_missing_columns() {
        let text = csv_text(&[example_sample()]).replace("1000.5", "fast");
        match read_csv(text.as_bytes(), Validation::Strict).unwrap_err() {
            ReadError::Data(Error::Parse { row, field, .. }) => {
                assert_eq!((row, field.as_str()), (1, "throughput_kbps"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "cell_id,ue_id\n1,2\n";
        assert!(matches!(
            read_csv(text.as_bytes(), Validation::Strict),
            Err(ReadError::Data(Error::MissingColumn(_)))
        ));
        let text = csv_text(&[example_sample()]).replacen("cqi", "colour", 1);
        assert!(matches!(
            read_csv(text.as_bytes(), Validation::Strict),
            Err(ReadError::Data(Error::UnknownColumn(_)))
        ));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            read_csv("".as_bytes(), Validation::Strict),
            Err(ReadError::Empty)
        ));
        let header_only = CSV_HEADER.join(",") + "\n";
        assert!(matches!(
            read_csv(header_only.as_bytes(), Validation::Strict),
            Err(ReadError::Empty)
        ));
    }

    #[test]
    fn columns_may_be_reordered() {
        let text = csv_text(&[example_sample()]);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let rev = |v: &[&str]| v.iter().rev().cloned().collect::<Vec<_>>().join(",");
        let text = format!("{}\n{}\n", rev(&header), rev(&row));
        let samples = read_csv(text.as_bytes(), Validation::Strict).unwrap();
        assert_eq!(samples[0], example_sample());
    }

    #[test]
    fn labels_parse() {
        let labels = read_labels("cell_id,label\n2,1\n5,0\n".as_bytes()).unwrap();
        assert_eq!(labels[&2], Label::Problematic);
        assert_eq!(labels[&5], Label::Normal);
        assert!(matches!(
            read_labels("2,1\n2,0\n".as_bytes()),
            Err(Error::DuplicateLabel(2))
        ));
        assert!(matches!(
            read_labels("cell_id,label\n2,3\n".as_bytes()),
            Err(Error::InvalidLabel { .. })
        ));
        assert!(read_labels("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn labels_must_refer_to_known_cells() {
        let ds = CellDataset::unlabeled(vec![example_sample()]);
        let labels = BTreeMap::from([(9, Label::Normal)]);
        assert!(matches!(
            ds.with_labels(labels),
            Err(Error::LabelWithoutSamples(9))
        ));
    }

    #[test]
    fn scramble_preserves_grouping() {
        let mk = |cell, ue| Sample {
            cell_id: cell,
            ue_id: ue,
            ..example_sample()
        };
        let ds = CellDataset::new(
            vec![mk(7, 100), mk(7, 101), mk(9, 100), mk(3, 5)],
            BTreeMap::from([(7, Label::Problematic), (3, Label::Normal)]),
        )
        .unwrap();
        let out = scramble_ids(&ds, 11);
        assert_eq!(out.samples[0].cell_id, out.samples[1].cell_id);
        assert_eq!(out.samples[0].ue_id, out.samples[2].ue_id);
        assert_ne!(out.samples[0].cell_id, out.samples[2].cell_id);
        assert!(out.samples.iter().all(|s| s.cell_id < 3 && s.ue_id < 3));
        assert_eq!(out.labels[&out.samples[0].cell_id], Label::Problematic);
        assert_eq!(out.labels[&out.samples[3].cell_id], Label::Normal);
        assert_eq!(out, scramble_ids(&ds, 11));
    }
}
