//! Checkpoint document and results CSV.
//!
//! The checkpoint is pretty-printed JSON holding the search configuration,
//! the frontier modulus, every emitted record, the ledger and the density
//! history. The trajectory registry is not stored; it is rebuilt on resume
//! and checked against the saved digest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coverage::{format_fraction, parse_fraction, DensityCheckpoint, ResidueClass};
use crate::error::{Error, Result};
use crate::search::{
    Certificate, PatternClass, ResumeState, Search, SearchConfig, SearchCounts, SearchObserver,
    SuccessRecord,
};

pub const FORMAT_VERSION: u32 = 1;

/// Column names of the results CSV.
pub const CSV_HEADER: [&str; 6] = ["b", "c", "stop_index", "join_b", "join_c", "join_index"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub max_modulus: u64,
    pub filter_3smooth: bool,
    pub skip_covered: bool,
    pub join_smooth_only: bool,
    pub step_cap: Option<usize>,
    pub k_verify: u64,
}

impl From<&SearchConfig> for ConfigEcho {
    fn from(c: &SearchConfig) -> Self {
        ConfigEcho {
            max_modulus: c.max_modulus,
            filter_3smooth: c.filter_3smooth,
            skip_covered: c.skip_covered,
            join_smooth_only: c.join_smooth_only,
            step_cap: c.step_cap,
            k_verify: c.k_verify,
        }
    }
}

impl ConfigEcho {
    /// Whether a search under `other` continues this one without changing results.
    pub fn compatible_with(&self, other: &SearchConfig) -> bool {
        self.filter_3smooth == other.filter_3smooth
            && self.skip_covered == other.skip_covered
            && self.join_smooth_only == other.join_smooth_only
            && self.step_cap == other.step_cap
    }
}

/// One results row; the join columns are empty for drop certificates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordRow {
    pub b: u64,
    pub c: u64,
    pub stop_index: u32,
    pub join_b: Option<u64>,
    pub join_c: Option<u64>,
    pub join_index: Option<u32>,
}

impl From<&SuccessRecord> for RecordRow {
    fn from(r: &SuccessRecord) -> Self {
        let join = r.joined();
        RecordRow {
            b: r.class.modulus(),
            c: r.class.remainder(),
            stop_index: r.stop_index,
            join_b: join.map(|(c, _)| c.modulus()),
            join_c: join.map(|(c, _)| c.remainder()),
            join_index: join.map(|(_, i)| i),
        }
    }
}

impl TryFrom<&RecordRow> for SuccessRecord {
    type Error = Error;

    fn try_from(row: &RecordRow) -> Result<Self> {
        let certificate = match (row.join_b, row.join_c, row.join_index) {
            (None, None, None) => Certificate::Drop,
            (Some(b), Some(c), Some(index)) => Certificate::Join {
                class: PatternClass::new(b, c)?,
                index,
            },
            _ => {
                return Err(Error::Checkpoint(format!(
                    "record {}k-{} has partial join columns",
                    row.b, row.c
                )))
            }
        };
        Ok(SuccessRecord {
            class: PatternClass::new(row.b, row.c)?,
            stop_index: row.stop_index,
            certificate,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerDoc {
    /// `[modulus, residue]` pairs as decimal strings.
    pub classes: Vec<[String; 2]>,
    /// Exact density `p/q`.
    pub density: String,
    pub lcm: String,
    pub contributing_lcm: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsDoc {
    pub classes_checked: u64,
    pub redundant: u64,
    pub skipped_covered: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ConfigEcho,
    pub frontier_modulus: u64,
    pub records: Vec<RecordRow>,
    pub ledger: LedgerDoc,
    pub density_checkpoints: Vec<DensityCheckpoint>,
    pub counts: CountsDoc,
    pub registry_digest: String,
}

impl Checkpoint {
    pub fn capture(search: &Search) -> Self {
        let ledger = search.ledger();
        let counts = search.counts();
        Checkpoint {
            format_version: FORMAT_VERSION,
            config: ConfigEcho::from(search.config()),
            frontier_modulus: search.frontier(),
            records: search.records().iter().map(RecordRow::from).collect(),
            ledger: LedgerDoc {
                classes: ledger
                    .classes()
                    .iter()
                    .map(|c| [c.modulus().to_string(), c.residue().to_string()])
                    .collect(),
                density: format_fraction(ledger.density()),
                lcm: ledger.lcm_of_moduli().to_string(),
                contributing_lcm: ledger.contributing_lcm().to_string(),
            },
            density_checkpoints: search.checkpoints().to_vec(),
            counts: CountsDoc {
                classes_checked: counts.classes_checked,
                redundant: counts.redundant,
                skipped_covered: counts.skipped_covered,
            },
            registry_digest: search.registry().digest(),
        }
    }

    pub fn records(&self) -> Result<Vec<SuccessRecord>> {
        self.records.iter().map(SuccessRecord::try_from).collect()
    }

    pub fn ledger_classes(&self) -> Result<Vec<ResidueClass>> {
        self.ledger
            .classes
            .iter()
            .map(|[m, r]| format!("{m}:{r}").parse())
            .collect()
    }

    pub fn resume_state(&self) -> Result<ResumeState> {
        let ledger_classes = self.ledger_classes()?;
        let density = parse_fraction(&self.ledger.density)?;
        let sum = crate::coverage::CoverageLedger::from_classes(ledger_classes.clone())?;
        if sum.density() != &density {
            return Err(Error::Checkpoint(
                "ledger density does not match its classes".into(),
            ));
        }
        Ok(ResumeState {
            frontier_modulus: self.frontier_modulus,
            records: self.records()?,
            checkpoints: self.density_checkpoints.clone(),
            counts: SearchCounts {
                classes_checked: self.counts.classes_checked,
                redundant: self.counts.redundant,
                skipped_covered: self.counts.skipped_covered,
            },
            ledger_classes,
            registry_digest: self.registry_digest.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text)?;
        if cp.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                cp.format_version
            )));
        }
        Ok(cp)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Streams records to the results CSV.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(inner);
        writer.write_record(CSV_HEADER)?;
        Ok(CsvSink { writer })
    }

    pub fn write(&mut self, record: &SuccessRecord) -> Result<()> {
        let row = RecordRow::from(record);
        let opt = |v: Option<String>| v.unwrap_or_default();
        self.writer.write_record([
            row.b.to_string(),
            row.c.to_string(),
            row.stop_index.to_string(),
            opt(row.join_b.map(|v| v.to_string())),
            opt(row.join_c.map(|v| v.to_string())),
            opt(row.join_index.map(|v| v.to_string())),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }

    /// Flushes and returns the underlying writer.
    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

/// Reads a results CSV back into records.
pub fn read_results_csv(text: &str) -> Result<Vec<SuccessRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Checkpoint(format!(
            "unexpected CSV header {headers:?}"
        )));
    }
    reader
        .deserialize::<RecordRow>()
        .map(|row| SuccessRecord::try_from(&row?))
        .collect()
}

/// Observer that streams records to a CSV and saves a checkpoint at every
/// modulus boundary.
pub struct PersistingObserver<W: Write> {
    pub csv: Option<CsvSink<W>>,
    pub checkpoint_path: Option<PathBuf>,
}

impl<W: Write> SearchObserver for PersistingObserver<W> {
    fn on_record(&mut self, record: &SuccessRecord) -> Result<()> {
        if let Some(csv) = &mut self.csv {
            csv.write(record)?;
        }
        Ok(())
    }

    fn on_modulus_done(&mut self, search: &Search) -> Result<()> {
        if let Some(csv) = &mut self.csv {
            csv.flush()?;
        }
        if let Some(path) = &self.checkpoint_path {
            Checkpoint::capture(search).save(path)?;
        }
        Ok(())
    }
}
