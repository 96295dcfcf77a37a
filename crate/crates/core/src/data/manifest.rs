use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NUM_CLASSES;

/// One of the ten driver-action classes `c0`..`c9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassLabel(u8);

const DESCRIPTIONS: [&str; NUM_CLASSES] = [
    "safe driving",
    "texting - right",
    "talking on the phone - right",
    "texting - left",
    "talking on the phone - left",
    "operating the radio",
    "drinking",
    "reaching behind",
    "hair and makeup",
    "talking to passenger",
];

/// Published image counts per class of the full labelled set (22,424 total).
pub const REFERENCE_CLASS_COUNTS: [usize; NUM_CLASSES] = [2489, 2267, 2317, 2346, 2326, 2312, 2325, 2002, 1911, 2129];

impl ClassLabel {
    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_CLASSES {
            Ok(ClassLabel(index as u8))
        } else {
            Err(Error::data(format!("class index {index} out of range")))
        }
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES as u8).map(ClassLabel)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> String {
        format!("c{}", self.0)
    }

    pub fn description(self) -> &'static str {
        DESCRIPTIONS[self.index()]
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl FromStr for ClassLabel {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        let digits = s.strip_prefix('c').ok_or(())?;
        if digits.len() != 1 {
            return Err(());
        }
        let idx: usize = digits.parse().map_err(|_| ())?;
        ClassLabel::new(idx).map_err(|_| ())
    }
}

/// One labelled image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetRow {
    pub driver: String,
    pub label: ClassLabel,
    /// File name as listed in the manifest.
    pub img: String,
    /// Location relative to the dataset root.
    pub path: PathBuf,
}

impl DatasetRow {
    /// Row for the `<root>/<classname>/<img>` layout.
    pub fn new(driver: impl Into<String>, label: ClassLabel, img: impl Into<String>) -> Self {
        let img = img.into();
        DatasetRow {
            driver: driver.into(),
            label,
            path: PathBuf::from(label.name()).join(&img),
            img,
        }
    }
}

/// Ordered list of labelled images.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    rows: Vec<DatasetRow>,
}

impl DatasetIndex {
    pub fn from_rows(rows: Vec<DatasetRow>) -> Self {
        DatasetIndex { rows }
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Counts for the labels that occur, in class order.
    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.label).or_insert(0) += 1;
        }
        counts
    }

    /// Distinct drivers in order of first appearance.
    pub fn drivers(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.driver.as_str()))
            .map(|r| r.driver.clone())
            .collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&DatasetRow) -> bool) -> DatasetIndex {
        DatasetIndex {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Writes the `subject,classname,img` manifest.
    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(path)?);
        writeln!(f, "subject,classname,img")?;
        for r in &self.rows {
            writeln!(f, "{},{},{}", r.driver, r.label, r.img)?;
        }
        f.flush()?;
        Ok(())
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_rows(
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(&csv::StringRecord, u64) -> Result<DatasetRow>,
) -> Result<DatasetIndex> {
    let mut reader = open_csv(path)?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, record) in reader.records().enumerate() {
        let line = (i + 1) as u64;
        let record = record.map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            line: e.position().map_or(line, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(line, |p| p.line());
        if !saw_header {
            saw_header = true;
            let got: Vec<&str> = record.iter().collect();
            if got != header {
                return Err(Error::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("expected header {:?}, found {got:?}", header.join(",")),
                });
            }
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        if record.iter().any(str::is_empty) {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: "empty field".into(),
            });
        }
        rows.push(row(&record, line)?);
    }
    if !saw_header {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            reason: "empty manifest".into(),
        });
    }
    Ok(DatasetIndex { rows })
}

fn parse_label(path: &Path, line: u64, s: &str) -> Result<ClassLabel> {
    s.parse().map_err(|_| Error::UnknownLabel {
        path: path.to_path_buf(),
        line,
        label: s.to_string(),
    })
}

/// Reads a `subject,classname,img` manifest; images live at
/// `<root>/<classname>/<img>`.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetIndex> {
    let path = path.as_ref();
    read_rows(path, &["subject", "classname", "img"], |r, line| {
        let label = parse_label(path, line, &r[1])?;
        Ok(DatasetRow::new(&r[0], label, &r[2]))
    })
}

/// Reads an `img,classname` label file for a flat image directory (used for
/// production sets whose drivers are unknown).
pub fn load_labels(path: impl AsRef<Path>) -> Result<DatasetIndex> {
    let path = path.as_ref();
    read_rows(path, &["img", "classname"], |r, line| {
        let label = parse_label(path, line, &r[1])?;
        Ok(DatasetRow {
            driver: "unknown".into(),
            label,
            img: r[0].to_string(),
            path: PathBuf::from(&r[0]),
        })
    })
}
