//! CSV dataset manifests.
//!
//! A 2-AFC manifest has the header `ref,alt0,alt1,p`, a JND manifest
//! `a,b,p`. Column order is free and extra columns are ignored. Image paths
//! are relative to the manifest's directory unless absolute.

use std::fs;
use std::path::{Path, PathBuf};

use lasi_core::{JndExample, TwoAfcExample};
use thiserror::Error;

use crate::{load_image, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestKind {
    TwoAfc,
    Jnd,
}

impl ManifestKind {
    fn columns(self) -> &'static [&'static str] {
        match self {
            Self::TwoAfc => &["ref", "alt0", "alt1", "p"],
            Self::Jnd => &["a", "b", "p"],
        }
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("header names neither a 2-AFC (ref,alt0,alt1,p) nor a JND (a,b,p) manifest")]
    UnknownHeader,
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row} (line {line}): p = {value:?} is not a decimal number")]
    BadProbability { row: usize, line: u64, value: String },
    #[error("row {row} (line {line}): p = {p} outside [0, 1]")]
    OutOfRange { row: usize, line: u64, p: f64 },
    #[error("row {row} (line {line}): referenced file {} does not exist", path.display())]
    DanglingFile { row: usize, line: u64, path: PathBuf },
    #[error("row {row}: images have different dimensions ({first} vs {other})")]
    MixedDimensions { row: usize, first: String, other: String },
    #[error("expected a {expected:?} manifest, found {found:?}")]
    WrongKind { expected: ManifestKind, found: ManifestKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAfcRecord {
    pub reference: PathBuf,
    pub alt0: PathBuf,
    pub alt1: PathBuf,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JndRecord {
    pub a: PathBuf,
    pub b: PathBuf,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    TwoAfc(Vec<TwoAfcRecord>),
    Jnd(Vec<JndRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Directory that relative image paths resolve against.
    pub root: PathBuf,
    pub records: Records,
}

impl DatasetManifest {
    pub fn kind(&self) -> ManifestKind {
        match self.records {
            Records::TwoAfc(_) => ManifestKind::TwoAfc,
            Records::Jnd(_) => ManifestKind::Jnd,
        }
    }

    pub fn len(&self) -> usize {
        match &self.records {
            Records::TwoAfc(r) => r.len(),
            Records::Jnd(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads every image of a 2-AFC manifest.
    pub fn two_afc_examples(&self, path: &Path) -> crate::Result<Vec<TwoAfcExample>> {
        let Records::TwoAfc(records) = &self.records else {
            return Err(wrong_kind(path, ManifestKind::TwoAfc, self.kind()));
        };
        records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let imgs = load_same_size(path, i + 1, &[&r.reference, &r.alt0, &r.alt1])?;
                let [reference, alt0, alt1]: [_; 3] = imgs.try_into().unwrap();
                Ok(TwoAfcExample { reference, alt0, alt1, p: r.p })
            })
            .collect()
    }

    /// Loads every image of a JND manifest.
    pub fn jnd_examples(&self, path: &Path) -> crate::Result<Vec<JndExample>> {
        let Records::Jnd(records) = &self.records else {
            return Err(wrong_kind(path, ManifestKind::Jnd, self.kind()));
        };
        records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let imgs = load_same_size(path, i + 1, &[&r.a, &r.b])?;
                let [img_a, img_b]: [_; 2] = imgs.try_into().unwrap();
                Ok(JndExample { img_a, img_b, p: r.p })
            })
            .collect()
    }
}

fn wrong_kind(path: &Path, expected: ManifestKind, found: ManifestKind) -> CliError {
    CliError::Manifest { path: path.to_path_buf(), source: ManifestError::WrongKind { expected, found } }
}

fn load_same_size(manifest: &Path, row: usize, paths: &[&PathBuf]) -> crate::Result<Vec<lasi_core::ImageTensor>> {
    let imgs = paths.iter().map(|p| load_image(p)).collect::<crate::Result<Vec<_>>>()?;
    let first = imgs[0].dims();
    if let Some(other) = imgs.iter().map(|i| i.dims()).find(|d| *d != first) {
        return Err(CliError::Manifest {
            path: manifest.to_path_buf(),
            source: ManifestError::MixedDimensions { row, first: first.to_string(), other: other.to_string() },
        });
    }
    Ok(imgs)
}

/// Parses manifest text; relative paths resolve against `root`. Checks
/// columns, probabilities and that every referenced file exists.
pub fn parse_manifest(text: &str, root: &Path) -> Result<DatasetManifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let has = |name: &str| headers.iter().any(|h| h == name);
    let kind = if ["ref", "alt0", "alt1"].iter().any(|c| has(c)) {
        ManifestKind::TwoAfc
    } else if ["a", "b"].iter().any(|c| has(c)) {
        ManifestKind::Jnd
    } else {
        return Err(ManifestError::UnknownHeader);
    };
    let mut index = Vec::new();
    for &col in kind.columns() {
        index.push(headers.iter().position(|h| h == col).ok_or(ManifestError::MissingColumn(col))?);
    }

    let mut two_afc = Vec::new();
    let mut jnd = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(index[k]).unwrap_or("");
        let p_text = field(index.len() - 1);
        let p: f64 = p_text
            .parse()
            .map_err(|_| ManifestError::BadProbability { row, line, value: p_text.to_string() })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(ManifestError::OutOfRange { row, line, p });
        }
        let file = |k: usize| -> Result<PathBuf, ManifestError> {
            let path = root.join(field(k));
            if path.is_file() {
                Ok(path)
            } else {
                Err(ManifestError::DanglingFile { row, line, path })
            }
        };
        match kind {
            ManifestKind::TwoAfc => {
                two_afc.push(TwoAfcRecord { reference: file(0)?, alt0: file(1)?, alt1: file(2)?, p })
            }
            ManifestKind::Jnd => jnd.push(JndRecord { a: file(0)?, b: file(1)?, p }),
        }
    }
    let records = match kind {
        ManifestKind::TwoAfc => Records::TwoAfc(two_afc),
        ManifestKind::Jnd => Records::Jnd(jnd),
    };
    Ok(DatasetManifest { root: root.to_path_buf(), records })
}

pub fn load_manifest(path: &Path) -> crate::Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|source| CliError::io(path, source))?;
    let root = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, root).map_err(|source| CliError::Manifest { path: path.to_path_buf(), source })
}
