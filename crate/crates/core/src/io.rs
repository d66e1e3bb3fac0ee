//! File formats: stack and config JSON, two-column CSV data, report output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::Dataset;
use crate::optics::{Layer, LayerStack, C64};

/// Layer stack as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackFile {
    pub incident_index: f64,
    pub exit_index: f64,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub thickness_nm: f64,
    pub n_real: f64,
    #[serde(default)]
    pub n_imag: f64,
}

impl StackFile {
    pub fn to_stack(&self) -> Result<LayerStack> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer::new(l.thickness_nm, C64::new(l.n_real, l.n_imag)))
            .collect::<Result<Vec<_>>>()?;
        LayerStack::new(
            C64::new(self.incident_index, 0.0),
            layers,
            C64::new(self.exit_index, 0.0),
        )
    }

    pub fn from_stack(stack: &LayerStack) -> Self {
        StackFile {
            incident_index: stack.incident_index.re,
            exit_index: stack.exit_index.re,
            layers: stack
                .layers
                .iter()
                .map(|l| LayerEntry {
                    thickness_nm: l.thickness_nm,
                    n_real: l.index.re,
                    n_imag: l.index.im,
                })
                .collect(),
        }
    }
}

/// A value given inline or as a path (relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(String),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> Result<T> {
        match self {
            Source::File(p) => read_json(&base.join(p)),
            Source::Inline(v) => Ok(v.clone()),
        }
    }
}

/// Evenly spaced range or explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, points: usize },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::Range { start, stop, points } => {
                if *points == 0 || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::invalid("grid needs finite ends and at least one point"));
                }
                Ok(crate::synth::linspace(*start, *stop, *points))
            }
            Grid::List(v) if v.is_empty() => Err(Error::invalid("grid list is empty")),
            Grid::List(v) => Ok(v.clone()),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Two-column CSV with the given header names and an optional `weight`
/// column.
pub fn read_xy_csv(path: &Path, x_name: &str, y_name: &str) -> Result<Dataset> {
    let parse_err = |message: String| Error::Parse {
        path: path.display().to_string(),
        message,
    };
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ix), Some(iy)) = (column(x_name), column(y_name)) else {
        return Err(parse_err(format!(
            "expected columns `{x_name},{y_name}`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    };
    let iw = column("weight");
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| parse_err(format!("row {}: `{raw}` is not a number", line + 2)))
        };
        x.push(field(ix)?);
        y.push(field(iy)?);
        if let Some(i) = iw {
            w.push(field(i)?);
        }
    }
    if x.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    let mut data = Dataset::new(x, y)?;
    if iw.is_some() {
        data.weights = Some(w);
    }
    Ok(data)
}

pub fn xy_csv(x_name: &str, y_name: &str, data: &Dataset) -> String {
    let mut out = format!("{x_name},{y_name}\n");
    for (x, y) in data.x.iter().zip(&data.y) {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes output files into one directory and remembers what was written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|source| Error::Io {
            path: root.display().to_string(),
            source,
        })?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
            path: name.to_string(),
            message: e.to_string(),
        })?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}
