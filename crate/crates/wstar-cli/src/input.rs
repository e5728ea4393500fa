use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use wstar::matrix::CMat;

/// Algebra specification file: block sizes plus named complex matrices stored
/// as flat row-major real and imaginary parts.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    #[serde(default)]
    pub blocks: Option<Vec<usize>>,
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug)]
pub enum InputError {
    Io(String),
    Parse(String),
    /// The file is well formed but does not say which matrix to use.
    Selection(String),
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(m) | Self::Parse(m) | Self::Selection(m) => f.write_str(m),
        }
    }
}

pub fn read_spec(path: &Path) -> Result<AlgebraSpec, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        InputError::Parse(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })
}

impl MatrixSpec {
    pub fn to_matrix(&self, name: &str) -> Result<CMat, InputError> {
        let n = self.rows * self.cols;
        let bad = |part: &str, len: usize| InputError::Parse(format!("matrix '{name}': {part} has {len} entries, expected {n}"));
        if self.re.len() != n {
            return Err(bad("re", self.re.len()));
        }
        let zeros = vec![0.0; n];
        let im = self.im.as_ref().unwrap_or(&zeros);
        if im.len() != n {
            return Err(bad("im", im.len()));
        }
        let data: Vec<Complex64> = self.re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        Ok(CMat::from_row_slice(self.rows, self.cols, &data))
    }
}

impl AlgebraSpec {
    /// The matrix called `name`, or the only matrix in the file when no name is given.
    pub fn matrix(&self, name: Option<&str>) -> Result<CMat, InputError> {
        match name {
            Some(n) => self
                .matrices
                .get(n)
                .ok_or_else(|| InputError::Selection(format!("no matrix named '{n}'")))?
                .to_matrix(n),
            None => match self.matrices.len() {
                0 => Err(InputError::Parse("file contains no matrices".into())),
                1 => {
                    let (n, m) = self.matrices.iter().next().expect("one entry");
                    m.to_matrix(n)
                }
                _ => {
                    let names: Vec<&str> = self.matrices.keys().map(String::as_str).collect();
                    Err(InputError::Selection(format!("several matrices ({}); pick one with --matrix", names.join(", "))))
                }
            },
        }
    }
}

/// Parses "n1,n2,..." into block sizes.
pub fn parse_blocks(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad block size '{}' in --algebra \"{s}\"", t.trim())))
        .collect()
}
