use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("line {0}: malformed vector line")]
    MalformedLine(usize),
    #[error("line {0}: dimension differs from the first vector")]
    InconsistentDimension(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Static word vectors in GloVe text format.
#[derive(Debug, Clone, Default)]
pub struct VectorTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
    /// `(line number, token)` of every duplicate that was ignored.
    pub duplicates: Vec<(usize, String)>,
}

impl VectorTable {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Builds a table from in-memory rows; used by tests and fixtures.
    pub fn from_rows<I, S>(rows: I) -> Result<Self, VectorError>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut table = VectorTable::default();
        for (lineno, (token, values)) in rows.into_iter().enumerate() {
            table.insert(lineno + 1, token.into(), values)?;
        }
        Ok(table)
    }

    fn insert(
        &mut self,
        lineno: usize,
        token: String,
        values: Vec<f32>,
    ) -> Result<(), VectorError> {
        if values.is_empty() {
            return Err(VectorError::MalformedLine(lineno));
        }
        if self.vectors.is_empty() && self.dimension == 0 {
            self.dimension = values.len();
        } else if values.len() != self.dimension {
            return Err(VectorError::InconsistentDimension(lineno));
        }
        match self.vectors.entry(token) {
            Entry::Occupied(e) => {
                let token = e.key().clone();
                log::warn!("duplicate vector for `{token}` on line {lineno}; keeping the first");
                self.duplicates.push((lineno, token));
            }
            Entry::Vacant(e) => {
                e.insert(values);
            }
        }
        Ok(())
    }
}

/// Reads whitespace-separated `token v1 ... vD` lines. Blank lines are
/// skipped; the first occurrence of a repeated token wins.
pub fn read_static_vectors<R: BufRead>(reader: R) -> Result<VectorTable, VectorError> {
    let mut table = VectorTable::default();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(str::parse::<f32>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| VectorError::MalformedLine(lineno))?;
        table.insert(lineno, token.to_string(), values)?;
    }
    Ok(table)
}

pub fn load_static_vectors(path: &Path) -> Result<VectorTable, VectorError> {
    let file = std::fs::File::open(path)?;
    read_static_vectors(std::io::BufReader::new(file))
}
