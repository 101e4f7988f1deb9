use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CovarianceModel, Means};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// On-disk model document (TOML). Matrices are row-major arrays of rows.
///
/// ```toml
/// n = 1
/// n_p = 1
/// n_u = 1
/// sigma_x = [[1.0]]
/// sigma_x_xp = [[1.0, 0.5], [0.5, 1.0]]
/// sigma_x_xu = [[1.0, 0.2], [0.2, 1.0]]
///
/// [means]          # optional
/// x = [0.0]
/// xp = [0.0]
/// xu = [0.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub n: usize,
    pub n_p: usize,
    pub n_u: usize,
    pub sigma_x: Vec<Vec<f64>>,
    pub sigma_x_xp: Vec<Vec<f64>>,
    pub sigma_x_xu: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<MeansDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeansDocument {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub xu: Vec<f64>,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model document always serializes")
    }

    pub fn from_model<T: Real>(model: &CovarianceModel<T>) -> Self {
        let rows = |m: &Matrix<T>| -> Vec<Vec<f64>> {
            m.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect()
        };
        let vec = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        Self {
            n: model.n(),
            n_p: model.n_p(),
            n_u: model.n_u(),
            sigma_x: rows(model.sigma_x()),
            sigma_x_xp: rows(model.sigma_x_xp()),
            sigma_x_xu: rows(model.sigma_x_xu()),
            means: model.means().map(|m| MeansDocument { x: vec(&m.x), xp: vec(&m.xp), xu: vec(&m.xu) }),
        }
    }

    /// Converts to a model, checking shapes and then every invariant.
    pub fn into_model<T: Real>(self) -> Result<CovarianceModel<T>> {
        let mat = |name: &str, rows: Vec<Vec<f64>>| -> Result<Matrix<T>> {
            let rows: Vec<Vec<T>> = rows.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect();
            Matrix::from_rows(&rows).map_err(|e| Error::Shape(format!("{name}: {e}")))
        };
        let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
        let means = self.means.map(|m| Means { x: conv(m.x), xp: conv(m.xp), xu: conv(m.xu) });
        CovarianceModel::from_parts(
            self.n,
            self.n_p,
            self.n_u,
            mat("sigma_x", self.sigma_x)?,
            mat("sigma_x_xp", self.sigma_x_xp)?,
            mat("sigma_x_xu", self.sigma_x_xu)?,
            means,
        )?
        .validated()
    }
}

impl<T: Real> CovarianceModel<T> {
    /// Parses and validates a model document.
    pub fn load_str(text: &str) -> Result<Self> {
        ModelDocument::parse(text)?.into_model()
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::load_str(&text)
    }

    /// Serializes to a model document.
    pub fn emit(&self) -> String {
        ModelDocument::from_model(self).to_toml()
    }
}

/// Column names for sample files: `x1..xn` followed by `xp1..` or `xu1..`.
pub(crate) fn sample_headers(n: usize, tail_prefix: &str, tail: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=tail).map(|i| format!("{tail_prefix}{i}")))
        .collect()
}

/// Writes one draw per row under the given header.
pub fn write_samples_csv<T: Real, W: Write>(out: W, headers: &[String], samples: &Matrix<T>) -> Result<()> {
    if headers.len() != samples.cols() {
        return Err(Error::Shape(format!(
            "{} headers for {} sample columns",
            headers.len(),
            samples.cols()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers)?;
    for i in 0..samples.rows() {
        w.write_record(samples.row(i).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headered sample CSV; returns the header and the row matrix.
pub fn read_samples_csv<T: Real, R: Read>(input: R) -> Result<(Vec<String>, Matrix<T>)> {
    let mut r = csv::Reader::from_reader(input);
    let headers: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Shape(format!("row {} has {} fields, header has {}", k + 1, rec.len(), headers.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: cannot parse {field:?} as a number", k + 1)))?;
            data.push(T::lit(v));
        }
        rows += 1;
    }
    let m = Matrix::from_vec(rows, headers.len(), data)?;
    Ok((headers, m))
}
