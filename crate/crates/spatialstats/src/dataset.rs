//! Point-referenced datasets and their CSV form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geom::{check_distinct, Location};

/// Observation locations with attribute values and optional covariates.
///
/// The covariate matrix, when present, carries a leading all-ones column
/// (the intercept), one row per observation.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    locations: Vec<Location>,
    values: Vec<f64>,
    covariates: Option<DMatrix<f64>>,
}

impl SpatialDataset {
    pub fn new(
        locations: Vec<Location>,
        values: Vec<f64>,
        covariates: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if locations.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                message: "attribute values must be finite".into(),
            });
        }
        check_distinct(&locations)?;
        if let Some(x) = &covariates {
            if x.nrows() != locations.len() {
                return Err(Error::DimensionMismatch(format!(
                    "covariate matrix has {} rows but the dataset has {} observations",
                    x.nrows(),
                    locations.len()
                )));
            }
            if x.ncols() == 0 || x.column(0).iter().any(|&v| v != 1.0) {
                return Err(Error::InvalidParameter {
                    name: "covariates",
                    message: "covariate matrix must have a leading all-ones column".into(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "covariates",
                    message: "covariates must be finite".into(),
                });
            }
        }
        Ok(Self { locations, values, covariates })
    }

    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn dim(&self) -> usize {
        self.locations[0].dim()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covariates(&self) -> Option<&DMatrix<f64>> {
        self.covariates.as_ref()
    }

    /// Parses the CSV dataset format: header `x,y[,z],value[,cov1,...]`,
    /// decimal point, LF line endings. Covariate columns from the file are
    /// stored behind a prepended intercept column.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = match (cols.first(), cols.get(1), cols.get(2)) {
            (Some(&"x"), Some(&"y"), Some(&"z")) => 3,
            (Some(&"x"), Some(&"y"), _) => 2,
            (Some(&"x"), _, _) => 1,
            _ => return Err(Error::Parse("header must start with x[,y[,z]]".into())),
        };
        if cols.get(dim) != Some(&"value") {
            return Err(Error::Parse(format!(
                "expected `value` in column {}, found {:?}",
                dim + 1,
                cols.get(dim)
            )));
        }
        let n_cov = cols.len() - dim - 1;

        let mut locations = Vec::new();
        let mut values = Vec::new();
        let mut cov_rows: Vec<f64> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad number `{s}`", lineno + 2)))
            };
            let coords: Vec<f64> = fields[..dim]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?;
            locations.push(Location::new(coords)?);
            values.push(parse(fields[dim])?);
            cov_rows.push(1.0);
            for f in &fields[dim + 1..] {
                cov_rows.push(parse(f)?);
            }
        }
        let covariates = if n_cov > 0 {
            Some(DMatrix::from_row_slice(locations.len(), n_cov + 1, &cov_rows))
        } else {
            None
        };
        Self::new(locations, values, covariates)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let dim = self.dim();
        let mut out = String::new();
        out.push_str(match dim {
            1 => "x,value",
            2 => "x,y,value",
            _ => "x,y,z,value",
        });
        let n_cov = self.covariates.as_ref().map_or(0, |x| x.ncols() - 1);
        for k in 0..n_cov {
            out.push_str(&format!(",cov{}", k + 1));
        }
        out.push('\n');
        for i in 0..self.n() {
            let coords: Vec<String> = self.locations[i].coords().iter().map(|c| c.to_string()).collect();
            out.push_str(&coords.join(","));
            out.push_str(&format!(",{}", self.values[i]));
            if let Some(x) = &self.covariates {
                for k in 1..x.ncols() {
                    out.push_str(&format!(",{}", x[(i, k)]));
                }
            }
            out.push('\n');
        }
        out
    }
}
