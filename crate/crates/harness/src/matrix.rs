use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, CONFIG_FIELDS};

/// Axes to sweep plus fields shared by every cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    pub axes: BTreeMap<String, Vec<Value>>,
    pub fixed: Map<String, Value>,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("matrix file must be a JSON object")]
    NotAnObject,
    #[error("axis `{0}` has no values")]
    EmptyAxis(String),
    #[error("`{0}` is both an axis and a fixed field")]
    Duplicate(String),
    #[error("configuration {index} ({cell}): {message}")]
    Cell { index: usize, cell: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Reads a matrix file: a JSON object whose array-valued fields are axes and
/// whose other fields are fixed.
pub fn parse_matrix(text: &str) -> Result<Matrix, MatrixError> {
    let Value::Object(obj) = serde_json::from_str::<Value>(text)? else {
        return Err(MatrixError::NotAnObject);
    };
    let mut m = Matrix::default();
    for (k, v) in obj {
        if !CONFIG_FIELDS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownField(k).into());
        }
        match v {
            Value::Array(values) => {
                m.axes.insert(k, values);
            }
            other => {
                m.fixed.insert(k, other);
            }
        }
    }
    Ok(m)
}

/// Cartesian product of the axes. Axis names vary slowest in lexicographic
/// order (the first name is the outermost loop); values keep their listed
/// order.
pub fn expand_matrix(matrix: &Matrix) -> Result<Vec<RunConfig>, MatrixError> {
    for (name, values) in &matrix.axes {
        if !CONFIG_FIELDS.contains(&name.as_str()) {
            return Err(ConfigError::UnknownField(name.clone()).into());
        }
        if values.is_empty() {
            return Err(MatrixError::EmptyAxis(name.clone()));
        }
        if matrix.fixed.contains_key(name) {
            return Err(MatrixError::Duplicate(name.clone()));
        }
    }
    let axes: Vec<(&String, &Vec<Value>)> = matrix.axes.iter().collect();
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut cell = matrix.fixed.clone();
        let mut rest = index;
        let mut picks = Vec::with_capacity(axes.len());
        for (name, values) in axes.iter().rev() {
            picks.push((name.as_str(), &values[rest % values.len()]));
            rest /= values.len();
        }
        picks.reverse();
        for (name, value) in &picks {
            cell.insert((*name).to_owned(), (*value).clone());
        }
        let describe = || picks.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",");
        let config: RunConfig = serde_json::from_value(Value::Object(cell)).map_err(|e| MatrixError::Cell {
            index,
            cell: describe(),
            message: e.to_string(),
        })?;
        config.validate().map_err(|e| MatrixError::Cell { index, cell: describe(), message: e.to_string() })?;
        out.push(config);
    }
    Ok(out)
}
