//! Versioned JSON form of (constrained) zonotopes.
//!
//! ```json
//! {"schema_version": 1, "dimension": 2, "num_generators": 3, "num_constraints": 1,
//!  "center": [0, 0], "generators": [[1, 0], [0, 1], [0, 0]],
//!  "A": [[1, 0, 0.5]], "b": [-0.5]}
//! ```
//!
//! `generators` lists columns (one array of length `dimension` per
//! generator); `A` lists rows (one array of length `num_generators` per
//! constraint).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setalg::conzono::ConstrainedZonotope;

pub const SET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDocument {
    pub schema_version: u32,
    pub dimension: usize,
    pub num_generators: usize,
    pub num_constraints: usize,
    pub center: Vec<f64>,
    pub generators: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub constraint_matrix: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub constraint_vector: Vec<f64>,
}

impl From<&ConstrainedZonotope> for SetDocument {
    fn from(z: &ConstrainedZonotope) -> Self {
        SetDocument {
            schema_version: SET_SCHEMA_VERSION,
            dimension: z.dim(),
            num_generators: z.num_generators(),
            num_constraints: z.num_constraints(),
            center: z.center().iter().copied().collect(),
            generators: z
                .generators()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            constraint_matrix: z
                .constraint_matrix()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            constraint_vector: z.constraint_vector().iter().copied().collect(),
        }
    }
}

impl SetDocument {
    pub fn to_set(&self) -> Result<ConstrainedZonotope> {
        let bad = |field: &str, msg: String| Error::scenario(format!("set.{field}"), msg);
        if self.schema_version != SET_SCHEMA_VERSION {
            return Err(bad(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        let (n, p, m) = (self.dimension, self.num_generators, self.num_constraints);
        if self.center.len() != n {
            return Err(bad(
                "center",
                format!("expected {n} entries, found {}", self.center.len()),
            ));
        }
        if self.generators.len() != p || self.generators.iter().any(|c| c.len() != n) {
            return Err(bad(
                "generators",
                format!("expected {p} columns of length {n}"),
            ));
        }
        if self.constraint_matrix.len() != m || self.constraint_matrix.iter().any(|r| r.len() != p)
        {
            return Err(bad("A", format!("expected {m} rows of length {p}")));
        }
        if self.constraint_vector.len() != m {
            return Err(bad("b", format!("expected {m} entries")));
        }
        let g = DMatrix::from_fn(n, p, |i, j| self.generators[j][i]);
        let a = DMatrix::from_fn(m, p, |i, j| self.constraint_matrix[i][j]);
        ConstrainedZonotope::new(
            DVector::from_vec(self.center.clone()),
            g,
            a,
            DVector::from_vec(self.constraint_vector.clone()),
        )
    }
}
