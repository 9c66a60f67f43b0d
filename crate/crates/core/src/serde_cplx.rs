//! JSON representation of complex vectors and matrices.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major arrays of rows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::{CMat, CVec, HermitianPsd};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<[f64; 2]>>);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorRepr(pub Vec<[f64; 2]>);

impl From<&CMat> for MatrixRepr {
    fn from(m: &CMat) -> Self {
        MatrixRepr(
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect(),
        )
    }
}

impl TryFrom<MatrixRepr> for CMat {
    type Error = ModelError;

    fn try_from(r: MatrixRepr) -> Result<Self, Self::Error> {
        let rows = r.0.len();
        let cols = r.0.first().map_or(0, Vec::len);
        if r.0.iter().any(|row| row.len() != cols) {
            return Err(ModelError::Dimension("ragged matrix rows".into()));
        }
        Ok(CMat::from_fn(rows, cols, |i, j| {
            Complex64::new(r.0[i][j][0], r.0[i][j][1])
        }))
    }
}

impl From<&CVec> for VectorRepr {
    fn from(v: &CVec) -> Self {
        VectorRepr(v.iter().map(|z| [z.re, z.im]).collect())
    }
}

impl From<VectorRepr> for CVec {
    fn from(r: VectorRepr) -> Self {
        CVec::from_iterator(r.0.len(), r.0.iter().map(|p| Complex64::new(p[0], p[1])))
    }
}

impl From<HermitianPsd> for MatrixRepr {
    fn from(h: HermitianPsd) -> Self {
        MatrixRepr::from(h.matrix())
    }
}

impl TryFrom<MatrixRepr> for HermitianPsd {
    type Error = ModelError;

    fn try_from(r: MatrixRepr) -> Result<Self, Self::Error> {
        HermitianPsd::new(CMat::try_from(r)?)
    }
}

pub mod cmat {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        CMat::try_from(r).map_err(serde::de::Error::custom)
    }
}

pub mod cvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        VectorRepr::from(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        Ok(CVec::from(VectorRepr::deserialize(d)?))
    }
}
