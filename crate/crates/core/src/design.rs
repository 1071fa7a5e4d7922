//! Design matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on unit column norms.
pub const UNIT_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// `I_n`, stored implicitly.
    Identity(usize),
    Dense(DMatrix<f64>),
}

/// An `n × m` design. Columns have unit ℓ2 norm unless the matrix was built
/// with [`DesignMatrix::unnormalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    storage: Storage,
    unit_columns: bool,
}

impl DesignMatrix {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("design must have at least one row"));
        }
        Ok(DesignMatrix {
            storage: Storage::Identity(n),
            unit_columns: true,
        })
    }

    /// Dense design whose columns must have unit norm within [`UNIT_NORM_TOL`].
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        check_entries(&x)?;
        for (j, col) in x.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::contract(format!(
                    "column {j} has norm {norm}; columns must have unit norm"
                )));
            }
        }
        Ok(DesignMatrix {
            storage: Storage::Dense(x),
            unit_columns: true,
        })
    }

    /// Dense design with arbitrary column norms (standardized group designs,
    /// user-supplied matrices that are not normalized).
    pub fn unnormalized(x: DMatrix<f64>) -> Result<Self> {
        check_entries(&x)?;
        Ok(DesignMatrix {
            storage: Storage::Dense(x),
            unit_columns: false,
        })
    }

    /// Rescales every nonzero column to unit norm.
    pub fn normalized_from(mut x: DMatrix<f64>) -> Result<Self> {
        check_entries(&x)?;
        for mut col in x.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            } else {
                return Err(Error::contract("cannot normalize a zero column"));
            }
        }
        Self::new(x)
    }

    pub fn nrows(&self) -> usize {
        match &self.storage {
            Storage::Identity(n) => *n,
            Storage::Dense(x) => x.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match &self.storage {
            Storage::Identity(n) => *n,
            Storage::Dense(x) => x.ncols(),
        }
    }

    pub fn has_unit_columns(&self) -> bool {
        self.unit_columns
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.storage, Storage::Identity(_))
    }

    /// Dense copy of the matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Identity(n) => DMatrix::identity(*n, *n),
            Storage::Dense(x) => x.clone(),
        }
    }

    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.storage {
            Storage::Identity(_) => None,
            Storage::Dense(x) => Some(x),
        }
    }

    /// Column `j` as a dense vector.
    pub fn column(&self, j: usize) -> DVector<f64> {
        match &self.storage {
            Storage::Identity(n) => {
                let mut e = DVector::zeros(*n);
                e[j] = 1.0;
                e
            }
            Storage::Dense(x) => x.column(j).into_owned(),
        }
    }

    /// Dense submatrix of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        match &self.storage {
            Storage::Identity(n) => {
                let mut out = DMatrix::zeros(*n, cols.len());
                for (k, &j) in cols.iter().enumerate() {
                    out[(j, k)] = 1.0;
                }
                out
            }
            Storage::Dense(x) => x.select_columns(cols),
        }
    }

    /// `X v`.
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.storage {
            Storage::Identity(_) => v.clone(),
            Storage::Dense(x) => x * v,
        }
    }

    /// `Xᵀ u`.
    pub fn tr_mul_vec(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.storage {
            Storage::Identity(_) => u.clone(),
            Storage::Dense(x) => x.tr_mul(u),
        }
    }

    /// `XᵀX`.
    pub fn gram(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Identity(n) => DMatrix::identity(*n, *n),
            Storage::Dense(x) => x.tr_mul(x),
        }
    }
}

fn check_entries(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::contract("design must have at least one row and column"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("design contains non-finite entries"));
    }
    Ok(())
}
