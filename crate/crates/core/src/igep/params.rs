use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::ensure_dim;
use crate::{Error, Result};

/// Parameters of the linear generator
/// `y = alpha + beta * xbar + gamma * u + omega * v`, in standardized units.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
    /// `D × D`, loadings on the adaptive latents.
    pub gamma: Array2<f64>,
    /// `D × J`, loadings on the independent latents.
    pub omega: Array2<f64>,
}

/// Number of free parameters of a generator with output dimension `d` and
/// `j` independent latents.
pub fn parameter_count(d: usize, j: usize) -> usize {
    2 * d + d * d + d * j
}

impl GeneratorParams {
    /// The starting point of training: `alpha = 0, beta = 1, gamma = I, omega = 0`,
    /// which in expectation predicts the ensemble mean.
    pub fn initial(d: usize, j: usize) -> Self {
        Self {
            alpha: Array1::zeros(d),
            beta: Array1::ones(d),
            gamma: Array2::eye(d),
            omega: Array2::zeros((d, j)),
        }
    }

    pub fn zeros(d: usize, j: usize) -> Self {
        Self {
            alpha: Array1::zeros(d),
            beta: Array1::zeros(d),
            gamma: Array2::zeros((d, d)),
            omega: Array2::zeros((d, j)),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn independent_dim(&self) -> usize {
        self.omega.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.output_dim() + self.independent_dim()
    }

    pub fn n_params(&self) -> usize {
        self.alpha.len() + self.beta.len() + self.gamma.len() + self.omega.len()
    }

    /// Squared Frobenius norm over all parameter blocks.
    pub fn norm_sq(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.alpha.len();
        ensure_dim(d, self.beta.len())?;
        ensure_dim(d, self.gamma.nrows())?;
        ensure_dim(d, self.gamma.ncols())?;
        ensure_dim(d, self.omega.nrows())?;
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator parameters".into()));
        }
        Ok(())
    }

    /// Flattens as `alpha, beta, gamma (row-major), omega (row-major)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend(self.alpha.iter());
        out.extend(self.beta.iter());
        out.extend(self.gamma.iter());
        out.extend(self.omega.iter());
        out
    }

    pub fn from_flat(d: usize, j: usize, flat: &[f64]) -> Result<Self> {
        ensure_dim(parameter_count(d, j), flat.len())?;
        let (a, rest) = flat.split_at(d);
        let (b, rest) = rest.split_at(d);
        let (g, o) = rest.split_at(d * d);
        Ok(Self {
            alpha: Array1::from(a.to_vec()),
            beta: Array1::from(b.to_vec()),
            gamma: Array2::from_shape_vec((d, d), g.to_vec()).unwrap(),
            omega: Array2::from_shape_vec((d, j), o.to_vec()).unwrap(),
        })
    }
}

/// JSON layout with nested arrays for the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ParamsDoc {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * ncols);
    for r in rows {
        ensure_dim(ncols, r.len())?;
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), ncols), flat).unwrap())
}

impl From<&GeneratorParams> for ParamsDoc {
    fn from(p: &GeneratorParams) -> Self {
        Self {
            d: p.output_dim(),
            j: p.independent_dim(),
            alpha: p.alpha.to_vec(),
            beta: p.beta.to_vec(),
            gamma: rows(&p.gamma),
            omega: rows(&p.omega),
        }
    }
}

impl TryFrom<ParamsDoc> for GeneratorParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        ensure_dim(doc.d, doc.gamma.len())?;
        ensure_dim(doc.d, doc.omega.len())?;
        let p = Self {
            alpha: Array1::from(doc.alpha),
            beta: Array1::from(doc.beta),
            gamma: from_rows(&doc.gamma, doc.d)?,
            omega: from_rows(&doc.omega, doc.j)?,
        };
        p.validate()?;
        Ok(p)
    }
}
