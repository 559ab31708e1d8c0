//! Three-dimensional potential grids over (rho, l, z) with additive term
//! provenance and a search-exclusion mask.

use crate::error::{Error, Result};

/// A potential sampled on a rectilinear (rho, l, z) grid, in joules.
/// `values` is indexed as (i_rho * nl + i_l) * nz + i_z. Masked samples are
/// excluded from minimum/saddle searches (e.g. the Casimir-Polder divergence
/// near the surface) but still carry values.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub rho: Vec<f64>,
    pub l: Vec<f64>,
    pub z: Vec<f64>,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    /// Names of the additive contributions in this grid.
    pub terms: Vec<String>,
}

impl PotentialGrid {
    pub fn zeros(rho: Vec<f64>, l: Vec<f64>, z: Vec<f64>, term: &str) -> Self {
        let n = rho.len() * l.len() * z.len();
        Self { rho, l, z, values: vec![0.0; n], mask: vec![false; n], terms: vec![term.to_string()] }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.l.len() + j) * self.z.len() + k
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.values[idx] = v;
    }

    /// Same axes, zero values, fresh provenance.
    pub fn like(&self, term: &str) -> Self {
        Self::zeros(self.rho.clone(), self.l.clone(), self.z.clone(), term)
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.rho == other.rho && self.l == other.l && self.z == other.z
    }

    /// Pointwise sum; masks are unioned and provenance concatenated.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.same_axes(other) {
            return Err(Error::GridMismatch("potential grids have different axes".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(other.values.iter()) {
            *v += w;
        }
        for (m, n) in out.mask.iter_mut().zip(other.mask.iter()) {
            *m |= n;
        }
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    /// Pointwise difference, removing `other`'s terms from the provenance.
    pub fn subtract(&self, other: &Self) -> Result<Self> {
        if !self.same_axes(other) {
            return Err(Error::GridMismatch("potential grids have different axes".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(other.values.iter()) {
            *v -= w;
        }
        out.terms.retain(|t| !other.terms.contains(t));
        Ok(out)
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values.iter_mut() {
            *v *= factor;
        }
    }

    /// Exact additive composition of several term grids.
    pub fn sum(grids: &[&Self]) -> Result<Self> {
        let (first, rest) = grids.split_first().ok_or_else(|| {
            Error::InvalidInput("cannot sum an empty list of potential grids".into())
        })?;
        let mut out = (*first).clone();
        for g in rest {
            out = out.add(g)?;
        }
        Ok(out)
    }
}
