//! Point clouds and paired `(x, F(x))` sample sets.

use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::testbed::TestFunction;

/// `N` points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Wraps row-major coordinates. Every coordinate must be finite.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape {
                what: "point cloud data",
                expected: (data.len() / dim + 1) * dim,
                found: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "point cloud" });
        }
        Ok(Self { dim, data })
    }

    /// Builds a cloud from equally long points.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.as_ref().len());
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_len("point", dim, p.as_ref().len())?;
            data.extend_from_slice(p.as_ref());
        }
        Self::new(dim, data)
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// True when the cloud holds no points.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterator over the points.
    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major coordinates.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends one point.
    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        check_len("point", self.dim, p.len())?;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "point cloud" });
        }
        self.data.extend_from_slice(p);
        Ok(())
    }

    /// New cloud containing the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, data }
    }
}

/// Inputs `X ⊂ R^d` with their outputs `Y ⊂ R^c`, one output per input.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    inputs: PointCloud,
    outputs: PointCloud,
}

impl SampleSet {
    /// Pairs inputs with outputs; both clouds must have the same length.
    pub fn new(inputs: PointCloud, outputs: PointCloud) -> Result<Self> {
        check_len("sample outputs", inputs.len(), outputs.len())?;
        Ok(Self { inputs, outputs })
    }

    /// Evaluates `f` at every input.
    pub fn from_function(f: &TestFunction, inputs: PointCloud) -> Result<Self> {
        check_len("function input", f.input_dim(), inputs.dim())?;
        let mut out = Vec::with_capacity(inputs.len() * f.output_dim());
        for x in inputs.iter() {
            out.extend(f.evaluate(x)?);
        }
        let outputs = PointCloud::new(f.output_dim(), out)?;
        Ok(Self { inputs, outputs })
    }

    /// Input points `X`.
    pub fn inputs(&self) -> &PointCloud {
        &self.inputs
    }

    /// Output points `Y`.
    pub fn outputs(&self) -> &PointCloud {
        &self.outputs
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// True when there are no samples.
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.inputs.dim()
    }

    /// Output dimension `c`.
    pub fn output_dim(&self) -> usize {
        self.outputs.dim()
    }

    /// Replaces the outputs, keeping the inputs.
    pub fn with_outputs(self, outputs: PointCloud) -> Result<Self> {
        Self::new(self.inputs, outputs)
    }
}
