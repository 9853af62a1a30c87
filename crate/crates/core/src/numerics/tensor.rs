use std::fmt;

use super::NumericsError;

/// Dense row-major `f64` array with an optional gradient slot of the same shape.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(NumericsError::InvalidShape(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::DataLength { shape, len: data.len() });
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, NumericsError> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    /// Builds a 2-D tensor from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, NumericsError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NumericsError::RaggedRows);
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<(), NumericsError> {
        if grad.len() != self.data.len() {
            return Err(NumericsError::DataLength {
                shape: self.shape.clone(),
                len: grad.len(),
            });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a 2-D tensor; 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    /// Largest absolute element-wise difference; `None` if shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    pub(crate) fn require_matrix(&self) -> Result<(usize, usize), NumericsError> {
        if self.shape.len() != 2 {
            return Err(NumericsError::NotMatrix(self.shape.clone()));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data,
            grad: None,
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .field("has_grad", &self.grad.is_some())
            .finish()
    }
}

/// Binary `rows × cols` mask; `true` marks an allowed position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, allowed: Vec<bool>) -> Result<Self, NumericsError> {
        if rows * cols != allowed.len() {
            return Err(NumericsError::DataLength {
                shape: vec![rows, cols],
                len: allowed.len(),
            });
        }
        Ok(Mask { rows, cols, allowed })
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            allowed: vec![true; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            allowed: vec![false; rows * cols],
        }
    }

    /// Reads a 0/1 tensor; any non-zero entry counts as allowed.
    pub fn from_tensor(t: &Tensor) -> Result<Self, NumericsError> {
        let (rows, cols) = t.require_matrix()?;
        Ok(Mask {
            rows,
            cols,
            allowed: t.data().iter().map(|&v| v != 0.0).collect(),
        })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(
            vec![self.rows, self.cols],
            self.allowed.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, allowed: bool) {
        self.allowed[row * self.cols + col] = allowed;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.allowed[row * self.cols..(row + 1) * self.cols]
    }

    pub fn count_allowed(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }
}
