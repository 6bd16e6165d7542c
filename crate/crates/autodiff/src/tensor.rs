use num_traits::Float;

use crate::error::{Error, Result};

/// Element types the engine can differentiate over.
///
/// `f32` is the production type; `f64` exists so gradient checks can run the
/// identical graph at higher precision.
pub trait Scalar:
    Float + num_traits::NumAssign + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor with an explicit shape.
///
/// Rank 0 (empty shape) denotes a scalar holding exactly one element.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); len] }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; len] }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: T) -> Self {
        Tensor { shape: Vec::new(), data: vec![value] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "cannot build tensor of shape {shape:?} ({expect} elements) from {} values",
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Extract the single element of a one-element tensor.
    ///
    /// Panics when the tensor holds more than one value; callers only use this
    /// on loss heads, which are rank 0 by construction.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() requires a one-element tensor, got shape {:?}", self.shape);
        self.data[0]
    }

    /// Same data, new shape; element count must be preserved.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} ({} elements) to {shape:?} ({expect} elements)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data.clone() })
    }

    /// Error if any element is NaN or infinite; `context` names the tensor in
    /// the message.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }
}
