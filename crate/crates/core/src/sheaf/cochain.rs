use nalgebra::{DVector, DVectorView, DVectorViewMut};

use crate::error::{Error, Result};
use crate::linalg::BlockLayout;
use crate::scalar::Real;

use super::CellularSheaf;

/// Degree of a cochain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    /// Indexed by vertices, ascending.
    Zero,
    /// Indexed by edges in canonical `(min, max)` lexicographic order.
    One,
}

impl Degree {
    pub fn as_u8(self) -> u8 {
        match self {
            Degree::Zero => 0,
            Degree::One => 1,
        }
    }
}

/// A 0- or 1-cochain: one vector per vertex (or edge) stalk, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain<T: Real> {
    degree: Degree,
    layout: BlockLayout,
    data: DVector<T>,
}

impl<T: Real> Cochain<T> {
    pub fn zeros(sheaf: &CellularSheaf<T>, degree: Degree) -> Self {
        let layout = sheaf.layout(degree).clone();
        let data = DVector::zeros(layout.total());
        Self {
            degree,
            layout,
            data,
        }
    }

    pub fn from_vector(sheaf: &CellularSheaf<T>, degree: Degree, data: DVector<T>) -> Result<Self> {
        let layout = sheaf.layout(degree).clone();
        if data.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                context: format!("{}-cochain", degree.as_u8()),
                expected: layout.total(),
                actual: data.len(),
            });
        }
        Ok(Self {
            degree,
            layout,
            data,
        })
    }

    pub fn from_blocks(
        sheaf: &CellularSheaf<T>,
        degree: Degree,
        blocks: &[DVector<T>],
    ) -> Result<Self> {
        let layout = sheaf.layout(degree).clone();
        if blocks.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                context: format!("number of {}-cochain blocks", degree.as_u8()),
                expected: layout.len(),
                actual: blocks.len(),
            });
        }
        let mut data = DVector::zeros(layout.total());
        for (k, b) in blocks.iter().enumerate() {
            if b.len() != layout.size(k) {
                return Err(Error::DimensionMismatch {
                    context: format!("block {k} of {}-cochain", degree.as_u8()),
                    expected: layout.size(k),
                    actual: b.len(),
                });
            }
            data.rows_mut(layout.offset(k), b.len()).copy_from(b);
        }
        Ok(Self {
            degree,
            layout,
            data,
        })
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn block(&self, k: usize) -> DVectorView<'_, T> {
        self.data.rows(self.layout.offset(k), self.layout.size(k))
    }

    pub fn block_mut(&mut self, k: usize) -> DVectorViewMut<'_, T> {
        let (o, s) = (self.layout.offset(k), self.layout.size(k));
        self.data.rows_mut(o, s)
    }

    /// Flat vector in canonical block order.
    pub fn vector(&self) -> &DVector<T> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<T> {
        self.data
    }

    pub fn norm(&self) -> T {
        self.data.norm()
    }

    pub(crate) fn expect_shape(&self, sheaf: &CellularSheaf<T>, degree: Degree) -> Result<()> {
        if self.degree != degree {
            return Err(Error::DegreeMismatch {
                expected: degree.as_u8(),
                actual: self.degree.as_u8(),
            });
        }
        if &self.layout != sheaf.layout(degree) {
            return Err(Error::DimensionMismatch {
                context: format!("{}-cochain stalk layout", degree.as_u8()),
                expected: sheaf.layout(degree).total(),
                actual: self.layout.total(),
            });
        }
        Ok(())
    }
}
