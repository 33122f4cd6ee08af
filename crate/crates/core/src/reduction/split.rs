use nalgebra::DVector;

use crate::error::{Error, Result};

/// Partition of `{0, .., d-1}` into selected coordinates `I` and the complement `J`.
///
/// Both index lists are kept in ascending order, so the implicit permutation maps
/// `w ↦ (w_I, w_J)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinateSplit {
    dim: usize,
    selected: Vec<usize>,
    complement: Vec<usize>,
}

impl CoordinateSplit {
    pub fn new(dim: usize, selected: &[usize]) -> Result<Self> {
        let mut mask = vec![false; dim];
        for &i in selected {
            if i >= dim {
                return Err(Error::arg(format!("selected index {i} out of range for dimension {dim}")));
            }
            if mask[i] {
                return Err(Error::arg(format!("selected index {i} appears twice")));
            }
            mask[i] = true;
        }
        Ok(Self::from_mask(&mask))
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        let selected = (0..mask.len()).filter(|&i| mask[i]).collect();
        let complement = (0..mask.len()).filter(|&i| !mask[i]).collect();
        Self { dim: mask.len(), selected, complement }
    }

    /// All coordinates selected.
    pub fn full(dim: usize) -> Self {
        Self::from_mask(&vec![true; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of selected coordinates `r`.
    pub fn rank(&self) -> usize {
        self.selected.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn gather_selected(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.selected.len(), self.selected.iter().map(|&i| v[i]))
    }

    pub fn gather_complement(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.complement.len(), self.complement.iter().map(|&i| v[i]))
    }

    /// Reassembles a full vector from its `I` and `J` parts.
    pub fn scatter(&self, v_sel: &DVector<f64>, v_comp: &DVector<f64>) -> Result<DVector<f64>> {
        if v_sel.len() != self.selected.len() || v_comp.len() != self.complement.len() {
            return Err(Error::shape(format!(
                "split expects parts of length {} and {}, got {} and {}",
                self.selected.len(),
                self.complement.len(),
                v_sel.len(),
                v_comp.len()
            )));
        }
        let mut out = DVector::zeros(self.dim);
        for (k, &i) in self.selected.iter().enumerate() {
            out[i] = v_sel[k];
        }
        for (k, &j) in self.complement.iter().enumerate() {
            out[j] = v_comp[k];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn scatter_inverts_gather(mask in proptest::collection::vec(any::<bool>(), 1..40)) {
            let split = CoordinateSplit::from_mask(&mask);
            let v = DVector::from_iterator(mask.len(), (0..mask.len()).map(|i| i as f64 * 0.5 - 3.0));
            let back = split.scatter(&split.gather_selected(&v), &split.gather_complement(&v)).unwrap();
            prop_assert_eq!(back, v);
            prop_assert_eq!(split.rank() + split.complement().len(), mask.len());
        }
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(CoordinateSplit::new(3, &[0, 0]).is_err());
        assert!(CoordinateSplit::new(3, &[3]).is_err());
        let s = CoordinateSplit::new(4, &[2, 0]).unwrap();
        assert_eq!(s.selected(), &[0, 2]);
        assert_eq!(s.complement(), &[1, 3]);
    }
}
