//! Serialization helpers: 1-based index lists and row-major matrices.

use nalgebra::DMatrix;
use serde::ser::SerializeSeq;
use serde::Serializer;

pub(crate) mod one_based {
    use super::*;

    pub fn serialize<S: Serializer>(idx: &[usize], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(idx.len()))?;
        for &i in idx {
            seq.serialize_element(&(i + 1))?;
        }
        seq.end()
    }
}

pub(crate) mod one_based_nested {
    use super::*;

    struct Inner<'a>(&'a [usize]);

    impl serde::Serialize for Inner<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::one_based::serialize(self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(blocks: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(blocks.len()))?;
        for b in blocks {
            seq.serialize_element(&Inner(b))?;
        }
        seq.end()
    }
}

pub(crate) mod matrix_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.nrows()))?;
        for r in m.row_iter() {
            let row: Vec<f64> = r.iter().copied().collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}
