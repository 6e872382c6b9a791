use serde::{Deserialize, Serialize};

/// Dense `(ap, ue, path)` tensor stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTensor<T> {
    num_aps: usize,
    num_ues: usize,
    num_paths: usize,
    data: Vec<T>,
}

impl<T: Clone> PathTensor<T> {
    pub fn filled(num_aps: usize, num_ues: usize, num_paths: usize, value: T) -> Self {
        Self {
            num_aps,
            num_ues,
            num_paths,
            data: vec![value; num_aps * num_ues * num_paths],
        }
    }
}

impl<T> PathTensor<T> {
    /// Panics if `data.len()` does not match the shape.
    pub fn from_vec(num_aps: usize, num_ues: usize, num_paths: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            num_aps * num_ues * num_paths,
            "tensor data does not match shape {num_aps}x{num_ues}x{num_paths}"
        );
        Self {
            num_aps,
            num_ues,
            num_paths,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_aps, self.num_ues, self.num_paths)
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    #[inline]
    fn offset(&self, m: usize, k: usize) -> usize {
        debug_assert!(m < self.num_aps && k < self.num_ues);
        (m * self.num_ues + k) * self.num_paths
    }

    /// The `L` entries of link `(m, k)`.
    #[inline]
    pub fn link(&self, m: usize, k: usize) -> &[T] {
        let o = self.offset(m, k);
        &self.data[o..o + self.num_paths]
    }

    #[inline]
    pub fn link_mut(&mut self, m: usize, k: usize) -> &mut [T] {
        let o = self.offset(m, k);
        &mut self.data[o..o + self.num_paths]
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize, l: usize) -> &T {
        &self.link(m, k)[l]
    }

    #[inline]
    pub fn set(&mut self, m: usize, k: usize, l: usize, value: T) {
        self.link_mut(m, k)[l] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &PathTensor<U>) -> bool {
        self.shape() == other.shape()
    }
}
