//! The dihedral group of the square acting on square arrays.
//!
//! Each element is stored as a signed 2x2 integer matrix acting on pixel
//! coordinates measured from the array center (in half-pixel units, so the
//! center of an even-sized array is representable). Applying `g` produces
//! `out(p) = in(M_g p)`, which makes `a.then(b)` the matrix product
//! `M_a M_b`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dih4 {
    Identity,
    /// Counter-clockwise quarter turn: `out[r][c] = in[c][n-1-r]`.
    Rot90,
    Rot180,
    Rot270,
    /// Mirror left-right (columns reversed).
    FlipH,
    /// Mirror top-bottom (rows reversed).
    FlipV,
    /// Mirror across the main diagonal.
    Transpose,
    /// Mirror across the anti-diagonal.
    AntiTranspose,
}

type Mat = [[i8; 2]; 2];

impl Dih4 {
    pub const ALL: [Dih4; 8] = [
        Dih4::Identity,
        Dih4::Rot90,
        Dih4::Rot180,
        Dih4::Rot270,
        Dih4::FlipH,
        Dih4::FlipV,
        Dih4::Transpose,
        Dih4::AntiTranspose,
    ];

    fn matrix(self) -> Mat {
        match self {
            Dih4::Identity => [[1, 0], [0, 1]],
            Dih4::Rot90 => [[0, 1], [-1, 0]],
            Dih4::Rot180 => [[-1, 0], [0, -1]],
            Dih4::Rot270 => [[0, -1], [1, 0]],
            Dih4::FlipH => [[1, 0], [0, -1]],
            Dih4::FlipV => [[-1, 0], [0, 1]],
            Dih4::Transpose => [[0, 1], [1, 0]],
            Dih4::AntiTranspose => [[0, -1], [-1, 0]],
        }
    }

    fn from_matrix(m: Mat) -> Dih4 {
        *Dih4::ALL
            .iter()
            .find(|g| g.matrix() == m)
            .expect("signed permutation matrices form the group")
    }

    /// The element equivalent to applying `self` and then `next`.
    pub fn then(self, next: Dih4) -> Dih4 {
        let (a, b) = (self.matrix(), next.matrix());
        let mut m = [[0i8; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Dih4::from_matrix(m)
    }

    pub fn inverse(self) -> Dih4 {
        let m = self.matrix();
        Dih4::from_matrix([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// Source `(row, col)` of output pixel `(r, c)` in an `n x n` array.
    #[inline]
    pub fn source(self, r: usize, c: usize, n: usize) -> (usize, usize) {
        let m = self.matrix();
        let last = n as isize - 1;
        let u = 2 * r as isize - last;
        let v = 2 * c as isize - last;
        let su = m[0][0] as isize * u + m[0][1] as isize * v;
        let sv = m[1][0] as isize * u + m[1][1] as isize * v;
        (((su + last) / 2) as usize, ((sv + last) / 2) as usize)
    }

    /// Transforms one row-major `n x n` plane.
    pub fn apply_plane<T: Copy>(self, src: &[T], n: usize) -> Vec<T> {
        debug_assert_eq!(src.len(), n * n);
        if self == Dih4::Identity {
            return src.to_vec();
        }
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let (sr, sc) = self.source(r, c, n);
                out.push(src[sr * n + sc]);
            }
        }
        out
    }

    pub fn apply<T: Copy>(self, a: &Array2<T>) -> Result<Array2<T>> {
        let (h, w) = a.dim();
        if h != w {
            return Err(Error::NonSquareInput { width: w, height: h });
        }
        Ok(Array2::from_shape_fn((h, w), |(r, c)| a[self.source(r, c, h)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn flip_h_reverses_columns() {
        let a = array![[1, 2], [3, 4]];
        assert_eq!(Dih4::FlipH.apply(&a).unwrap(), array![[2, 1], [4, 3]]);
        assert_eq!(Dih4::FlipV.apply(&a).unwrap(), array![[3, 4], [1, 2]]);
        assert_eq!(Dih4::Transpose.apply(&a).unwrap(), array![[1, 3], [2, 4]]);
        assert_eq!(Dih4::AntiTranspose.apply(&a).unwrap(), array![[4, 2], [3, 1]]);
        assert_eq!(Dih4::Rot90.apply(&a).unwrap(), array![[2, 4], [1, 3]]);
    }

    #[test]
    fn odd_sizes_work() {
        let a = Array2::from_shape_fn((3, 3), |(r, c)| r * 3 + c);
        assert_eq!(Dih4::Rot180.apply(&a).unwrap()[(0, 0)], 8);
        assert_eq!(Dih4::Rot90.apply(&a).unwrap()[(1, 1)], 4);
    }

    #[test]
    fn non_square_is_rejected() {
        let a = Array2::<u8>::zeros((2, 3));
        assert!(matches!(Dih4::Rot90.apply(&a), Err(Error::NonSquareInput { width: 3, height: 2 })));
    }
}
