//! Mirror padding that reflects about the edge pixel without repeating it.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Maps a possibly out-of-range coordinate into `0..n` by reflection.
/// Valid for `-(n-1) <= i <= 2(n-1)`.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let last = n as isize - 1;
    let j = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    j as usize
}

fn check_margin(width: usize, height: usize, margin: usize) -> Result<()> {
    let min_dim = width.min(height);
    if margin > 0 && margin >= min_dim {
        return Err(Error::MarginTooLarge { margin, min_dim });
    }
    Ok(())
}

/// Pads a one-dimensional sequence by `margin` on both ends.
pub fn reflect_pad_1d<T: Copy>(src: &[T], margin: usize) -> Result<Vec<T>> {
    if margin > 0 && margin >= src.len() {
        return Err(Error::MarginTooLarge {
            margin,
            min_dim: src.len(),
        });
    }
    let m = margin as isize;
    Ok((0..src.len() + 2 * margin)
        .map(|i| src[reflect_index(i as isize - m, src.len())])
        .collect())
}

/// Pads a row-major `width x height` plane by `margin` on every side.
pub fn reflect_pad_plane<T: Copy>(src: &[T], width: usize, height: usize, margin: usize) -> Result<Vec<T>> {
    check_margin(width, height, margin)?;
    let (pw, ph) = (width + 2 * margin, height + 2 * margin);
    let m = margin as isize;
    let mut out = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        let sy = reflect_index(y as isize - m, height);
        let row = &src[sy * width..(sy + 1) * width];
        for x in 0..pw {
            out.push(row[reflect_index(x as isize - m, width)]);
        }
    }
    Ok(out)
}

pub fn reflect_pad<T: Copy>(a: &Array2<T>, margin: usize) -> Result<Array2<T>> {
    let (h, w) = a.dim();
    check_margin(w, h, margin)?;
    let m = margin as isize;
    Ok(Array2::from_shape_fn((h + 2 * margin, w + 2 * margin), |(y, x)| {
        a[(reflect_index(y as isize - m, h), reflect_index(x as isize - m, w))]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pads_a_row() {
        assert_eq!(reflect_pad_1d(&[1, 2, 3], 1).unwrap(), vec![2, 1, 2, 3, 2]);
        assert_eq!(reflect_pad_1d(&[1, 2, 3], 2).unwrap(), vec![3, 2, 1, 2, 3, 2, 1]);
        assert!(reflect_pad_1d(&[1, 2, 3], 3).is_err());
        let row = [1, 2, 3];
        // A 1-pixel-high plane cannot be padded, so pad a 3x3 with equal rows.
        let plane: Vec<i32> = row.iter().cycle().take(9).copied().collect();
        let p = reflect_pad_plane(&plane, 3, 3, 2).unwrap();
        assert_eq!(&p[..7], &[3, 2, 1, 2, 3, 2, 1]);
        let p = reflect_pad_plane(&plane, 3, 3, 1).unwrap();
        assert_eq!(&p[..5], &[2, 1, 2, 3, 2]);
    }

    #[test]
    fn zero_margin_is_identity() {
        let a = array![[1, 2], [3, 4]];
        assert_eq!(reflect_pad(&a, 0).unwrap(), a);
    }

    #[test]
    fn margin_must_fit() {
        let a = array![[1, 2, 3], [4, 5, 6]];
        assert!(matches!(reflect_pad(&a, 2), Err(Error::MarginTooLarge { margin: 2, min_dim: 2 })));
        assert_eq!(reflect_pad(&a, 1).unwrap().dim(), (4, 5));
    }
}
