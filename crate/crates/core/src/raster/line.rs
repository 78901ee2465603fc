use super::{PageImage, RasterError};

pub type Point = (i64, i64);

/// Integer line from `p0` to `p1`, both endpoints included.
///
/// Steps one pixel along the major axis; the minor coordinate is the nearest
/// integer to the ideal line, ties going towards +infinity. This tie rule is
/// independent of direction, so a line and its reverse visit the same pixels.
pub fn bresenham_line(p0: Point, p1: Point) -> Vec<Point> {
    let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
    let steep = dy.abs() > dx.abs();
    // Work in (major, minor) coordinates.
    let (a0, b0, da, db) = if steep {
        (p0.1, p0.0, dy, dx)
    } else {
        (p0.0, p0.1, dx, dy)
    };
    let n = da.abs();
    let step = da.signum();
    let mut out = Vec::with_capacity(n as usize + 1);

    // minor(i) = b0 + floor((2*i*db + n) / (2n)); track quotient and remainder.
    let two_n = 2 * n.max(1);
    let mut q = 0i64;
    let mut r = n;
    for i in 0..=n {
        let (a, b) = (a0 + step * i, b0 + q);
        out.push(if steep { (b, a) } else { (a, b) });
        r += 2 * db;
        if r >= two_n {
            r -= two_n;
            q += 1;
        } else if r < 0 {
            r += two_n;
            q -= 1;
        }
    }
    out
}

/// Luminance values along the Bresenham line between two in-bounds points.
pub fn sample_scanline(img: &PageImage, p0: Point, p1: Point) -> Result<Vec<u8>, RasterError> {
    for p in [p0, p1] {
        if !img.contains(p.0, p.1) {
            return Err(RasterError::OutOfBounds { x: p.0, y: p.1 });
        }
    }
    Ok(bresenham_line(p0, p1)
        .into_iter()
        .map(|(x, y)| img.get(x as u32, y as u32))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_and_point() {
        assert_eq!(
            bresenham_line((0, 0), (3, 0)),
            vec![(0, 0), (1, 0), (2, 0), (3, 0)]
        );
        assert_eq!(bresenham_line((0, 0), (0, 0)), vec![(0, 0)]);
        assert_eq!(bresenham_line((2, 5), (2, 2)), vec![(2, 5), (2, 4), (2, 3), (2, 2)]);
    }

    #[test]
    fn shallow_line() {
        // y = 2x/5: 0, 0.4, 0.8, 1.2, 1.6, 2.0
        assert_eq!(
            bresenham_line((0, 0), (5, 2)),
            vec![(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2)]
        );
    }

    #[test]
    fn ties_round_up_in_both_directions() {
        // y = x/2 hits .5 at odd x
        let fwd = bresenham_line((0, 0), (4, 2));
        assert_eq!(fwd, vec![(0, 0), (1, 1), (2, 1), (3, 2), (4, 2)]);
        let mut back = bresenham_line((4, 2), (0, 0));
        back.reverse();
        assert_eq!(back, fwd);
    }

    #[test]
    fn sampling_checks_bounds() {
        let img = PageImage::filled(10, 10, 72.0, 255);
        assert_eq!(sample_scanline(&img, (0, 0), (9, 9)).unwrap(), vec![255; 10]);
        assert!(matches!(
            sample_scanline(&img, (0, 0), (10, 3)),
            Err(RasterError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn dark_column_is_one_run() {
        let mut img = PageImage::filled(20, 5, 72.0, 255);
        img.fill_rect(7, 0, 1, 5, 0);
        let s = sample_scanline(&img, (0, 2), (19, 2)).unwrap();
        let dark: Vec<usize> = (0..s.len()).filter(|&i| s[i] < 128).collect();
        assert_eq!(dark, vec![7]);
    }
}
