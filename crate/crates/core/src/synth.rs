//! Synthetic scan degradation: skew, flips and pixel noise.
//!
//! Used to build test corpora that stand in for real scanner output.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::PageImage;

/// Rotates about the image centre by `degrees` (counter-clockwise on the
/// page), bilinear sampling, white fill. Output keeps the input size.
pub fn rotate(img: &PageImage, degrees: f64) -> PageImage {
    if degrees == 0.0 {
        return img.clone();
    }
    // 16.16 fixed point source coordinates, stepped along each row
    const ONE: i64 = 1 << 16;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let fix = |v: f64| (v * ONE as f64).round() as i64;
    let (step_x, step_y) = (fix(cos), fix(sin));
    let (max_x, max_y) = (((w - 1) as i64) << 16, ((h - 1) as i64) << 16);
    let src = img.pixels();
    let mut out = vec![255u8; w * h];
    for (y, row) in out.chunks_exact_mut(w).enumerate() {
        let dy = y as f64 - cy;
        let mut sx = fix(-cos * cx - sin * dy + cx);
        let mut sy = fix(-sin * cx + cos * dy + cy);
        for px in row.iter_mut() {
            if sx >= 0 && sy >= 0 && sx < max_x && sy < max_y {
                let (x0, y0) = ((sx >> 16) as usize, (sy >> 16) as usize);
                let (fx, fy) = (sx & (ONE - 1), sy & (ONE - 1));
                let i = y0 * w + x0;
                let top = src[i] as i64 * (ONE - fx) + src[i + 1] as i64 * fx;
                let bottom = src[i + w] as i64 * (ONE - fx) + src[i + w + 1] as i64 * fx;
                let v = (top * (ONE - fy) + bottom * fy + (1 << 31)) >> 32;
                *px = v as u8;
            }
            sx += step_x;
            sy += step_y;
        }
    }
    PageImage::new(img.width(), img.height(), img.dpi(), out).expect("same geometry")
}

/// Adds zero-mean Gaussian noise, clamped to [0, 255].
pub fn gaussian_noise<R: Rng>(img: &mut PageImage, sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0f32, sigma as f32).expect("finite sigma");
    for p in img.pixels_mut() {
        let v = *p as f32 + normal.sample(rng);
        *p = v.round().clamp(0.0, 255.0) as u8;
    }
}

/// Sets a `density` fraction of pixels to black or white with equal odds.
pub fn salt_and_pepper<R: Rng>(img: &mut PageImage, density: f64, rng: &mut R) {
    if density <= 0.0 {
        return;
    }
    let pixels = img.pixels_mut();
    let n = pixels.len();
    // geometric gaps between hits
    let ln_q = (1.0 - density.min(1.0 - 1e-12)).ln();
    let mut i = 0usize;
    loop {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        i += (u.ln() / ln_q).floor() as usize;
        if i >= n {
            break;
        }
        pixels[i] = if rng.gen_bool(0.5) { 0 } else { 255 };
        i += 1;
    }
}

/// A degradation recipe applied to one page.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degradation {
    pub skew_deg: f64,
    pub flip: bool,
    pub noise_sigma: f64,
    pub salt_pepper: f64,
}

impl Degradation {
    pub fn apply<R: Rng>(&self, img: &PageImage, rng: &mut R) -> PageImage {
        let mut page = rotate(img, self.skew_deg);
        if self.flip {
            page = page.rotated_180();
        }
        gaussian_noise(&mut page, self.noise_sigma, rng);
        salt_and_pepper(&mut page, self.salt_pepper, rng);
        page
    }
}
