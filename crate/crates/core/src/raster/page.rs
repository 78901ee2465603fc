use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RasterError;

/// Assumed resolution of images that carry no density information.
pub const DEFAULT_DPI: f64 = 300.0;

/// Grayscale page raster, row-major, 0 = black.
#[derive(Debug, Clone, PartialEq)]
pub struct PageImage {
    width: u32,
    height: u32,
    dpi: f64,
    pixels: Vec<u8>,
}

impl PageImage {
    pub fn new(width: u32, height: u32, dpi: f64, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::InvalidImage("zero dimension".into()));
        }
        if !(dpi > 0.0) {
            return Err(RasterError::InvalidImage(format!("dpi {dpi} must be > 0")));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(RasterError::InvalidImage(format!(
                "{} pixels for {width}x{height}",
                pixels.len()
            )));
        }
        Ok(PageImage {
            width,
            height,
            dpi,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, dpi: f64, value: u8) -> Self {
        Self::new(width, height, dpi, vec![value; width as usize * height as usize])
            .expect("valid dimensions")
    }

    /// White page of the given physical size.
    pub fn blank_mm(width_mm: f64, height_mm: f64, dpi: f64) -> Self {
        let w = (width_mm * dpi / 25.4).round().max(1.0) as u32;
        let h = (height_mm * dpi / 25.4).round().max(1.0) as u32;
        Self::filled(w, h, dpi, 255)
    }

    /// Same pixels with a different nominal resolution.
    pub fn with_dpi(mut self, dpi: f64) -> Result<Self, RasterError> {
        if !(dpi > 0.0) {
            return Err(RasterError::InvalidImage(format!("dpi {dpi} must be > 0")));
        }
        self.dpi = dpi;
        Ok(self)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dpi(&self) -> f64 {
        self.dpi
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    /// Size in PDF points (1/72 inch).
    pub fn size_points(&self) -> (f64, f64) {
        (
            self.width as f64 * 72.0 / self.dpi,
            self.height as f64 * 72.0 / self.dpi,
        )
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = v;
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn fill_rect(&mut self, x: u32, y: u32, w: u32, h: u32, v: u8) {
        let x0 = x.min(self.width);
        let x1 = x.saturating_add(w).min(self.width);
        let y1 = y.saturating_add(h).min(self.height);
        for yy in y.min(self.height)..y1 {
            let row = yy as usize * self.width as usize;
            self.pixels[row + x0 as usize..row + x1 as usize].fill(v);
        }
    }

    /// Copies `src` with its top-left corner at (x, y), clipped to this image.
    pub fn blit(&mut self, src: &PageImage, x: i64, y: i64) {
        for sy in 0..src.height as i64 {
            let dy = y + sy;
            if dy < 0 || dy >= self.height as i64 {
                continue;
            }
            for sx in 0..src.width as i64 {
                let dx = x + sx;
                if dx < 0 || dx >= self.width as i64 {
                    continue;
                }
                self.set(dx as u32, dy as u32, src.get(sx as u32, sy as u32));
            }
        }
    }

    pub fn rotated_180(&self) -> PageImage {
        let mut pixels = self.pixels.clone();
        pixels.reverse();
        PageImage {
            width: self.width,
            height: self.height,
            dpi: self.dpi,
            pixels,
        }
    }

    /// Quarter turn clockwise.
    pub fn rotated_90_cw(&self) -> PageImage {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::with_capacity(self.pixels.len());
        for ny in 0..w {
            for nx in 0..h {
                out.push(self.get(ny, h - 1 - nx));
            }
        }
        PageImage {
            width: h,
            height: w,
            dpi: self.dpi,
            pixels: out,
        }
    }

    pub fn rotated_90_ccw(&self) -> PageImage {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::with_capacity(self.pixels.len());
        for ny in 0..w {
            for nx in 0..h {
                out.push(self.get(w - 1 - ny, nx));
            }
        }
        PageImage {
            width: h,
            height: w,
            dpi: self.dpi,
            pixels: out,
        }
    }

    /// Reads PNG (with density from pHYs when present) or JPEG.
    /// Color input is reduced to luminance with Rec. 601 weights.
    pub fn load(path: &Path) -> Result<PageImage, RasterError> {
        let io = |e: std::io::Error| RasterError::Io(format!("{}: {e}", path.display()));
        let mut magic = [0u8; 8];
        {
            use std::io::Read;
            let mut f = File::open(path).map_err(io)?;
            let n = f.read(&mut magic).map_err(io)?;
            if n < 8 {
                return Err(RasterError::Decode(format!("{}: too short", path.display())));
            }
        }
        if magic == *b"\x89PNG\r\n\x1a\n" {
            Self::load_png(path)
        } else {
            let bytes = std::fs::read(path).map_err(io)?;
            Self::from_encoded(&bytes, DEFAULT_DPI)
        }
    }

    fn load_png(path: &Path) -> Result<PageImage, RasterError> {
        let err = |e: png::DecodingError| RasterError::Decode(format!("{}: {e}", path.display()));
        let file = File::open(path).map_err(|e| RasterError::Io(e.to_string()))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = decoder.read_info().map_err(err)?;
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf).map_err(err)?;
        let dpi = reader
            .info()
            .pixel_dims
            .filter(|d| d.unit == png::Unit::Meter && d.xppu > 0)
            .map(|d| (d.xppu as f64 * 0.0254 * 100.0).round() / 100.0)
            .unwrap_or(DEFAULT_DPI);
        let data = &buf[..info.buffer_size()];
        let n = info.width as usize * info.height as usize;
        let pixels: Vec<u8> = match info.color_type {
            png::ColorType::Grayscale => data[..n].to_vec(),
            png::ColorType::GrayscaleAlpha => data.chunks_exact(2).map(|p| p[0]).collect(),
            png::ColorType::Rgb => data.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
            png::ColorType::Rgba => data.chunks_exact(4).map(|p| luma(p[0], p[1], p[2])).collect(),
            png::ColorType::Indexed => {
                return Err(RasterError::Decode("unexpanded palette image".into()))
            }
        };
        PageImage::new(info.width, info.height, dpi, pixels)
    }

    /// Decodes any supported encoded image held in memory.
    pub fn from_encoded(bytes: &[u8], dpi: f64) -> Result<PageImage, RasterError> {
        let img = image::load_from_memory(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let pixels = rgb.pixels().map(|p| luma(p[0], p[1], p[2])).collect();
        PageImage::new(w, h, dpi, pixels)
    }

    /// Writes an 8-bit grayscale PNG carrying the resolution in pHYs.
    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let file = File::create(path).map_err(|e| RasterError::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        self.write_png(&mut w)?;
        w.flush().map_err(|e| RasterError::Io(e.to_string()))
    }

    pub fn write_png<W: Write>(&self, sink: W) -> Result<(), RasterError> {
        let err = |e: png::EncodingError| RasterError::Io(e.to_string());
        let mut enc = png::Encoder::new(sink, self.width, self.height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        enc.set_pixel_dims(Some(png::PixelDimensions {
            xppu: (self.dpi / 0.0254).round() as u32,
            yppu: (self.dpi / 0.0254).round() as u32,
            unit: png::Unit::Meter,
        }));
        let mut writer = enc.write_header().map_err(err)?;
        writer.write_image_data(&self.pixels).map_err(err)?;
        writer.finish().map_err(err)
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_png(&mut out).expect("in-memory png");
        out
    }
}

/// Rec. 601 luma.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8
}

/// Axis-aligned region given as fractions of the page size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Default for RegionOfInterest {
    /// Full width, bottom 15 % of the page.
    fn default() -> Self {
        RegionOfInterest {
            x: 0.0,
            y: 0.85,
            w: 1.0,
            h: 0.15,
        }
    }
}

impl RegionOfInterest {
    pub const FULL_PAGE: RegionOfInterest = RegionOfInterest {
        x: 0.0,
        y: 0.0,
        w: 1.0,
        h: 1.0,
    };

    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, RasterError> {
        let r = RegionOfInterest { x, y, w, h };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        const EPS: f64 = 1e-9;
        let ok = [self.x, self.y, self.w, self.h]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
            && self.x + self.w <= 1.0 + EPS
            && self.y + self.h <= 1.0 + EPS
            && self.w * self.h > 0.0;
        if ok {
            Ok(())
        } else {
            Err(RasterError::InvalidRoi(*self))
        }
    }

    /// The same region after the page is turned upside down.
    pub fn rotated_180(&self) -> RegionOfInterest {
        RegionOfInterest {
            x: (1.0 - self.x - self.w).max(0.0),
            y: (1.0 - self.y - self.h).max(0.0),
            w: self.w,
            h: self.h,
        }
    }

    /// Pixel bounds `(x0, y0, x1, y1)`, inclusive, clamped to the image.
    pub fn pixel_bounds(&self, width: u32, height: u32) -> (i64, i64, i64, i64) {
        let px = |f: f64, n: u32| ((f * n as f64).round() as i64).clamp(0, n as i64 - 1);
        let x0 = px(self.x, width);
        let y0 = px(self.y, height);
        let x1 = px(self.x + self.w, width).max(x0);
        let y1 = px(self.y + self.h, height).max(y0);
        (x0, y0, x1, y1)
    }
}
