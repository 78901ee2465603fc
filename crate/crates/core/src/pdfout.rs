//! Image-only PDF 1.4 writer.
//!
//! Every page is one image XObject drawn over the full MediaBox. Pages are
//! streamed to the sink as they are added; the page tree, outline, catalog
//! and cross-reference table are written by [`PdfWriter::finish`]. Object
//! numbers are fixed by page order and nothing time-dependent is emitted, so
//! identical inputs give identical bytes.
//!
//! Object layout: 1 catalog, 2 page tree, then three objects per page
//! (page, content stream, image), then the outline objects.

use std::io::{self, Write};

use flate2::write::ZlibEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::raster::PageImage;

/// Largest page side PDF readers accept, in points.
pub const MAX_PAGE_POINTS: f64 = 14_400.0;

#[derive(Debug, Error)]
pub enum PdfError {
    #[error("document has no pages")]
    EmptyDocument,
    #[error("page {width:.1}x{height:.1} pt exceeds {MAX_PAGE_POINTS} pt")]
    OversizePage { width: f64, height: f64 },
    #[error("outline entry {title:?} points at page {index} of {pages}")]
    OutlineOutOfRange {
        title: String,
        index: usize,
        pages: usize,
    },
    #[error("unsupported JPEG: {0}")]
    UnsupportedJpeg(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One page to embed.
#[derive(Debug, Clone)]
pub enum PdfPageSource {
    Raster(PageImage),
    /// Pre-encoded JPEG passed through as DCTDecode.
    Jpeg { bytes: Vec<u8>, dpi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColorSpace {
    Gray,
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Filter {
    Flate,
    Dct,
}

/// A page whose image stream is already compressed; cheap to write.
#[derive(Debug, Clone)]
pub struct EncodedPage {
    width_px: u32,
    height_px: u32,
    width_pt: f64,
    height_pt: f64,
    color: ColorSpace,
    filter: Filter,
    data: Vec<u8>,
}

impl EncodedPage {
    pub fn encode(source: &PdfPageSource) -> Result<EncodedPage, PdfError> {
        match source {
            PdfPageSource::Raster(img) => {
                let (width_pt, height_pt) = img.size_points();
                check_size(width_pt, height_pt)?;
                let mut enc = ZlibEncoder::new(Vec::new(), Compression::fast());
                enc.write_all(img.pixels())?;
                Ok(EncodedPage {
                    width_px: img.width(),
                    height_px: img.height(),
                    width_pt,
                    height_pt,
                    color: ColorSpace::Gray,
                    filter: Filter::Flate,
                    data: enc.finish()?,
                })
            }
            PdfPageSource::Jpeg { bytes, dpi } => {
                let (w, h, components) = jpeg_header(bytes)?;
                let color = match components {
                    1 => ColorSpace::Gray,
                    3 => ColorSpace::Rgb,
                    n => return Err(PdfError::UnsupportedJpeg(format!("{n} components"))),
                };
                if !(*dpi > 0.0) {
                    return Err(PdfError::UnsupportedJpeg(format!("dpi {dpi}")));
                }
                let width_pt = w as f64 * 72.0 / dpi;
                let height_pt = h as f64 * 72.0 / dpi;
                check_size(width_pt, height_pt)?;
                Ok(EncodedPage {
                    width_px: w,
                    height_px: h,
                    width_pt,
                    height_pt,
                    color,
                    filter: Filter::Dct,
                    data: bytes.clone(),
                })
            }
        }
    }
}

fn check_size(w: f64, h: f64) -> Result<(), PdfError> {
    if w > MAX_PAGE_POINTS || h > MAX_PAGE_POINTS || !(w > 0.0) || !(h > 0.0) {
        return Err(PdfError::OversizePage {
            width: w,
            height: h,
        });
    }
    Ok(())
}

/// Width, height and component count from the first SOF marker.
fn jpeg_header(bytes: &[u8]) -> Result<(u32, u32, u8), PdfError> {
    let bad = |m: &str| PdfError::UnsupportedJpeg(m.to_string());
    if bytes.len() < 4 || bytes[0] != 0xFF || bytes[1] != 0xD8 {
        return Err(bad("missing SOI marker"));
    }
    let mut i = 2;
    while i + 4 <= bytes.len() {
        if bytes[i] != 0xFF {
            return Err(bad("marker expected"));
        }
        let marker = bytes[i + 1];
        if marker == 0xFF {
            i += 1;
            continue;
        }
        let len = u16::from_be_bytes([bytes[i + 2], bytes[i + 3]]) as usize;
        let is_sof = (0xC0..=0xCF).contains(&marker) && ![0xC4, 0xC8, 0xCC].contains(&marker);
        if is_sof {
            if i + 10 > bytes.len() {
                break;
            }
            let h = u16::from_be_bytes([bytes[i + 5], bytes[i + 6]]) as u32;
            let w = u16::from_be_bytes([bytes[i + 7], bytes[i + 8]]) as u32;
            let components = bytes[i + 9];
            if w == 0 || h == 0 {
                return Err(bad("zero dimension"));
            }
            return Ok((w, h, components));
        }
        i += 2 + len;
    }
    Err(bad("no frame header"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlineEntry {
    pub title: String,
    pub page_index: usize,
}

struct CountingWriter<W> {
    inner: W,
    pos: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.pos += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub struct PdfWriter<W: Write> {
    out: CountingWriter<W>,
    /// Byte offset per object number (index 0 unused).
    offsets: Vec<u64>,
    pages: usize,
}

const FIRST_PAGE_OBJ: usize = 3;

impl<W: Write> PdfWriter<W> {
    pub fn new(sink: W) -> Result<Self, PdfError> {
        let mut out = CountingWriter { inner: sink, pos: 0 };
        out.write_all(b"%PDF-1.4\n%\xE2\xE3\xCF\xD3\n")?;
        Ok(PdfWriter {
            out,
            offsets: vec![0; FIRST_PAGE_OBJ],
            pages: 0,
        })
    }

    pub fn page_count(&self) -> usize {
        self.pages
    }

    fn begin_obj(&mut self, num: usize) -> io::Result<()> {
        if self.offsets.len() <= num {
            self.offsets.resize(num + 1, 0);
        }
        self.offsets[num] = self.out.pos;
        write!(self.out, "{num} 0 obj\n")
    }

    pub fn add_page(&mut self, page: &EncodedPage) -> Result<(), PdfError> {
        let page_obj = FIRST_PAGE_OBJ + 3 * self.pages;
        let (content_obj, image_obj) = (page_obj + 1, page_obj + 2);
        let (w, h) = (num(page.width_pt), num(page.height_pt));

        self.begin_obj(page_obj)?;
        write!(
            self.out,
            "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {w} {h}] \
             /Resources << /XObject << /Im0 {image_obj} 0 R >> >> /Contents {content_obj} 0 R >>\nendobj\n"
        )?;

        let content = format!("q {w} 0 0 {h} 0 0 cm /Im0 Do Q\n");
        self.begin_obj(content_obj)?;
        write!(self.out, "<< /Length {} >>\nstream\n{content}endstream\nendobj\n", content.len())?;

        self.begin_obj(image_obj)?;
        let color = match page.color {
            ColorSpace::Gray => "/DeviceGray",
            ColorSpace::Rgb => "/DeviceRGB",
        };
        let filter = match page.filter {
            Filter::Flate => "/FlateDecode",
            Filter::Dct => "/DCTDecode",
        };
        write!(
            self.out,
            "<< /Type /XObject /Subtype /Image /Width {} /Height {} /ColorSpace {color} \
             /BitsPerComponent 8 /Filter {filter} /Length {} >>\nstream\n",
            page.width_px,
            page.height_px,
            page.data.len()
        )?;
        self.out.write_all(&page.data)?;
        self.out.write_all(b"\nendstream\nendobj\n")?;
        self.pages += 1;
        Ok(())
    }

    /// Writes the trailing structures and returns the total byte count.
    pub fn finish(mut self, outline: &[OutlineEntry]) -> Result<u64, PdfError> {
        if self.pages == 0 {
            return Err(PdfError::EmptyDocument);
        }
        if let Some(e) = outline.iter().find(|e| e.page_index >= self.pages) {
            return Err(PdfError::OutlineOutOfRange {
                title: e.title.clone(),
                index: e.page_index,
                pages: self.pages,
            });
        }
        let page_ref = |i: usize| FIRST_PAGE_OBJ + 3 * i;

        let kids: Vec<String> = (0..self.pages).map(|i| format!("{} 0 R", page_ref(i))).collect();
        self.begin_obj(2)?;
        write!(
            self.out,
            "<< /Type /Pages /Kids [{}] /Count {} >>\nendobj\n",
            kids.join(" "),
            self.pages
        )?;

        let outline_root = FIRST_PAGE_OBJ + 3 * self.pages;
        if !outline.is_empty() {
            let first = outline_root + 1;
            let last = outline_root + outline.len();
            self.begin_obj(outline_root)?;
            write!(
                self.out,
                "<< /Type /Outlines /First {first} 0 R /Last {last} 0 R /Count {} >>\nendobj\n",
                outline.len()
            )?;
            for (i, entry) in outline.iter().enumerate() {
                let obj = first + i;
                let mut links = String::new();
                if i > 0 {
                    links.push_str(&format!(" /Prev {} 0 R", obj - 1));
                }
                if i + 1 < outline.len() {
                    links.push_str(&format!(" /Next {} 0 R", obj + 1));
                }
                self.begin_obj(obj)?;
                write!(
                    self.out,
                    "<< /Title {} /Parent {outline_root} 0 R{links} /Dest [{} 0 R /Fit] >>\nendobj\n",
                    pdf_string(&entry.title),
                    page_ref(entry.page_index)
                )?;
            }
        }

        self.begin_obj(1)?;
        if outline.is_empty() {
            self.out.write_all(b"<< /Type /Catalog /Pages 2 0 R >>\nendobj\n")?;
        } else {
            write!(
                self.out,
                "<< /Type /Catalog /Pages 2 0 R /Outlines {outline_root} 0 R /PageMode /UseOutlines >>\nendobj\n"
            )?;
        }

        let xref_at = self.out.pos;
        let size = self.offsets.len();
        write!(self.out, "xref\n0 {size}\n0000000000 65535 f \n")?;
        for off in &self.offsets[1..] {
            write!(self.out, "{off:010} 00000 n \n")?;
        }
        write!(
            self.out,
            "trailer\n<< /Size {size} /Root 1 0 R >>\nstartxref\n{xref_at}\n%%EOF\n"
        )?;
        self.out.flush()?;
        Ok(self.out.pos)
    }
}

/// Writes a complete document. Pages are encoded and written one at a time.
pub fn write_pdf<W, I>(pages: I, outline: &[OutlineEntry], out: W) -> Result<u64, PdfError>
where
    W: Write,
    I: IntoIterator<Item = PdfPageSource>,
{
    let mut pages = pages.into_iter().peekable();
    if pages.peek().is_none() {
        return Err(PdfError::EmptyDocument);
    }
    let mut writer = PdfWriter::new(out)?;
    for page in pages {
        writer.add_page(&EncodedPage::encode(&page)?)?;
    }
    writer.finish(outline)
}

/// Compact decimal: at most four fractional digits, no trailing zeros.
fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn pdf_string(s: &str) -> String {
    if s.chars().all(|c| (' '..='~').contains(&c)) {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('(');
        for c in s.chars() {
            if matches!(c, '(' | ')' | '\\') {
                out.push('\\');
            }
            out.push(c);
        }
        out.push(')');
        out
    } else {
        let mut out = String::from("<FEFF");
        for unit in s.encode_utf16() {
            out.push_str(&format!("{unit:04X}"));
        }
        out.push('>');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white(w: u32, h: u32, dpi: f64) -> PdfPageSource {
        PdfPageSource::Raster(PageImage::filled(w, h, dpi, 255))
    }

    fn render(pages: Vec<PdfPageSource>, outline: &[OutlineEntry]) -> Vec<u8> {
        let mut out = Vec::new();
        write_pdf(pages, outline, &mut out).unwrap();
        out
    }

    #[test]
    fn media_box_at_72_dpi() {
        let bytes = render(vec![white(100, 100, 72.0)], &[]);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("%PDF-1.4\n"));
        assert!(text.contains("/MediaBox [0 0 100 100]"));
        assert!(text.ends_with("%%EOF\n"));
    }

    #[test]
    fn empty_and_oversize() {
        let mut out = Vec::new();
        assert!(matches!(
            write_pdf(Vec::<PdfPageSource>::new(), &[], &mut out),
            Err(PdfError::EmptyDocument)
        ));
        assert!(matches!(
            EncodedPage::encode(&white(20_001, 10, 100.0)),
            Err(PdfError::OversizePage { .. })
        ));
        let writer = PdfWriter::new(Vec::new()).unwrap();
        assert!(matches!(writer.finish(&[]), Err(PdfError::EmptyDocument)));
    }

    #[test]
    fn outline_index_checked() {
        let mut out = Vec::new();
        let outline = [OutlineEntry {
            title: "x".into(),
            page_index: 1,
        }];
        assert!(matches!(
            write_pdf(vec![white(5, 5, 72.0)], &outline, &mut out),
            Err(PdfError::OutlineOutOfRange { .. })
        ));
    }

    #[test]
    fn strings_are_escaped() {
        assert_eq!(pdf_string("a(b)\\"), "(a\\(b\\)\\\\)");
        assert_eq!(pdf_string("é"), "<FEFF00E9>");
    }

    #[test]
    fn numbers_are_compact() {
        assert_eq!(num(100.0), "100");
        assert_eq!(num(595.2756), "595.2756");
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn jpeg_passthrough() {
        let img = image::GrayImage::from_pixel(16, 8, image::Luma([200u8]));
        let mut bytes = Vec::new();
        image::codecs::jpeg::JpegEncoder::new(&mut bytes)
            .encode_image(&img)
            .unwrap();
        assert_eq!(jpeg_header(&bytes).unwrap(), (16, 8, 1));
        let pdf = render(vec![PdfPageSource::Jpeg { bytes, dpi: 72.0 }], &[]);
        let text = String::from_utf8_lossy(&pdf);
        assert!(text.contains("/DCTDecode"));
        assert!(text.contains("/MediaBox [0 0 16 8]"));
        assert!(jpeg_header(b"nope").is_err());
    }
}
