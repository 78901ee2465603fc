use font8x8::UnicodeFonts;

use crate::codec::{BarPattern, Code39Params, Kind, WidthClass};

use super::{PageImage, RasterError};

/// Quiet zone on each side, in narrow-module widths.
pub const QUIET_ZONE_MODULES: u32 = 10;

/// Narrow and wide element widths in pixels at `dpi`.
pub fn element_widths_px(params: &Code39Params, dpi: f64) -> Result<(u32, u32), RasterError> {
    if !(dpi >= 72.0) {
        return Err(RasterError::ResolutionTooLow(dpi));
    }
    let narrow = (params.module_width_mm * dpi / 25.4).round().max(1.0) as u32;
    let wide = (params.module_width_mm * params.wide_narrow_ratio * dpi / 25.4).round() as u32;
    Ok((narrow, wide.max(narrow + 1)))
}

/// Renders a symbol as a white strip with quiet zones on both sides.
pub fn render_barcode(
    pattern: &BarPattern,
    params: &Code39Params,
    dpi: f64,
) -> Result<PageImage, RasterError> {
    params.validate().map_err(RasterError::Codec)?;
    let (narrow, wide) = element_widths_px(params, dpi)?;
    let quiet = QUIET_ZONE_MODULES * narrow;
    let bars: u32 = pattern
        .elements
        .iter()
        .map(|e| match e.width {
            WidthClass::Narrow => narrow,
            WidthClass::Wide => wide,
        })
        .sum();
    let height = (params.bar_height_mm * dpi / 25.4).round().max(1.0) as u32;
    let mut img = PageImage::filled(bars + 2 * quiet, height, dpi, 255);
    let mut x = quiet;
    for e in &pattern.elements {
        let w = if e.width == WidthClass::Wide { wide } else { narrow };
        if e.kind == Kind::Bar {
            img.fill_rect(x, 0, w, height, 0);
        }
        x += w;
    }
    Ok(img)
}

/// Draws `text` with an 8x8 bitmap font scaled by `scale`; top-left at (x, y).
/// Characters without a glyph are drawn as `?`. Returns the drawn width.
pub fn draw_text(img: &mut PageImage, text: &str, x: u32, y: u32, scale: u32) -> u32 {
    let scale = scale.max(1);
    let mut cx = x;
    for c in text.chars() {
        let glyph = font8x8::BASIC_FONTS
            .get(c)
            .or_else(|| font8x8::LATIN_FONTS.get(c))
            .unwrap_or_else(|| font8x8::BASIC_FONTS.get('?').unwrap());
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8u32 {
                if bits & (1 << col) != 0 {
                    img.fill_rect(cx + col * scale, y + row as u32 * scale, scale, scale, 0);
                }
            }
        }
        cx += 8 * scale;
        if cx >= img.width() {
            break;
        }
    }
    cx - x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::code39_encode;

    #[test]
    fn narrow_width_at_300_dpi() {
        let params = Code39Params::default();
        assert_eq!(element_widths_px(&params, 300.0).unwrap(), (6, 13));
        let strip = render_barcode(&code39_encode("1", &params).unwrap(), &params, 300.0).unwrap();
        // first bar of '*' is narrow and starts right after the quiet zone
        let row: Vec<u8> = (0..strip.width()).map(|x| strip.get(x, 10)).collect();
        let start = row.iter().position(|&v| v == 0).unwrap();
        assert_eq!(start, 60);
        let len = row[start..].iter().position(|&v| v == 255).unwrap();
        assert_eq!(len, 6);
        assert_eq!(strip.height(), 59);
    }

    #[test]
    fn quiet_zone_is_white() {
        let params = Code39Params::default();
        let strip = render_barcode(&code39_encode("372048-1-1", &params).unwrap(), &params, 300.0)
            .unwrap();
        for y in 0..strip.height() {
            for x in 0..60 {
                assert_eq!(strip.get(x, y), 255);
                assert_eq!(strip.get(strip.width() - 1 - x, y), 255);
            }
        }
    }

    #[test]
    fn low_resolution_is_rejected() {
        let params = Code39Params::default();
        let p = code39_encode("1", &params).unwrap();
        assert!(matches!(
            render_barcode(&p, &params, 50.0),
            Err(RasterError::ResolutionTooLow(_))
        ));
        // tiny modules are floored to one pixel at 72 dpi
        let thin = Code39Params {
            module_width_mm: 0.1,
            ..params
        };
        assert_eq!(element_widths_px(&thin, 72.0).unwrap(), (1, 2));
    }

    #[test]
    fn text_draws_ink() {
        let mut img = PageImage::filled(100, 20, 72.0, 255);
        let w = draw_text(&mut img, "Hi", 0, 0, 1);
        assert_eq!(w, 16);
        assert!(img.pixels().iter().any(|&v| v == 0));
    }
}
