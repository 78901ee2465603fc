mod common;

use examflow_core::pdfout::{write_pdf, OutlineEntry, PdfError, PdfPageSource};
use examflow_core::raster::PageImage;
use proptest::prelude::*;

use common::validate_pdf;

fn page(w: u32, h: u32, dpi: f64, v: u8) -> PdfPageSource {
    PdfPageSource::Raster(PageImage::filled(w, h, dpi, v))
}

fn render(pages: Vec<PdfPageSource>, outline: &[OutlineEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    let n = write_pdf(pages, outline, &mut out).unwrap();
    assert_eq!(n as usize, out.len());
    out
}

#[test]
fn white_square_at_72_dpi() {
    let bytes = render(vec![page(100, 100, 72.0, 255)], &[]);
    assert_eq!(validate_pdf(&bytes).unwrap().pages, 1);
    assert!(String::from_utf8_lossy(&bytes).contains("/MediaBox [0 0 100 100]"));
    let doc = lopdf::Document::load_mem(&bytes).unwrap();
    assert_eq!(doc.get_pages().len(), 1);
}

#[test]
fn three_pages_one_outline_entry() {
    let outline = [OutlineEntry {
        title: "S0001".into(),
        page_index: 1,
    }];
    let bytes = render((0..3).map(|i| page(30, 40, 150.0, i * 50)).collect(), &outline);
    let s = validate_pdf(&bytes).unwrap();
    assert_eq!((s.pages, s.outline_entries), (3, 1));
    assert_eq!(lopdf::Document::load_mem(&bytes).unwrap().get_pages().len(), 3);
}

#[test]
fn jpeg_pages_pass_through() {
    let img = image::GrayImage::from_fn(64, 48, |x, y| image::Luma([((x + y) * 2) as u8]));
    let mut jpeg = Vec::new();
    image::DynamicImage::ImageLuma8(img)
        .write_to(&mut std::io::Cursor::new(&mut jpeg), image::ImageFormat::Jpeg)
        .unwrap();
    let bytes = render(vec![PdfPageSource::Jpeg { bytes: jpeg.clone(), dpi: 96.0 }], &[]);
    validate_pdf(&bytes).unwrap();
    assert!(bytes.windows(jpeg.len()).any(|w| w == jpeg.as_slice()));
    assert!(String::from_utf8_lossy(&bytes).contains("/DCTDecode"));
}

#[test]
fn errors() {
    let mut sink = Vec::new();
    assert!(matches!(write_pdf(Vec::new(), &[], &mut sink), Err(PdfError::EmptyDocument)));
    assert!(matches!(
        write_pdf(vec![page(20_001, 10, 1.0, 0)], &[], &mut sink),
        Err(PdfError::OversizePage { .. })
    ));
    let bad = [OutlineEntry {
        title: "x".into(),
        page_index: 1,
    }];
    assert!(matches!(
        write_pdf(vec![page(2, 2, 72.0, 0)], &bad, &mut Vec::new()),
        Err(PdfError::OutlineOutOfRange { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_document_is_valid_and_deterministic(
        sizes in proptest::collection::vec((1u32..60, 1u32..60, 36.0f64..600.0, any::<u8>()), 1..6),
        titles in proptest::collection::vec(("[a-zA-Z (\\\\)é]{0,8}", 0usize..6), 0..4),
    ) {
        let n = sizes.len();
        let outline: Vec<OutlineEntry> = titles
            .into_iter()
            .map(|(title, i)| OutlineEntry { title, page_index: i % n })
            .collect();
        let make = || sizes.iter().map(|&(w, h, d, v)| page(w, h, d, v)).collect::<Vec<_>>();
        let a = render(make(), &outline);
        let b = render(make(), &outline);
        prop_assert_eq!(&a, &b);
        let s = validate_pdf(&a).unwrap();
        prop_assert_eq!(s.pages, n);
        prop_assert_eq!(s.outline_entries, outline.len());
        prop_assert_eq!(lopdf::Document::load_mem(&a).unwrap().get_pages().len(), n);
    }
}
