mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use examflow_core::codec::{Code39Params, PagePayload};
use examflow_core::compose::{
    generate_batch, render_student_pages, ExamTemplate, GenerateMode, GenerateOptions, PageSize,
    ToolConfig,
};
use examflow_core::merge::{merge_exercise_aggregate, merge_exercise_wise, merge_student_wise};
use examflow_core::raster::{locate_and_decode, PageImage, RegionOfInterest};
use examflow_core::split::{ingest_scan, read_tree, split_batch, ScanPage, SplitOptions};
use examflow_core::synth::Degradation;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{page_map, roster, validate_pdf};

const DPI: f64 = 200.0;

fn opts() -> GenerateOptions {
    GenerateOptions {
        dpi: DPI,
        page_size: PageSize::A5,
        page_images: true,
        ..GenerateOptions::default()
    }
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

fn filed_only(tree: BTreeMap<PathBuf, Vec<u8>>) -> BTreeMap<PathBuf, Vec<u8>> {
    tree.into_iter()
        .filter(|(p, _)| p.components().count() == 2 && !p.starts_with("quarantine") && !p.starts_with("duplicates"))
        .collect()
}

#[test]
fn generate_split_merge_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let r = roster(3);
    let t = ExamTemplate::new("Name: ##FirstName## ##LastName##", page_map(15, 4));
    let gen = tmp.path().join("gen");
    let manifest = generate_batch(&t, &r, &Code39Params::default(), &opts(), &gen).unwrap();
    assert_eq!(manifest.page_count, 45);
    assert_eq!(manifest.payloads().collect::<HashSet<_>>().len(), 45);
    let pdf = validate_pdf(&fs::read(gen.join("batch.pdf")).unwrap()).unwrap();
    assert_eq!(pdf.pages, 45);

    // order preservation: page k of the batch carries manifest payload k
    let scan = ingest_scan(&gen.join("pages"), &ToolConfig::default(), DPI).unwrap();
    assert_eq!(scan.pages.len(), 45);
    let expected: Vec<String> = manifest.payloads().map(String::from).collect();
    for (k, page) in scan.pages.iter().enumerate().step_by(7) {
        let report = locate_and_decode(&page.load().unwrap(), &RegionOfInterest::default(), 0.0).unwrap();
        assert_eq!(report.text.as_deref(), Some(expected[k].as_str()));
    }

    let split = tmp.path().join("split");
    let res = split_batch(&scan.pages, &r, &SplitOptions::default(), &split).unwrap();
    assert_eq!((res.filed.len(), res.quarantined.len(), res.duplicate_extras()), (45, 0, 0));
    for f in &res.filed {
        let original = PageImage::load(&gen.join(format!("pages/{:05}.png", f.index + 1))).unwrap();
        assert_eq!(PageImage::load(&split.join(&f.path)).unwrap(), original);
    }

    // personalisation isolation in the substituted sources
    for rec in r.records() {
        let text = fs::read_to_string(gen.join(format!("sources/{}.txt", rec.key()))).unwrap();
        assert!(text.contains(rec.get("LastName").unwrap()));
        for other in r.records().iter().filter(|o| o.key() != rec.key()) {
            assert!(!text.contains(&format!("{} ", other.get("FirstName").unwrap())));
            assert!(!text.ends_with(other.get("LastName").unwrap()));
        }
    }

    let by_student = merge_student_wise(&split, &tmp.path().join("student")).unwrap();
    let by_exercise = merge_exercise_wise(&split, &tmp.path().join("exercise")).unwrap();
    for s in &manifest.students {
        let doc = by_student.documents.iter().find(|d| d.path == Path::new(&format!("{}.pdf", s.student_id))).unwrap();
        assert_eq!(doc.payloads, s.payloads);
        let mut parts: Vec<String> = by_exercise
            .documents
            .iter()
            .filter(|d| d.path.starts_with(&s.student_id))
            .flat_map(|d| d.payloads.clone())
            .collect();
        let mut whole = doc.payloads.clone();
        parts.sort();
        whole.sort();
        assert_eq!(parts, whole);
    }
    let agg = merge_exercise_aggregate(&split, &tmp.path().join("aggregate"), Some(&r)).unwrap();
    assert_eq!(agg.documents.len(), 4);
    assert!(agg.documents.iter().all(|d| d.outline.len() == 3));
    for dir in ["student", "exercise", "aggregate"] {
        for (path, bytes) in files(&tmp.path().join(dir)) {
            if path.extension().is_some_and(|e| e == "pdf") {
                validate_pdf(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            }
        }
    }
}

fn rendered(students: usize, pages: u32) -> (examflow_core::compose::Roster, Vec<PageImage>) {
    let r = roster(students);
    let t = ExamTemplate::new("##LastName##", page_map(pages, 2));
    let imgs = r
        .records()
        .iter()
        .flat_map(|rec| render_student_pages(&t, &r, rec, &Code39Params::default(), DPI, PageSize::A5).unwrap())
        .collect();
    (r, imgs)
}

#[test]
fn split_is_idempotent_and_order_independent() {
    let (r, imgs) = rendered(2, 4);
    let pages: Vec<ScanPage> = imgs.iter().cloned().map(ScanPage::Image).collect();
    let tmp = tempfile::tempdir().unwrap();
    split_batch(&pages, &r, &SplitOptions::default(), &tmp.path().join("a")).unwrap();
    split_batch(&pages, &r, &SplitOptions::default(), &tmp.path().join("b")).unwrap();
    let a = files(&tmp.path().join("a"));
    assert_eq!(a, files(&tmp.path().join("b")));

    let mut shuffled = pages.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    split_batch(&shuffled, &r, &SplitOptions::default(), &tmp.path().join("c")).unwrap();
    assert_eq!(filed_only(a), filed_only(files(&tmp.path().join("c"))));
}

#[test]
fn conservation_with_blank_and_rescan() {
    let (r, imgs) = rendered(2, 3);
    let mut pages: Vec<ScanPage> = imgs.iter().cloned().map(ScanPage::Image).collect();
    pages.insert(2, ScanPage::Image(PageImage::blank_mm(148.0, 210.0, DPI)));
    pages.push(ScanPage::Image(imgs[0].clone()));
    let tmp = tempfile::tempdir().unwrap();
    let res = split_batch(&pages, &r, &SplitOptions::default(), tmp.path()).unwrap();
    assert_eq!(res.filed.len() + res.quarantined.len() + res.duplicate_extras(), pages.len());
    assert_eq!(res.quarantined[0].index, 2);
    assert_eq!(res.quarantined[0].reason.kind, "NoInk");
    assert_eq!(res.duplicates.len(), 1);
    assert_eq!(read_tree(tmp.path()).unwrap().values().map(Vec::len).sum::<usize>(), 6);
}

#[test]
fn decode_does_not_depend_on_worker_count() {
    let (r, imgs) = rendered(1, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pages: Vec<ScanPage> = imgs
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let d = Degradation {
                skew_deg: i as f64 - 1.5,
                flip: i % 2 == 1,
                noise_sigma: 8.0,
                salt_pepper: 0.005,
            };
            ScanPage::Image(d.apply(img, &mut rng))
        })
        .collect();
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: usize, dir: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| split_batch(&pages, &r, &SplitOptions::default(), &tmp.path().join(dir)).unwrap())
    };
    let one = run(1, "one");
    let three = run(3, "three");
    assert_eq!(one, three);
    assert_eq!(one.filed.len(), 4);
    assert_eq!(files(&tmp.path().join("one")), files(&tmp.path().join("three")));
}

#[test]
fn lower_noise_never_breaks_a_decode() {
    let (_, imgs) = rendered(1, 1);
    let sigmas = [0.0, 8.0, 16.0, 32.0, 48.0, 64.0];
    for seed in 0..4u64 {
        let ok: Vec<bool> = sigmas
            .iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = Degradation {
                    skew_deg: 1.0,
                    flip: false,
                    noise_sigma: s,
                    salt_pepper: 0.0,
                };
                locate_and_decode(&d.apply(&imgs[0], &mut rng), &RegionOfInterest::default(), 3.0).is_ok()
            })
            .collect();
        if let Some(first_fail) = ok.iter().position(|&x| !x) {
            assert!(ok[first_fail..].iter().all(|&x| !x), "seed {seed}: {ok:?}");
        }
        assert!(ok[1], "seed {seed}: sigma 8 must decode");
    }
}

#[cfg(unix)]
#[test]
fn external_mode_runs_configured_tools() {
    let tmp = tempfile::tempdir().unwrap();
    let tools = ToolConfig::from_json(
        r#"{
          "typesetter": {"path": "sh", "args": ["-c", "cp \"$0\" \"$1\"", "{input}", "{outdir}/{jobname}.pdf"]},
          "merger": {"path": "sh", "args": ["-c", "out=$0; cat \"$@\" > \"$out\"", "{output}", "{inputs}"]}
        }"#,
    )
    .unwrap();
    let o = GenerateOptions {
        mode: GenerateMode::External,
        tools,
        source_ext: "tex".into(),
        ..opts()
    };
    let r = roster(2);
    let t = ExamTemplate::new("[##StudentID##]", vec![1, 2]);
    let m = generate_batch(&t, &r, &Code39Params::default(), &o, tmp.path()).unwrap();
    assert_eq!(m.page_count, 4);
    assert_eq!(fs::read_to_string(tmp.path().join("batch.pdf")).unwrap(), "[S0001][S0002]");

    let failing = GenerateOptions {
        tools: ToolConfig::from_json(
            r#"{"typesetter": {"path": "sh", "args": ["-c", "echo broken >&2; exit 1"]}, "merger": {"path": "sh"}}"#,
        )
        .unwrap(),
        ..o
    };
    let err = generate_batch(&t, &r, &Code39Params::default(), &failing, &tmp.path().join("f")).unwrap_err();
    assert!(err.to_string().contains("broken"), "{err}");
}

fn payload() -> impl Strategy<Value = PagePayload> {
    ("[0-9A-Z]{1,9}", 1u32..40, 1u32..400).prop_map(|(s, e, p)| PagePayload::new(&s, e, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn render_decode_closure(p in payload(), skew in -3.0f64..=3.0, flip in any::<bool>()) {
        let t = ExamTemplate::new("", vec![p.exercise_no]);
        let page = examflow_core::compose::render_exam_page(
            "", "", &p, p.exercise_no, &t, &Code39Params::default(), 300.0, PageSize::A5,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Degradation { skew_deg: skew, flip, noise_sigma: 0.0, salt_pepper: 0.0 };
        let report = locate_and_decode(&d.apply(&page, &mut rng), &RegionOfInterest::default(), 3.0).unwrap();
        prop_assert_eq!(report.payload, Some(p));
        prop_assert_eq!(report.orientation_deg, if flip { 180 } else { 0 });
    }
}
