use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use paco::corpus::{center_ratings, split_train_test};
use paco::model::{write_model, Hyperparameters, PacoModel};
use paco::sampler::{generate_synthetic, train, Probe, SyntheticSpec};
use paco_ffi::*;

fn trained() -> PacoModel {
    let spec = SyntheticSpec { n_users: 40, n_items: 25, vocab_size: 20, ..Default::default() };
    let syn = generate_synthetic(&spec, 3).unwrap();
    let (tr, te) = split_train_test(&syn.corpus, 0.2, 3).unwrap();
    let (tr, _, _) = center_ratings(&tr, &te).unwrap();
    let hyper = Hyperparameters { burn_in: 3, samples: 2, seed: 3, ..Default::default() };
    train(&tr, &hyper, &Probe::full(vec![])).unwrap().0
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = paco_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut PacoModelHandle {
    let mut h = ptr::null_mut();
    assert_eq!(paco_model_load(cpath(path).as_ptr(), &mut h), PacoStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn load_and_query_match_the_rust_api() {
    let model = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.paco");
    write_model(&path, &model).unwrap();
    let h = load(&path);

    let (mut n, mut m, mut w) = (0usize, 0usize, 0usize);
    assert_eq!(paco_model_dims(h, &mut n, &mut m, &mut w), PacoStatus::Ok);
    assert_eq!((n, m, w), (model.n_users(), model.n_items(), model.vocab_size()));
    assert_eq!(paco_model_dims(h, ptr::null_mut(), &mut m, ptr::null_mut()), PacoStatus::Ok);

    let mut bits = 0u64;
    assert_eq!(paco_model_size_bits(h, &mut bits), PacoStatus::Ok);
    assert_eq!(bits, model.model_size_bits());

    for u in 0..n as u32 {
        for i in (0..m as u32).step_by(3) {
            let mut r = f64::NAN;
            assert_eq!(paco_model_predict(h, u, i, &mut r), PacoStatus::Ok);
            assert_eq!(r.to_bits(), model.predict_rating(u as usize, i as usize).unwrap().to_bits());
        }
    }
    let mut rates = vec![0.0; w];
    assert_eq!(paco_model_rate_vector(h, 1, 2, rates.as_mut_ptr(), w), PacoStatus::Ok);
    assert_eq!(rates, model.rate_vector(1, 2).unwrap());

    let users = [0u32, 5, 9];
    let items = [1u32, 1, 4];
    let mut out = [0.0; 3];
    assert_eq!(paco_model_predict_batch(h, users.as_ptr(), items.as_ptr(), 3, out.as_mut_ptr()), PacoStatus::Ok);
    for k in 0..3 {
        assert_eq!(out[k], model.predict_rating(users[k] as usize, items[k] as usize).unwrap());
    }

    let id = CString::new(model.users.ids()[7].clone()).unwrap();
    let mut idx = 0u32;
    assert_eq!(paco_model_user_index(h, id.as_ptr(), &mut idx), PacoStatus::Ok);
    assert_eq!(idx, 7);
    let id = CString::new(model.items.ids()[4].clone()).unwrap();
    assert_eq!(paco_model_item_index(h, id.as_ptr(), &mut idx), PacoStatus::Ok);
    assert_eq!(idx, 4);
    paco_model_free(h);
}

#[test]
fn save_and_from_bytes_round_trip() {
    let model = trained();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.paco");
    write_model(&a, &model).unwrap();
    let h = load(&a);
    let b = dir.path().join("b.paco");
    assert_eq!(paco_model_save(h, cpath(&b).as_ptr()), PacoStatus::Ok);
    let bytes = std::fs::read(&b).unwrap();
    assert_eq!(bytes, std::fs::read(&a).unwrap());
    let mut h2 = ptr::null_mut();
    assert_eq!(paco_model_from_bytes(bytes.as_ptr(), bytes.len(), &mut h2), PacoStatus::Ok);
    let (mut r1, mut r2) = (0.0, 0.0);
    paco_model_predict(h, 3, 3, &mut r1);
    paco_model_predict(h2, 3, 3, &mut r2);
    assert_eq!(r1.to_bits(), r2.to_bits());
    paco_model_free(h);
    paco_model_free(h2);
}

#[test]
fn errors_map_to_status_codes() {
    let model = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.paco");
    write_model(&path, &model).unwrap();

    let mut h = ptr::null_mut();
    assert_eq!(paco_model_load(cpath(&dir.path().join("missing")).as_ptr(), &mut h), PacoStatus::Io);
    assert!(h.is_null());
    assert!(last_error().contains("missing"));
    assert_eq!(paco_model_load(ptr::null(), &mut h), PacoStatus::NullPointer);
    assert_eq!(paco_model_load(cpath(&path).as_ptr(), ptr::null_mut()), PacoStatus::NullPointer);

    let junk = b"not a model";
    assert_eq!(paco_model_from_bytes(junk.as_ptr(), junk.len(), &mut h), PacoStatus::Format);

    let h = load(&path);
    assert!(paco_last_error().is_null());
    let mut r = 0.0;
    assert_eq!(paco_model_predict(h, 10_000, 0, &mut r), PacoStatus::OutOfRange);
    assert_eq!(paco_model_predict(h, 0, 0, ptr::null_mut()), PacoStatus::NullPointer);
    assert_eq!(paco_model_predict(ptr::null(), 0, 0, &mut r), PacoStatus::NullPointer);

    let mut out = [7.0; 2];
    let users = [0u32, 10_000];
    assert_eq!(
        paco_model_predict_batch(h, users.as_ptr(), users.as_ptr(), 2, out.as_mut_ptr()),
        PacoStatus::OutOfRange
    );
    assert_eq!(out, [7.0; 2]);

    let mut small = [0.0; 3];
    assert_eq!(paco_model_rate_vector(h, 0, 0, small.as_mut_ptr(), 3), PacoStatus::BufferTooSmall);
    assert!(last_error().contains(&model.vocab_size().to_string()));

    let unknown = CString::new("nobody").unwrap();
    let mut idx = 0u32;
    assert_eq!(paco_model_user_index(h, unknown.as_ptr(), &mut idx), PacoStatus::NotFound);
    assert_eq!(paco_model_item_index(h, unknown.as_ptr(), &mut idx), PacoStatus::NotFound);

    paco_model_free(h);
    paco_model_free(ptr::null_mut());
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(paco_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "paco.h"

int main(int argc, char **argv) {
    PacoModelHandle *m = NULL;
    if (paco_model_load(argv[1], &m) != PACO_STATUS_OK) {
        fprintf(stderr, "%s\n", paco_last_error());
        return 1;
    }
    size_t n, k, w;
    double r;
    paco_model_dims(m, &n, &k, &w);
    if (paco_model_predict(m, 2, 3, &r) != PACO_STATUS_OK) return 2;
    if (paco_model_predict(m, (uint32_t)n, 0, &r) != PACO_STATUS_OUT_OF_RANGE) return 3;
    paco_model_predict(m, 2, 3, &r);
    printf("%zu %zu %zu %.17g\n", n, k, w, r);
    paco_model_free(m);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let lib = target_dir().join("libpaco_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");

    let model = trained();
    let path = dir.path().join("m.paco");
    write_model(&path, &model).unwrap();
    let run = Command::new(&exe).arg(&path).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let expected = format!(
        "{} {} {} {:?}",
        model.n_users(),
        model.n_items(),
        model.vocab_size(),
        model.predict_rating(2, 3).unwrap()
    );
    let got = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = got.split_whitespace().collect();
    assert_eq!(fields[..3], expected.split_whitespace().collect::<Vec<_>>()[..3]);
    assert_eq!(fields[3].parse::<f64>().unwrap(), model.predict_rating(2, 3).unwrap());
}
