//! Checks the generated header with a C compiler and, when the static
//! library has been built (`cargo build -p nuggetindex-ffi`), links and
//! runs a C program against it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "nuggetindex.h"

static const char *SCHEMA =
    "[{\"canonical_name\":\"chiefExecutiveOfficer\",\"aliases\":[\"is the CEO of\"],"
    "\"subject_type\":\"person\",\"object_type\":\"org\",\"cardinality\":\"functional\"}]";
static const char *DOCS =
    "[{\"doc_id\":\"a\",\"timestamp\":\"2019-01-10\","
    "\"text\":\"Since 2019, Alice Ng has been the CEO of Acme.\"}]";

int main(void) {
    NiEngine *h = NULL;
    if (ni_engine_open_in_memory(SCHEMA, NULL, &h) != NI_STATUS_OK) return 1;
    if (ni_ingest(h, DOCS, NULL) != NI_STATUS_OK) return 2;
    char *out = NULL;
    if (ni_query(h, "Alice Ng CEO", "2020-01-01", "active", 5, &out) != NI_STATUS_OK) return 3;
    if (strstr(out, "Established facts:") == NULL) return 4;
    ni_string_free(out);
    if (ni_query(h, "x", "not-a-date", NULL, 5, &out) != NI_STATUS_INVALID_INPUT) return 5;
    if (ni_last_error() == NULL) return 6;
    ni_engine_free(h);
    puts("ok");
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().expect("current exe");
    let target = exe.parent()?.parent()?.parent()?;
    ["debug", "release"].iter().map(|p| target.join(p).join("libnuggetindex_ffi.a")).find(|p| p.exists())
}

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile_dir();
    let src = dir.join("header.c");
    std::fs::write(&src, PROGRAM).unwrap();
    for lang in ["c", "c++"] {
        let status = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(include_dir())
            .arg(&src)
            .status()
            .expect("run cc");
        assert!(status.success(), "header does not compile as {lang}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping link test");
        return;
    };
    let include = include_dir();
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("run cc");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().expect("run program");
    assert!(out.status.success(), "program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nuggetindex-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
