use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let out_dir = PathBuf::from(env::var("OUT_DIR").expect("OUT_DIR"));

    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.cpp_compat = true;
    config.include_guard = Some("LINDSTEDT_H".to_string());
    config.enumeration.prefix_with_name = true;
    config.enumeration.rename_variants = cbindgen::RenameRule::ScreamingSnakeCase;
    config.header = Some(
        "/* C interface to the lindstedt invariant-torus expansion engine.\n \
         * All entry points are thread-safe; error messages are thread-local\n \
         * and remain valid until the next ldt_* call on the same thread.\n \
         */"
        .to_string(),
    );

    let header = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen header generation failed");

    // OUT_DIR is <target>/<profile>/build/<pkg>-<hash>/out; the shared
    // include directory lives at <target>/ldt-include so downstream C
    // builds have a stable path. Fall back to OUT_DIR when the layout is
    // nonstandard (e.g. custom build systems).
    let include_dir = out_dir
        .ancestors()
        .nth(4)
        .map(|t| t.join("ldt-include"))
        .unwrap_or_else(|| out_dir.clone());
    std::fs::create_dir_all(&include_dir).expect("create include dir");
    header.write_to_file(include_dir.join("lindstedt.h"));
    // Keep a copy next to the build artifacts as well.
    header.write_to_file(out_dir.join("lindstedt.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
}
