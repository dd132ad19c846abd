use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("readable cbindgen.toml");
    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation");
    let target = crate_dir.join("include").join("reloc.h");
    let mut fresh = Vec::new();
    bindings.write(&mut fresh);
    if std::fs::read(&target).ok().as_deref() != Some(fresh.as_slice()) {
        std::fs::create_dir_all(target.parent().expect("include dir")).expect("create include dir");
        std::fs::write(&target, fresh).expect("write header");
    }
}
