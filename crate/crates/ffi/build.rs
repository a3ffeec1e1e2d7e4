fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");

    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("TILEWALK_H".to_string()),
        cpp_compat: true,
        documentation: true,
        header: Some("/* C interface to the tilewalk locomotion stack. Generated; do not edit. */".to_string()),
        ..Default::default()
    };

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation failed")
        .write_to_file(format!("{crate_dir}/include/tilewalk.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
