use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();

    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.documentation = true;
    config.documentation_style = cbindgen::DocumentationStyle::C;
    config.include_guard = Some("ALGMECH_H".to_string());
    config.header = Some("/* C interface to the algmech mechanics library. Generated by cbindgen. */".to_string());
    config.no_includes = true;
    config.sys_includes = vec!["stddef.h".to_string()];
    config.cpp_compat = true;
    config.usize_is_size_t = true;
    config.enumeration.prefix_with_name = true;
    config.enumeration.rename_variants = cbindgen::RenameRule::ScreamingSnakeCase;

    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("Unable to generate bindings");

    let out_path = PathBuf::from(&crate_dir).join("include");
    std::fs::create_dir_all(&out_path).expect("Failed to create include directory");
    bindings.write_to_file(out_path.join("algmech.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
