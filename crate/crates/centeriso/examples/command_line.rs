//! Driving the command layer from code: the same entry point as the
//! `centeriso` binary, run on a shipped configuration.
//!
//! Run with `cargo run --release --example command_line`.

fn main() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/appendix-d.json");
    let out = std::env::temp_dir().join("centeriso-example");
    let code = centeriso::cli::run([
        "centeriso",
        "appendix-d",
        "--config",
        config,
        "--out",
        out.to_str().expect("utf-8 path"),
    ]);
    println!("exit code {code}");
}
