fn main() {
    std::process::exit(centeriso::cli::run(std::env::args_os()));
}
