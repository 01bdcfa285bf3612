fn main() {
    std::process::exit(transgap::cli::run(std::env::args_os().collect()));
}
