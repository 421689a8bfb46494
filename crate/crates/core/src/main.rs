fn main() {
    std::process::exit(paco::cli::run(std::env::args_os()));
}
