fn main() {
    std::process::exit(dulackit::cli::run(std::env::args_os()));
}
