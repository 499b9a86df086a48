fn main() {
    std::process::exit(hopflab::cli::run(std::env::args_os()));
}
