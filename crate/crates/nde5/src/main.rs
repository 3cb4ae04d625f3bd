fn main() {
    std::process::exit(nde5::cli::run(std::env::args_os()));
}
