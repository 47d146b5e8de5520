fn main() {
    std::process::exit(sie::cli::run(std::env::args_os()));
}
