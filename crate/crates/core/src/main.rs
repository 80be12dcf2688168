fn main() {
    std::process::exit(strayfield::cli::run(std::env::args_os()));
}
