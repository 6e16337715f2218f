fn main() {
    std::process::exit(aggrobench::cli::run(std::env::args_os()));
}
