fn main() {
    std::process::exit(salbench::cli::run(std::env::args_os()));
}
