fn main() {
    std::process::exit(paraforge::cli::run(std::env::args_os()));
}
