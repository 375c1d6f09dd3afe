fn main() {
    std::process::exit(pinncert::cli::run(std::env::args_os()));
}
