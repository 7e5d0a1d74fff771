fn main() {
    std::process::exit(pgo_cli::run(std::env::args_os()));
}
