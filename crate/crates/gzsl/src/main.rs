fn main() {
    std::process::exit(gzsl::cli::run(std::env::args_os()));
}
