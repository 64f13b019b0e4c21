fn main() {
    std::process::exit(melnikov_kit::cli::run(std::env::args_os()));
}
