fn main() {
    std::process::exit(histcon::cli::main_with_args(std::env::args_os()));
}
