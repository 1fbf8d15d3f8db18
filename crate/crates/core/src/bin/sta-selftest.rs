fn main() {
    std::process::exit(sta_selftest::cli::main_with_args(std::env::args_os()));
}
