fn main() {
    std::process::exit(trajdiff::cli::main_with_args(std::env::args_os()));
}
