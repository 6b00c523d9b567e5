fn main() {
    std::process::exit(doublephase::cli::main_with_args(std::env::args_os()));
}
