fn main() {
    std::process::exit(conceptgen::cli::main_with_args(std::env::args_os()));
}
