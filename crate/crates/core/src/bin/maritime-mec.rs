fn main() {
    std::process::exit(maritime_mec::cli::main_with_args(std::env::args_os()));
}
