fn main() {
    std::process::exit(lamafield_harness::cli::main_with_args(std::env::args_os()));
}
