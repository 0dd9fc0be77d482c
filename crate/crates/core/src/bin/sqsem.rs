fn main() {
    std::process::exit(sqsem::cli::main_with_args(std::env::args_os()));
}
