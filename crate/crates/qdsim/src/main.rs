fn main() {
    std::process::exit(qdsim::cli::main_with_args(std::env::args_os()));
}
