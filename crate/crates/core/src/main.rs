fn main() {
    std::process::exit(qnls::cli::main_with_args(std::env::args_os()));
}
