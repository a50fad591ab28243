fn main() {
    std::process::exit(qsl_lab::cli::main_with_args(std::env::args_os()));
}
