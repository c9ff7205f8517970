fn main() {
    std::process::exit(envmor::cli::main_with_args(std::env::args_os()));
}
