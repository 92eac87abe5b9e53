fn main() {
    std::process::exit(clgid::cli::main_with_args(std::env::args_os()));
}
