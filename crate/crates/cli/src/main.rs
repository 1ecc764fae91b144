fn main() {
    std::process::exit(rigkit_cli::main_with_args(std::env::args_os()));
}
