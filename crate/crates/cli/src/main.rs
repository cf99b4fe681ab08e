fn main() {
    std::process::exit(randlocal_cli::main_with_args(std::env::args_os()));
}
