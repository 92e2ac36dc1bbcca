fn main() {
    std::process::exit(steiner_cli::main_with(std::env::args_os()));
}
