fn main() {
    let code = ionphoton_cli::main_with_args(std::env::args().collect());
    std::process::exit(code);
}
