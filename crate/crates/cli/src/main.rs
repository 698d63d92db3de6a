fn main() {
    std::process::exit(carbofront_cli::main_with(std::env::args_os()));
}
