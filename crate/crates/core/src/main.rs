fn main() {
    std::process::exit(balayage::cli::main_with_args(std::env::args_os()));
}
