fn main() {
    std::process::exit(wignerlab::cli::main_with(std::env::args_os()));
}
