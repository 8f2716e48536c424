fn main() {
    std::process::exit(froi::cli::main_with(std::env::args_os()));
}
