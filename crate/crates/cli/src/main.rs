fn main() {
    std::process::exit(homspec_cli::main_with(std::env::args_os()));
}
