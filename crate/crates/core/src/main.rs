fn main() {
    std::process::exit(crosscast::cli::main_with(std::env::args_os()));
}
