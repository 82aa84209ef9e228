fn main() {
    std::process::exit(qdo::cli::run(std::env::args_os()));
}
