fn main() {
    std::process::exit(canet::cli::run(std::env::args_os()));
}
