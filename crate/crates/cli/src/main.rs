fn main() {
    std::process::exit(delu_cli::run(std::env::args_os()));
}
