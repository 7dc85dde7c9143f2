fn main() {
    std::process::exit(nnpkit_cli::run(std::env::args_os()));
}
