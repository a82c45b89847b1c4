fn main() {
    std::process::exit(specter::cli::run(std::env::args_os()));
}
