fn main() {
    std::process::exit(qre_cli::run(std::env::args_os()));
}
