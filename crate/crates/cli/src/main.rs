fn main() {
    std::process::exit(kglit_cli::run(std::env::args_os()));
}
