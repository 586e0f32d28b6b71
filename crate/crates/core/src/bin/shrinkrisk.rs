fn main() {
    std::process::exit(shrinkrisk::cli::run_from(std::env::args_os()));
}
