fn main() {
    std::process::exit(scrub_cli::run(std::env::args_os()));
}
