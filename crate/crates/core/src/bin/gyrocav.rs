fn main() {
    std::process::exit(gyrocav::cli::run(std::env::args_os()));
}
