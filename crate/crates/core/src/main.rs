fn main() {
    std::process::exit(gauge_hamilton::cli::run(std::env::args_os()));
}
