fn main() {
    std::process::exit(saa_conic::cli::run(std::env::args_os()));
}
