fn main() {
    std::process::exit(lilac::experiments::cli::cli_main(std::env::args().skip(1)));
}
