fn main() {
    std::process::exit(ipdma::cli::run(std::env::args_os()));
}
