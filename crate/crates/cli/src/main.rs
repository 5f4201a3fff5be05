fn main() {
    std::process::exit(ffst_cli::run(std::env::args().collect()));
}
