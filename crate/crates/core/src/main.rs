fn main() {
    std::process::exit(equity_opf::harness::cli::run(std::env::args_os()));
}
