fn main() {
    std::process::exit(bandqc::cli_main());
}
