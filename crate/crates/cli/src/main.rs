fn main() {
    std::process::exit(aaip_cli::run());
}
