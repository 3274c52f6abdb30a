fn main() {
    std::process::exit(icb::cli::main());
}
