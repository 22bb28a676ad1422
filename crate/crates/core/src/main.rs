fn main() {
    std::process::exit(automcp::cli::main());
}
