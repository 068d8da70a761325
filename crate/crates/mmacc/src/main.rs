fn main() {
    std::process::exit(mmacc::cli::main());
}
