fn main() {
    std::process::exit(limprof::cli::main());
}
