fn main() {
    std::process::exit(spconv::cli::main_with_std_streams());
}
