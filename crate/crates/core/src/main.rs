fn main() {
    std::process::exit(vslq::cli::main_with_args(std::env::args()));
}
