fn main() {
    std::process::exit(torus_hjb::cli::main_from_env());
}
