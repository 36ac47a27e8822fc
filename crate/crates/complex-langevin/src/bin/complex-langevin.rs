fn main() {
    std::process::exit(complex_langevin::cli::run(std::env::args_os()));
}
