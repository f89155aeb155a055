fn main() {
    std::process::exit(levy_lattice::cli::run(std::env::args_os()));
}
