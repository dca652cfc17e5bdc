fn main() {
    std::process::exit(knot_art::cli::run(std::env::args_os()));
}
