fn main() {
    std::process::exit(chordal_rank::cli::run(std::env::args_os()));
}
