fn main() {
    std::process::exit(divdiv_plate::cli::run(std::env::args_os()));
}
