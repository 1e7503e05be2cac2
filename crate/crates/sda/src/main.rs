fn main() {
    std::process::exit(cislunar_sda::cli::run(std::env::args_os()));
}
