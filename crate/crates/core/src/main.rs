fn main() {
    std::process::exit(lieb_darboux::cli::run(std::env::args_os()));
}
