fn main() {
    std::process::exit(nmgeo_cli::run(std::env::args_os()));
}
