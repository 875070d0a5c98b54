fn main() {
    std::process::exit(hkt_ccd_cli::run(std::env::args_os()));
}
