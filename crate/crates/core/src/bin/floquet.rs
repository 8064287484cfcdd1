fn main() {
    std::process::exit(bec_floquet::cli::cli_main(std::env::args_os()));
}
