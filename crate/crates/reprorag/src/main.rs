fn main() {
    std::process::exit(reprorag::cli::cli_main(std::env::args_os()));
}
