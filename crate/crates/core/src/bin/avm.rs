fn main() {
    std::process::exit(avm::cli::cli_main(std::env::args_os()));
}
