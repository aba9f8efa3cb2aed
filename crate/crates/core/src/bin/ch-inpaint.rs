fn main() {
    std::process::exit(ch_inpaint::cli::cli_main(std::env::args_os()));
}
