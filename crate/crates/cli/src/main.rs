fn main() {
    std::process::exit(contact_hj_cli::main_with_args(std::env::args_os()));
}
