fn main() {
    std::process::exit(acc_core::cli::run(std::env::args_os()));
}
