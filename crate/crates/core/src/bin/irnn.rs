fn main() {
    std::process::exit(irnn::cli::dispatch(std::env::args_os()));
}
