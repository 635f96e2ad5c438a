fn main() {
    std::process::exit(causejudger_cli::dispatch(std::env::args_os()));
}
