fn main() {
    std::process::exit(seasonal_dispersal_cli::dispatch(std::env::args_os()));
}
