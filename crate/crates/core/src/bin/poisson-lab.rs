fn main() {
    std::process::exit(poisson_lab::cli::dispatch(std::env::args_os()));
}
