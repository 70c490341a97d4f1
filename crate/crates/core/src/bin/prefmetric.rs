use prefmetric::cli;

fn main() {
    std::process::exit(cli::run_main());
}
