fn main() {
    std::process::exit(agentflow::cli::run_cli(std::env::args_os()));
}
