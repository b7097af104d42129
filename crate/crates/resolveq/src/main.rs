fn main() -> std::process::ExitCode {
    resolveq::cli::main_with(std::env::args_os())
}
