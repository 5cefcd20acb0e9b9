fn main() -> std::process::ExitCode {
    stiffode_cli::main_exit_code()
}
