fn main() -> std::process::ExitCode {
    env_logger::init();
    jarvis_core::cli::main()
}
