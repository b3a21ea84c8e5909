fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = graspkit::cli::run_from(std::env::args()) {
        eprintln!("graspkit: {e}");
        std::process::exit(e.exit_code());
    }
}
