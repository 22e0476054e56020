fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let out_dir = std::env::var(heatsource_cli::config::OUTDIR_ENV).ok();
    std::process::exit(heatsource_cli::run(std::env::args_os(), out_dir.as_deref()));
}
