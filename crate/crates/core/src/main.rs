use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::default().filter_or("PROSODY_LOG", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(prosody::cli::main_with_args(std::env::args_os()));
}
