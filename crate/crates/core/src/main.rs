fn main() {
    relaysim::cli::install_interrupt_handler();
    let env_seed = std::env::var(relaysim::cli::SEED_ENV).ok();
    std::process::exit(relaysim::cli::run(std::env::args_os(), env_seed));
}
