use std::io::Write;

fn main() {
    let seed = std::env::var(forkbench::cli::SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = forkbench::cli::run(
        std::env::args_os(),
        seed,
        &mut stdout.lock(),
        &mut stderr.lock(),
    );
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
