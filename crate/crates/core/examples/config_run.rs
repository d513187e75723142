//! Runs every command on an inline experiment file, the way the binary does.

use dobrushin_gibbs::cli::{execute, Command, Meta};
use dobrushin_gibbs::config::ExperimentConfig;

const CONFIG: &str = "
kind = ising
n_sites = 4
beta = 0.25
edges = 1 2 1.0; 2 3 1.0; 3 4 1.0; 4 1 1.0
k_max = 6
replicas = 2000
n = 100
t_grid = 0.02 0.05 0.1
observable = fraction 1
seed = 11
";

fn main() -> dobrushin_gibbs::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    for command in [Command::Report, Command::Exact, Command::Couple, Command::Simulate, Command::Concentrate] {
        let table = execute(command, &cfg, cfg.seed)?;
        let meta = Meta {
            command: command.name(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        };
        println!("== {}", command.name());
        print!("{}", table.to_csv(&meta));
    }
    Ok(())
}
