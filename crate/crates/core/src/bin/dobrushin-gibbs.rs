fn main() {
    std::process::exit(dobrushin_gibbs::cli::main_with_args(std::env::args_os()));
}
