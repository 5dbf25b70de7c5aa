fn main() {
    std::process::exit(regperc::experiments::run(std::env::args()));
}
