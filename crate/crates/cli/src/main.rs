fn main() {
    std::process::exit(numkit::run(std::env::args_os()));
}
