fn main() {
    std::process::exit(urbanfold::pipeline::run(std::env::args_os()));
}
