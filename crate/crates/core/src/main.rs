fn main() {
    std::process::exit(floodwalk::pipeline::run(std::env::args_os()));
}
