fn main() {
    mmsp_offload::cli::init_logging();
    std::process::exit(mmsp_offload::cli::main_with_args(std::env::args_os()));
}
