fn main() {
    // KNG_THREADS caps the worker pool used for scoring and search.
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("KNG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::process::exit(kng::harness::cli::cli_dispatch(std::env::args_os()));
}
