//! Drives the command-line front end in-process, writing into a scratch directory.

fn main() {
    let dir = std::env::temp_dir().join("complex-langevin-example");
    let out = dir.to_string_lossy().to_string();
    for args in [
        vec!["series", "--p", "2", "--nterms", "12"],
        vec!["breakdown-fit"],
        vec!["harmonic", "--theta-frac", "0.5", "--ai", "1"],
        vec!["spectrum-1d", "--theta-frac", "0.5", "--n", "100", "--levels", "12"],
    ] {
        let mut argv = vec!["complex-langevin", "--out", &out];
        argv.extend(args);
        let code = complex_langevin::cli::run(argv);
        println!("exit code {code}");
    }
}
