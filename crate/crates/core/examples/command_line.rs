//! The command-line driver run in-process: a configuration file with an
//! override, a single point, and the risk-neutral price.

use pce::cli::{config::Config, run};

fn main() -> pce::Result<()> {
    let dir = std::env::temp_dir().join("pce-command-line-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("economy.cfg");
    let mut cfg = Config::default();
    cfg.set("eta_U", "2")?;
    std::fs::write(
        &path,
        format!("# baseline with eta_U = 2\n{}", cfg.render()),
    )?;
    println!("{}", std::fs::read_to_string(&path)?);

    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let path = path.to_string_lossy().into_owned();
    let runs: [&[&str]; 3] = [
        &[
            "pce",
            "point",
            "--config",
            &path,
            "--set",
            "eta_U=5",
            "--quantile",
            "0.9",
        ],
        &["pce", "point", "--rn", "--h", "0.055"],
        &["pce", "point", "--set", "eta_u=5"],
    ];
    for args in runs {
        println!("$ {}", args.join(" "));
        let code = run(args.iter().copied(), &mut out, &mut err);
        println!("exit status {code}\n");
    }
    Ok(())
}
