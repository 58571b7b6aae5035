//! Runs the full tradeoff experiment and prints the summary.
//!
//! cargo run --release --example demo_tradeoff -- [WORKDIR] [SEED] [CONFIG.toml]

use std::path::PathBuf;
use std::time::Instant;

use clove::demo::{demo_tradeoff, DemoConfig};
use clove::wordnet::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let workdir = args.next().map_or_else(|| std::env::temp_dir().join("clove-demo"), PathBuf::from);
    let seed = args.next().map_or(Ok(1), |s| s.parse())?;
    let base: DemoConfig = match args.next() {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)?,
        None => DemoConfig::default(),
    };
    let config = DemoConfig { seed, ablation: true, ..base };
    let start = Instant::now();
    let summary = demo_tradeoff(&workdir, &config, bundled())?;
    for check in &summary.checks {
        println!("{} {:<22} {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    println!("stage A   {:?}", summary.stage_a);
    println!("finetuned {:?}", summary.finetuned);
    if let Some(a) = summary.ablation {
        println!("ablation  {a:?}");
    }
    println!("curve written to {} in {:.1?}", workdir.join("curve.csv").display(), start.elapsed());
    Ok(())
}
