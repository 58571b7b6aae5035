//! Compare analytic gradients of the contrastive loss with central finite
//! differences, in double precision, for every tower depth combination.
//!
//! ```bash
//! cargo run --release -p clove --example gradient_check -- [SAMPLES] [EPS]
//! ```

use clove::trainer::{gradient_check, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let samples: usize = args.next().map_or(Ok(200), |s| s.parse())?;
    let eps: f64 = args.next().map_or(Ok(1e-4), |s| s.parse())?;

    let mut worst = 0.0f64;
    for (text_depth, image_depth) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let config = ModelConfig {
            vocab_size: 30,
            d_t: 8,
            d: 6,
            d_img: 10,
            text_depth,
            text_hidden: 7,
            image_depth,
            image_hidden: 5,
        };
        let report = gradient_check(&config, 11, samples, eps)?;
        println!(
            "text depth {text_depth}, image depth {image_depth}: {} parameters over {} tensors, max relative error {:.2e}",
            report.checked,
            report.tensors.len(),
            report.max_relative_error
        );
        if let Some((tensor, index, analytic, numeric)) = &report.worst {
            println!("  worst: {tensor}[{index}] analytic {analytic:.6e} numeric {numeric:.6e}");
        }
        worst = worst.max(report.max_relative_error);
    }
    println!("{} (max relative error {worst:.2e}, bound 1e-4)", if worst < 1e-4 { "PASS" } else { "FAIL" });
    Ok(())
}
