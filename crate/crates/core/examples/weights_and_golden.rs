//! Weight files and golden vectors: what a trainer exports and how the codec
//! checks that it evaluates the networks the same way.

use shvc::model::{GoldenVectors, Mode, ModelConfig, ModelWeights, ShvcModel};
use shvc::tensor::Tensor;

fn main() -> shvc::Result<()> {
    let dir = std::env::temp_dir().join(format!("shvc-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let weights = ModelWeights::init_seeded(&ModelConfig::lite(2, Mode::Arib).with_seed(5))?;
    let wpath = dir.join("model.shvw");
    std::fs::write(&wpath, weights.to_bytes())?;
    println!("{} records, {} parameters, hash {:#018x}", weights.records.len(), weights.parameter_count(), weights.hash());

    let model = ShvcModel::new(&ModelWeights::from_bytes(&std::fs::read(&wpath)?)?)?;
    let x = Tensor::from_fn(3, 16, 16, |c, y, x| ((c + y * x) % 17) as f32 / 8.5 - 1.0);
    let gpath = dir.join("golden.shvg");
    std::fs::write(&gpath, GoldenVectors::generate(&model, &x)?.to_bytes())?;

    let golden = GoldenVectors::from_bytes(&std::fs::read(&gpath)?)?;
    let report = golden.verify(&model)?;
    println!(
        "checked {} outputs and {} tables, max relative error {:.2e}, passed {}",
        report.outputs_checked,
        report.tables_checked,
        report.max_relative_error,
        report.passed()
    );

    // nudge one bias, as a mismatched export would
    let mut nudged = weights.clone();
    nudged.records.last_mut().unwrap().data[0] += 0.01;
    let report = golden.verify(&ShvcModel::new(&nudged)?)?;
    println!("after nudging {}: failures {:?}", nudged.records.last().unwrap().name, report.failures);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
