//! Writes a batch as an IVT1 tensor and a network as JSON, then reads both
//! back and checks they are unchanged.

use invrisk::harness::data::{generate_synthetic, SyntheticKind};
use invrisk::io::{read_tensor, write_tensor};
use invrisk::linalg::Tensor;
use invrisk::network::{Activation, Network};

fn main() -> invrisk::Result<()> {
    let dir = std::env::temp_dir().join(format!("invrisk-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let rows: Vec<Vec<f64>> = generate_synthetic(SyntheticKind::Grid, 4, 16, 1)?.into_iter().map(|i| i.x).collect();
    let batch = Tensor::from_rows(&rows)?;
    let path = dir.join("batch.ivt");
    write_tensor(&path, &batch)?;
    let back = read_tensor(&path)?;
    println!("tensor {:?}: {} bytes, identical = {}", back.shape(), std::fs::metadata(&path)?.len(), back == batch);

    let net = Network::random(&[16, 4, 2], &[Activation::Relu, Activation::Identity], 8)?;
    let net_path = dir.join("net.json");
    std::fs::write(&net_path, net.to_json()?)?;
    let loaded = Network::from_json(&std::fs::read_to_string(&net_path)?)?;
    println!("network with {} parameters, identical = {}", loaded.param_count(), loaded == net);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
