//! Train a classifier on the bundled Gaussian-mixture layout and print the
//! per-level trace.

use oda_core::annealing::{OdaConfig, OdaModel};
use oda_core::data::{gaussians_preset, gen_blobs, Stream};
use oda_core::divergence::Divergence;
use oda_core::metrics;

fn main() {
    let ds = gen_blobs(1500, &gaussians_preset(), 1.0, 4).unwrap();
    let mut cfg = OdaConfig::defaults(Divergence::squared_euclidean(2), ds.delta_s());
    cfg.max_obs_per_level = 10 * ds.len();
    cfg.rng_seed = 1;

    let mut model = OdaModel::init(cfg, &OdaModel::seeds_from_dataset(&ds)).unwrap();
    let mut stream = Stream::new(&ds, 9);
    let report = model.fit(&mut stream, Some(&ds)).unwrap();

    println!("temperature    K   samples   distortion  accuracy");
    for l in &report.levels {
        println!(
            "{:11.3} {:4} {:9} {:11.4} {:9.3}",
            l.temperature,
            l.k_effective,
            l.samples_seen_cumulative,
            l.avg_distortion.unwrap_or(f64::NAN),
            l.accuracy.unwrap_or(f64::NAN),
        );
    }
    println!(
        "final: K = {}, accuracy = {:.4}",
        model.k(),
        metrics::accuracy(&model, &ds).unwrap()
    );
}
