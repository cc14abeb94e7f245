use mvdis::config::TrainConfig;
use mvdis::data::{generate_synthetic3d, normalize};
use mvdis::trainer::Trainer;

#[test]
fn objective_mostly_decreases_early_on_synthetic3d() {
    let cfg = TrainConfig::default();
    let data = normalize(&generate_synthetic3d(cfg.seed), cfg.normalization);
    let mut trainer = Trainer::new(&cfg, &data).unwrap();
    let totals: Vec<f64> = (0..51)
        .map(|_| trainer.train_epoch(&data).unwrap().losses.total)
        .collect();
    let decreases = totals.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(decreases >= 45, "objective fell in {decreases} of 50 epochs");
}
