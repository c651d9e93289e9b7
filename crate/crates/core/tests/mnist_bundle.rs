use std::path::PathBuf;

use orthofl::dataio::{load_mnist, make_split, mnist_dataset, read_idx_file, MnistFiles};
use orthofl::rng::{stream, Purpose};

fn bundle() -> MnistFiles {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    MnistFiles::in_dir(&dir).unwrap()
}

#[test]
fn bundled_headers() {
    let files = bundle();
    let images = read_idx_file(&files.images).unwrap();
    let labels = read_idx_file(&files.labels).unwrap();
    assert_eq!(images.magic(), 0x0000_0803);
    assert_eq!(labels.magic(), 0x0000_0801);
    assert_eq!(images.dims(), &[10_000, 28, 28]);
    assert_eq!(labels.dims(), &[10_000]);
}

#[test]
fn pixels_and_digits_in_range() {
    let (pixels, digits) = load_mnist(&bundle()).unwrap();
    assert_eq!(pixels.len(), 10_000 * 784);
    assert!(pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(digits.iter().all(|&d| d <= 9));
    let mut counts = [0usize; 10];
    digits.iter().for_each(|&d| counts[d as usize] += 1);
    assert!(counts.iter().all(|&c| c > 500), "{counts:?}");
}

#[test]
fn federated_split_of_the_experiment() {
    let data = mnist_dataset(&bundle(), true).unwrap();
    assert_eq!(data.dim(), 785);
    let split = make_split(&data, 8, 500, 2000, &mut stream(1, Purpose::Data, &[])).unwrap();
    assert_eq!(split.clients.len(), 8);
    assert!(split.clients.iter().all(|c| c.len() == 500));
    assert_eq!(split.test.len(), 2000);
    let positive = split.test.targets().iter().filter(|&&y| y > 0.0).count() as f64 / 2000.0;
    assert!((0.4..0.6).contains(&positive));
}
