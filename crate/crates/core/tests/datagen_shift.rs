use ted_core::datagen::{apply_shift, preset_shifts, SyntheticTask};
use ted_core::decoder::LinearDecoder;
use ted_core::linalg::{self, Matrix};

fn accuracy(dec: &LinearDecoder, z: &Matrix, labels: &[u32]) -> f64 {
    let hits = (0..z.rows())
        .filter(|&i| dec.decode(z.row(i)).unwrap().predicted_class == labels[i] as usize)
        .count();
    100.0 * hits as f64 / z.rows() as f64
}

fn nearest_mean(task: &SyntheticTask, z: &[f64]) -> usize {
    let means = task.class_means();
    (0..means.rows())
        .map(|c| (c, linalg::norm(&linalg::sub(z, means.row(c)))))
        .fold((0, f64::INFINITY), |best, (c, d)| if d < best.1 { (c, d) } else { best })
        .0
}

#[test]
fn bayes_decoder_matches_nearest_mean() {
    let task = SyntheticTask::default_task(11).unwrap();
    let dec = task.make_decoder().unwrap();
    let (z, labels) = task.sample(500, 1).unwrap();
    let nm = 100.0
        * (0..z.rows())
            .filter(|&i| nearest_mean(&task, z.row(i)) == labels[i] as usize)
            .count() as f64
        / z.rows() as f64;
    assert!(accuracy(&dec, &z, &labels) >= nm - 0.5);
}

#[test]
fn well_separated_means_are_almost_always_right() {
    // Orthogonal means of norm 6: pairwise distance 6·√2 ≥ 6s.
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|c| (0..16).map(|j| if j == c { 6.0 } else { 0.0 }).collect())
        .collect();
    let task = SyntheticTask::new(Matrix::from_rows(&rows).unwrap(), 1.0, 3).unwrap();
    assert!(task.min_separation() >= 6.0);
    let (z, labels) = task.sample(2000, 0).unwrap();
    assert!(accuracy(&task.make_decoder().unwrap(), &z, &labels) >= 99.0);
}

/// Accuracies (percent, 2000 draws) on the default task, seed 0, severity 1.
const SOURCE_ACCURACY: f64 = 98.05;
const COMBINED_ACCURACY: f64 = 86.2;

#[test]
fn combined_shift_degrades_no_adapt_accuracy() {
    let task = SyntheticTask::default_task(0).unwrap();
    let dec = task.make_decoder().unwrap();
    let (src, src_labels) = task.sample(200, 1).unwrap();
    let (raw, labels) = task.sample(200, 2).unwrap();
    let mu: Vec<f64> = (0..64)
        .map(|j| (0..10).map(|c| task.class_means().get(c, j)).sum::<f64>() / 10.0)
        .collect();
    let shift = &preset_shifts(64, 1.0, 1.0, 0).unwrap()[2];
    assert_eq!(shift.label, "combined");
    let shifted = apply_shift(&raw, &mu, shift).unwrap();
    let (a_src, a_tgt) = (accuracy(&dec, &src, &src_labels), accuracy(&dec, &shifted, &labels));
    println!("source {a_src:.2}%, combined {a_tgt:.2}%");
    assert!(a_src - a_tgt >= 10.0);
    assert!((a_src - SOURCE_ACCURACY).abs() < 1e-9, "{a_src}");
    assert!((a_tgt - COMBINED_ACCURACY).abs() < 1e-9, "{a_tgt}");
}

#[test]
fn shift_preserves_labels_and_row_count() {
    let task = SyntheticTask::default_task(2).unwrap();
    let (z, labels) = task.sample(3, 0).unwrap();
    let before = labels.clone();
    for s in preset_shifts(64, 0.7, 1.0, 2).unwrap() {
        let out = apply_shift(&z, &vec![0.0; 64], &s).unwrap();
        assert_eq!(out.rows(), z.rows());
        assert!(linalg::all_finite(out.as_slice()));
    }
    assert_eq!(labels, before);
}
