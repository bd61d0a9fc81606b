//! Test-set evaluation via the default head.

use crate::datasets::TestExample;
use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::mlp::{forward_two_head, ModelParams};
use crate::probvec::softmax;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// `(max predicted probability, correct)` per example, for the
    /// confidence histograms.
    pub confidences: Vec<(f64, bool)>,
}

/// Accuracy of the default head on a held-out set.
pub fn evaluate(model: &ModelParams, test: &[TestExample]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Usage("evaluation needs a non-empty test set".into()));
    }
    let n = model.n_classes();
    let batch = Matrix::from_rows(&test.iter().map(|e| e.features.clone()).collect::<Vec<_>>())?;
    let (logits_d, _, _) = forward_two_head(model, &batch)?;

    let mut correct_per_class = vec![0usize; n];
    let mut total_per_class = vec![0usize; n];
    let mut confidences = Vec::with_capacity(test.len());
    let mut correct_total = 0usize;

    for (row, example) in test.iter().enumerate() {
        let p = softmax(logits_d.row(row))?;
        let predicted = p.argmax_label();
        let is_correct = predicted == example.label;
        total_per_class[example.label.index()] += 1;
        if is_correct {
            correct_per_class[example.label.index()] += 1;
            correct_total += 1;
        }
        confidences.push((p.values()[predicted.index()], is_correct));
    }

    let per_class_accuracy = correct_per_class
        .iter()
        .zip(&total_per_class)
        .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
        .collect();

    Ok(EvalReport {
        accuracy: correct_total as f64 / test.len() as f64,
        per_class_accuracy,
        confidences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probvec::HardLabel;

    /// A hand-built model that classifies by the sign pattern of the two
    /// inputs: weights send each quadrant to its own class.
    fn separable_fixture() -> (ModelParams, Vec<TestExample>) {
        let mut model = ModelParams::zeros(2, &[], 2);
        *model.head_d.weight.at_mut(0, 0) = 1.0;
        *model.head_d.weight.at_mut(0, 1) = -1.0;
        let test = vec![
            TestExample {
                features: vec![2.0, 0.0],
                label: HardLabel::new(0, 2).unwrap(),
            },
            TestExample {
                features: vec![-3.0, 0.0],
                label: HardLabel::new(1, 2).unwrap(),
            },
        ];
        (model, test)
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let (model, test) = separable_fixture();
        let report = evaluate(&model, &test).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.per_class_accuracy, vec![1.0, 1.0]);
        assert_eq!(report.confidences.len(), 2);
        assert!(report.confidences.iter().all(|&(_, ok)| ok));
    }

    #[test]
    fn uniform_predictor_hits_exactly_one_over_n_on_balanced_sets() {
        // A zero model ties every class; the tie-break always predicts
        // class 0, so accuracy is exactly 1/n on a balanced set.
        let n = 4;
        let model = ModelParams::zeros(2, &[], n);
        let mut test = Vec::new();
        for class in 0..n {
            for k in 0..25 {
                test.push(TestExample {
                    features: vec![k as f64, class as f64],
                    label: HardLabel::new(class, n).unwrap(),
                });
            }
        }
        let report = evaluate(&model, &test).unwrap();
        assert!((report.accuracy - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn per_class_accuracy_averages_to_accuracy_on_balanced_sets() {
        let (model, test) = separable_fixture();
        let report = evaluate(&model, &test).unwrap();
        let mean: f64 =
            report.per_class_accuracy.iter().sum::<f64>() / report.per_class_accuracy.len() as f64;
        assert!((mean - report.accuracy).abs() < 1e-12);
    }

    #[test]
    fn empty_test_set_is_a_usage_error() {
        let (model, _) = separable_fixture();
        assert!(matches!(evaluate(&model, &[]), Err(Error::Usage(_))));
    }
}
