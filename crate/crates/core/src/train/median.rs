use serde::Serialize;

use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub dev_f1: f64,
    pub test_f1: Option<f64>,
}

/// Index of the run with the median dev score; among runs sharing that
/// score, the lowest seed wins.
pub fn select_median(runs: &[RunSummary], expected: usize) -> Result<usize, TrainError> {
    if expected == 0 || expected.is_multiple_of(2) {
        return Err(TrainError::Config(format!("run count must be odd, got {expected}")));
    }
    if runs.len() != expected {
        return Err(TrainError::Runs { expected, found: runs.len() });
    }
    if let Some(r) = runs.iter().find(|r| r.dev_f1.is_nan()) {
        return Err(TrainError::Config(format!("run with seed {} has an undefined dev score", r.seed)));
    }
    let mut scores: Vec<f64> = runs.iter().map(|r| r.dev_f1).collect();
    scores.sort_by(f64::total_cmp);
    let median = scores[expected / 2];
    let (index, _) = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.dev_f1 == median)
        .min_by_key(|(_, r)| r.seed)
        .expect("median is one of the scores");
    Ok(index)
}

/// Runs `run` once per seed, in parallel, and selects the median run.
/// Results are reported in seed order.
pub fn run_median_protocol<F>(seeds: &[u64], expected: usize, run: F) -> Result<(usize, Vec<RunSummary>), TrainError>
where
    F: Fn(u64) -> Result<RunSummary, TrainError> + Sync,
{
    if seeds.len() != expected {
        return Err(TrainError::Runs { expected, found: seeds.len() });
    }
    let results: Vec<Result<RunSummary, TrainError>> = std::thread::scope(|scope| {
        let run = &run;
        let handles: Vec<_> = seeds.iter().map(|&s| scope.spawn(move || run(s))).collect();
        handles.into_iter().map(|h| h.join().expect("training run panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let chosen = select_median(&runs, expected)?;
    Ok((chosen, runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs(scores: &[f64]) -> Vec<RunSummary> {
        scores.iter().enumerate().map(|(i, &d)| RunSummary { seed: 10 + i as u64, dev_f1: d, test_f1: None }).collect()
    }

    #[test]
    fn picks_median() {
        let r = runs(&[61.0, 64.0, 63.0, 65.0, 62.0]);
        assert_eq!(r[select_median(&r, 5).unwrap()].dev_f1, 63.0);
    }

    #[test]
    fn ties_go_to_lowest_seed() {
        let mut r = runs(&[50.0; 5]);
        r[0].seed = 99;
        assert_eq!(r[select_median(&r, 5).unwrap()].seed, 11);
    }

    #[test]
    fn wrong_run_count_is_an_error() {
        assert!(matches!(select_median(&runs(&[1.0; 4]), 5), Err(TrainError::Runs { expected: 5, found: 4 })));
        assert!(select_median(&runs(&[1.0; 4]), 4).is_err());
        assert!(run_median_protocol(&[1, 2, 3, 4], 5, |_| unreachable!()).is_err());
    }

    #[test]
    fn parallel_driver_keeps_seed_order() {
        let (chosen, all) = run_median_protocol(&[5, 3, 9], 3, |s| Ok(RunSummary { seed: s, dev_f1: s as f64, test_f1: Some(0.0) })).unwrap();
        assert_eq!(all.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 3, 9]);
        assert_eq!(all[chosen].seed, 5);
    }
}
