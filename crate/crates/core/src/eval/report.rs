use serde::{Deserialize, Serialize};

use crate::dataio::Letter;

pub const N_CLASSES: usize = 4;

/// Result of one evaluation job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub job: String,
    pub accuracy: f64,
    /// Rows are true letters, columns predicted letters.
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    pub n_test: usize,
    pub seed: u64,
    pub fingerprint: String,
    /// Test epochs left out of scoring (averaging remainders).
    pub dropped: usize,
}

impl EvalReport {
    pub fn from_predictions(job: String, truth: &[usize], pred: &[usize], seed: u64, fingerprint: &str) -> Self {
        let mut confusion = [[0; N_CLASSES]; N_CLASSES];
        for (&t, &p) in truth.iter().zip(pred) {
            confusion[t][p] += 1;
        }
        let mut r = EvalReport {
            job,
            accuracy: 0.0,
            confusion,
            n_test: truth.len(),
            seed,
            fingerprint: fingerprint.to_string(),
            dropped: 0,
        };
        r.accuracy = r.trace() as f64 / r.n_test.max(1) as f64;
        r
    }

    pub fn trace(&self) -> usize {
        (0..N_CLASSES).map(|k| self.confusion[k][k]).sum()
    }

    /// Sums confusion matrices; accuracy is total correct over total.
    pub fn pooled(job: String, parts: &[EvalReport], seed: u64, fingerprint: &str) -> Self {
        let mut confusion = [[0; N_CLASSES]; N_CLASSES];
        let mut dropped = 0;
        for p in parts {
            dropped += p.dropped;
            for (row, prow) in confusion.iter_mut().zip(&p.confusion) {
                for (c, pc) in row.iter_mut().zip(prow) {
                    *c += pc;
                }
            }
        }
        let n_test = confusion.iter().flatten().sum();
        let mut r = EvalReport { job, accuracy: 0.0, confusion, n_test, seed, fingerprint: fingerprint.into(), dropped };
        r.accuracy = r.trace() as f64 / n_test.max(1) as f64;
        r
    }

    pub fn class_counts(&self) -> [usize; N_CLASSES] {
        self.confusion.map(|row| row.iter().sum())
    }

    /// Human-readable block.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "job: {}\naccuracy: {:.4}\nn_test: {}\ndropped: {}\nseed: {}\nfingerprint: {}\nconfusion (rows true, cols predicted):\n",
            self.job, self.accuracy, self.n_test, self.dropped, self.seed, self.fingerprint
        );
        s += "     ";
        for l in Letter::ALL {
            s += &format!("{:>6}", l.as_str());
        }
        s.push('\n');
        for (l, row) in Letter::ALL.iter().zip(&self.confusion) {
            s += &format!("{:>5}", l.as_str());
            for c in row {
                s += &format!("{c:>6}");
            }
            s.push('\n');
        }
        s
    }
}

/// Flat table, one report per row.
pub fn reports_to_tsv(reports: &[EvalReport]) -> String {
    let mut s = String::from("job\tseed\tn_test\tdropped\taccuracy\tfingerprint\n");
    for r in reports {
        s += &format!("{}\t{}\t{}\t{}\t{:.6}\t{}\n", r.job, r.seed, r.n_test, r.dropped, r.accuracy, r.fingerprint);
    }
    s
}
