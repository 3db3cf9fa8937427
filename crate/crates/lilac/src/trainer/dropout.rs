//! Independent condition dropout.
//!
//! Each of {context, e, c} is dropped independently per sample. A dropped
//! context or style becomes its learned null; a dropped condition map becomes
//! the all-zero map (inert through the input zero convolution at init).

use crate::numerics::rng::Stream;

use super::config::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DropoutMask {
    pub keep_context: bool,
    pub keep_e: bool,
    pub keep_c: bool,
}

impl DropoutMask {
    pub const KEEP_ALL: DropoutMask =
        DropoutMask { keep_context: true, keep_e: true, keep_c: true };

    pub fn draw(stream: &mut Stream, config: &TrainConfig) -> Self {
        // One bernoulli per condition, always drawn in the same order.
        let drop_context = stream.bernoulli(config.dropout_context);
        let drop_e = stream.bernoulli(config.dropout_e);
        let drop_c = stream.bernoulli(config.dropout_c);
        DropoutMask { keep_context: !drop_context, keep_e: !drop_e, keep_c: !drop_c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    #[test]
    fn degenerate_probabilities() {
        let mut stream = RngKey::root(1).stream();
        let keep_all = TrainConfig { dropout_context: 0.0, dropout_e: 0.0, dropout_c: 0.0, ..Default::default() };
        let drop_all = TrainConfig { dropout_context: 1.0, dropout_e: 1.0, dropout_c: 1.0, ..Default::default() };
        for _ in 0..100 {
            assert_eq!(DropoutMask::draw(&mut stream, &keep_all), DropoutMask::KEEP_ALL);
            let m = DropoutMask::draw(&mut stream, &drop_all);
            assert!(!m.keep_context && !m.keep_e && !m.keep_c);
        }
    }

    #[test]
    fn marginals_and_independence_at_half() {
        let mut stream = RngKey::root(2).stream();
        let cfg = TrainConfig::default(); // all 0.5
        let n = 10_000usize;
        let mut drop = [0usize; 3];
        let mut joint = [[0usize; 3]; 3];
        for _ in 0..n {
            let m = DropoutMask::draw(&mut stream, &cfg);
            let d = [!m.keep_context, !m.keep_e, !m.keep_c];
            for i in 0..3 {
                if d[i] {
                    drop[i] += 1;
                }
                for j in (i + 1)..3 {
                    if d[i] && d[j] {
                        joint[i][j] += 1;
                    }
                }
            }
        }
        for i in 0..3 {
            let rate = drop[i] as f64 / n as f64;
            assert!((rate - 0.5).abs() < 0.02, "marginal {i}: {rate}");
            for j in (i + 1)..3 {
                let jr = joint[i][j] as f64 / n as f64;
                assert!((jr - 0.25).abs() < 0.02, "joint {i}{j}: {jr}");
            }
        }
    }
}
