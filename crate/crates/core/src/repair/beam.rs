use std::cmp::Ordering;

/// A left-to-right token model queried one step at a time.
pub trait StepModel {
    /// Size of the output space; ids are `0..vocab_size()`.
    fn vocab_size(&self) -> usize;
    fn eos(&self) -> usize;
    /// Log-probabilities of the next id after `prefix`.
    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    /// Generated ids, ending in EOS when `finished`.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Tokens without the closing EOS.
    pub fn body(&self) -> &[usize] {
        if self.finished {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }
}

/// Higher log-probability first; equal scores by token sequence.
fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Length-bounded beam search. A sequence ends at EOS or after `max_len`
/// ids; unfinished sequences still alive at the bound are returned as
/// truncated hypotheses. At every step the `beam_width` best expansions
/// are kept; an EOS expansion among them is finished, otherwise it is
/// dropped. Returns at most `beam_width` hypotheses, best first.
pub fn beam_search<M: StepModel + ?Sized>(model: &M, beam_width: usize, max_len: usize) -> Vec<Hypothesis> {
    assert!(beam_width >= 1, "beam width must be at least 1");
    let eos = model.eos();
    let mut alive = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let mut expansions = Vec::new();
        for h in &alive {
            let lp = model.next_log_probs(&h.tokens);
            debug_assert_eq!(lp.len(), model.vocab_size());
            for (id, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY || l.is_nan() {
                    continue;
                }
                let mut tokens = h.tokens.clone();
                tokens.push(id);
                expansions.push(Hypothesis {
                    tokens,
                    log_prob: h.log_prob + l,
                    finished: id == eos,
                });
            }
        }
        expansions.sort_by(rank_order);
        alive.clear();
        for (rank, h) in expansions.into_iter().enumerate() {
            if h.finished {
                if rank < beam_width {
                    finished.push(h);
                }
            } else {
                alive.push(h);
            }
            if alive.len() == beam_width {
                break;
            }
        }
        if alive.is_empty() {
            break;
        }
        if finished.len() >= beam_width {
            finished.sort_by(rank_order);
            let worst_kept = finished[beam_width - 1].log_prob;
            // scores only fall as sequences grow
            if alive[0].log_prob < worst_kept {
                alive.clear();
                break;
            }
        }
    }
    finished.extend(alive);
    finished.sort_by(rank_order);
    finished.truncate(beam_width);
    finished
}

/// Argmax decoding; ties go to the lowest id.
pub fn greedy_decode<M: StepModel + ?Sized>(model: &M, max_len: usize) -> Hypothesis {
    let eos = model.eos();
    let mut h = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: false,
    };
    for _ in 0..max_len {
        let lp = model.next_log_probs(&h.tokens);
        let (id, &l) = lp
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, &f64)>, (i, l)| match best {
                Some((_, b)) if *l <= *b => best,
                _ => Some((i, l)),
            })
            .expect("non-empty distribution");
        h.tokens.push(id);
        h.log_prob += l;
        if id == eos {
            h.finished = true;
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<Vec<f64>>);

    impl StepModel for Fixed {
        fn vocab_size(&self) -> usize {
            self.0[0].len()
        }
        fn eos(&self) -> usize {
            0
        }
        fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
            self.0[prefix.len().min(self.0.len() - 1)].iter().map(|p| p.ln()).collect()
        }
    }

    #[test]
    fn greedy_stops_at_eos() {
        let m = Fixed(vec![vec![0.1, 0.6, 0.3], vec![0.7, 0.2, 0.1]]);
        let h = greedy_decode(&m, 5);
        assert_eq!(h.tokens, vec![1, 0]);
        assert!(h.finished);
        assert_eq!(h.body(), &[1]);
    }

    #[test]
    fn width_one_is_greedy() {
        let m = Fixed(vec![vec![0.1, 0.6, 0.3], vec![0.2, 0.2, 0.6], vec![0.5, 0.4, 0.1]]);
        let g = greedy_decode(&m, 6);
        let b = beam_search(&m, 1, 6);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].tokens, g.tokens);
        assert!((b[0].log_prob - g.log_prob).abs() < 1e-12);
    }

    #[test]
    fn sorted_and_bounded() {
        let m = Fixed(vec![vec![0.3, 0.4, 0.3], vec![0.5, 0.25, 0.25]]);
        let out = beam_search(&m, 4, 3);
        assert!(out.len() <= 4);
        assert!(out.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
        assert!(out.iter().all(|h| h.log_prob.is_finite() && h.tokens.len() <= 3));
    }

    #[test]
    fn width_one_can_miss_the_best_sequence() {
        // EOS first is the most likely sequence (0.4), but greedy takes the
        // 0.6 branch whose completions are all worth at most 0.21
        let m = Fixed(vec![vec![0.4, 0.6, 0.0], vec![0.3, 0.35, 0.35]]);
        let g = greedy_decode(&m, 2);
        assert_eq!(g.tokens[0], 1);
        assert!(g.log_prob < 0.4f64.ln());
        let wide = beam_search(&m, 2, 2);
        assert_eq!(wide[0].tokens, vec![0]);
    }
}
