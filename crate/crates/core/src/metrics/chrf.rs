use super::ngrams::clipped_matches;
use super::MetricConfig;

/// Character n-gram F-score. Whitespace is removed before extracting
/// n-grams; precision and recall are averaged over the orders that occur in
/// either string, then combined as F-beta.
pub fn chrf<S: AsRef<str>>(hyp: &[S], reference: &[S], cfg: &MetricConfig) -> f64 {
    let h: Vec<char> = hyp.iter().flat_map(|t| t.as_ref().chars()).filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference
        .iter()
        .flat_map(|t| t.as_ref().chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    if h.is_empty() {
        return 0.0;
    }
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    for n in 1..=cfg.chrf_max_n {
        let hyp_total = h.len().saturating_sub(n - 1);
        let ref_total = r.len().saturating_sub(n - 1);
        if hyp_total == 0 && ref_total == 0 {
            break;
        }
        let (m, _) = clipped_matches(&h, &r, n);
        if hyp_total > 0 {
            p_sum += m as f64 / hyp_total as f64;
        }
        if ref_total > 0 {
            r_sum += m as f64 / ref_total as f64;
        }
        orders += 1;
    }
    let p = p_sum / orders as f64;
    let rec = r_sum / orders as f64;
    f_beta(p, rec, cfg.chrf_beta)
}

fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    if p <= 0.0 && r <= 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn identity_is_one() {
        let cfg = MetricConfig::default();
        let s = toks("das ist ein test");
        assert!((chrf(&s, &s, &cfg) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_beta_approaches_recall() {
        let cfg = MetricConfig {
            chrf_beta: 1000.0,
            chrf_max_n: 2,
            ..Default::default()
        };
        // hyp "ab", ref "abcd": unigram recall 2/4, bigram recall 1/3
        let recall = (0.5 + 1.0 / 3.0) / 2.0;
        let v = chrf(&toks("ab"), &toks("abcd"), &cfg);
        assert!((v - recall).abs() < 1e-3);
    }

    #[test]
    fn toy_pair_matches_hand_computation() {
        let cfg = MetricConfig {
            chrf_beta: 3.0,
            chrf_max_n: 2,
            ..Default::default()
        };
        // hyp chars "abc", ref "abd"
        // n=1: matches 2, P 2/3, R 2/3; n=2: "ab","bc" vs "ab","bd": 1 match, P 1/2 R 1/2
        let p = (2.0 / 3.0 + 0.5) / 2.0;
        let f = 10.0 * p * p / (9.0 * p + p);
        assert!((chrf(&toks("a bc"), &toks("abd"), &cfg) - f).abs() < 1e-12);
    }
}
