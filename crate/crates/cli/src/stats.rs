//! Small report statistics.

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) comparison at the 5% level
/// via the normal approximation with tie correction.
///
/// Returns `'+'` when `a` is significantly better (higher), `'-'` when
/// significantly worse, `'='` otherwise.
pub fn rank_sum_flag(a: &[f64], b: &[f64]) -> char {
    let n1 = a.len();
    let n2 = b.len();
    if n1 == 0 || n2 == 0 {
        return '=';
    }
    let mut all: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0usize))
        .chain(b.iter().map(|&v| (v, 1usize)))
        .collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // mid-ranks with tie groups
    let n = all.len();
    let mut ranks = vec![0.0f64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    let r1: f64 = all
        .iter()
        .zip(&ranks)
        .filter(|((_, group), _)| *group == 0)
        .map(|(_, &r)| r)
        .sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean = (n1 * n2) as f64 / 2.0;
    let nf = n as f64;
    let variance =
        (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if variance <= 0.0 {
        return '=';
    }
    let z = (u1 - mean) / variance.sqrt();
    // 1.96 is the two-sided 5% normal quantile
    if z > 1.96 {
        '+'
    } else if z < -1.96 {
        '-'
    } else {
        '='
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var =
        values.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clearly_separated_samples_are_significant() {
        let a: Vec<f64> = (0..30).map(|i| 100.0 + i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(rank_sum_flag(&a, &b), '+');
        assert_eq!(rank_sum_flag(&b, &a), '-');
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let a = vec![5.0; 20];
        assert_eq!(rank_sum_flag(&a, &a), '=');
    }
}
