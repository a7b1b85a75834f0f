//! Dörfler bulk marking.

/// Smallest set of cells whose squared indicators sum to at least
/// `theta^2 * sum eta_K^2`, taken in decreasing order of `eta_K` with ties
/// broken by cell index. Returned in ascending index order; `theta = 1`
/// marks every cell.
pub fn dorfler(eta: &[f64], theta: f64) -> Vec<usize> {
    assert!(theta > 0.0 && theta <= 1.0, "marking fraction must lie in (0, 1]");
    if theta >= 1.0 {
        return (0..eta.len()).collect();
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let total: f64 = eta.iter().map(|e| e * e).sum();
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        acc += eta[k] * eta[k];
        marked.push(k);
    }
    marked.sort_unstable();
    marked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_largest_indicators_first() {
        assert_eq!(dorfler(&[1.0, 3.0, 2.0, 0.5], 0.8), vec![1, 2]);
        assert_eq!(dorfler(&[1.0, 3.0, 2.0, 0.5], 0.5), vec![1]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(dorfler(&[1.0, 1.0, 1.0, 1.0], 0.5), vec![0]);
        assert_eq!(dorfler(&[1.0, 1.0, 1.0, 1.0], 0.75), vec![0, 1, 2]);
    }

    #[test]
    fn full_fraction_marks_everything() {
        assert_eq!(dorfler(&[0.0, 2.0, 0.0], 1.0), vec![0, 1, 2]);
    }

    #[test]
    fn zero_indicators_still_mark_one_cell() {
        assert_eq!(dorfler(&[0.0, 0.0], 0.5), vec![0]);
    }
}
