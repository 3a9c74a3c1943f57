//! Descriptive statistics and rank correlation, generic over the float type.

use std::cmp::Ordering;

use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("correlation undefined: a sample has no variation")]
    ZeroVariance,
}

fn cast<T: Float>(n: usize) -> T {
    T::from(n).unwrap()
}

pub fn mean<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().fold(T::zero(), |a, &x| a + x) / cast(xs.len()))
}

/// Population standard deviation (divides by `n`).
pub fn population_std<T: Float>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m));
    Some((ss / cast(xs.len())).sqrt())
}

/// Population z-scores, or `None` for empty input or zero spread.
pub fn z_scores<T: Float>(xs: &[T]) -> Option<Vec<T>> {
    let m = mean(xs)?;
    let sd = population_std(xs)?;
    if is_negligible_spread(sd, m) {
        return None;
    }
    Some(xs.iter().map(|&x| (x - m) / sd).collect())
}

/// Spread counts as zero when it is within rounding noise of the mean's
/// magnitude. Equal distances computed through different float paths are
/// rarely bit-identical.
pub fn is_negligible_spread<T: Float>(sd: T, mean: T) -> bool {
    sd <= mean.abs() * T::epsilon() * cast(1024)
}

fn cmp<T: Float>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("NaN in rank input")
}

/// 1-based ranks, ties receiving the average of the positions they span.
pub fn average_ranks<T: Float>(xs: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| cmp(&xs[a], &xs[b]));
    let mut ranks = vec![T::zero(); xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let avg = cast::<T>(i + 1 + j) / (T::one() + T::one());
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson<T: Float>(xs: &[T], ys: &[T]) -> Result<T, StatsError> {
    let mx = mean(xs).ok_or(StatsError::TooFew(0))?;
    let my = mean(ys).ok_or(StatsError::TooFew(0))?;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

fn check_pair<T>(xs: &[T], ys: &[T]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFew(xs.len()));
    }
    Ok(())
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman<T: Float>(xs: &[T], ys: &[T]) -> Result<T, StatsError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm): sort by `(x, y)`,
/// then count discordant pairs as inversions of `y` during a merge sort.
pub fn kendall_tau_b<T: Float>(xs: &[T], ys: &[T]) -> Result<T, StatsError> {
    check_pair(xs, ys)?;
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(&xs[a], &xs[b]).then(cmp(&ys[a], &ys[b])));

    let pairs = |t: u64| t * t.saturating_sub(1) / 2;
    let tie_pairs = |same: &dyn Fn(usize, usize) -> bool, idx: &[usize]| -> u64 {
        let mut total = 0;
        let mut run = 1u64;
        for w in idx.windows(2) {
            if same(w[0], w[1]) {
                run += 1;
            } else {
                total += pairs(run);
                run = 1;
            }
        }
        total + pairs(run)
    };
    let x_ties = tie_pairs(&|a, b| xs[a] == xs[b], &order);
    let joint_ties = tie_pairs(&|a, b| xs[a] == xs[b] && ys[a] == ys[b], &order);

    let mut buf = order.clone();
    let discordant = merge_count(&mut order, &mut buf, ys);
    // `order` is now sorted by y
    let y_ties = tie_pairs(&|a, b| ys[a] == ys[b], &order);

    let total = pairs(n as u64);
    let denom_x = total - x_ties;
    let denom_y = total - y_ties;
    if denom_x == 0 || denom_y == 0 {
        return Err(StatsError::ZeroVariance);
    }
    let numer = total as i128 - x_ties as i128 - y_ties as i128 + joint_ties as i128
        - 2 * discordant as i128;
    let numer = T::from(numer).unwrap();
    let tau = numer / (cast::<T>(denom_x as usize) * cast::<T>(denom_y as usize)).sqrt();
    Ok(tau.max(-T::one()).min(T::one()))
}

/// Stable merge sort of `idx` by `key`, returning the number of strict
/// inversions.
fn merge_count<T: Float>(idx: &mut [usize], buf: &mut [usize], key: &[T]) -> u64 {
    let n = idx.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = idx.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl, key) + merge_count(r, br, key)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if key[idx[j]] < key[idx[i]] {
            buf[k] = idx[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = idx[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&idx[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&idx[j..n]);
    idx.copy_from_slice(&buf[..n]);
    count
}
