use std::cmp::Ordering;

use super::LearnError;

/// Objective pair to minimize.
pub type Objectives = (f64, f64);

fn dominates(a: Objectives, b: Objectives) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Fast non-dominated sort; fronts list indices in ascending order.
pub fn non_dominated_fronts(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(objs[i], objs[j]) {
                dominated_by[i].push(j);
            } else if i != j && dominates(objs[j], objs[i]) {
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (same order).
pub fn crowding_distance(objs: &[Objectives], front: &[usize]) -> Vec<f64> {
    let k = front.len();
    let mut dist = vec![0.0; k];
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    for axis in 0..2 {
        let get = |i: usize| if axis == 0 { objs[front[i]].0 } else { objs[front[i]].1 };
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| get(a).total_cmp(&get(b)).then(a.cmp(&b)));
        let (lo, hi) = (get(order[0]), get(order[k - 1]));
        // a degenerate axis carries no spread information
        if hi > lo {
            dist[order[0]] = f64::INFINITY;
            dist[order[k - 1]] = f64::INFINITY;
            for w in 1..k - 1 {
                dist[order[w]] += (get(order[w + 1]) - get(order[w - 1])) / (hi - lo);
            }
        }
    }
    dist
}

/// Indices of the `target` survivors: whole fronts in rank order, the last
/// partial front by decreasing crowding distance, ties by index.
pub fn nsga2_select(objs: &[Objectives], target: usize) -> Result<Vec<usize>, LearnError> {
    if target > objs.len() {
        return Err(LearnError::SelectionTooLarge { target, available: objs.len() });
    }
    let mut out = Vec::with_capacity(target);
    for front in non_dominated_fronts(objs) {
        if out.len() == target {
            break;
        }
        if out.len() + front.len() <= target {
            out.extend(front);
            continue;
        }
        let dist = crowding_distance(objs, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| match dist[b].partial_cmp(&dist[a]) {
            Some(Ordering::Equal) | None => a.cmp(&b),
            Some(o) => o,
        });
        let room = target - out.len();
        out.extend(order.into_iter().take(room).map(|w| front[w]));
    }
    Ok(out)
}
