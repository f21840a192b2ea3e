use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A candidate attack: incremental gain over full inclusion and the private
/// capacity it consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackItem {
    pub gain: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSolution {
    /// Indices into the input, ascending.
    pub selected: Vec<usize>,
    pub total_gain: f64,
    pub total_cost: f64,
    /// Capacity units per DP step.
    pub resolution: f64,
}

const MAX_STEPS: u64 = 20_000_000;

/// Exact 0-1 knapsack over costs rounded up to multiples of `resolution`
/// and capacity rounded down, so the returned set is feasible for the
/// original costs. Items with nonpositive gain are never selected.
pub fn knapsack_select(
    items: &[AttackItem],
    capacity: f64,
    resolution: f64,
) -> Result<KnapsackSolution> {
    if !(capacity >= 0.0) {
        return Err(Error::param("capacity", "must be nonnegative"));
    }
    if !(resolution > 0.0) {
        return Err(Error::param("resolution", "must be positive"));
    }
    if items
        .iter()
        .any(|i| !(i.cost >= 0.0) || !i.gain.is_finite())
    {
        return Err(Error::param(
            "items",
            "costs must be nonnegative and gains finite",
        ));
    }
    let cap = (capacity / resolution + 1e-9).floor() as u64;
    if cap > MAX_STEPS {
        return Err(Error::param("resolution", "capacity grid too large"));
    }
    let cap = cap as usize;
    let scaled: Vec<usize> = items
        .iter()
        .map(|i| ((i.cost / resolution - 1e-9).ceil().max(0.0)) as usize)
        .collect();

    // best[i][c]: optimum over the first i items with capacity c.
    let n = items.len();
    let mut best = vec![vec![0.0f64; cap + 1]; n + 1];
    for i in 0..n {
        let (g, w) = (items[i].gain, scaled[i]);
        for c in 0..=cap {
            let skip = best[i][c];
            best[i + 1][c] = if g > 0.0 && w <= c {
                skip.max(best[i][c - w] + g)
            } else {
                skip
            };
        }
    }
    let mut selected = Vec::new();
    let mut c = cap;
    for i in (0..n).rev() {
        if best[i + 1][c] != best[i][c] {
            selected.push(i);
            c -= scaled[i];
        }
    }
    selected.reverse();
    Ok(KnapsackSolution {
        total_gain: selected.iter().map(|&i| items[i].gain).sum(),
        total_cost: selected.iter().map(|&i| items[i].cost).sum(),
        selected,
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(gain: f64, cost: f64) -> AttackItem {
        AttackItem { gain, cost }
    }

    #[test]
    fn example() {
        let items = [item(10.0, 5.0), item(6.0, 3.0), item(5.0, 3.0)];
        let s = knapsack_select(&items, 6.0, 1.0).unwrap();
        assert_eq!(s.selected, vec![1, 2]);
        assert_eq!(s.total_gain, 11.0);
    }

    #[test]
    fn edges() {
        let items = [item(10.0, 5.0)];
        assert!(knapsack_select(&items, 0.0, 1.0)
            .unwrap()
            .selected
            .is_empty());
        assert_eq!(knapsack_select(&items, 5.0, 1.0).unwrap().selected, vec![0]);
        assert!(knapsack_select(&[item(-1.0, 1.0)], 5.0, 1.0)
            .unwrap()
            .selected
            .is_empty());
        assert!(knapsack_select(&[item(0.0, 0.0)], 5.0, 1.0)
            .unwrap()
            .selected
            .is_empty());
        assert!(knapsack_select(&items, -1.0, 1.0).is_err());
    }

    #[test]
    fn fractional_costs_stay_feasible() {
        let items = [item(3.0, 0.35), item(2.0, 0.35), item(1.0, 0.3)];
        let s = knapsack_select(&items, 0.7, 0.05).unwrap();
        assert!(s.total_cost <= 0.7 + 1e-12);
        assert_eq!(s.total_gain, 5.0);
    }
}
