use super::DseError;

/// `a` dominates `b` when it is no worse in both objectives and better in
/// at least one. Both objectives are minimized.
pub fn dominates(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && a != b
}

/// Indices of the non-dominated points, ordered by the first objective.
/// Of several identical points only the first is kept.
pub fn pareto_indices(points: &[(u64, u64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (points[i], i));
    let mut front = Vec::new();
    let mut best = u64::MAX;
    for i in order {
        if points[i].1 < best {
            best = points[i].1;
            front.push(i);
        }
    }
    front
}

/// Area dominated by `front` inside the box bounded by `reference`.
pub fn hypervolume_2d(front: &[(f64, f64)], reference: (f64, f64)) -> Result<f64, DseError> {
    if let Some(&(x, y)) = front.iter().find(|&&(x, y)| !(x <= reference.0 && y <= reference.1)) {
        return Err(DseError::OutsideReference { x, y });
    }
    let mut pts = front.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let mut area = 0.0;
    let mut floor = reference.1;
    for (x, y) in pts {
        if y < floor {
            area += (reference.0 - x) * (floor - y);
            floor = y;
        }
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn front_of(points: &[(u64, u64)]) -> Vec<(u64, u64)> {
        pareto_indices(points).into_iter().map(|i| points[i]).collect()
    }

    #[test]
    fn small_fronts() {
        assert_eq!(front_of(&[(1, 1), (2, 2)]), [(1, 1)]);
        assert_eq!(front_of(&[(1, 3), (2, 2), (3, 1)]), [(1, 3), (2, 2), (3, 1)]);
        assert_eq!(front_of(&[(5, 1), (3, 3), (1, 5), (4, 4), (2, 6)]), [(1, 5), (3, 3), (5, 1)]);
    }

    #[test]
    fn duplicates_keep_the_first() {
        assert_eq!(pareto_indices(&[(2, 2), (1, 3), (2, 2)]), [1, 0]);
    }

    #[test]
    fn hypervolume_fixtures() {
        assert_eq!(hypervolume_2d(&[(1.0, 1.0)], (3.0, 3.0)).unwrap(), 4.0);
        assert_eq!(hypervolume_2d(&[(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0)).unwrap(), 3.0);
        assert_eq!(hypervolume_2d(&[], (3.0, 3.0)).unwrap(), 0.0);
        assert!(hypervolume_2d(&[(4.0, 1.0)], (3.0, 3.0)).is_err());
    }

    proptest! {
        #[test]
        fn front_is_exactly_the_undominated_set(points in proptest::collection::vec((0u64..20, 0u64..20), 0..60)) {
            let front = pareto_indices(&points);
            for &i in &front {
                prop_assert!(points.iter().all(|&q| !dominates(q, points[i])));
            }
            for (i, &p) in points.iter().enumerate() {
                let undominated = points.iter().all(|&q| !dominates(q, p));
                let first = points.iter().position(|&q| q == p) == Some(i);
                prop_assert_eq!(front.contains(&i), undominated && first);
            }
        }

        #[test]
        fn adding_a_point_never_shrinks_hypervolume(
            points in proptest::collection::vec((0u64..20, 0u64..20), 0..30),
            extra in (0u64..20, 0u64..20),
        ) {
            let hv = |pts: &[(u64, u64)]| {
                let f: Vec<(f64, f64)> = pareto_indices(pts).into_iter().map(|i| (pts[i].0 as f64, pts[i].1 as f64)).collect();
                hypervolume_2d(&f, (20.0, 20.0)).unwrap()
            };
            let mut more = points.clone();
            more.push(extra);
            prop_assert!(hv(&more) >= hv(&points));
        }
    }
}
