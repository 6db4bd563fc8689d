//! Marching-squares level sets on a rectangular grid, chained into
//! polylines.

use std::collections::HashMap;

/// Crossing location: the grid edge leaving node `(i, j)` along `θ`
/// (`horizontal`) or along `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Edge {
    i: usize,
    j: usize,
    horizontal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Samples `values[i][j]` of a field at `(xs[i], ys[j])`.
pub struct Grid<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub values: &'a [Vec<f64>],
}

impl Grid<'_> {
    fn point(&self, e: Edge, level: f64) -> (f64, f64) {
        let (i2, j2) = if e.horizontal { (e.i + 1, e.j) } else { (e.i, e.j + 1) };
        let a = self.values[e.i][e.j];
        let b = self.values[i2][j2];
        let t = if b == a { 0.5 } else { (level - a) / (b - a) };
        let x = self.xs[e.i] + t * (self.xs[i2] - self.xs[e.i]);
        let y = self.ys[e.j] + t * (self.ys[j2] - self.ys[e.j]);
        (x, y)
    }

    fn segments(&self, level: f64) -> Vec<(Edge, Edge)> {
        let mut segs = Vec::new();
        let nx = self.xs.len();
        let ny = self.ys.len();
        for i in 0..nx.saturating_sub(1) {
            for j in 0..ny.saturating_sub(1) {
                let v = [
                    self.values[i][j],
                    self.values[i + 1][j],
                    self.values[i + 1][j + 1],
                    self.values[i][j + 1],
                ];
                if v.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let above = v.map(|x| x >= level);
                let case = above.iter().enumerate().fold(0u8, |c, (k, &a)| c | ((a as u8) << k));
                // edges: bottom, right, top, left
                let bottom = Edge { i, j, horizontal: true };
                let right = Edge {
                    i: i + 1,
                    j,
                    horizontal: false,
                };
                let top = Edge {
                    i,
                    j: j + 1,
                    horizontal: true,
                };
                let left = Edge {
                    i,
                    j,
                    horizontal: false,
                };
                let center_above = v.iter().sum::<f64>() / 4.0 >= level;
                match case {
                    0 | 15 => {}
                    1 | 14 => segs.push((left, bottom)),
                    2 | 13 => segs.push((bottom, right)),
                    3 | 12 => segs.push((left, right)),
                    4 | 11 => segs.push((right, top)),
                    6 | 9 => segs.push((bottom, top)),
                    7 | 8 => segs.push((left, top)),
                    5 => {
                        if center_above {
                            segs.push((left, top));
                            segs.push((bottom, right));
                        } else {
                            segs.push((left, bottom));
                            segs.push((right, top));
                        }
                    }
                    10 => {
                        if center_above {
                            segs.push((left, bottom));
                            segs.push((right, top));
                        } else {
                            segs.push((left, top));
                            segs.push((bottom, right));
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
        segs
    }

    pub fn level_set(&self, level: f64) -> Vec<Polyline> {
        let segs = self.segments(level);
        let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
        for (k, (a, b)) in segs.iter().enumerate() {
            by_edge.entry(*a).or_default().push(k);
            by_edge.entry(*b).or_default().push(k);
        }
        let mut used = vec![false; segs.len()];
        let mut lines = Vec::new();
        let next_from =
            |edge: Edge, used: &[bool]| -> Option<usize> { by_edge.get(&edge)?.iter().copied().find(|&k| !used[k]) };
        for start in 0..segs.len() {
            if used[start] {
                continue;
            }
            used[start] = true;
            let (a, b) = segs[start];
            let mut forward = vec![a, b];
            let mut edge = b;
            while let Some(k) = next_from(edge, &used) {
                used[k] = true;
                let (p, q) = segs[k];
                edge = if p == edge { q } else { p };
                forward.push(edge);
            }
            let closed = forward.len() > 2 && forward.first() == forward.last();
            if !closed {
                let mut backward = Vec::new();
                let mut edge = a;
                while let Some(k) = next_from(edge, &used) {
                    used[k] = true;
                    let (p, q) = segs[k];
                    edge = if p == edge { q } else { p };
                    backward.push(edge);
                }
                backward.reverse();
                backward.extend(forward);
                forward = backward;
            }
            lines.push(Polyline {
                points: forward.iter().map(|e| self.point(*e, level)).collect(),
                closed,
            });
        }
        lines
    }
}
